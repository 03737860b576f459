#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mwaser/util.hpp"

namespace mwaser {

// Label protocols from the dataset descriptions: the four-class setups (the
// second replaces "happy" with "excited"), the six-class setup shared by the
// acted corpora (with "calm" merged into "neutral" where it occurs), and a
// pass-through for custom corpora.
enum class Protocol { IemocapExp1, IemocapExp2, Savee6, Ravdess6, Custom };

inline std::string to_string(Protocol p) {
    switch (p) {
        case Protocol::IemocapExp1: return "iemocap_exp1";
        case Protocol::IemocapExp2: return "iemocap_exp2";
        case Protocol::Savee6: return "savee6";
        case Protocol::Ravdess6: return "ravdess6";
        case Protocol::Custom: return "custom";
    }
    return "custom";
}

inline Protocol protocol_from_string(const std::string& name) {
    const std::string s = util::to_lower(util::trim(name));
    if (s == "iemocap_exp1") return Protocol::IemocapExp1;
    if (s == "iemocap_exp2") return Protocol::IemocapExp2;
    if (s == "savee6") return Protocol::Savee6;
    if (s == "ravdess6") return Protocol::Ravdess6;
    if (s == "custom") return Protocol::Custom;
    throw ConfigError("unknown protocol: " + name);
}

struct ManifestRow {
    std::string utterance_id;
    std::string audio_path;
    std::string label;      // mapped class label
    std::string raw_label;  // label as found in the CSV
    std::string speaker;
    std::string session;
};

struct Manifest {
    std::vector<ManifestRow> rows;
    std::vector<std::string> class_names;
    Protocol protocol = Protocol::Custom;
    size_t excluded_count = 0;
    std::map<std::string, size_t> excluded_by_label;

    int class_index(const std::string& label) const {
        for (size_t i = 0; i < class_names.size(); ++i)
            if (class_names[i] == label) return int(i);
        return -1;
    }
};

namespace detail {

// Common alternate spellings folded onto canonical labels before protocol
// filtering.
inline std::string canonical_label(const std::string& raw) {
    static const std::map<std::string, std::string> aliases = {
        {"anger", "angry"},     {"ang", "angry"},      {"happiness", "happy"},
        {"hap", "happy"},       {"neu", "neutral"},    {"sadness", "sad"},
        {"fearful", "fear"},    {"fea", "fear"},       {"exc", "excited"},
        {"excitement", "excited"}, {"dis", "disgust"}, {"disgusted", "disgust"},
        {"surprised", "surprise"}, {"sur", "surprise"},
    };
    const std::string s = util::to_lower(util::trim(raw));
    auto it = aliases.find(s);
    return it == aliases.end() ? s : it->second;
}

}  // namespace detail

// Class vocabulary per protocol, in the frozen reporting order. Custom has
// no fixed vocabulary; it is derived from the data.
inline std::vector<std::string> protocol_class_names(Protocol p) {
    switch (p) {
        case Protocol::IemocapExp1: return {"angry", "happy", "neutral", "sad"};
        case Protocol::IemocapExp2: return {"angry", "excited", "neutral", "sad"};
        case Protocol::Savee6:
        case Protocol::Ravdess6:
            return {"angry", "happy", "neutral", "sad", "fear", "disgust"};
        case Protocol::Custom: return {};
    }
    return {};
}

// Maps a raw label onto the protocol's class set; nullopt means the row is
// excluded. For the custom protocol every label maps to itself.
inline std::optional<std::string> map_label(Protocol protocol, const std::string& raw) {
    if (protocol == Protocol::Custom) {
        const std::string s = util::to_lower(util::trim(raw));
        if (s.empty()) return std::nullopt;
        return s;
    }
    std::string label = detail::canonical_label(raw);
    if (protocol == Protocol::Ravdess6 && label == "calm") label = "neutral";
    const auto classes = protocol_class_names(protocol);
    for (const auto& c : classes)
        if (c == label) return label;
    return std::nullopt;
}

namespace detail {

// Minimal RFC 4180 CSV: quoted fields, doubled-quote escapes, CR/LF endings.
inline std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(field);
            field.clear();
        } else if (c == '\n') {
            row.push_back(field);
            field.clear();
            rows.push_back(row);
            row.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    if (any && (!field.empty() || !row.empty())) {
        row.push_back(field);
        rows.push_back(row);
    }
    return rows;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

}  // namespace detail

// Reads a manifest CSV with header utterance_id,audio_path,label and the
// optional speaker and session columns, mapping labels per the protocol.
// Rows whose label falls outside the protocol are excluded and counted.
inline Manifest ingest_manifest(const std::filesystem::path& csv_path, Protocol protocol) {
    std::ifstream in(csv_path);
    if (!in) throw DataError("cannot open manifest: " + csv_path.string());
    auto records = detail::parse_csv(in);
    if (records.empty()) throw DataError("empty manifest: " + csv_path.string());

    std::map<std::string, size_t> columns;
    for (size_t i = 0; i < records[0].size(); ++i) {
        const std::string name = util::to_lower(util::trim(records[0][i]));
        if (name.empty()) continue;
        if (columns.count(name)) throw DataError("duplicate manifest column: " + name);
        columns[name] = i;
    }
    for (const char* required : {"utterance_id", "audio_path", "label"})
        if (!columns.count(required))
            throw DataError(std::string("manifest missing required column: ") + required);
    for (const auto& [name, idx] : columns)
        if (name != "utterance_id" && name != "audio_path" && name != "label" &&
            name != "speaker" && name != "session")
            throw DataError("unknown manifest column: " + name);

    Manifest manifest;
    manifest.protocol = protocol;
    std::set<std::string> seen_ids;
    std::set<std::string> custom_labels;

    auto cell = [&](const std::vector<std::string>& rec, const char* name) -> std::string {
        auto it = columns.find(name);
        if (it == columns.end() || it->second >= rec.size()) return "";
        return util::trim(rec[it->second]);
    };

    for (size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() == 1 && util::trim(rec[0]).empty()) continue;  // blank line
        ManifestRow row;
        row.utterance_id = cell(rec, "utterance_id");
        row.audio_path = cell(rec, "audio_path");
        row.raw_label = cell(rec, "label");
        row.speaker = cell(rec, "speaker");
        row.session = cell(rec, "session");
        if (row.utterance_id.empty())
            throw DataError("manifest row " + std::to_string(r + 1) + ": empty utterance_id");
        if (!seen_ids.insert(row.utterance_id).second)
            throw DataError("duplicate utterance_id in manifest: " + row.utterance_id);

        auto mapped = map_label(protocol, row.raw_label);
        if (!mapped) {
            ++manifest.excluded_count;
            ++manifest.excluded_by_label[detail::canonical_label(row.raw_label)];
            continue;
        }
        row.label = *mapped;
        if (protocol == Protocol::Custom) custom_labels.insert(row.label);
        manifest.rows.push_back(std::move(row));
    }

    if (manifest.rows.empty())
        throw DataError("manifest has no usable rows after label filtering: " +
                        csv_path.string());

    manifest.class_names = protocol == Protocol::Custom
                               ? std::vector<std::string>(custom_labels.begin(), custom_labels.end())
                               : protocol_class_names(protocol);
    return manifest;
}

inline void write_manifest_csv(const std::filesystem::path& path,
                               const std::vector<ManifestRow>& rows) {
    std::ostringstream out;
    out << "utterance_id,audio_path,label,speaker,session\n";
    for (const auto& r : rows) {
        out << detail::csv_escape(r.utterance_id) << "," << detail::csv_escape(r.audio_path) << ","
            << detail::csv_escape(r.raw_label.empty() ? r.label : r.raw_label) << ","
            << detail::csv_escape(r.speaker) << "," << detail::csv_escape(r.session) << "\n";
    }
    util::write_text_file(path, out.str());
}

struct ScanResult {
    std::vector<ManifestRow> rows;
    size_t skipped = 0;
};

// Scans a RAVDESS-style tree: 7 dash-separated two-digit fields per file
// name (modality, vocal channel, emotion, intensity, statement, repetition,
// actor). Only speech files (vocal channel 01) are kept.
inline ScanResult scan_ravdess(const std::filesystem::path& root) {
    if (!std::filesystem::exists(root)) throw DataError("no such directory: " + root.string());
    static const std::map<std::string, std::string> emotion_codes = {
        {"01", "neutral"}, {"02", "calm"},    {"03", "happy"},   {"04", "sad"},
        {"05", "angry"},   {"06", "fear"},    {"07", "disgust"}, {"08", "surprise"},
    };
    ScanResult result;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        if (util::to_lower(entry.path().extension().string()) != ".wav") continue;
        const std::string stem = entry.path().stem().string();
        std::vector<std::string> fields;
        std::stringstream ss(stem);
        std::string part;
        while (std::getline(ss, part, '-')) fields.push_back(part);
        auto emotion = fields.size() == 7 ? emotion_codes.find(fields[2]) : emotion_codes.end();
        if (fields.size() != 7 || fields[1] != "01" || emotion == emotion_codes.end()) {
            ++result.skipped;
            continue;
        }
        ManifestRow row;
        row.utterance_id = stem;
        row.audio_path = entry.path().string();
        row.raw_label = row.label = emotion->second;
        row.speaker = "Actor_" + fields[6];
        result.rows.push_back(std::move(row));
    }
    std::sort(result.rows.begin(), result.rows.end(),
              [](const ManifestRow& a, const ManifestRow& b) {
                  return a.utterance_id < b.utterance_id;
              });
    return result;
}

// Scans a SAVEE-style tree: per-speaker directories (DC, JE, JK, KL) with
// files like a01.wav, sa12.wav, or flat files like DC_a01.wav. The leading
// letters encode the emotion.
inline ScanResult scan_savee(const std::filesystem::path& root) {
    if (!std::filesystem::exists(root)) throw DataError("no such directory: " + root.string());
    static const std::vector<std::pair<std::string, std::string>> codes = {
        {"sa", "sad"},     {"su", "surprise"}, {"a", "angry"},  {"d", "disgust"},
        {"f", "fear"},     {"h", "happy"},     {"n", "neutral"},
    };
    ScanResult result;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        if (util::to_lower(entry.path().extension().string()) != ".wav") continue;
        std::string stem = entry.path().stem().string();
        std::string speaker;
        const size_t underscore = stem.find('_');
        if (underscore != std::string::npos) {
            speaker = stem.substr(0, underscore);
            stem = stem.substr(underscore + 1);
        } else {
            speaker = entry.path().parent_path().filename().string();
        }
        std::string label;
        for (const auto& [code, name] : codes) {
            if (stem.rfind(code, 0) == 0) {
                label = name;
                break;
            }
        }
        if (label.empty()) {
            ++result.skipped;
            continue;
        }
        ManifestRow row;
        row.utterance_id = speaker + "_" + stem;
        row.audio_path = entry.path().string();
        row.raw_label = row.label = label;
        row.speaker = speaker;
        result.rows.push_back(std::move(row));
    }
    std::sort(result.rows.begin(), result.rows.end(),
              [](const ManifestRow& a, const ManifestRow& b) {
                  return a.utterance_id < b.utterance_id;
              });
    return result;
}

}  // namespace mwaser
