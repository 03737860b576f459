#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "mwaser/dsp.hpp"
#include "mwaser/features.hpp"
#include "mwaser/util.hpp"

namespace mwaser {

constexpr uint32_t kCacheFormatVersion = 1;

// JSON sidecar stored next to each .mwaf file. Carries everything the binary
// header does not, and is used to decide whether a cache entry matches the
// requested extraction parameters.
struct CacheSidecar {
    std::string utterance_id;
    std::string source_path;
    int sample_rate = 0;
    uint32_t true_frame_count = 0;
    double window_ms = 0.0;
    double overlap = 0.0;
    std::string window_shape;
    uint32_t version = kCacheFormatVersion;
};

// One file per (utterance, window): "<id>__<hash>_w<ms>.mwaf". The hash of
// the raw id keeps sanitized names collision-free.
inline std::filesystem::path cache_file_path(const std::filesystem::path& cache_dir,
                                             const std::string& utterance_id, double window_ms) {
    char hash[17];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(util::fnv1a64(utterance_id)));
    std::string name = util::sanitize_filename(utterance_id) + "__" + std::string(hash, 8) + "_w" +
                       util::format_ms(window_ms) + ".mwaf";
    return cache_dir / name;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& cache_path) {
    std::filesystem::path p = cache_path;
    p += ".json";
    return p;
}

// Binary layout, little-endian: magic "MWAF", version u32, window_ms f32,
// overlap f32, n_frames u32, n_features u32, then n_frames x n_features f32
// values row-major.
inline void write_feature_cache(const std::filesystem::path& path, const FeatureMatrix& matrix,
                                const CacheSidecar& sidecar) {
    std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write feature cache: " + path.string());
        out.write("MWAF", 4);
        util::write_le<uint32_t>(out, kCacheFormatVersion);
        util::write_le<float>(out, static_cast<float>(matrix.window_ms));
        util::write_le<float>(out, static_cast<float>(sidecar.overlap));
        util::write_le<uint32_t>(out, static_cast<uint32_t>(matrix.rows));
        util::write_le<uint32_t>(out, static_cast<uint32_t>(matrix.cols));
        for (float v : matrix.values) util::write_le<float>(out, v);
        if (!out) throw DataError("failed writing feature cache: " + path.string());
    }
    std::filesystem::rename(tmp, path);

    nlohmann::json j{{"utterance_id", sidecar.utterance_id},
                     {"source_path", sidecar.source_path},
                     {"sample_rate", sidecar.sample_rate},
                     {"true_frame_count", sidecar.true_frame_count},
                     {"window_ms", sidecar.window_ms},
                     {"overlap", sidecar.overlap},
                     {"window_shape", sidecar.window_shape},
                     {"version", sidecar.version}};
    util::write_text_file(sidecar_path(path), j.dump(2) + "\n");
}

inline std::pair<FeatureMatrix, CacheSidecar> read_feature_cache(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open feature cache: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "MWAF", 4) != 0)
        throw DataError("bad feature cache magic: " + path.string());
    const auto version = util::read_le<uint32_t>(in);
    if (version != kCacheFormatVersion)
        throw DataError("unsupported feature cache version " + std::to_string(version) + ": " +
                        path.string());
    FeatureMatrix m;
    m.window_ms = util::read_le<float>(in);
    const float overlap = util::read_le<float>(in);
    m.rows = util::read_le<uint32_t>(in);
    m.cols = util::read_le<uint32_t>(in);
    if (!in || m.rows == 0 || m.cols == 0 || m.rows > (1u << 24) || m.cols > (1u << 16))
        throw DataError("corrupt feature cache header: " + path.string());
    m.values.resize(m.rows * m.cols);
    for (float& v : m.values) v = util::read_le<float>(in);
    if (!in) throw DataError("truncated feature cache: " + path.string());

    CacheSidecar side;
    side.window_ms = m.window_ms;
    side.overlap = overlap;
    const std::filesystem::path sp = sidecar_path(path);
    if (std::filesystem::exists(sp)) {
        const nlohmann::json j = nlohmann::json::parse(util::read_text_file(sp));
        side.utterance_id = j.value("utterance_id", "");
        side.source_path = j.value("source_path", "");
        side.sample_rate = j.value("sample_rate", 0);
        side.true_frame_count = j.value("true_frame_count", 0u);
        side.window_ms = j.value("window_ms", side.window_ms);
        side.overlap = j.value("overlap", side.overlap);
        side.window_shape = j.value("window_shape", "");
        side.version = j.value("version", 0u);
    }
    m.utterance_id = side.utterance_id;
    m.true_frame_count = side.true_frame_count;
    return {std::move(m), std::move(side)};
}

// Loads a cache entry if it exists and matches the requested extraction
// parameters; a mismatch (different overlap, shape, frame budget or version)
// counts as a miss so stale entries are recomputed, not reused.
inline std::optional<FeatureMatrix> load_cached_features(const std::filesystem::path& path,
                                                         const WindowSpec& spec,
                                                         size_t max_frames) {
    if (!std::filesystem::exists(path) || !std::filesystem::exists(sidecar_path(path)))
        return std::nullopt;
    try {
        auto [matrix, side] = read_feature_cache(path);
        if (side.version != kCacheFormatVersion) return std::nullopt;
        if (matrix.rows != max_frames || matrix.cols != kFeatureCount) return std::nullopt;
        if (std::fabs(side.window_ms - spec.width_ms) > 1e-6) return std::nullopt;
        if (std::fabs(side.overlap - spec.overlap) > 1e-6) return std::nullopt;
        if (side.window_shape != to_string(spec.shape)) return std::nullopt;
        return matrix;
    } catch (const DataError&) {
        return std::nullopt;
    }
}

}  // namespace mwaser
