#pragma once

#include <atomic>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "mwaser/audio.hpp"
#include "mwaser/cache.hpp"
#include "mwaser/features.hpp"
#include "mwaser/manifest.hpp"

namespace mwaser {

struct LabeledMatrix {
    FeatureMatrix features;
    int label = 0;
};

struct CacheStats {
    size_t hits = 0;
    size_t misses = 0;
};

struct SplitAssignment {
    std::unordered_set<std::string> train_ids;
    std::unordered_set<std::string> test_ids;
};

// The multi-window training pool plus per-window test sets. Each training
// utterance contributes one feature matrix per window, so the pool holds
// |windows| x |train utterances| examples; test utterances are kept grouped
// by window because evaluation selects the best window afterwards.
struct AugmentedDataset {
    std::vector<LabeledMatrix> train;
    std::map<double, std::vector<LabeledMatrix>> test_per_window;
    std::vector<WindowSpec> windows;
    std::vector<std::string> class_names;
    CacheStats cache;
    std::vector<std::string> failures;
    size_t empty_feature_warnings = 0;  // utterances shorter than one window
};

struct AugmentOptions {
    std::string cache_dir;        // empty disables the on-disk cache
    bool skip_bad_files = false;  // report and continue instead of aborting
    unsigned threads = 1;
    FeatureOptions feature_options;
};

namespace detail {

struct ExtractedCell {
    std::optional<FeatureMatrix> matrix;
    std::string error;
    bool from_cache = false;
};

}  // namespace detail

// Extracts (or loads from cache) the feature matrix of every
// (utterance, window) pair and assembles the augmented dataset. Audio
// failures abort with a DataError listing the files unless skip_bad_files is
// set, in which case failed utterances are dropped from every window.
inline AugmentedDataset build_augmented_dataset(const Manifest& manifest,
                                                const std::vector<WindowSpec>& windows,
                                                const SplitAssignment& split,
                                                const AugmentOptions& opts = {}) {
    if (windows.empty()) throw std::invalid_argument("build_augmented_dataset: no windows");
    {
        std::set<double> widths;
        for (const auto& w : windows) {
            w.validate();
            if (!widths.insert(w.width_ms).second)
                throw std::invalid_argument("build_augmented_dataset: duplicate window width " +
                                            util::format_ms(w.width_ms));
        }
    }

    AugmentedDataset out;
    out.windows = windows;
    out.class_names = manifest.class_names;

    const size_t n_rows = manifest.rows.size();
    const size_t n_windows = windows.size();
    std::vector<detail::ExtractedCell> cells(n_rows * n_windows);

    // Audio is read once per utterance and shared across that utterance's
    // windows; pairs are independent, so the loop is parallel over rows.
    util::parallel_for(n_rows, opts.threads, [&](size_t r) {
        const ManifestRow& row = manifest.rows[r];
        AudioBuffer audio;
        bool audio_ok = false;
        std::string audio_error;

        auto ensure_audio = [&]() -> bool {
            if (audio_ok) return true;
            if (!audio_error.empty()) return false;
            try {
                audio = preprocess(read_wav(row.audio_path));
                audio_ok = true;
                return true;
            } catch (const std::exception& e) {
                audio_error = e.what();
                return false;
            }
        };

        for (size_t w = 0; w < n_windows; ++w) {
            detail::ExtractedCell& cell = cells[r * n_windows + w];
            const WindowSpec& spec = windows[w];
            if (!opts.cache_dir.empty()) {
                const auto path = cache_file_path(opts.cache_dir, row.utterance_id, spec.width_ms);
                if (auto cached =
                        load_cached_features(path, spec, opts.feature_options.max_frames)) {
                    cached->utterance_id = row.utterance_id;
                    cell.matrix = std::move(*cached);
                    cell.from_cache = true;
                    continue;
                }
            }
            if (!ensure_audio()) {
                cell.error = audio_error;
                continue;
            }
            try {
                FeatureMatrix m =
                    extract_feature_matrix(audio, spec, row.utterance_id, opts.feature_options);
                if (!opts.cache_dir.empty()) {
                    CacheSidecar side;
                    side.utterance_id = row.utterance_id;
                    side.source_path = row.audio_path;
                    side.sample_rate = audio.sample_rate;
                    side.true_frame_count = m.true_frame_count;
                    side.window_ms = spec.width_ms;
                    side.overlap = spec.overlap;
                    side.window_shape = to_string(spec.shape);
                    write_feature_cache(
                        cache_file_path(opts.cache_dir, row.utterance_id, spec.width_ms), m, side);
                }
                cell.matrix = std::move(m);
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
        }
    });

    std::set<std::string> failed_ids;
    for (size_t r = 0; r < n_rows; ++r) {
        for (size_t w = 0; w < n_windows; ++w) {
            const auto& cell = cells[r * n_windows + w];
            if (!cell.error.empty()) {
                out.failures.push_back(manifest.rows[r].audio_path + ": " + cell.error);
                failed_ids.insert(manifest.rows[r].utterance_id);
            }
        }
    }
    if (!out.failures.empty() && !opts.skip_bad_files) {
        std::string message =
            "failed to extract features from " + std::to_string(failed_ids.size()) + " file(s):";
        for (const auto& f : out.failures) message += "\n  " + f;
        throw DataError(message);
    }

    for (size_t r = 0; r < n_rows; ++r) {
        const ManifestRow& row = manifest.rows[r];
        if (failed_ids.count(row.utterance_id)) continue;
        const int label = [&] {
            for (size_t i = 0; i < out.class_names.size(); ++i)
                if (out.class_names[i] == row.label) return int(i);
            throw DataError("label not in class set: " + row.label);
        }();
        const bool in_train = split.train_ids.count(row.utterance_id) > 0;
        const bool in_test = split.test_ids.count(row.utterance_id) > 0;
        if (in_train && in_test)
            throw DataError("utterance assigned to both train and test: " + row.utterance_id);
        if (!in_train && !in_test) continue;

        for (size_t w = 0; w < n_windows; ++w) {
            auto& cell = cells[r * n_windows + w];
            if (cell.from_cache)
                ++out.cache.hits;
            else
                ++out.cache.misses;
            if (cell.matrix->true_frame_count == 0) ++out.empty_feature_warnings;
            LabeledMatrix item{std::move(*cell.matrix), label};
            if (in_train)
                out.train.push_back(std::move(item));
            else
                out.test_per_window[windows[w].width_ms].push_back(std::move(item));
        }
    }
    // windows with no test utterances still appear in the map
    for (const auto& w : windows) out.test_per_window.try_emplace(w.width_ms);
    return out;
}

// Index of every (utterance, window) pair: cache path, label, and split
// side. Written next to the other run artifacts.
inline nlohmann::json dataset_index_json(const Manifest& manifest,
                                         const std::vector<WindowSpec>& windows,
                                         const SplitAssignment& split,
                                         const std::string& cache_dir) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& row : manifest.rows) {
        const bool in_train = split.train_ids.count(row.utterance_id) > 0;
        const bool in_test = split.test_ids.count(row.utterance_id) > 0;
        for (const auto& w : windows) {
            nlohmann::json e{
                {"utterance_id", row.utterance_id},
                {"window_ms", w.width_ms},
                {"label", row.label},
                {"split", in_train ? "train" : (in_test ? "test" : "unused")},
                {"source_path", row.audio_path},
            };
            if (!cache_dir.empty())
                e["cache_path"] = cache_file_path(cache_dir, row.utterance_id, w.width_ms).string();
            entries.push_back(std::move(e));
        }
    }
    return entries;
}

}  // namespace mwaser
