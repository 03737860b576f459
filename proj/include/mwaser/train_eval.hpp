#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mwaser/augment.hpp"
#include "mwaser/cnn_model.hpp"
#include "mwaser/metrics.hpp"

namespace mwaser {

struct TrainConfig {
    double lr = 0.0004;
    size_t epochs = 1000;
    size_t batch_size = 32;
    double train_fraction = 0.8;
    uint64_t seed = 42;
    std::vector<WindowSpec> windows;
    std::optional<size_t> early_stop_patience;    // on training loss; off by default
    std::optional<double> stop_at_accuracy;       // stop once train accuracy reaches this
    unsigned threads = 1;

    void validate() const {
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw ConfigError("train_fraction must lie in (0, 1)");
        if (batch_size < 2) throw ConfigError("batch_size must be >= 2 (batchnorm requirement)");
    }
};

struct EpochStats {
    double loss = 0.0;
    double accuracy = 0.0;
};

// Per-class shuffled 80/20-style split with round-half-up on the train side.
// Deterministic in (manifest id set, seed); ids are sorted before shuffling
// so row order in the CSV does not matter.
inline SplitAssignment stratified_split(const Manifest& manifest, double train_fraction,
                                        uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("train_fraction must lie in (0, 1)");
    std::map<std::string, std::vector<std::string>> by_class;
    for (const auto& row : manifest.rows) by_class[row.label].push_back(row.utterance_id);

    SplitAssignment split;
    std::mt19937_64 rng(util::derive_seed(seed, 0x57a717ULL));
    for (auto& [label, ids] : by_class) {
        if (ids.size() < 2)
            throw DataError("class '" + label + "' has fewer than 2 utterances; cannot split");
        std::sort(ids.begin(), ids.end());
        util::shuffle(ids, rng);
        const size_t train_n = util::round_half_up(train_fraction * double(ids.size()));
        for (size_t i = 0; i < ids.size(); ++i) {
            if (i < train_n)
                split.train_ids.insert(ids[i]);
            else
                split.test_ids.insert(ids[i]);
        }
    }
    return split;
}

// Speaker-grouped alternative: whole speakers are assigned to the train side
// until the utterance budget is reached. Requires the speaker column.
inline SplitAssignment speaker_split(const Manifest& manifest, double train_fraction,
                                     uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("train_fraction must lie in (0, 1)");
    std::map<std::string, std::vector<std::string>> by_speaker;
    for (const auto& row : manifest.rows) {
        if (row.speaker.empty())
            throw DataError("speaker split requested but utterance '" + row.utterance_id +
                            "' has no speaker");
        by_speaker[row.speaker].push_back(row.utterance_id);
    }
    if (by_speaker.size() < 2) throw DataError("speaker split needs at least 2 speakers");

    std::vector<std::string> speakers;
    for (auto& [speaker, ids] : by_speaker) speakers.push_back(speaker);
    std::mt19937_64 rng(util::derive_seed(seed, 0x5bea4e7ULL));
    util::shuffle(speakers, rng);

    const size_t target = util::round_half_up(train_fraction * double(manifest.rows.size()));
    SplitAssignment split;
    size_t assigned = 0;
    for (const auto& speaker : speakers) {
        auto& ids = by_speaker[speaker];
        const bool to_train = assigned < target;
        for (const auto& id : ids)
            (to_train ? split.train_ids : split.test_ids).insert(id);
        if (to_train) assigned += ids.size();
    }
    if (split.test_ids.empty()) {
        // move the last-assigned speaker to test so both sides are non-empty
        const auto& last = speakers.back();
        for (const auto& id : by_speaker[last]) {
            split.train_ids.erase(id);
            split.test_ids.insert(id);
        }
    }
    return split;
}

namespace detail {

template <typename T>
nn::Tensor<T> batch_tensor(const std::vector<LabeledMatrix>& items,
                           const std::vector<size_t>& indices, size_t first, size_t count) {
    const FeatureMatrix& proto = items[indices[first]].features;
    nn::Tensor<T> x({count, proto.rows, proto.cols, 1});
    for (size_t b = 0; b < count; ++b) {
        const FeatureMatrix& m = items[indices[first + b]].features;
        for (size_t i = 0; i < m.values.size(); ++i)
            x[b * m.values.size() + i] = T(m.values[i]);
    }
    return x;
}

}  // namespace detail

// Shuffle-train loop: every epoch reshuffles the pooled augmented training
// set with an epoch-seeded generator and steps through minibatches; a final
// partial batch is kept when it still has >= 2 examples (batchnorm needs
// that), otherwise dropped. History records mean train loss and accuracy.
template <typename T>
std::vector<EpochStats> train(nn::CnnModel<T>& model, const AugmentedDataset& dataset,
                              const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.train.empty()) throw DataError("training set is empty");
    if (dataset.class_names.size() != model.classes())
        throw DataError("dataset has " + std::to_string(dataset.class_names.size()) +
                        " classes but the model outputs " + std::to_string(model.classes()));
    for (const auto& item : dataset.train)
        if (item.label < 0 || size_t(item.label) >= model.classes())
            throw DataError("training label out of range");

    model.set_threads(cfg.threads);
    nn::RmspropConfig opt;
    opt.lr = cfg.lr;

    std::vector<EpochStats> history;
    const size_t n = dataset.train.size();
    std::vector<size_t> order(n);
    double best_loss = std::numeric_limits<double>::infinity();
    size_t epochs_since_best = 0;

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t i = 0; i < n; ++i) order[i] = i;
        std::mt19937_64 rng(util::derive_seed(cfg.seed, 0x5481eULL, epoch));
        util::shuffle(order, rng);

        double loss_sum = 0.0;
        size_t correct = 0, seen = 0;
        for (size_t start = 0; start < n; start += cfg.batch_size) {
            const size_t count = std::min(cfg.batch_size, n - start);
            if (count < 2) break;  // a trailing single example cannot batchnorm
            nn::Tensor<T> x = detail::batch_tensor<T>(dataset.train, order, start, count);
            std::vector<int> labels(count);
            for (size_t b = 0; b < count; ++b) labels[b] = dataset.train[order[start + b]].label;
            auto [loss, batch_correct] = model.train_batch(x, labels, opt);
            loss_sum += loss * double(count);
            correct += batch_correct;
            seen += count;
        }
        if (seen == 0) throw DataError("batch size leaves no trainable batches");

        EpochStats stats;
        stats.loss = loss_sum / double(seen);
        stats.accuracy = double(correct) / double(seen);
        history.push_back(stats);

        if (cfg.stop_at_accuracy && stats.accuracy >= *cfg.stop_at_accuracy) break;
        if (cfg.early_stop_patience) {
            if (stats.loss < best_loss) {
                best_loss = stats.loss;
                epochs_since_best = 0;
            } else if (++epochs_since_best >= *cfg.early_stop_patience) {
                break;
            }
        }
    }
    return history;
}

// Arg-max classification of one window's test set.
template <typename T>
WindowEval evaluate(nn::CnnModel<T>& model, const std::vector<LabeledMatrix>& test) {
    if (test.empty()) throw DataError("evaluate: empty test set");
    WindowEval eval;
    eval.confusion = ConfusionMatrix(model.classes());

    std::vector<size_t> indices(test.size());
    for (size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    constexpr size_t kChunk = 32;
    for (size_t start = 0; start < test.size(); start += kChunk) {
        const size_t count = std::min(kChunk, test.size() - start);
        nn::Tensor<T> x = detail::batch_tensor<T>(test, indices, start, count);
        const std::vector<int> predicted = model.predict(x);
        for (size_t b = 0; b < count; ++b) {
            const int truth = test[start + b].label;
            if (truth < 0 || size_t(truth) >= model.classes())
                throw DataError("evaluate: label out of range");
            eval.confusion.at(size_t(truth), size_t(predicted[b]))++;
        }
    }
    eval.metrics = compute_metrics(eval.confusion);
    return eval;
}

// Evaluates each window separately and reports the best window's metrics as
// the headline (arg-max UA, ties to the smallest window). All per-window
// results and the mean UA are retained.
template <typename T>
EvalReport multiwindow_evaluate(nn::CnnModel<T>& model,
                                const std::map<double, std::vector<LabeledMatrix>>& test_per_window,
                                const std::vector<std::string>& class_names) {
    if (test_per_window.empty()) throw DataError("multiwindow_evaluate: no windows");
    EvalReport report;
    report.class_names = class_names;
    double best_ua = -1.0;
    double ua_sum = 0.0;
    for (const auto& [window_ms, test] : test_per_window) {
        WindowEval eval = evaluate(model, test);
        ua_sum += eval.metrics.ua;
        if (eval.metrics.ua > best_ua) {  // map iterates ascending: ties keep the smaller window
            best_ua = eval.metrics.ua;
            report.best_window_ms = window_ms;
            report.headline = eval.metrics;
        }
        report.per_window.emplace(window_ms, std::move(eval));
    }
    report.mean_window_ua = ua_sum / double(test_per_window.size());
    return report;
}

inline nlohmann::json confusion_to_json(const ConfusionMatrix& confusion) {
    nlohmann::json rows = nlohmann::json::array();
    for (size_t t = 0; t < confusion.n_classes; ++t) {
        nlohmann::json row = nlohmann::json::array();
        for (size_t p = 0; p < confusion.n_classes; ++p) row.push_back(confusion.at(t, p));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json per_window;
    for (const auto& [window_ms, eval] : report.per_window) {
        per_window[util::format_ms(window_ms)] = {
            {"confusion", confusion_to_json(eval.confusion)},
            {"ua", eval.metrics.ua},
            {"wap", eval.metrics.wap},
            {"waf1", eval.metrics.waf1},
        };
    }
    return nlohmann::json{
        {"class_names", report.class_names},
        {"per_window", std::move(per_window)},
        {"best_window_ms", report.best_window_ms},
        {"headline",
         {{"ua", report.headline.ua}, {"wap", report.headline.wap}, {"waf1", report.headline.waf1}}},
        {"mean_window_ua", report.mean_window_ua},
    };
}

// Metrics table: one row per window plus the headline row.
inline std::string report_to_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "window_ms,ua,wap,waf1\n";
    out.precision(6);
    out << std::fixed;
    for (const auto& [window_ms, eval] : report.per_window)
        out << util::format_ms(window_ms) << "," << eval.metrics.ua << "," << eval.metrics.wap
            << "," << eval.metrics.waf1 << "\n";
    out << "best(" << util::format_ms(report.best_window_ms) << ")," << report.headline.ua << ","
        << report.headline.wap << "," << report.headline.waf1 << "\n";
    return out.str();
}

// Heat-map friendly grid: header row and first column carry class names.
inline std::string confusion_to_csv(const ConfusionMatrix& confusion,
                                    const std::vector<std::string>& class_names) {
    std::ostringstream out;
    out << "true\\pred";
    for (const auto& name : class_names) out << "," << name;
    out << "\n";
    for (size_t t = 0; t < confusion.n_classes; ++t) {
        out << class_names[t];
        for (size_t p = 0; p < confusion.n_classes; ++p) out << "," << confusion.at(t, p);
        out << "\n";
    }
    return out.str();
}

// Optional per-column standardization fitted on the training pool.
struct FeatureStandardizer {
    std::vector<double> mean;
    std::vector<double> stddev;

    void fit(const std::vector<LabeledMatrix>& train) {
        if (train.empty()) throw DataError("standardizer: empty training set");
        const size_t cols = train[0].features.cols;
        mean.assign(cols, 0.0);
        stddev.assign(cols, 0.0);
        size_t rows_total = 0;
        for (const auto& item : train) {
            const FeatureMatrix& m = item.features;
            for (size_t r = 0; r < m.rows; ++r)
                for (size_t c = 0; c < cols; ++c) mean[c] += double(m.at(r, c));
            rows_total += m.rows;
        }
        for (double& v : mean) v /= double(rows_total);
        for (const auto& item : train) {
            const FeatureMatrix& m = item.features;
            for (size_t r = 0; r < m.rows; ++r)
                for (size_t c = 0; c < cols; ++c) {
                    const double d = double(m.at(r, c)) - mean[c];
                    stddev[c] += d * d;
                }
        }
        for (double& v : stddev) v = std::sqrt(v / double(rows_total));
    }

    void apply(FeatureMatrix& m) const {
        for (size_t r = 0; r < m.rows; ++r)
            for (size_t c = 0; c < m.cols; ++c) {
                const double s = stddev[c] > 1e-12 ? stddev[c] : 1.0;
                m.at(r, c) = float((double(m.at(r, c)) - mean[c]) / s);
            }
    }

    void apply(AugmentedDataset& dataset) const {
        for (auto& item : dataset.train) apply(item.features);
        for (auto& [window_ms, test] : dataset.test_per_window)
            for (auto& item : test) apply(item.features);
    }
};

}  // namespace mwaser
