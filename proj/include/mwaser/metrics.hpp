#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace mwaser {

// Square confusion matrix; rows index the true class, columns the predicted
// class.
struct ConfusionMatrix {
    size_t n_classes = 0;
    std::vector<long long> counts;  // row-major n x n

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(size_t n) : n_classes(n), counts(n * n, 0) {}

    long long& at(size_t true_class, size_t predicted) {
        return counts[true_class * n_classes + predicted];
    }
    long long at(size_t true_class, size_t predicted) const {
        return counts[true_class * n_classes + predicted];
    }

    long long row_sum(size_t c) const {
        long long s = 0;
        for (size_t p = 0; p < n_classes; ++p) s += at(c, p);
        return s;
    }
    long long col_sum(size_t c) const {
        long long s = 0;
        for (size_t t = 0; t < n_classes; ++t) s += at(t, c);
        return s;
    }
    long long total() const {
        long long s = 0;
        for (long long v : counts) s += v;
        return s;
    }
};

struct Metrics {
    double ua = 0.0;    // unweighted accuracy: mean per-class recall
    double wap = 0.0;   // support-weighted average precision
    double waf1 = 0.0;  // support-weighted average F1
};

// UA averages recall over classes with nonzero support; precision and F1 of
// a never-predicted class are defined as 0.
inline Metrics compute_metrics(const ConfusionMatrix& confusion) {
    const size_t n = confusion.n_classes;
    if (n == 0) throw std::invalid_argument("compute_metrics: empty confusion matrix");

    Metrics out;
    double recall_sum = 0.0;
    size_t supported = 0;
    double wap_num = 0.0, waf1_num = 0.0;
    long long total_support = 0;

    for (size_t c = 0; c < n; ++c) {
        const long long support = confusion.row_sum(c);
        const long long predicted = confusion.col_sum(c);
        const long long tp = confusion.at(c, c);
        const double recall = support > 0 ? double(tp) / double(support) : 0.0;
        const double precision = predicted > 0 ? double(tp) / double(predicted) : 0.0;
        const double f1 =
            precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        if (support > 0) {
            recall_sum += recall;
            ++supported;
        }
        wap_num += double(support) * precision;
        waf1_num += double(support) * f1;
        total_support += support;
    }
    out.ua = supported > 0 ? recall_sum / double(supported) : 0.0;
    out.wap = total_support > 0 ? wap_num / double(total_support) : 0.0;
    out.waf1 = total_support > 0 ? waf1_num / double(total_support) : 0.0;
    return out;
}

struct WindowEval {
    ConfusionMatrix confusion;
    Metrics metrics;
};

// Evaluation across windows: every window's confusion and metrics are kept;
// the headline numbers are the best window's (arg-max UA, ties resolved
// toward the smallest window).
struct EvalReport {
    std::vector<std::string> class_names;
    std::map<double, WindowEval> per_window;  // keyed by window width in ms
    double best_window_ms = 0.0;
    Metrics headline;
    double mean_window_ua = 0.0;
};

}  // namespace mwaser
