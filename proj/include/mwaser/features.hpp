#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mwaser/dsp.hpp"

namespace mwaser {

constexpr size_t kFeatureCount = 34;
constexpr size_t kDefaultMaxFrames = 200;
constexpr double kEps = 1e-10;

// Knobs left open by the short-term feature definitions; the defaults are
// frozen and shared by the cache format and all experiments.
struct FeatureOptions {
    size_t max_frames = kDefaultMaxFrames;
    size_t energy_subframes = 10;
    size_t spectral_bands = 10;
    double rolloff_fraction = 0.90;
    size_t mel_filters = 26;
    size_t mfcc_coefficients = 13;
};

// Canonical column order of the 34-dimensional per-frame vector.
inline const std::array<std::string, kFeatureCount>& feature_names() {
    static const std::array<std::string, kFeatureCount> names = [] {
        std::array<std::string, kFeatureCount> n;
        n[0] = "zcr";
        n[1] = "energy";
        n[2] = "energy_entropy";
        n[3] = "spectral_centroid";
        n[4] = "spectral_spread";
        n[5] = "spectral_entropy";
        n[6] = "spectral_flux";
        n[7] = "spectral_rolloff";
        for (size_t i = 0; i < 13; ++i) n[8 + i] = "mfcc_" + std::to_string(i + 1);
        for (size_t i = 0; i < 12; ++i) n[21 + i] = "chroma_" + std::to_string(i + 1);
        n[33] = "chroma_std";
        return n;
    }();
    return names;
}

// Fraction of adjacent sample pairs whose sign differs; zero counts as
// non-negative.
inline double zero_crossing_rate(const std::vector<double>& frame) {
    if (frame.size() < 2) throw std::invalid_argument("zero_crossing_rate: frame length < 2");
    size_t changes = 0;
    for (size_t i = 1; i < frame.size(); ++i) {
        const bool prev_neg = frame[i - 1] < 0.0;
        const bool cur_neg = frame[i] < 0.0;
        if (prev_neg != cur_neg) ++changes;
    }
    return static_cast<double>(changes) / static_cast<double>(frame.size() - 1);
}

// Mean of squared samples.
inline double short_term_energy(const std::vector<double>& frame) {
    if (frame.empty()) throw std::invalid_argument("short_term_energy: empty frame");
    double sum = 0.0;
    for (double v : frame) sum += v * v;
    return sum / static_cast<double>(frame.size());
}

// Shannon entropy (base 2) of the energy distribution over equal subframes.
// A remainder shorter than one subframe is truncated; an all-zero frame
// returns 0 by convention.
inline double energy_entropy(const std::vector<double>& frame, size_t n_subframes = 10) {
    if (n_subframes == 0) throw std::invalid_argument("energy_entropy: n_subframes must be >= 1");
    if (frame.size() < n_subframes)
        throw std::invalid_argument("energy_entropy: frame shorter than subframe count");
    const size_t chunk = frame.size() / n_subframes;
    std::vector<double> energies(n_subframes, 0.0);
    double total = 0.0;
    for (size_t j = 0; j < n_subframes; ++j) {
        double e = 0.0;
        for (size_t i = j * chunk; i < (j + 1) * chunk; ++i) e += frame[i] * frame[i];
        energies[j] = e;
        total += e;
    }
    if (total == 0.0) return 0.0;
    double entropy = 0.0;
    for (double e : energies) {
        const double p = e / (total + kEps);
        if (p > 0.0) entropy -= p * std::log2(p);
    }
    return entropy;
}

// First two normalized moments of the spectrum. Bin positions are
// (k+1)/num_bins, so both values lie in [0, 1].
inline std::pair<double, double> spectral_centroid_spread(const std::vector<double>& spectrum) {
    if (spectrum.empty()) throw std::invalid_argument("spectral_centroid_spread: empty spectrum");
    const double n = static_cast<double>(spectrum.size());
    double wsum = 0.0, total = 0.0;
    for (size_t k = 0; k < spectrum.size(); ++k) {
        const double f = static_cast<double>(k + 1) / n;
        wsum += f * spectrum[k];
        total += spectrum[k];
    }
    const double centroid = wsum / (total + kEps);
    double var = 0.0;
    for (size_t k = 0; k < spectrum.size(); ++k) {
        const double f = static_cast<double>(k + 1) / n;
        var += (f - centroid) * (f - centroid) * spectrum[k];
    }
    const double spread = std::sqrt(var / (total + kEps));
    return {centroid, spread};
}

// Shannon entropy (base 2) of spectral energy over equal-width bands.
inline double spectral_entropy(const std::vector<double>& spectrum, size_t n_bands = 10) {
    if (n_bands == 0) throw std::invalid_argument("spectral_entropy: n_bands must be >= 1");
    if (spectrum.size() < n_bands)
        throw std::invalid_argument("spectral_entropy: spectrum shorter than band count");
    const size_t width = spectrum.size() / n_bands;
    std::vector<double> energies(n_bands, 0.0);
    double total = 0.0;
    for (size_t b = 0; b < n_bands; ++b) {
        double e = 0.0;
        for (size_t k = b * width; k < (b + 1) * width; ++k) e += spectrum[k] * spectrum[k];
        energies[b] = e;
        total += e;
    }
    if (total == 0.0) return 0.0;
    double entropy = 0.0;
    for (double e : energies) {
        const double p = e / (total + kEps);
        if (p > 0.0) entropy -= p * std::log2(p);
    }
    return entropy;
}

// Squared difference between sum-normalized consecutive spectra.
inline double spectral_flux(const std::vector<double>& spectrum,
                            const std::vector<double>& previous) {
    if (spectrum.size() != previous.size())
        throw std::invalid_argument("spectral_flux: spectrum length mismatch");
    double sum_cur = 0.0, sum_prev = 0.0;
    for (double v : spectrum) sum_cur += v;
    for (double v : previous) sum_prev += v;
    double flux = 0.0;
    for (size_t k = 0; k < spectrum.size(); ++k) {
        const double a = spectrum[k] / (sum_cur + kEps);
        const double b = previous[k] / (sum_prev + kEps);
        flux += (a - b) * (a - b);
    }
    return flux;
}

// Smallest normalized bin index below which `fraction` of the spectral
// energy lies.
inline double spectral_rolloff(const std::vector<double>& spectrum, double fraction = 0.90) {
    if (spectrum.empty()) throw std::invalid_argument("spectral_rolloff: empty spectrum");
    if (!(fraction > 0.0 && fraction < 1.0))
        throw std::invalid_argument("spectral_rolloff: fraction must lie in (0, 1)");
    double total = 0.0;
    for (double v : spectrum) total += v * v;
    if (total == 0.0) return 0.0;
    const double target = fraction * total;
    double cum = 0.0;
    for (size_t m = 0; m < spectrum.size(); ++m) {
        cum += spectrum[m] * spectrum[m];
        if (cum >= target) return static_cast<double>(m) / static_cast<double>(spectrum.size());
    }
    return static_cast<double>(spectrum.size() - 1) / static_cast<double>(spectrum.size());
}

namespace detail {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular mel filterbank over the one-sided spectrum bins. Filter centers
// are uniform on the mel scale between 0 Hz and Nyquist; peaks are 1.
struct MelFilterbank {
    size_t n_filters = 0;
    size_t n_bins = 0;
    std::vector<double> weights;  // [n_filters][n_bins]

    MelFilterbank() = default;

    MelFilterbank(size_t filters, size_t bins, int sample_rate, size_t padded_length)
        : n_filters(filters), n_bins(bins), weights(filters * bins, 0.0) {
        const double mel_max = hz_to_mel(sample_rate / 2.0);
        std::vector<double> edges_hz(filters + 2);
        for (size_t i = 0; i < edges_hz.size(); ++i)
            edges_hz[i] = mel_to_hz(mel_max * static_cast<double>(i) / (filters + 1));
        const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(padded_length);
        for (size_t f = 0; f < filters; ++f) {
            const double lo = edges_hz[f], mid = edges_hz[f + 1], hi = edges_hz[f + 2];
            for (size_t k = 0; k < bins; ++k) {
                const double hz = k * bin_hz;
                double w = 0.0;
                if (hz > lo && hz < mid)
                    w = (hz - lo) / (mid - lo);
                else if (hz >= mid && hz < hi)
                    w = (hi - hz) / (hi - mid);
                weights[f * bins + k] = w;
            }
        }
    }

    double apply(size_t filter, const std::vector<double>& power) const {
        const double* w = weights.data() + filter * n_bins;
        double acc = 0.0;
        for (size_t k = 0; k < n_bins; ++k) acc += w[k] * power[k];
        return acc;
    }
};

// Orthonormal DCT-II of a vector, first n_out coefficients.
inline std::vector<double> dct2_ortho(const std::vector<double>& x, size_t n_out) {
    const size_t n = x.size();
    std::vector<double> out(n_out, 0.0);
    const double scale0 = std::sqrt(1.0 / static_cast<double>(n));
    const double scale = std::sqrt(2.0 / static_cast<double>(n));
    for (size_t i = 0; i < n_out; ++i) {
        double acc = 0.0;
        for (size_t j = 0; j < n; ++j)
            acc += x[j] * std::cos(std::numbers::pi * static_cast<double>(i) *
                                   (2.0 * static_cast<double>(j) + 1.0) /
                                   (2.0 * static_cast<double>(n)));
        out[i] = acc * (i == 0 ? scale0 : scale);
    }
    return out;
}

}  // namespace detail

// Mel-frequency cepstral coefficients 0..n_coeffs-1 of a magnitude spectrum:
// triangular mel filter energies of the power spectrum, log with an epsilon
// floor, then orthonormal DCT-II.
inline std::vector<double> mfcc(const std::vector<double>& spectrum, int sample_rate,
                                size_t n_coeffs = 13, size_t n_filters = 26) {
    if (spectrum.size() < 2 * n_filters)
        throw std::invalid_argument("mfcc: spectrum has fewer than 2x filter-count bins");
    if (n_coeffs > n_filters) throw std::invalid_argument("mfcc: more coefficients than filters");
    const size_t padded_length = (spectrum.size() - 1) * 2;
    detail::MelFilterbank bank(n_filters, spectrum.size(), sample_rate, padded_length);
    std::vector<double> power(spectrum.size());
    for (size_t k = 0; k < spectrum.size(); ++k) power[k] = spectrum[k] * spectrum[k];
    std::vector<double> log_energies(n_filters);
    for (size_t f = 0; f < n_filters; ++f)
        log_energies[f] = std::log(std::max(bank.apply(f, power), kEps));
    return detail::dct2_ortho(log_energies, n_coeffs);
}

// Spectral energy folded onto the 12 pitch classes (A-440 reference, class 0
// = A), normalized by the maximum class energy, plus their standard
// deviation as a 13th value.
inline std::vector<double> chroma(const std::vector<double>& spectrum, int sample_rate) {
    if (spectrum.empty()) throw std::invalid_argument("chroma: empty spectrum");
    const size_t padded_length = (spectrum.size() - 1) * 2;
    const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(padded_length);
    std::vector<double> energy(12, 0.0);
    for (size_t k = 0; k < spectrum.size(); ++k) {
        const double hz = k * bin_hz;
        if (hz < 27.5) continue;
        const long pc = std::lround(12.0 * std::log2(hz / 440.0));
        const size_t cls = static_cast<size_t>(((pc % 12) + 12) % 12);
        energy[cls] += spectrum[k] * spectrum[k];
    }
    double peak = 0.0;
    for (double e : energy) peak = std::max(peak, e);
    std::vector<double> out(13, 0.0);
    const double denom = std::max(peak, kEps);
    double mean = 0.0;
    for (size_t c = 0; c < 12; ++c) {
        out[c] = energy[c] / denom;
        mean += out[c];
    }
    mean /= 12.0;
    double var = 0.0;
    for (size_t c = 0; c < 12; ++c) var += (out[c] - mean) * (out[c] - mean);
    out[12] = std::sqrt(var / 12.0);
    return out;
}

// Fixed-size feature map for one (utterance, window) pair: exactly
// max_frames x 34 float32 values, zero-padded past the true frame count.
struct FeatureMatrix {
    size_t rows = 0;
    size_t cols = kFeatureCount;
    std::vector<float> values;  // row-major rows x cols
    double window_ms = 0.0;
    std::string utterance_id;
    uint32_t true_frame_count = 0;

    float at(size_t r, size_t c) const { return values[r * cols + c]; }
    float& at(size_t r, size_t c) { return values[r * cols + c]; }
};

// Computes the full 34-column feature vector per frame, assembling the first
// max_frames frames into a fixed-size matrix. Longer signals are truncated,
// shorter ones zero-padded; a too-short signal yields an all-zero matrix
// with true_frame_count 0.
inline FeatureMatrix extract_feature_matrix(const AudioBuffer& buf, const WindowSpec& spec,
                                            const std::string& utterance_id = "",
                                            const FeatureOptions& opts = {}) {
    if (opts.mfcc_coefficients != 13)
        throw std::invalid_argument("extract_feature_matrix: the 34-column layout needs 13 MFCCs");
    FeatureMatrix m;
    m.rows = opts.max_frames;
    m.cols = kFeatureCount;
    m.values.assign(m.rows * m.cols, 0.0f);
    m.window_ms = spec.width_ms;
    m.utterance_id = utterance_id;

    const std::vector<Frame> frames = frame_signal(buf, spec);
    const size_t used = std::min<size_t>(frames.size(), opts.max_frames);
    m.true_frame_count = static_cast<uint32_t>(frames.size());

    std::vector<double> prev_spectrum;
    for (size_t r = 0; r < used; ++r) {
        const Frame& f = frames[r];
        const std::vector<double> spectrum = magnitude_spectrum(f);
        if (prev_spectrum.empty()) prev_spectrum = spectrum;

        double row[kFeatureCount];
        row[0] = zero_crossing_rate(f.values);
        row[1] = short_term_energy(f.values);
        row[2] = energy_entropy(f.values, opts.energy_subframes);
        const auto [centroid, spread] = spectral_centroid_spread(spectrum);
        row[3] = centroid;
        row[4] = spread;
        row[5] = spectral_entropy(spectrum, opts.spectral_bands);
        row[6] = spectral_flux(spectrum, prev_spectrum);
        row[7] = spectral_rolloff(spectrum, opts.rolloff_fraction);
        const std::vector<double> cepstral =
            mfcc(spectrum, buf.sample_rate, opts.mfcc_coefficients, opts.mel_filters);
        for (size_t i = 0; i < 13; ++i) row[8 + i] = cepstral[i];
        const std::vector<double> pitch_classes = chroma(spectrum, buf.sample_rate);
        for (size_t i = 0; i < 13; ++i) row[21 + i] = pitch_classes[i];

        for (size_t c = 0; c < kFeatureCount; ++c) m.at(r, c) = static_cast<float>(row[c]);
        prev_spectrum = spectrum;
    }
    return m;
}

}  // namespace mwaser
