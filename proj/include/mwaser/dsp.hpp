#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "mwaser/audio.hpp"
#include "mwaser/util.hpp"

namespace mwaser {

enum class WindowShape { Hamming, Rectangular };

inline std::string to_string(WindowShape shape) {
    return shape == WindowShape::Hamming ? "hamming" : "rectangular";
}

inline WindowShape window_shape_from_string(const std::string& name) {
    std::string s = util::to_lower(util::trim(name));
    if (s == "hamming") return WindowShape::Hamming;
    if (s == "rectangular") return WindowShape::Rectangular;
    throw ConfigError("unknown window shape: " + name);
}

// Short-time analysis window: width in milliseconds, overlap as a fraction
// of the width, and shape. The ms -> samples conversion uses round-half-up
// so cached features are bit-stable across platforms.
struct WindowSpec {
    double width_ms = 25.0;
    double overlap = 0.5;
    WindowShape shape = WindowShape::Hamming;

    double hop_ms() const { return width_ms * (1.0 - overlap); }

    size_t length_samples(int sample_rate) const {
        return util::round_half_up(width_ms * sample_rate / 1000.0);
    }

    size_t hop_samples(int sample_rate) const {
        return util::round_half_up(hop_ms() * sample_rate / 1000.0);
    }

    void validate() const {
        if (!(width_ms > 0.0)) throw std::invalid_argument("window width must be positive");
        if (!(overlap >= 0.0 && overlap < 1.0))
            throw std::invalid_argument("window overlap must lie in [0, 1)");
    }
};

// One windowed slice of the signal.
struct Frame {
    std::vector<double> values;
    size_t index = 0;
    size_t start_sample = 0;
};

inline std::vector<double> window_coefficients(WindowShape shape, size_t length_samples) {
    if (length_samples == 0) throw std::invalid_argument("window length must be >= 1");
    std::vector<double> w(length_samples, 1.0);
    if (shape == WindowShape::Hamming && length_samples > 1) {
        const double denom = static_cast<double>(length_samples - 1);
        for (size_t n = 0; n < length_samples; ++n)
            w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / denom);
    }
    return w;
}

// Slices the signal into overlapping frames and applies the window
// coefficients elementwise. A trailing partial frame is dropped; signals
// shorter than one window produce no frames.
inline std::vector<Frame> frame_signal(const AudioBuffer& buf, const WindowSpec& spec) {
    spec.validate();
    if (buf.sample_rate <= 0) throw std::invalid_argument("frame_signal: sample rate must be > 0");
    const size_t w = spec.length_samples(buf.sample_rate);
    const size_t h = spec.hop_samples(buf.sample_rate);
    if (w == 0 || h == 0)
        throw std::invalid_argument("frame_signal: window or hop rounds to zero samples");

    std::vector<Frame> frames;
    const size_t n = buf.samples.size();
    if (n < w) return frames;

    const std::vector<double> coeffs = window_coefficients(spec.shape, w);
    const size_t count = (n - w) / h + 1;
    frames.reserve(count);
    for (size_t k = 0; k < count; ++k) {
        Frame f;
        f.index = k;
        f.start_sample = k * h;
        f.values.resize(w);
        for (size_t i = 0; i < w; ++i) f.values[i] = buf.samples[f.start_sample + i] * coeffs[i];
        frames.push_back(std::move(f));
    }
    return frames;
}

inline size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// In-place iterative radix-2 FFT. data.size() must be a power of two.
inline void fft_inplace(std::vector<std::complex<double>>& data) {
    const size_t n = data.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw std::invalid_argument("fft_inplace: length must be a nonzero power of two");

    // bit-reversal permutation
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }

    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = data[i + k];
                std::complex<double> v = data[i + k + len / 2] * w;
                data[i + k] = u + v;
                data[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

// One-sided magnitude spectrum of a frame. The frame is zero-padded to the
// next power of two P; bins 0..P/2 of |DFT| are returned, each divided by P.
inline std::vector<double> magnitude_spectrum(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("magnitude_spectrum: empty frame");
    const size_t padded = next_pow2(values.size());
    std::vector<std::complex<double>> buf(padded, {0.0, 0.0});
    for (size_t i = 0; i < values.size(); ++i) buf[i] = {values[i], 0.0};
    fft_inplace(buf);
    std::vector<double> mag(padded / 2 + 1);
    for (size_t k = 0; k < mag.size(); ++k)
        mag[k] = std::abs(buf[k]) / static_cast<double>(padded);
    return mag;
}

inline std::vector<double> magnitude_spectrum(const Frame& frame) {
    return magnitude_spectrum(frame.values);
}

}  // namespace mwaser
