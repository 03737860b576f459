#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mwaser/dsp.hpp"
#include "support/oracles.hpp"

using namespace mwaser;

TEST_SUITE_BEGIN("dsp");

TEST_CASE("window_coefficients match the closed forms") {
    auto rect = window_coefficients(WindowShape::Rectangular, 4);
    REQUIRE(rect.size() == 4);
    for (double v : rect) CHECK(v == 1.0);

    auto ham5 = window_coefficients(WindowShape::Hamming, 5);
    CHECK(ham5[0] == doctest::Approx(0.08));
    CHECK(ham5[1] == doctest::Approx(0.54));
    CHECK(ham5[2] == doctest::Approx(1.0));
    CHECK(ham5[3] == doctest::Approx(0.54));
    CHECK(ham5[4] == doctest::Approx(0.08));

    auto ham1 = window_coefficients(WindowShape::Hamming, 1);
    REQUIRE(ham1.size() == 1);
    CHECK(ham1[0] == 1.0);

    for (size_t n : {size_t(2), size_t(5), size_t(400), size_t(3200)}) {
        auto w = window_coefficients(WindowShape::Hamming, n);
        for (size_t i = 0; i < n; ++i) {
            const double expected =
                0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * double(i) / double(n - 1));
            CHECK(w[i] == doctest::Approx(expected).epsilon(1e-12));
        }
    }

    CHECK_THROWS_AS(window_coefficients(WindowShape::Hamming, 0), std::invalid_argument);
}

TEST_CASE("frame_signal frame count and layout") {
    AudioBuffer buf;
    buf.sample_rate = 16000;
    buf.samples.assign(16000, 0.25);
    WindowSpec spec{25.0, 0.5, WindowShape::Hamming};
    auto frames = frame_signal(buf, spec);
    CHECK(frames.size() == 79);
    REQUIRE(!frames.empty());
    CHECK(frames[0].values.size() == 400);
    CHECK(frames[1].start_sample == 200);
    CHECK(frames[1].index == 1);
}

TEST_CASE("rectangular windowing reproduces raw slices exactly") {
    std::mt19937_64 rng(3);
    AudioBuffer buf;
    buf.sample_rate = 8000;
    buf.samples.resize(2000);
    for (double& v : buf.samples) v = (double(rng() >> 11) * 0x1.0p-53) - 0.5;
    WindowSpec spec{50.0, 0.5, WindowShape::Rectangular};
    auto frames = frame_signal(buf, spec);
    const size_t w = spec.length_samples(8000);
    const size_t h = spec.hop_samples(8000);
    REQUIRE(!frames.empty());
    for (const Frame& f : frames) {
        CHECK(f.start_sample == f.index * h);
        for (size_t i = 0; i < w; ++i) CHECK(f.values[i] == buf.samples[f.start_sample + i]);
    }
}

TEST_CASE("signals shorter than one window produce no frames") {
    AudioBuffer buf;
    buf.sample_rate = 16000;
    buf.samples.assign(399, 1.0);  // window is 400 samples
    auto frames = frame_signal(buf, WindowSpec{25.0, 0.5, WindowShape::Hamming});
    CHECK(frames.empty());
}

TEST_CASE("frame count formula matches a loop oracle on random shapes") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        const int sr = 8000;
        const size_t len = rng() % 30000;
        const double width_ms = 1.0 + double(rng() % 200);
        const double overlap = double(rng() % 90) / 100.0;
        WindowSpec spec{width_ms, overlap, WindowShape::Rectangular};
        const size_t w = spec.length_samples(sr);
        const size_t h = spec.hop_samples(sr);
        if (w == 0 || h == 0) continue;
        AudioBuffer buf;
        buf.sample_rate = sr;
        buf.samples.assign(len, 0.0);
        CHECK(frame_signal(buf, spec).size() == oracles::frame_count_loop(len, w, h));
    }
}

TEST_CASE("consecutive frames share w - h samples at 50% overlap") {
    AudioBuffer buf;
    buf.sample_rate = 16000;
    buf.samples.resize(4000);
    for (size_t i = 0; i < buf.samples.size(); ++i) buf.samples[i] = double(i);
    WindowSpec spec{25.0, 0.5, WindowShape::Rectangular};
    auto frames = frame_signal(buf, spec);
    const size_t w = spec.length_samples(16000);
    const size_t h = spec.hop_samples(16000);
    REQUIRE(frames.size() >= 2);
    for (size_t k = 1; k < frames.size(); ++k) {
        for (size_t i = 0; i < w - h; ++i)
            CHECK(frames[k].values[i] == frames[k - 1].values[i + h]);
    }
}

TEST_CASE("magnitude_spectrum matches a naive DFT oracle") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 60; ++trial) {
        const size_t n = 2 + rng() % 1023;
        std::vector<double> x(n);
        for (double& v : x) v = (double(rng() >> 11) * 0x1.0p-53) * 2.0 - 1.0;
        auto got = magnitude_spectrum(x);
        auto want = oracles::dft_magnitude(x, next_pow2(n));
        REQUIRE(got.size() == want.size());
        for (size_t k = 0; k < got.size(); ++k) CHECK(std::fabs(got[k] - want[k]) < 1e-9);
    }
}

TEST_CASE("magnitude_spectrum of an all-zero frame is all zero") {
    std::vector<double> x(300, 0.0);
    for (double v : magnitude_spectrum(x)) CHECK(v == 0.0);
    CHECK_THROWS_AS(magnitude_spectrum(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("pure cosine at a bin frequency peaks at amplitude/2") {
    const size_t n = 512;
    const size_t bin = 37;
    const double amplitude = 0.8;
    std::vector<double> x(n);
    for (size_t i = 0; i < n; ++i)
        x[i] = amplitude * std::cos(2.0 * std::numbers::pi * double(bin) * double(i) / double(n));
    auto mag = magnitude_spectrum(x);
    CHECK(mag[bin] == doctest::Approx(amplitude / 2.0).epsilon(1e-9));
    for (size_t k = 0; k < mag.size(); ++k) {
        if (k == bin) continue;
        CHECK(std::fabs(mag[k]) < 1e-9);
    }
}

TEST_CASE("Parseval consistency between time and spectrum energy") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 25; ++trial) {
        const size_t n = 16 + rng() % 1000;
        std::vector<double> x(n);
        for (double& v : x) v = (double(rng() >> 11) * 0x1.0p-53) * 2.0 - 1.0;
        const size_t padded = next_pow2(n);
        auto mag = magnitude_spectrum(x);

        double time_energy = 0.0;
        for (double v : x) time_energy += v * v;
        time_energy /= double(padded);

        double spec_energy = 0.0;
        for (size_t k = 0; k < mag.size(); ++k) {
            const bool edge = (k == 0) || (k == padded / 2);
            spec_energy += (edge ? 1.0 : 2.0) * mag[k] * mag[k];
        }
        CHECK(spec_energy == doctest::Approx(time_energy).epsilon(1e-6));
    }
}

TEST_CASE("WindowSpec validation") {
    CHECK_THROWS_AS((WindowSpec{0.0, 0.5, WindowShape::Hamming}.validate()),
                    std::invalid_argument);
    CHECK_THROWS_AS((WindowSpec{25.0, 1.0, WindowShape::Hamming}.validate()),
                    std::invalid_argument);
    CHECK_NOTHROW((WindowSpec{25.0, 0.0, WindowShape::Hamming}.validate()));
    CHECK(WindowSpec{25.0, 0.5, WindowShape::Hamming}.hop_ms() == doctest::Approx(12.5));
}

TEST_SUITE_END();
