#include <doctest.h>

#include <cmath>
#include <random>

#include "mwaser/audio.hpp"
#include "support/oracles.hpp"
#include "support/wav_builder.hpp"

using namespace mwaser;

TEST_SUITE_BEGIN("audio");

TEST_CASE("read_wav decodes 16-bit PCM at full scale") {
    auto dir = oracles::make_temp_dir("audio");
    auto path = dir / "pcm16.wav";
    wavtest::write_wav(path, {{0, 16384, -32768}}, 16000, 16);
    AudioBuffer buf = read_wav(path);
    REQUIRE(buf.samples.size() == 3);
    CHECK(buf.sample_rate == 16000);
    CHECK(buf.samples[0] == doctest::Approx(0.0));
    CHECK(buf.samples[1] == doctest::Approx(0.5));
    CHECK(buf.samples[2] == doctest::Approx(-1.0));
}

TEST_CASE("read_wav downmixes stereo by channel average") {
    auto dir = oracles::make_temp_dir("audio");
    auto path = dir / "stereo.wav";
    // left at full scale, right at zero
    wavtest::write_wav(path, {{32767, -32768}, {0, 0}}, 8000, 16);
    AudioBuffer buf = read_wav(path);
    REQUIRE(buf.samples.size() == 2);
    CHECK(buf.samples[0] == doctest::Approx(32767.0 / 32768.0 / 2.0));
    CHECK(buf.samples[1] == doctest::Approx(-0.5));
}

TEST_CASE("read_wav sample count follows the header arithmetic") {
    auto dir = oracles::make_temp_dir("audio");
    auto path = dir / "3s.wav";
    std::vector<int32_t> mono(48000, 100);
    wavtest::write_wav(path, {mono}, 16000, 16);
    AudioBuffer buf = read_wav(path);
    CHECK(buf.samples.size() == 48000);
    CHECK(buf.sample_rate == 16000);
}

TEST_CASE("read_wav decodes 8/24/32-bit PCM and float32") {
    auto dir = oracles::make_temp_dir("audio");

    wavtest::write_wav(dir / "pcm8.wav", {{128, 255, 0}}, 8000, 8);
    AudioBuffer b8 = read_wav(dir / "pcm8.wav");
    CHECK(b8.samples[0] == doctest::Approx(0.0));
    CHECK(b8.samples[1] == doctest::Approx(127.0 / 128.0));
    CHECK(b8.samples[2] == doctest::Approx(-1.0));

    wavtest::write_wav(dir / "pcm24.wav", {{0, 4194304, -8388608}}, 8000, 24);
    AudioBuffer b24 = read_wav(dir / "pcm24.wav");
    CHECK(b24.samples[0] == doctest::Approx(0.0));
    CHECK(b24.samples[1] == doctest::Approx(0.5));
    CHECK(b24.samples[2] == doctest::Approx(-1.0));

    wavtest::write_wav(dir / "pcm32.wav", {{0, 1073741824, -2147483648}}, 8000, 32);
    AudioBuffer b32 = read_wav(dir / "pcm32.wav");
    CHECK(b32.samples[1] == doctest::Approx(0.5));
    CHECK(b32.samples[2] == doctest::Approx(-1.0));

    std::vector<float> fs{0.0f, 0.25f, -1.0f};
    wavtest::write_wav(dir / "f32.wav", {}, 8000, 32, true, false, &fs);
    AudioBuffer bf = read_wav(dir / "f32.wav");
    REQUIRE(bf.samples.size() == 3);
    CHECK(bf.samples[1] == doctest::Approx(0.25));
    CHECK(bf.samples[2] == doctest::Approx(-1.0));
}

TEST_CASE("read_wav handles WAVE_FORMAT_EXTENSIBLE wrapping PCM") {
    auto dir = oracles::make_temp_dir("audio");
    auto path = dir / "ext.wav";
    wavtest::write_wav(path, {{16384, -16384}}, 44100, 16, false, true);
    AudioBuffer buf = read_wav(path);
    CHECK(buf.sample_rate == 44100);
    CHECK(buf.samples[0] == doctest::Approx(0.5));
    CHECK(buf.samples[1] == doctest::Approx(-0.5));
}

TEST_CASE("read_wav error cases are distinct types") {
    auto dir = oracles::make_temp_dir("audio");
    CHECK_THROWS_AS(read_wav(dir / "missing.wav"), FileNotFoundError);

    auto bad = dir / "bad.wav";
    wavtest::write_raw_bytes(bad, {'R', 'I', 'F', 'X', 0, 0, 0, 0, 'W', 'A', 'V', 'E'});
    CHECK_THROWS_AS(read_wav(bad), MalformedWavError);

    // valid RIFF but an ADPCM format tag
    wavtest::Bytes file;
    file.tag("RIFF");
    file.u32(4 + 8 + 16 + 8);
    file.tag("WAVE");
    file.tag("fmt ");
    file.u32(16);
    file.u16(2);  // ADPCM
    file.u16(1);
    file.u32(8000);
    file.u32(8000);
    file.u16(1);
    file.u16(4);
    file.tag("data");
    file.u32(0);
    auto adpcm = dir / "adpcm.wav";
    wavtest::write_raw_bytes(adpcm, file.data);
    CHECK_THROWS_AS(read_wav(adpcm), UnsupportedCodecError);
}

TEST_CASE("remove_dc subtracts the mean") {
    AudioBuffer buf{{1.0, 2.0, 3.0}, 8000};
    AudioBuffer out = remove_dc(buf);
    CHECK(out.samples[0] == doctest::Approx(-1.0));
    CHECK(out.samples[1] == doctest::Approx(0.0));
    CHECK(out.samples[2] == doctest::Approx(1.0));

    AudioBuffer constant{{0.7, 0.7, 0.7, 0.7}, 8000};
    for (double v : remove_dc(constant).samples) CHECK(v == doctest::Approx(0.0));

    AudioBuffer zero_mean{{-1.0, 1.0, -2.0, 2.0}, 8000};
    AudioBuffer zm = remove_dc(zero_mean);
    for (size_t i = 0; i < zm.samples.size(); ++i)
        CHECK(zm.samples[i] == doctest::Approx(zero_mean.samples[i]));

    CHECK_THROWS_AS(remove_dc(AudioBuffer{{}, 8000}), std::invalid_argument);
}

TEST_CASE("peak_normalize divides by the absolute peak") {
    AudioBuffer buf{{-0.5, 0.25}, 8000};
    AudioBuffer out = peak_normalize(buf);
    CHECK(out.samples[0] == doctest::Approx(-1.0));
    CHECK(out.samples[1] == doctest::Approx(0.5));

    AudioBuffer zeros{{0.0, 0.0, 0.0}, 8000};
    for (double v : peak_normalize(zeros).samples) CHECK(v == 0.0);

    AudioBuffer unit{{1.0, -0.5}, 8000};
    AudioBuffer same = peak_normalize(unit);
    CHECK(same.samples[0] == 1.0);
    CHECK(same.samples[1] == -0.5);
}

TEST_CASE("preprocess is idempotent on its own output") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        AudioBuffer buf;
        buf.sample_rate = 16000;
        buf.samples.resize(500);
        for (double& v : buf.samples)
            v = (static_cast<double>(rng() >> 11) * 0x1.0p-53) * 2.0 - 0.7;
        AudioBuffer once = preprocess(buf);
        AudioBuffer twice = preprocess(once);
        REQUIRE(once.samples.size() == twice.samples.size());
        for (size_t i = 0; i < once.samples.size(); ++i)
            CHECK(std::fabs(once.samples[i] - twice.samples[i]) < 1e-9);

        double mean = 0.0, peak = 0.0;
        for (double v : once.samples) mean += v;
        mean /= static_cast<double>(once.samples.size());
        for (double v : once.samples) peak = std::max(peak, std::fabs(v));
        CHECK(std::fabs(mean) < 1e-9);
        CHECK(peak == doctest::Approx(1.0));
    }
}

TEST_CASE("downmix is linear: duplicated channels equal the mono file") {
    auto dir = oracles::make_temp_dir("audio");
    std::vector<int32_t> ch(64);
    std::mt19937_64 rng(11);
    for (auto& v : ch) v = static_cast<int32_t>(rng() % 65536) - 32768;
    wavtest::write_wav(dir / "mono.wav", {ch}, 16000, 16);
    wavtest::write_wav(dir / "dup.wav", {ch, ch}, 16000, 16);
    AudioBuffer mono = read_wav(dir / "mono.wav");
    AudioBuffer dup = read_wav(dir / "dup.wav");
    REQUIRE(mono.samples.size() == dup.samples.size());
    for (size_t i = 0; i < mono.samples.size(); ++i)
        CHECK(mono.samples[i] == doctest::Approx(dup.samples[i]).epsilon(1e-12));
}

TEST_CASE("peak_normalize preserves sample ratios") {
    std::mt19937_64 rng(13);
    AudioBuffer buf;
    buf.sample_rate = 8000;
    buf.samples.resize(100);
    for (double& v : buf.samples)
        v = (static_cast<double>(rng() >> 11) * 0x1.0p-53) * 4.0 - 2.0;
    AudioBuffer out = peak_normalize(buf);
    for (size_t i = 0; i < buf.samples.size(); ++i) {
        for (size_t j : {size_t(0), size_t(31), size_t(99)}) {
            if (std::fabs(buf.samples[j]) < 1e-12) continue;
            const double before = buf.samples[i] / buf.samples[j];
            const double after = out.samples[i] / out.samples[j];
            CHECK(std::fabs(before - after) < 1e-9 * std::max(1.0, std::fabs(before)));
        }
    }
}

TEST_CASE("write_wav_pcm16 round-trips through read_wav") {
    auto dir = oracles::make_temp_dir("audio");
    AudioBuffer buf;
    buf.sample_rate = 16000;
    buf.samples = {0.0, 0.5, -0.5, 1.0, -1.0, 0.123};
    write_wav_pcm16(dir / "rt.wav", buf);
    AudioBuffer back = read_wav(dir / "rt.wav");
    REQUIRE(back.samples.size() == buf.samples.size());
    CHECK(back.sample_rate == 16000);
    for (size_t i = 0; i < buf.samples.size(); ++i)
        CHECK(std::fabs(back.samples[i] - buf.samples[i]) < 1.0 / 32000.0);
}

TEST_SUITE_END();
