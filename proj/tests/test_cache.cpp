#include <doctest.h>

#include <random>

#include "mwaser/cache.hpp"
#include "support/oracles.hpp"

using namespace mwaser;

namespace {

FeatureMatrix sample_matrix(uint64_t seed) {
    FeatureMatrix m;
    m.rows = 200;
    m.cols = kFeatureCount;
    m.values.resize(m.rows * m.cols);
    std::mt19937_64 rng(seed);
    for (float& v : m.values) v = float(double(rng() >> 11) * 0x1.0p-53) - 0.5f;
    m.window_ms = 25.0;
    m.utterance_id = "utt-1";
    m.true_frame_count = 79;
    return m;
}

CacheSidecar sample_sidecar() {
    CacheSidecar s;
    s.utterance_id = "utt-1";
    s.source_path = "/data/utt-1.wav";
    s.sample_rate = 16000;
    s.true_frame_count = 79;
    s.window_ms = 25.0;
    s.overlap = 0.5;
    s.window_shape = "hamming";
    return s;
}

}  // namespace

TEST_SUITE_BEGIN("cache");

TEST_CASE("feature cache round-trips bit-exactly") {
    auto dir = oracles::make_temp_dir("cache");
    FeatureMatrix m = sample_matrix(3);
    auto path = cache_file_path(dir, m.utterance_id, m.window_ms);
    write_feature_cache(path, m, sample_sidecar());

    auto [back, side] = read_feature_cache(path);
    CHECK(back.rows == m.rows);
    CHECK(back.cols == m.cols);
    CHECK(back.window_ms == doctest::Approx(25.0));
    CHECK(back.true_frame_count == 79);
    CHECK(side.sample_rate == 16000);
    CHECK(side.window_shape == "hamming");
    REQUIRE(back.values.size() == m.values.size());
    for (size_t i = 0; i < m.values.size(); ++i) CHECK(back.values[i] == m.values[i]);
}

TEST_CASE("bad magic and version are rejected") {
    auto dir = oracles::make_temp_dir("cache");
    auto path = dir / "bogus.mwaf";
    {
        std::ofstream out(path, std::ios::binary);
        out.write("NOPE", 4);
        util::write_le<uint32_t>(out, 1);
    }
    CHECK_THROWS_AS(read_feature_cache(path), DataError);

    auto path2 = dir / "version.mwaf";
    {
        std::ofstream out(path2, std::ios::binary);
        out.write("MWAF", 4);
        util::write_le<uint32_t>(out, 999);
    }
    CHECK_THROWS_AS(read_feature_cache(path2), DataError);
}

TEST_CASE("load_cached_features treats parameter mismatches as misses") {
    auto dir = oracles::make_temp_dir("cache");
    FeatureMatrix m = sample_matrix(9);
    auto path = cache_file_path(dir, m.utterance_id, m.window_ms);
    write_feature_cache(path, m, sample_sidecar());

    WindowSpec match{25.0, 0.5, WindowShape::Hamming};
    CHECK(load_cached_features(path, match, 200).has_value());

    WindowSpec other_overlap{25.0, 0.25, WindowShape::Hamming};
    CHECK(!load_cached_features(path, other_overlap, 200).has_value());

    WindowSpec other_shape{25.0, 0.5, WindowShape::Rectangular};
    CHECK(!load_cached_features(path, other_shape, 200).has_value());

    CHECK(!load_cached_features(path, match, 100).has_value());
    CHECK(!load_cached_features(dir / "absent.mwaf", match, 200).has_value());
}

TEST_CASE("cache file names stay distinct for hostile utterance ids") {
    auto dir = oracles::make_temp_dir("cache");
    auto a = cache_file_path(dir, "a/b:c", 25.0);
    auto b = cache_file_path(dir, "a/b_c", 25.0);
    CHECK(a != b);
    auto c = cache_file_path(dir, "a/b:c", 50.0);
    CHECK(a != c);
}

TEST_SUITE_END();
