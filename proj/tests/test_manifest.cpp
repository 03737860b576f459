#include <doctest.h>

#include <fstream>

#include "mwaser/manifest.hpp"
#include "support/oracles.hpp"

using namespace mwaser;

namespace {

std::filesystem::path write_csv(const std::filesystem::path& dir, const std::string& name,
                                const std::string& content) {
    auto path = dir / name;
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_SUITE_BEGIN("manifest");

TEST_CASE("label mapping follows the dataset protocols") {
    CHECK(map_label(Protocol::IemocapExp1, "Angry") == "angry");
    CHECK(map_label(Protocol::IemocapExp1, "excited") == std::nullopt);
    CHECK(map_label(Protocol::IemocapExp1, "hap") == "happy");

    CHECK(map_label(Protocol::IemocapExp2, "excited") == "excited");
    CHECK(map_label(Protocol::IemocapExp2, "happy") == std::nullopt);  // replaced by excited
    CHECK(map_label(Protocol::IemocapExp2, "exc") == "excited");

    CHECK(map_label(Protocol::Ravdess6, "calm") == "neutral");  // declared merge
    CHECK(map_label(Protocol::Ravdess6, "surprised") == std::nullopt);
    CHECK(map_label(Protocol::Ravdess6, "fearful") == "fear");

    CHECK(map_label(Protocol::Savee6, "surprise") == std::nullopt);
    CHECK(map_label(Protocol::Savee6, "disgust") == "disgust");

    CHECK(map_label(Protocol::Custom, "whatever") == "whatever");
    CHECK(map_label(Protocol::Custom, "  MIXED Case ") == "mixed case");
}

TEST_CASE("protocol class vocabularies are frozen") {
    CHECK(protocol_class_names(Protocol::IemocapExp1) ==
          std::vector<std::string>{"angry", "happy", "neutral", "sad"});
    CHECK(protocol_class_names(Protocol::IemocapExp2) ==
          std::vector<std::string>{"angry", "excited", "neutral", "sad"});
    CHECK(protocol_class_names(Protocol::Ravdess6) ==
          std::vector<std::string>{"angry", "happy", "neutral", "sad", "fear", "disgust"});
}

TEST_CASE("ingest_manifest maps, filters, and counts exclusions") {
    auto dir = oracles::make_temp_dir("manifest");
    auto path = write_csv(dir, "m.csv",
                          "utterance_id,audio_path,label,speaker\n"
                          "u1,/a/u1.wav,angry,s1\n"
                          "u2,/a/u2.wav,happy,s1\n"
                          "u3,/a/u3.wav,excited,s2\n"
                          "u4,/a/u4.wav,frustrated,s2\n"
                          "u5,/a/u5.wav,SAD,s3\n");

    Manifest exp1 = ingest_manifest(path, Protocol::IemocapExp1);
    CHECK(exp1.rows.size() == 3);  // angry, happy, sad
    CHECK(exp1.excluded_count == 2);
    CHECK(exp1.excluded_by_label.at("excited") == 1);
    CHECK(exp1.excluded_by_label.at("frustrated") == 1);
    CHECK(exp1.class_names == protocol_class_names(Protocol::IemocapExp1));
    CHECK(exp1.rows[2].label == "sad");
    CHECK(exp1.rows[2].raw_label == "SAD");

    Manifest exp2 = ingest_manifest(path, Protocol::IemocapExp2);
    CHECK(exp2.rows.size() == 3);  // angry, excited, sad; happy dropped
    CHECK(exp2.excluded_by_label.count("happy") == 1);
}

TEST_CASE("ravdess calm rows merge into neutral") {
    auto dir = oracles::make_temp_dir("manifest");
    auto path = write_csv(dir, "m.csv",
                          "utterance_id,audio_path,label\n"
                          "u1,/a/u1.wav,calm\n"
                          "u2,/a/u2.wav,neutral\n");
    Manifest m = ingest_manifest(path, Protocol::Ravdess6);
    CHECK(m.rows.size() == 2);
    CHECK(m.rows[0].label == "neutral");
    CHECK(m.rows[1].label == "neutral");
}

TEST_CASE("ingest_manifest rejects structural problems") {
    auto dir = oracles::make_temp_dir("manifest");

    auto missing = write_csv(dir, "missing.csv", "utterance_id,label\nu1,angry\n");
    CHECK_THROWS_AS(ingest_manifest(missing, Protocol::Custom), DataError);

    auto dup = write_csv(dir, "dup.csv",
                         "utterance_id,audio_path,label\nu1,/a.wav,angry\nu1,/b.wav,sad\n");
    CHECK_THROWS_AS(ingest_manifest(dup, Protocol::Custom), DataError);

    auto empty = write_csv(dir, "empty.csv",
                           "utterance_id,audio_path,label\nu1,/a.wav,surprise\n");
    CHECK_THROWS_AS(ingest_manifest(empty, Protocol::Savee6), DataError);

    auto unknown = write_csv(dir, "unknown.csv",
                             "utterance_id,audio_path,label,extra\nu1,/a.wav,angry,x\n");
    CHECK_THROWS_AS(ingest_manifest(unknown, Protocol::Custom), DataError);

    CHECK_THROWS_AS(ingest_manifest(dir / "nope.csv", Protocol::Custom), DataError);
}

TEST_CASE("csv quoting round-trips through write and ingest") {
    auto dir = oracles::make_temp_dir("manifest");
    std::vector<ManifestRow> rows(2);
    rows[0].utterance_id = "u,comma";
    rows[0].audio_path = "/data/has \"quotes\".wav";
    rows[0].label = rows[0].raw_label = "angry";
    rows[0].speaker = "s1";
    rows[1].utterance_id = "u2";
    rows[1].audio_path = "/plain.wav";
    rows[1].label = rows[1].raw_label = "sad";
    auto path = dir / "quoted.csv";
    write_manifest_csv(path, rows);

    Manifest m = ingest_manifest(path, Protocol::Custom);
    REQUIRE(m.rows.size() == 2);
    CHECK(m.rows[0].utterance_id == "u,comma");
    CHECK(m.rows[0].audio_path == "/data/has \"quotes\".wav");
}

TEST_CASE("ravdess filename codes parse into labels and speakers") {
    auto dir = oracles::make_temp_dir("manifest");
    auto actor = dir / "Actor_12";
    std::filesystem::create_directories(actor);
    for (const char* name : {"03-01-06-01-02-01-12", "03-01-02-01-01-01-12",
                             "03-02-03-01-01-01-12",  // song: skipped
                             "03-01-08-01-01-01-12"}) {
        std::ofstream(actor / (std::string(name) + ".wav")) << "x";
    }
    std::ofstream(actor / "notes.txt") << "x";

    ScanResult result = scan_ravdess(dir);
    REQUIRE(result.rows.size() == 3);
    CHECK(result.skipped == 1);  // the song file
    CHECK(result.rows[0].utterance_id == "03-01-02-01-01-01-12");
    CHECK(result.rows[0].raw_label == "calm");
    CHECK(result.rows[1].raw_label == "fear");
    CHECK(result.rows[2].raw_label == "surprise");
    for (const auto& row : result.rows) CHECK(row.speaker == "Actor_12");
}

TEST_CASE("savee layouts parse emotion prefixes") {
    auto dir = oracles::make_temp_dir("manifest");
    auto dc = dir / "DC";
    std::filesystem::create_directories(dc);
    for (const char* name : {"a01", "sa05", "su12", "n30", "h11"})
        std::ofstream(dc / (std::string(name) + ".wav")) << "x";
    std::ofstream(dir / "JE_d07.wav") << "x";

    ScanResult result = scan_savee(dir);
    REQUIRE(result.rows.size() == 6);
    std::map<std::string, std::string> by_id;
    for (const auto& row : result.rows) by_id[row.utterance_id] = row.raw_label;
    CHECK(by_id.at("DC_a01") == "angry");
    CHECK(by_id.at("DC_sa05") == "sad");
    CHECK(by_id.at("DC_su12") == "surprise");
    CHECK(by_id.at("DC_n30") == "neutral");
    CHECK(by_id.at("DC_h11") == "happy");
    CHECK(by_id.at("JE_d07") == "disgust");
}

TEST_SUITE_END();
