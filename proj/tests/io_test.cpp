#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "xplat/io.hpp"

using namespace xplat::io;
namespace fs = std::filesystem;

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("split_csv and csv_field round trip") {
    CHECK(split_csv("a,b,,c") == std::vector<std::string>{"a", "b", "", "c"});
    CHECK(split_csv("\"x, y\",\"say \"\"hi\"\"\",z") == std::vector<std::string>{"x, y", "say \"hi\"", "z"});
    CHECK(split_csv("") == std::vector<std::string>{""});
    for (std::string v : {"plain", "with,comma", "with \"quote\"", "", "line\nbreak"}) {
        CHECK(split_csv(csv_field(v)) == std::vector<std::string>{v});
    }
}

TEST_CASE("parse_keystrokes") {
    const auto events = parse_keystrokes(
        "{\"user_id\":\"u1\",\"timestamp\":5,\"app_id\":\"a\",\"current_text\":\"hi\"}\n\n"
        "{\"user_id\":\"u1\",\"timestamp\":6,\"app_id\":\"a\",\"current_text\":\"\",\"is_password\":true}\n");
    REQUIRE(events.size() == 2);
    CHECK(events[0].current_text == "hi");
    CHECK(events[0].timestamp == 5);
    CHECK_FALSE(events[0].is_password);
    CHECK(events[1].is_password);

    CHECK_THROWS_WITH_AS(parse_keystrokes("{\"user_id\":\"u\"}", "log"),
                         doctest::Contains("log:1: missing field \"timestamp\""), InputError);
    CHECK_THROWS_WITH_AS(parse_keystrokes("\n{oops", "log"), doctest::Contains("log:2: invalid JSON"), InputError);
    CHECK_THROWS_AS(
        parse_keystrokes("{\"user_id\":1,\"timestamp\":5,\"app_id\":\"a\",\"current_text\":\"hi\"}"), InputError);
}

TEST_CASE("parse_corpus and corpus_jsonl") {
    const std::vector<Document> docs = {{"u1", xplat::features::Platform::facebook, "hello \"there\""},
                                        {"u2", xplat::features::Platform::sms, "ok\nbye"}};
    const auto back = parse_corpus(corpus_jsonl(docs));
    REQUIRE(back.size() == 2);
    CHECK(back[0].text == docs[0].text);
    CHECK(back[1].platform == xplat::features::Platform::sms);
    CHECK(back[1].text == "ok\nbye");
    CHECK_THROWS_WITH_AS(parse_corpus("{\"user_id\":\"u\",\"platform\":\"myspace\",\"text\":\"\"}", "fb"),
                         doctest::Contains("fb:1:"), InputError);
}

TEST_CASE("parse_outcomes") {
    const auto t = parse_outcomes("user_id,age,gender\nu1,30,1\nu2,,0\n");
    CHECK(t.columns == std::vector<std::string>{"age", "gender"});
    CHECK(t.rows.at("u1")[0] == 30);
    CHECK(std::isnan(t.rows.at("u2")[0]));
    CHECK(t.rows.at("u2")[1] == 0);
    CHECK_THROWS_WITH_AS(parse_outcomes("user_id,age\nu1,30\nu1,31\n", "o.csv"),
                         doctest::Contains("o.csv:3: duplicate user u1"), InputError);
    CHECK_THROWS_WITH_AS(parse_outcomes("user_id,age\nu1,old\n", "o.csv"), doctest::Contains("not a number"),
                         InputError);
    CHECK_THROWS_AS(parse_outcomes("user_id,age\nu1\n"), InputError);
    CHECK_THROWS_AS(parse_outcomes("age\n30\n"), InputError);
    CHECK_THROWS_AS(parse_outcomes(""), InputError);
}

TEST_CASE("parse_embeddings") {
    const auto t = parse_embeddings("user_id,platform,e0,e1\nu1,facebook,0.5,1\nu1,sms,0,2\n");
    CHECK(t.at({"u1", xplat::features::Platform::sms}) == std::vector<double>{0, 2});
    CHECK_THROWS_AS(parse_embeddings("user_id,platform,e0\nu1,facebook,1\nu1,facebook,2\n"), InputError);
    CHECK_THROWS_AS(parse_embeddings("id,e0\nu1,1\n"), InputError);
    CHECK_THROWS_AS(parse_embeddings("user_id,platform,e0\nu1,facebook,1,2\n"), InputError);
}

TEST_CASE("parse_config") {
    const auto c = parse_config(
        "# run\n"
        "keystrokes = \"logs/k.jsonl\"  # comment\n"
        "facebook = /abs/fb.jsonl\n"
        "seed = 42\n"
        "alpha = 0.1\n"
        "min_words = 100\n"
        "allowed_apps = \"a.b, c.d\"\n"
        "redact_facebook = false\n"
        "output_dir = \"out # not a comment\"\n",
        "/base");
    CHECK(c.keystrokes == fs::path("/base/logs/k.jsonl"));
    CHECK(c.facebook == fs::path("/abs/fb.jsonl"));
    CHECK(c.seed == 42);
    CHECK(c.fdr_alpha == 0.1);
    CHECK(c.min_words == 100);
    CHECK(c.allowed_apps == std::set<std::string>{"a.b", "c.d"});
    CHECK_FALSE(c.redact_facebook);
    CHECK(c.output_dir == fs::path("/base/out # not a comment"));

    const RunConfig d = parse_config("");
    CHECK(d.min_words == 500);
    CHECK(d.fdr_alpha == 0.05);

    CHECK_THROWS_WITH_AS(parse_config("seed = 1\ncolour = red\n"), doctest::Contains("config:2: unknown config key"),
                         InputError);
    CHECK_THROWS_WITH_AS(parse_config("just words"), doctest::Contains("config:1: expected key = value"), InputError);
    CHECK_THROWS_AS(parse_config("seed = -1"), InputError);
    CHECK_THROWS_AS(parse_config("min_words = 2.5"), InputError);
    CHECK_THROWS_AS(parse_config("redact_facebook = maybe"), InputError);
}

TEST_CASE("RunConfig::validate") {
    RunConfig c;
    CHECK_NOTHROW(c.validate());
    for (double a : {0.0, 1.0, -0.1, 1.5}) {
        RunConfig bad;
        bad.fdr_alpha = a;
        CHECK_THROWS_AS(bad.validate(), InputError);
    }
    RunConfig missing;
    missing.outcomes = "/definitely/not/here.csv";
    CHECK_THROWS_WITH_AS(missing.validate(), doctest::Contains("input file not found"), InputError);
    RunConfig emb;
    emb.model_features = "embeddings";
    CHECK_THROWS_AS(emb.validate(), InputError);
    RunConfig mode;
    mode.cross_mode = "sideways";
    CHECK_THROWS_AS(mode.validate(), InputError);
}

TEST_CASE("load_config resolves paths against the config directory") {
    const auto dir = fs::temp_directory_path() / "xplat_io_test";
    fs::remove_all(dir);
    write_file(dir / "sub" / "run.toml", "outcomes = o.csv\n");
    CHECK(read_file(dir / "sub" / "run.toml") == "outcomes = o.csv\n");
    CHECK(load_config(dir / "sub" / "run.toml").outcomes == dir / "sub" / "o.csv");
    CHECK_THROWS_AS(load_config(dir / "nope.toml"), InputError);
    fs::remove_all(dir);
}
