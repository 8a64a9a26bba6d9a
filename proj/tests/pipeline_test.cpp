#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include <json.hpp>

#include "xplat/io.hpp"
#include "xplat/pipeline.hpp"
#include "xplat/synth.hpp"

using namespace xplat;
using namespace xplat::pipeline;
using features::Platform;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kFiller = {"i", "went", "to", "see", "the", "game", "with", "my", "mom",
                                          "it", "was", "ok", "we", "ate", "pizza", "then", "slept"};

std::string filler(std::mt19937_64& rng, int words) {
    std::string s;
    for (int i = 0; i < words; ++i) s += (s.empty() ? "" : " ") + kFiller[rng() % kFiller.size()];
    return s;
}

// Users who write "fun weekend" only on Facebook.
std::vector<io::Document> planted_corpus(int users, bool identical) {
    std::mt19937_64 rng(99);
    std::vector<io::Document> docs;
    for (int u = 0; u < users; ++u) {
        const std::string id = "p" + std::to_string(u);
        for (int k = 0; k < 6; ++k) {
            const auto text = filler(rng, 4 + static_cast<int>(rng() % 6));
            docs.push_back({id, Platform::facebook, text + (k < 2 + u % 3 ? " fun weekend" : "")});
            docs.push_back({id, Platform::sms, identical ? docs.back().text : filler(rng, 4 + static_cast<int>(rng() % 6))});
        }
    }
    return docs;
}

fs::path fresh_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / name;
    fs::remove_all(d);
    return d;
}

io::RunConfig fixture_config(const fs::path& dir, synth::FixtureOptions opt = {}) {
    opt.users = 8;
    opt.facebook_posts = 20;
    opt.sms_entries = 10;
    synth::write_fixture(synth::make_fixture(opt), dir);
    auto c = io::load_config(dir / "config.toml");
    c.min_words = 100;
    c.bootstrap_iterations = 200;
    c.nmf_iterations = 50;
    c.nmf_k = 4;
    return c;
}

}  // namespace

TEST_CASE("describe") {
    auto one = describe({5});
    CHECK(one.median == 5);
    CHECK(one.mean == 5);
    CHECK(one.sd == 0);
    CHECK_FALSE(one.sd_defined);
    auto three = describe({1, 2, 3});
    CHECK(three.median == 2);
    CHECK(three.mean == 2);
    CHECK(three.sd == doctest::Approx(1).epsilon(1e-12));
    CHECK(three.sd_defined);
}

TEST_CASE("summary of one user with one five-word post") {
    const auto c = assemble({{"u", Platform::facebook, "one two three four five"}, {"u", Platform::sms, "hi there"}}, 0);
    const auto s = summarize(c);
    REQUIRE(s.size() == 2);
    CHECK(s[0].platform == Platform::facebook);
    CHECK(s[0].users == 1);
    CHECK(s[0].words.median == 5);
    CHECK(s[0].words.mean == 5);
    CHECK(s[0].words.sd == 0);
    CHECK_FALSE(s[0].words.sd_defined);
    CHECK(s[0].posts.mean == 1);
    CHECK(s[1].words.mean == 2);
}

TEST_CASE("assemble applies inclusion rules") {
    const auto c = assemble({{"b", Platform::facebook, "a b c"},
                             {"b", Platform::sms, "d e"},
                             {"a", Platform::facebook, "a b c d e f"},
                             {"a", Platform::sms, "x"},
                             {"c", Platform::facebook, "only facebook here and plenty of words"},
                             {"d", Platform::sms, "only sms here and plenty of words"}},
                            6);
    REQUIRE(c.users.size() == 1);
    CHECK(c.users[0].user_id == "a");
    CHECK(c.users[0].words == 7);
    REQUIRE(c.excluded.size() == 3);
    CHECK(c.excluded[0].user_id == "b");
    CHECK(c.excluded[1].reason == "no sms messages");
    CHECK(c.excluded[2].reason == "no facebook posts");
}

TEST_CASE("planted bigram is significant on the Facebook side") {
    const auto fs = extract_features(assemble(planted_corpus(16, false), 0), nullptr, 0.05);
    const auto report = differential(fs, 0.05);
    auto it = std::find_if(report.ngrams.begin(), report.ngrams.end(),
                           [](const NgramDiff& d) { return d.feature == "fun weekend"; });
    REQUIRE(it != report.ngrams.end());
    CHECK(it->significant);
    CHECK(it->d > 0);
    CHECK(it->separated);
    auto cloud = std::find_if(report.cloud.begin(), report.cloud.end(),
                              [](const CloudDatum& c) { return c.ngram == "fun weekend"; });
    REQUIRE(cloud != report.cloud.end());
    CHECK(cloud->side == Platform::facebook);
    CHECK(cloud->frequency == doctest::Approx(it->freq_facebook));
}

TEST_CASE("identical corpora give no significant features") {
    features::DictionarySpec dict = features::DictionarySpec::parse("[food]\npizza\n[people]\nmom\n");
    const auto fs = extract_features(assemble(planted_corpus(12, true), 0), &dict, 0.05);
    const auto report = differential(fs, 0.05);
    CHECK_FALSE(report.ngrams.empty());
    for (const auto& d : report.ngrams) {
        CHECK_FALSE(d.significant);
        CHECK(d.d == 0);
    }
    REQUIRE(report.categories.size() == 2);
    for (const auto& c : report.categories) CHECK_FALSE(c.significant);
    CHECK(report.cloud.empty());
}

TEST_CASE("differential needs two users") {
    const auto fs = extract_features(assemble({{"u", Platform::facebook, "a"}, {"u", Platform::sms, "b"}}, 0), nullptr, 0);
    CHECK_THROWS_WITH(differential(fs, 0.05), doctest::Contains("got 1"));
}

TEST_CASE("cloud data is exactly the significant subset") {
    for (int users : {6, 10, 16}) {
        const auto fs = extract_features(assemble(planted_corpus(users, false), 0), nullptr, 0.05);
        const auto r = differential(fs, 0.05);
        std::vector<std::string> sig, cloud;
        for (const auto& d : r.ngrams) {
            if (d.significant) sig.push_back(d.feature);
        }
        for (const auto& c : r.cloud) cloud.push_back(c.ngram);
        std::sort(sig.begin(), sig.end());
        std::sort(cloud.begin(), cloud.end());
        CHECK(sig == cloud);
        for (std::size_t i = 1; i < r.cloud.size(); ++i) CHECK(std::fabs(r.cloud[i - 1].d) >= std::fabs(r.cloud[i].d));
    }
}

TEST_CASE("outcome_vectors codes binary outcomes") {
    io::OutcomeTable t;
    t.columns = {"gender", "age"};
    t.rows["a"] = {1, 20};
    t.rows["b"] = {0, 30};
    const auto o = outcome_vectors({"a", "b", "c"}, t, {"gender"});
    REQUIRE(o.size() == 2);
    CHECK(o[0].binary);
    CHECK(o[0].values(0) == 1);
    CHECK(o[0].values(1) == -1);
    CHECK(std::isnan(o[0].values(2)));
    CHECK_FALSE(o[1].binary);
    CHECK(o[1].values(1) == 30);
    t.rows["b"] = {2, 30};
    CHECK_THROWS_AS(outcome_vectors({"a", "b"}, t, {"gender"}), io::InputError);
}

TEST_CASE("lexica_csv round trips through parse_lexica") {
    std::map<std::string, model::LexiconModel> m;
    m["age"] = {"age", 0.5, {{"fun", 2.0}, {"a, b", -1.25}}};
    const auto back = model::parse_lexica(lexica_csv(m));
    REQUIRE(back.count("age") == 1);
    CHECK(back.at("age").intercept == 0.5);
    CHECK(back.at("age").weights == m["age"].weights);
}

TEST_CASE("redact_keystrokes drops structural entries and other apps") {
    const auto events = io::parse_keystrokes(
        "{\"user_id\":\"u\",\"timestamp\":1,\"app_id\":\"sms\",\"current_text\":\"c\"}\n"
        "{\"user_id\":\"u\",\"timestamp\":2,\"app_id\":\"sms\",\"current_text\":\"call 555-123-4567 \"}\n"
        "{\"user_id\":\"u\",\"timestamp\":3,\"app_id\":\"sms\",\"current_text\":\"\"}\n"
        "{\"user_id\":\"u\",\"timestamp\":4,\"app_id\":\"sms\",\"current_text\":\"hunter2\",\"is_password\":true}\n"
        "{\"user_id\":\"u\",\"timestamp\":5,\"app_id\":\"sms\",\"current_text\":\"\"}\n"
        "{\"user_id\":\"u\",\"timestamp\":6,\"app_id\":\"other\",\"current_text\":\"hello\"}\n");
    redact::RedactorConfig rc;
    rc.allowed_apps = {"sms"};
    const auto r = redact_keystrokes(events, rc, detect::DetectorSuite::standard());
    REQUIRE(r.sms.size() == 1);
    CHECK(r.sms[0].text == "call <phone> ");
    CHECK(r.structural_entries == 1);
    CHECK(r.stats.dropped_app == 1);
}

TEST_CASE("fixture generation is deterministic") {
    const auto a = synth::make_fixture();
    const auto b = synth::make_fixture();
    CHECK(a.files == b.files);
    synth::FixtureOptions other;
    other.seed = 1;
    CHECK(synth::make_fixture(other).files != a.files);
}

TEST_CASE("pipeline run is deterministic and writes a manifest") {
    const auto dir = fresh_dir("xplat_pipeline_det");
    auto c = fixture_config(dir);
    const auto first = run(Command::pipeline, c);
    const auto second = run(Command::pipeline, c);
    CHECK(first == second);
    REQUIRE(first.back().first == "manifest.json");
    const auto m = nlohmann::json::parse(first.back().second);
    CHECK(m["seeds"]["bootstrap"] == c.seed);
    CHECK(m["inputs"].size() == 6);
    CHECK(m["outputs"].size() == first.size() - 1);
    CHECK(first.back().second.find(dir.string()) == std::string::npos);

    write_outputs(first, c.output_dir);
    for (const auto& [name, content] : first) CHECK(io::read_file(c.output_dir / name) == content);
    CHECK_FALSE(fs::exists(c.output_dir.string() + ".partial"));
    fs::remove_all(dir);
}

TEST_CASE("every subcommand runs on the fixture") {
    const auto dir = fresh_dir("xplat_pipeline_cmds");
    auto c = fixture_config(dir);
    for (Command cmd : {Command::redact, Command::summary, Command::features, Command::diff, Command::train,
                        Command::evaluate, Command::importance}) {
        CAPTURE(command_name(cmd));
        const auto files = run(cmd, c);
        CHECK_FALSE(files.empty());
        for (const auto& [name, content] : files) {
            if (name.ends_with(".json")) CHECK(nlohmann::json::parse(content).is_object());
        }
    }
    c.model_features = "ngrams";
    c.lexica.clear();
    const auto imp = run(Command::importance, c);
    CHECK(imp[0].first == "importance.json");
    fs::remove_all(dir);
}

TEST_CASE("manifest digests change iff inputs change") {
    const auto dir = fresh_dir("xplat_pipeline_manifest");
    auto c = fixture_config(dir);
    const auto base = manifest_json(c, {});
    CHECK(manifest_json(c, {}) == base);
    const auto inputs = [](const std::string& m) { return nlohmann::json::parse(m)["inputs"]; };

    auto text = io::read_file(c.outcomes);
    const auto original = text;
    text.back() = text.back() == '\n' ? ' ' : '\n';
    io::write_file(c.outcomes, text);
    const auto changed = inputs(manifest_json(c, {}));
    const auto before = inputs(base);
    for (std::size_t i = 0; i < before.size(); ++i) {
        const bool is_outcomes = before[i]["role"] == "outcomes";
        CHECK((changed[i]["sha256"] != before[i]["sha256"]) == is_outcomes);
    }
    io::write_file(c.outcomes, original);
    CHECK(manifest_json(c, {}) == base);
    fs::remove_all(dir);
}

TEST_CASE("missing outcomes abort at the modeling stage") {
    const auto dir = fresh_dir("xplat_pipeline_missing");
    auto c = fixture_config(dir);
    c.outcomes.clear();
    try {
        (void)run(Command::pipeline, c);
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "modeling");
        CHECK(std::string(e.what()).find("outcomes") != std::string::npos);
    }
    c.outcomes = dir / "gone.csv";
    CHECK_THROWS_AS((void)run(Command::train, c), StageError);
    fs::remove_all(dir);
}

TEST_CASE("malformed input names the stage and line") {
    const auto dir = fresh_dir("xplat_pipeline_bad");
    auto c = fixture_config(dir);
    io::write_file(c.keystrokes, io::read_file(c.keystrokes) + "{broken\n");
    try {
        (void)run(Command::summary, c);
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "redact");
        CHECK(std::string(e.what()).find("keystrokes.jsonl:") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("write_outputs leaves nothing behind on failure") {
    const auto dir = fresh_dir("xplat_pipeline_write");
    const Files files = {{"a.txt", "x"}, {"a.txt/b.txt", "y"}};
    CHECK_THROWS((void)write_outputs(files, dir / "out"));
    CHECK_FALSE(fs::exists(dir / "out"));
    CHECK_FALSE(fs::exists(dir / "out.partial"));
    fs::remove_all(dir);
}
