#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "xplat/detectors.hpp"

using namespace xplat::detect;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string only_tag(const RedactionSpan& s) {
    REQUIRE(s.tags.size() == 1);
    return *s.tags.begin();
}

const DetectorSuite& suite() {
    static const DetectorSuite s = DetectorSuite::standard();
    return s;
}

}  // namespace

TEST_CASE("built-in catalogue is byte-identical to the shipped data file") {
    CHECK(default_catalogue_text() == read_file(XPLAT_SOURCE_DIR "/data/regex_catalogue.tsv"));
    CHECK(default_gazetteer_text() == read_file(XPLAT_SOURCE_DIR "/data/gazetteer.tsv"));
    auto entries = parse_catalogue(default_catalogue_text());
    TagSet labels;
    for (const auto& e : entries) labels.insert(e.label);
    for (const char* required : {"phone", "email", "url", "ip", "street_address", "zip", "ssn", "credit_card",
                                 "date", "time", "price"}) {
        CHECK_MESSAGE(labels.count(required) == 1, required);
    }
}

TEST_CASE("catalogue parsing errors") {
    CHECK_THROWS_AS(parse_catalogue("phone"), DetectorError);
    CHECK_THROWS_AS(parse_catalogue("\tabc"), DetectorError);
    CHECK_THROWS_AS(DetectorSuite::standard(parse_catalogue("x\t(unclosed\t3")), DetectorError);
    CHECK_THROWS_AS(parse_catalogue("x\tabc\tseven"), DetectorError);
    CHECK_THROWS_AS(RegexDetector({"x", "(unclosed", 1}), DetectorError);
    auto e = parse_catalogue("# comment\n\nzip\t\\d{5}\t5\r\n");
    REQUIRE(e.size() == 1);
    CHECK(e[0].label == "zip");
    CHECK(e[0].pattern == "\\d{5}");
    CHECK(e[0].min_complete_length == 5);
}

TEST_CASE("match_common_formats") {
    SUBCASE("parenthesised phone covers all 14 characters") {
        auto spans = match_common_formats("(215) 555-0100");
        REQUIRE(spans.size() == 1);
        CHECK(spans[0].start == 0);
        CHECK(spans[0].end == 14);
        CHECK(only_tag(spans[0]) == "phone");
    }
    SUBCASE("price") {
        auto spans = match_common_formats("$19.99");
        REQUIRE(spans.size() == 1);
        CHECK(spans[0].end == 6);
        CHECK(only_tag(spans[0]) == "price");
    }
    SUBCASE("three digits are not a phone") {
        CHECK(match_common_formats("555").empty());
    }
    SUBCASE("one example per format") {
        struct Case {
            std::string text;
            std::string matched;
            std::string tag;
        };
        const std::vector<Case> cases = {
            {"mail jdoe42@mail.com now", "jdoe42@mail.com", "email"},
            {"see https://x.org/a?b=1.", "https://x.org/a?b=1", "url"},
            {"go to www.example.com", "www.example.com", "url"},
            {"ip 10.0.0.1 port", "10.0.0.1", "ip"},
            {"host fe80::1ff:fe23:4567:890a up", "fe80::1ff:fe23:4567:890a", "ip"},
            {"call 215-555-0100 pls", "215-555-0100", "phone"},
            {"call +1 215.555.0100", "+1 215.555.0100", "phone"},
            {"my ssn 123-45-6789", "123-45-6789", "ssn"},
            {"card 4111 1111 1111 1111 ok", "4111 1111 1111 1111", "credit_card"},
            {"zip 19104-2345", "19104-2345", "zip"},
            {"on 12/25/2021 we", "12/25/2021", "date"},
            {"on March 3rd, 2021 we", "March 3rd, 2021", "date"},
            {"at 10:30 pm ok", "10:30 pm", "time"},
            {"at 9am ok", "9am", "time"},
            {"costs $1,200.50 total", "$1,200.50", "price"},
            {"live at 3401 Walnut St. now", "3401 Walnut St.", "street_address"},
            {"send to PO Box 1234", "PO Box 1234", "po_box"},
        };
        for (const auto& c : cases) {
            auto spans = match_common_formats(c.text);
            INFO(c.text);
            REQUIRE(spans.size() == 1);
            CHECK(c.text.substr(spans[0].start, spans[0].length()) == c.matched);
            CHECK(only_tag(spans[0]) == c.tag);
        }
    }
    SUBCASE("plain words") {
        CHECK(match_common_formats("no pii here, just words.").empty());
        CHECK(match_common_formats("i am at home").empty());
    }
}

TEST_CASE("detect_all") {
    SUBCASE("ip") {
        auto spans = suite().detect_all("ip 10.0.0.1 port");
        REQUIRE(spans.size() == 1);
        CHECK(spans[0].start == 3);
        CHECK(spans[0].end == 11);
        CHECK(only_tag(spans[0]) == "ip");
    }
    SUBCASE("no pii") { CHECK(suite().detect_all("no pii here").empty()); }
    SUBCASE("url and date, non-overlapping and sorted") {
        const std::string text = "visit http://a.b/c on 5/6/2021";
        auto spans = suite().detect_all(text);
        REQUIRE(spans.size() == 2);
        CHECK(only_tag(spans[0]) == "url");
        CHECK(text.substr(spans[0].start, spans[0].length()) == "http://a.b/c");
        CHECK(only_tag(spans[1]) == "date");
        CHECK(text.substr(spans[1].start, spans[1].length()) == "5/6/2021");
    }
    SUBCASE("existing placeholders are not re-examined") {
        CHECK(suite().detect_all("email me at <email>").empty());
        CHECK(suite().detect_all("<work of art> tonight").empty());
    }
    SUBCASE("partially overlapping matches merge") {
        const std::string text = "ssn 342-99-1441 677-4065 ok";
        auto spans = suite().detect_all(text);
        REQUIRE(spans.size() == 1);
        CHECK(text.substr(spans[0].start, spans[0].length()) == "342-99-1441 677-4065");
        CHECK(spans[0].tags == TagSet{"phone", "ssn"});
    }
    SUBCASE("regex beats entity on overlap") {
        DetectorSuite s;
        Gazetteer g;
        g.add("org", "route 66");
        s.add(std::make_shared<GazetteerRecognizer>(g));
        s.add(std::make_shared<RegexDetector>(CatalogueEntry{"number", "\\d+", 1}));
        auto spans = s.detect_all("on route 66 now");
        REQUIRE(spans.size() == 1);
        CHECK(only_tag(spans[0]) == "number");
    }
}

TEST_CASE("gazetteer recognizer") {
    SUBCASE("longest match, case-insensitive") {
        auto spans = suite().detect_all("reading Anna Karenina tonight");
        REQUIRE(spans.size() == 1);
        CHECK(only_tag(spans[0]) == "work of art");
        CHECK(spans[0].start == 8);
        CHECK(spans[0].end == 21);
        CHECK(suite().detect_all("reading anna karenina tonight").size() == 1);
    }
    SUBCASE("person entries require capitalization") {
        CHECK(suite().detect_all("i saw Taylor Swift").size() == 1);
        CHECK(suite().detect_all("i saw taylor swift").empty());
    }
    SUBCASE("gazetteer file errors") {
        CHECK_THROWS_AS(Gazetteer::parse("person"), DetectorError);
        CHECK_THROWS_AS(Gazetteer::parse("person\t"), DetectorError);
    }
}

TEST_CASE("placeholders") {
    CHECK(placeholder({"phone"}) == "<phone>");
    CHECK(placeholder({"phone", "date"}) == "<date|phone>");
    SpanList spans{{5, 8, {"date"}}, {12, 20, {"phone"}}};
    CHECK(materialize("meet 5/6 at 555-1234", spans) == "meet <date> at <phone>");
    auto placed = materialized_spans(spans);
    CHECK(placed[0] == RedactionSpan{5, 11, {"date"}});
    CHECK(placed[1] == RedactionSpan{15, 22, {"phone"}});
    CHECK_THROWS_AS(materialize("abc", {{1, 2, {"x"}}, {0, 2, {"y"}}}), std::invalid_argument);
    auto regions = placeholder_regions("a <b|c> <x <work of art>");
    REQUIRE(regions.size() == 2);
    CHECK(regions[0] == std::pair<std::size_t, std::size_t>{2, 7});
    CHECK(regions[1] == std::pair<std::size_t, std::size_t>{11, 24});
}

TEST_CASE("possible-prefix predicate accepts every prefix of a match") {
    const std::vector<std::string> samples = {
        "(215) 555-0100", "215-555-0100", "555-1234",         "+1 215.555.0100", "123-45-6789",
        "jdoe42@mail.com", "4111 1111 1111 1111", "10.0.0.1", "12/25/2021",        "10:30 pm",
        "$1,200.50",       "http://a.b/c",  "3401 Walnut St.", "19104-2345",       "fe80::1ff:fe23:4567:890a",
    };
    for (const auto& whole : samples) {
        const std::string text = "abc " + whole;
        auto spans = suite().detect_all(text);
        REQUIRE_MESSAGE(spans.size() == 1, whole);
        const auto label = only_tag(spans[0]);
        for (std::size_t n = 1; n <= whole.size(); ++n) {
            auto tags = suite().possible_prefix_tags(text.substr(0, 4 + n), 4);
            INFO(whole << " prefix length " << n);
            CHECK(tags.count(label) == 1);
        }
    }
    SUBCASE("gazetteer prefixes") {
        const std::string text = "reading Anna Karenina";
        for (std::size_t n = 1; n <= 13; ++n) {
            INFO(n);
            CHECK(suite().possible_prefix_tags(text.substr(0, 8 + n), 8).count("work of art") == 1);
        }
    }
    SUBCASE("non-prefixes are rejected") {
        CHECK(suite().possible_prefix_tags("call 555-12 x", 5).empty());
        CHECK(suite().possible_prefix_tags("taylor is here", 0).count("email") == 0);
    }
}

TEST_CASE("same-priority detector order does not change the output") {
    auto entries = parse_catalogue(default_catalogue_text());
    const std::vector<std::string> texts = {
        "call 215-555-0100 or mail jdoe42@mail.com by 5/6/2021 at 9am",
        "ssn 123-45-6789, card 4111-1111-1111-1111, zip 19104, ip 10.0.0.1",
        "visit www.example.com/a or 3401 Walnut St. costs $5",
    };
    std::vector<SpanList> reference;
    for (const auto& t : texts) reference.push_back(DetectorSuite::standard(entries).detect_all(t));
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        std::shuffle(entries.begin(), entries.end(), rng);
        auto s = DetectorSuite::standard(entries);
        for (std::size_t i = 0; i < texts.size(); ++i) CHECK(s.detect_all(texts[i]) == reference[i]);
    }
}
