#include "xplat/detectors.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include <boost/regex.hpp>

namespace xplat::detect {

namespace {

bool is_word_char(char c) {
    unsigned char u = static_cast<unsigned char>(c);
    return std::isalnum(u) || c == '\'' || c == '-' || (u & 0x80);
}

struct Word {
    std::size_t start;
    std::size_t end;
};

std::vector<Word> split_words(std::string_view text) {
    std::vector<Word> words;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_word_char(text[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && is_word_char(text[j])) ++j;
        words.push_back({i, j});
        i = j;
    }
    return words;
}

std::string join_folded(const std::vector<std::string>& words) {
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

bool is_tag_char(char c) {
    return (c >= 'a' && c <= 'z') || c == ' ' || c == '_' || c == '|';
}

}  // namespace

std::string fold_case(std::string_view text) {
    std::string out(text);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string placeholder(const TagSet& tags) {
    std::string out = "<";
    bool first = true;
    for (const auto& t : tags) {
        if (!first) out += '|';
        out += t;
        first = false;
    }
    out += '>';
    return out;
}

std::string materialize(std::string_view text, const SpanList& spans) {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    for (const auto& s : spans) {
        if (s.start < pos || s.end > text.size() || s.start >= s.end) {
            throw std::invalid_argument("materialize: spans must be sorted, non-overlapping and in range");
        }
        out.append(text.substr(pos, s.start - pos));
        out += placeholder(s.tags);
        pos = s.end;
    }
    out.append(text.substr(pos));
    return out;
}

SpanList materialized_spans(const SpanList& spans) {
    SpanList out;
    out.reserve(spans.size());
    std::ptrdiff_t shift = 0;
    for (const auto& s : spans) {
        const auto len = placeholder(s.tags).size();
        const auto start = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(s.start) + shift);
        out.push_back({start, start + len, s.tags});
        shift += static_cast<std::ptrdiff_t>(len) - static_cast<std::ptrdiff_t>(s.length());
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> placeholder_regions(std::string_view text) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '<' && i + 1 < text.size() && text[i + 1] >= 'a' && text[i + 1] <= 'z') {
            std::size_t j = i + 1;
            while (j < text.size() && is_tag_char(text[j])) ++j;
            if (j < text.size() && text[j] == '>') {
                out.emplace_back(i, j + 1);
                i = j + 1;
                continue;
            }
        }
        ++i;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Regex catalogue

std::vector<CatalogueEntry> parse_catalogue(std::string_view text) {
    std::vector<CatalogueEntry> entries;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') {
            if (nl == text.size()) break;
            continue;
        }
        auto tab = line.find('\t');
        if (tab == std::string_view::npos || tab == 0) {
            throw DetectorError("catalogue line " + std::to_string(line_no) + ": expected label<TAB>pattern");
        }
        CatalogueEntry e;
        e.label = std::string(line.substr(0, tab));
        auto rest = line.substr(tab + 1);
        auto tab2 = rest.find('\t');
        if (tab2 != std::string_view::npos) {
            e.pattern = std::string(rest.substr(0, tab2));
            auto len_field = std::string(rest.substr(tab2 + 1));
            try {
                e.min_complete_length = static_cast<std::size_t>(std::stoul(len_field));
            } catch (const std::exception&) {
                throw DetectorError("catalogue line " + std::to_string(line_no) + ": bad minimum length '" +
                                    len_field + "'");
            }
        } else {
            e.pattern = std::string(rest);
        }
        if (e.pattern.empty()) {
            throw DetectorError("catalogue line " + std::to_string(line_no) + ": empty pattern");
        }
        entries.push_back(std::move(e));
        if (nl == text.size()) break;
    }
    return entries;
}

struct RegexDetector::Compiled {
    boost::regex search;
    boost::regex anchored;
};

RegexDetector::RegexDetector(CatalogueEntry entry) : entry_(std::move(entry)) {
    try {
        compiled_ = std::make_unique<Compiled>(Compiled{
            boost::regex(entry_.pattern, boost::regex::perl),
            boost::regex("(?:" + entry_.pattern + ")\\z", boost::regex::perl),
        });
    } catch (const boost::regex_error& e) {
        throw DetectorError("bad pattern for '" + entry_.label + "': " + e.what());
    }
}

RegexDetector::~RegexDetector() = default;
RegexDetector::RegexDetector(RegexDetector&&) noexcept = default;
RegexDetector& RegexDetector::operator=(RegexDetector&&) noexcept = default;

SpanList RegexDetector::match(std::string_view text) const {
    SpanList out;
    using It = std::string_view::const_iterator;
    boost::regex_iterator<It> it(text.begin(), text.end(), compiled_->search);
    for (; it != boost::regex_iterator<It>(); ++it) {
        const auto& m = (*it)[0];
        auto start = static_cast<std::size_t>(m.first - text.begin());
        auto end = static_cast<std::size_t>(m.second - text.begin());
        if (end - start < entry_.min_complete_length) continue;
        out.push_back({start, end, {entry_.label}});
    }
    return out;
}

bool RegexDetector::possible_prefix(std::string_view text, std::size_t from) const {
    if (from >= text.size()) return true;
    using It = std::string_view::const_iterator;
    boost::match_results<It> m;
    auto flags = boost::match_partial | boost::match_continuous;
    if (from > 0) flags |= boost::match_prev_avail;
    return boost::regex_search(text.begin() + static_cast<std::ptrdiff_t>(from), text.end(), m,
                               compiled_->anchored, flags);
}

// ---------------------------------------------------------------------------
// Gazetteer

void Gazetteer::add(const std::string& label, std::string_view surface_form) {
    std::vector<std::string> tokens;
    for (const auto& w : split_words(surface_form)) {
        tokens.push_back(fold_case(surface_form.substr(w.start, w.end - w.start)));
    }
    if (tokens.empty()) return;
    max_tokens_ = std::max(max_tokens_, tokens.size());
    forms_[join_folded(tokens)].insert(label);
}

Gazetteer Gazetteer::parse(std::string_view text) {
    Gazetteer g;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
            throw DetectorError("gazetteer line " + std::to_string(line_no) + ": expected label<TAB>surface form");
        }
        g.add(line.substr(0, tab), std::string_view(line).substr(tab + 1));
    }
    return g;
}

std::vector<Gazetteer::Hit> Gazetteer::longest_at(const std::vector<std::string>& words, std::size_t from) const {
    const std::size_t limit = std::min(max_tokens_, words.size() - from);
    for (std::size_t n = limit; n >= 1; --n) {
        std::vector<std::string> slice(words.begin() + static_cast<std::ptrdiff_t>(from),
                                       words.begin() + static_cast<std::ptrdiff_t>(from + n));
        auto it = forms_.find(join_folded(slice));
        if (it != forms_.end()) {
            std::vector<Hit> hits;
            for (const auto& label : it->second) hits.push_back({n, label});
            return hits;
        }
    }
    return {};
}

TagSet Gazetteer::labels_with_prefix(const std::string& key) const {
    TagSet labels;
    for (auto it = forms_.lower_bound(key); it != forms_.end() && it->first.compare(0, key.size(), key) == 0; ++it) {
        labels.insert(it->second.begin(), it->second.end());
    }
    return labels;
}

GazetteerRecognizer::GazetteerRecognizer(Gazetteer gazetteer) : gazetteer_(std::move(gazetteer)) {}

SpanList GazetteerRecognizer::match(std::string_view text) const {
    SpanList out;
    if (gazetteer_.empty()) return out;
    auto words = split_words(text);
    std::vector<std::string> folded;
    folded.reserve(words.size());
    for (const auto& w : words) folded.push_back(fold_case(text.substr(w.start, w.end - w.start)));

    for (std::size_t i = 0; i < words.size(); ++i) {
        // words must be separated by plain whitespace to form one entity
        std::size_t run = 1;
        while (i + run < words.size()) {
            auto gap = text.substr(words[i + run - 1].end, words[i + run].start - words[i + run - 1].end);
            if (gap.empty() || gap.find_first_not_of(" \t") != std::string_view::npos) break;
            ++run;
        }
        std::vector<std::string> window(folded.begin() + static_cast<std::ptrdiff_t>(i),
                                        folded.begin() + static_cast<std::ptrdiff_t>(i + run));
        for (const auto& hit : gazetteer_.longest_at(window, 0)) {
            if (hit.label == "person") {
                bool capitalized = true;
                for (std::size_t k = 0; k < hit.token_count; ++k) {
                    if (!std::isupper(static_cast<unsigned char>(text[words[i + k].start]))) capitalized = false;
                }
                if (!capitalized) continue;
            }
            out.push_back({words[i].start, words[i + hit.token_count - 1].end, {hit.label}});
        }
    }
    return out;
}

bool GazetteerRecognizer::possible_prefix(std::string_view text, std::size_t from) const {
    if (from >= text.size()) return true;
    auto suffix = text.substr(from);
    if (!is_word_char(suffix.front())) return false;
    std::vector<std::string> words;
    std::size_t last_end = 0;
    for (const auto& w : split_words(suffix)) {
        auto gap = suffix.substr(last_end, w.start - last_end);
        if (!words.empty() && gap.find_first_not_of(" \t") != std::string_view::npos) return false;
        words.push_back(fold_case(suffix.substr(w.start, w.end - w.start)));
        last_end = w.end;
    }
    auto tail = suffix.substr(last_end);
    if (tail.find_first_not_of(" \t") != std::string_view::npos) return false;
    std::string key = join_folded(words);
    if (!tail.empty()) key += ' ';
    // a complete last word followed by a space must continue into another word
    return !gazetteer_.labels_with_prefix(key).empty();
}

TagSet GazetteerRecognizer::prefix_tags(std::string_view text, std::size_t from) const {
    if (from >= text.size() || !possible_prefix(text, from)) return {};
    auto suffix = text.substr(from);
    std::vector<std::string> words;
    for (const auto& w : split_words(suffix)) words.push_back(fold_case(suffix.substr(w.start, w.end - w.start)));
    std::string key = join_folded(words);
    if (suffix.find_last_not_of(" \t") + 1 < suffix.size()) key += ' ';
    return gazetteer_.labels_with_prefix(key);
}

// ---------------------------------------------------------------------------
// Suite

void DetectorSuite::add(std::shared_ptr<const Detector> detector) {
    detectors_.push_back(std::move(detector));
}

SpanList DetectorSuite::detect_all(std::string_view text) const {
    struct Candidate {
        RedactionSpan span;
        Priority priority;
    };
    std::vector<Candidate> candidates;
    const auto masked = placeholder_regions(text);
    auto touches_placeholder = [&](const RedactionSpan& s) {
        return std::any_of(masked.begin(), masked.end(),
                           [&](const auto& r) { return s.start < r.second && r.first < s.end; });
    };
    for (const auto& d : detectors_) {
        for (auto& s : d->match(text)) {
            if (touches_placeholder(s)) continue;
            candidates.push_back({std::move(s), d->priority()});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.priority != b.priority) return a.priority < b.priority;
        if (a.span.length() != b.span.length()) return a.span.length() > b.span.length();
        if (a.span.start != b.span.start) return a.span.start < b.span.start;
        return a.span.tags < b.span.tags;
    });
    // A candidate nested in or around an accepted span loses to it; a partial
    // overlap is merged into one compound span so neither match is exposed.
    SpanList accepted;
    for (auto& c : candidates) {
        if (std::any_of(accepted.begin(), accepted.end(), [&](const RedactionSpan& s) {
                return s.contains(c.span) || c.span.contains(s);
            })) {
            continue;
        }
        RedactionSpan merged = std::move(c.span);
        for (auto it = accepted.begin(); it != accepted.end();) {
            if (it->overlaps(merged)) {
                merged.start = std::min(merged.start, it->start);
                merged.end = std::max(merged.end, it->end);
                merged.tags.insert(it->tags.begin(), it->tags.end());
                it = accepted.erase(it);
                it = accepted.begin();
            } else {
                ++it;
            }
        }
        accepted.push_back(std::move(merged));
    }
    std::sort(accepted.begin(), accepted.end(),
              [](const RedactionSpan& a, const RedactionSpan& b) { return a.start < b.start; });
    return accepted;
}

TagSet DetectorSuite::possible_prefix_tags(std::string_view text, std::size_t from) const {
    TagSet tags;
    for (const auto& d : detectors_) tags.merge(d->prefix_tags(text, from));
    return tags;
}

DetectorSuite DetectorSuite::standard(const std::vector<CatalogueEntry>& catalogue, const Gazetteer* gazetteer) {
    DetectorSuite suite;
    for (const auto& e : catalogue) suite.add(std::make_shared<RegexDetector>(e));
    if (gazetteer != nullptr && !gazetteer->empty()) {
        suite.add(std::make_shared<GazetteerRecognizer>(*gazetteer));
    }
    return suite;
}

DetectorSuite DetectorSuite::standard() {
    static const auto catalogue = parse_catalogue(default_catalogue_text());
    static const auto gazetteer = Gazetteer::parse(default_gazetteer_text());
    return standard(catalogue, &gazetteer);
}

SpanList match_common_formats(std::string_view text) {
    static const DetectorSuite suite = DetectorSuite::standard(parse_catalogue(default_catalogue_text()));
    return suite.detect_all(text);
}

}  // namespace xplat::detect
