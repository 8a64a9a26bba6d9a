#include "xplat/features.hpp"

#include <algorithm>
#include <cmath>

#include "xplat/detectors.hpp"

namespace xplat::features {

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }
bool is_ws(unsigned char c) { return std::isspace(c) != 0; }

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool in(char c, std::string_view set) { return set.find(c) != std::string_view::npos; }

// Length of an emoticon starting at i, or 0.
std::size_t emoticon_at(std::string_view s, std::size_t i) {
    auto at = [&](std::size_t k) { return k < s.size() ? s[k] : '\0'; };
    if (i > 0 && is_word_byte(static_cast<unsigned char>(s[i - 1]))) return 0;
    std::size_t len = 0;
    if (at(i) == '<' && at(i + 1) == '3') {
        len = 2;
    } else if (in(at(i), ":;=")) {
        std::size_t k = i + 1;
        if (in(at(k), "-o'^*") && in(at(k + 1), ")](['dDpP/\\|}{@3*xX")) ++k;
        if (in(at(k), ")](['dDpP/\\|}{@3*xX")) len = k + 1 - i;
    } else if (in(at(i), ")(][")) {
        std::size_t k = i + 1;
        if (at(k) == '-') ++k;
        if (in(at(k), ":;=")) len = k + 1 - i;
    }
    if (len == 0) return 0;
    // letters as a mouth need a clean right edge (":p" but not ":path")
    if (is_word_byte(static_cast<unsigned char>(at(i + len)))) return 0;
    return len;
}

// End of a word starting at i: word bytes joined by inner apostrophes or hyphens.
std::size_t word_end(std::string_view s, std::size_t i) {
    std::size_t j = i;
    while (j < s.size()) {
        if (is_word_byte(static_cast<unsigned char>(s[j]))) {
            ++j;
        } else if ((s[j] == '\'' || s[j] == '-') && j > i && j + 1 < s.size() &&
                   is_word_byte(static_cast<unsigned char>(s[j + 1]))) {
            ++j;
        } else {
            break;
        }
    }
    return j;
}

std::string normalize_quotes(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text.compare(i, 3, "\xE2\x80\x99") == 0 || text.compare(i, 3, "\xE2\x80\x98") == 0) {
            out += '\'';
            i += 2;
        } else {
            out += text[i];
        }
    }
    return out;
}

}  // namespace

std::string_view platform_name(Platform p) { return p == Platform::facebook ? "facebook" : "sms"; }

Platform parse_platform(std::string_view name) {
    if (name == "facebook" || name == "fb") return Platform::facebook;
    if (name == "sms") return Platform::sms;
    throw std::invalid_argument("unknown platform: " + std::string(name));
}

std::vector<std::string> tokenize(std::string_view raw) {
    const std::string text = normalize_quotes(raw);
    const auto placeholders = detect::placeholder_regions(text);
    std::vector<std::string> tokens;
    std::size_t next_ph = 0;
    std::size_t i = 0;
    auto emit = [&](std::size_t from, std::size_t to) {
        std::string t(text, from, to - from);
        std::transform(t.begin(), t.end(), t.begin(), lower);
        tokens.push_back(std::move(t));
        i = to;
    };
    while (i < text.size()) {
        while (next_ph < placeholders.size() && placeholders[next_ph].first < i) ++next_ph;
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (is_ws(c)) {
            ++i;
        } else if (next_ph < placeholders.size() && placeholders[next_ph].first == i) {
            emit(i, placeholders[next_ph].second);
        } else if (auto e = emoticon_at(text, i)) {
            emit(i, i + e);
        } else if (is_word_byte(c)) {
            emit(i, word_end(text, i));
        } else if ((c == '#' || c == '@') && i + 1 < text.size() &&
                   is_word_byte(static_cast<unsigned char>(text[i + 1]))) {
            emit(i, word_end(text, i + 1));
        } else if (text.compare(i, 3, "...") == 0) {
            std::size_t j = i;
            while (j < text.size() && text[j] == '.') ++j;
            tokens.emplace_back("...");
            i = j;
        } else {
            emit(i, i + 1);
        }
    }
    return tokens;
}

bool is_placeholder(std::string_view token) {
    auto r = detect::placeholder_regions(token);
    return r.size() == 1 && r[0].first == 0 && r[0].second == token.size();
}

bool is_word(std::string_view token) {
    if (is_placeholder(token)) return true;
    return std::any_of(token.begin(), token.end(), [](char c) { return is_word_byte(static_cast<unsigned char>(c)); });
}

std::size_t word_count(const UserCorpus& corpus) {
    std::size_t n = 0;
    for (const auto& d : corpus.documents) {
        for (const auto& t : tokenize(d)) n += is_word(t) ? 1 : 0;
    }
    return n;
}

std::vector<std::vector<std::string>> modeling_segments(const std::vector<std::string>& documents) {
    std::vector<std::vector<std::string>> out;
    for (const auto& d : documents) {
        out.emplace_back();
        for (auto& t : tokenize(d)) {
            if (is_placeholder(t)) {
                if (!out.back().empty()) out.emplace_back();
            } else {
                out.back().push_back(std::move(t));
            }
        }
        if (out.back().empty()) out.pop_back();
    }
    return out;
}

FeatureVector extract_ngrams(const std::vector<std::vector<std::string>>& segments, const std::set<int>& orders) {
    FeatureVector out;
    for (int n : orders) {
        if (n < 1) throw std::invalid_argument("n-gram order must be positive");
        std::map<std::string, double> counts;
        double total = 0;
        for (const auto& seg : segments) {
            if (seg.size() < static_cast<std::size_t>(n)) continue;
            for (std::size_t i = 0; i + n <= seg.size(); ++i) {
                std::string key = seg[i];
                for (int k = 1; k < n; ++k) key += ' ' + seg[i + k];
                counts[key] += 1;
                total += 1;
            }
        }
        for (auto& [k, c] : counts) out[k] = c / total;
    }
    return out;
}

FeatureVector extract_ngrams(const std::vector<std::string>& tokens, const std::set<int>& orders) {
    return extract_ngrams(std::vector<std::vector<std::string>>{tokens}, orders);
}

int ngram_order(std::string_view feature) {
    return 1 + static_cast<int>(std::count(feature.begin(), feature.end(), ' '));
}

void DictionarySpec::add(const std::string& category, const std::string& entry) {
    if (category.empty()) throw DictionaryError("empty category name");
    if (entry.empty()) throw DictionaryError("empty entry in category " + category);
    const auto star = entry.find('*');
    if (star != std::string::npos && star + 1 != entry.size()) {
        throw DictionaryError("wildcard must be the last character: \"" + entry + "\" in " + category);
    }
    if (star == 0) throw DictionaryError("bare wildcard in category " + category);
    auto [it, fresh] = entries_.try_emplace(category);
    if (fresh) order_.push_back(category);
    std::string e = entry;
    std::transform(e.begin(), e.end(), e.begin(), lower);
    if (star != std::string::npos) {
        e.pop_back();
        it->second.prefixes.push_back(std::move(e));
    } else {
        it->second.literal.insert(std::move(e));
    }
}

DictionarySpec DictionarySpec::parse(std::string_view text) {
    DictionarySpec spec;
    std::string category;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        while (!line.empty() && is_ws(static_cast<unsigned char>(line.front()))) line.remove_prefix(1);
        while (!line.empty() && is_ws(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw DictionaryError("line " + std::to_string(line_no) + ": malformed category header");
            }
            category = std::string(line.substr(1, line.size() - 2));
            if (!spec.entries_.count(category)) {
                spec.entries_[category];
                spec.order_.push_back(category);
            }
            continue;
        }
        if (category.empty()) throw DictionaryError("line " + std::to_string(line_no) + ": entry before any category");
        try {
            spec.add(category, std::string(line));
        } catch (const DictionaryError& e) {
            throw DictionaryError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return spec;
}

bool DictionarySpec::matches(const std::string& category, std::string_view token) const {
    auto it = entries_.find(category);
    if (it == entries_.end()) return false;
    if (it->second.literal.count(token)) return true;
    return std::any_of(it->second.prefixes.begin(), it->second.prefixes.end(),
                       [&](const std::string& p) { return token.substr(0, p.size()) == p; });
}

FeatureVector extract_dictionary(const std::vector<std::string>& tokens, const DictionarySpec& spec) {
    FeatureVector out;
    for (const auto& c : spec.categories()) {
        std::size_t hits = 0;
        for (const auto& t : tokens) hits += spec.matches(c, t) ? 1 : 0;
        out[c] = tokens.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(tokens.size());
    }
    return out;
}

std::set<std::string> frequent_features(const std::vector<const FeatureVector*>& vectors, double min_fraction) {
    std::map<std::string, std::size_t> users;
    for (const auto* v : vectors) {
        for (const auto& [k, x] : *v) {
            if (x > 0) ++users[k];
        }
    }
    const double needed = min_fraction * static_cast<double>(vectors.size());
    std::set<std::string> out;
    for (const auto& [k, n] : users) {
        if (static_cast<double>(n) >= needed - 1e-12) out.insert(k);
    }
    return out;
}

}  // namespace xplat::features
