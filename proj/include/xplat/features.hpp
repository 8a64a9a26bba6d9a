#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xplat::features {

enum class Platform { facebook, sms };

std::string_view platform_name(Platform p);
Platform parse_platform(std::string_view name);  // throws std::invalid_argument

/// Sparse feature id -> relative frequency.
using FeatureVector = std::map<std::string, double>;

/// All sanitized documents of one user on one platform.
struct UserCorpus {
    std::string user_id;
    Platform platform = Platform::facebook;
    std::vector<std::string> documents;
};

/// Lowercased social-media tokens. Emoticons, contractions, hashtags,
/// mentions and "<placeholder>" redaction tags stay whole; other
/// punctuation is split into single characters ("..." is kept together).
std::vector<std::string> tokenize(std::string_view text);

bool is_placeholder(std::string_view token);

/// A token that counts as a written word (placeholders included).
bool is_word(std::string_view token);

std::size_t word_count(const UserCorpus& corpus);

/// Token runs used for feature extraction: one per document, further cut at
/// redaction placeholders, which are dropped.
std::vector<std::vector<std::string>> modeling_segments(const std::vector<std::string>& documents);

/// n-gram relative frequencies: each count divided by the total number of
/// n-grams of the same order. n-grams never cross segment boundaries.
FeatureVector extract_ngrams(const std::vector<std::vector<std::string>>& segments,
                             const std::set<int>& orders = {1, 2, 3});
FeatureVector extract_ngrams(const std::vector<std::string>& tokens, const std::set<int>& orders = {1, 2, 3});

/// Number of tokens joined in a feature id ("a b" -> 2).
int ngram_order(std::string_view feature);

class DictionaryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Category lexicon. An entry is a literal word or a prefix ending in '*'.
class DictionarySpec {
public:
    void add(const std::string& category, const std::string& entry);  // throws DictionaryError

    /// "[category]" header lines followed by one entry per line; '#' starts
    /// a comment.
    static DictionarySpec parse(std::string_view text);

    const std::vector<std::string>& categories() const { return order_; }
    bool matches(const std::string& category, std::string_view token) const;

private:
    struct Entries {
        std::set<std::string, std::less<>> literal;
        std::vector<std::string> prefixes;
    };
    std::vector<std::string> order_;
    std::map<std::string, Entries> entries_;
};

/// Category -> (matching tokens / all tokens). A token counts once in each
/// category it matches.
FeatureVector extract_dictionary(const std::vector<std::string>& tokens, const DictionarySpec& spec);

/// Features present (non-zero) for at least `min_fraction` of the vectors.
std::set<std::string> frequent_features(const std::vector<const FeatureVector*>& vectors, double min_fraction);

}  // namespace xplat::features
