#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xplat::detect {

/// Ordered set of PII labels carried by one redacted region. More than one
/// label makes it a compound tag.
using TagSet = std::set<std::string>;

/// Half-open character range [start, end) of a string plus its tags.
struct RedactionSpan {
    std::size_t start = 0;
    std::size_t end = 0;
    TagSet tags;

    std::size_t length() const { return end - start; }
    bool overlaps(const RedactionSpan& other) const {
        return start < other.end && other.start < end;
    }
    bool contains(const RedactionSpan& other) const {
        return start <= other.start && other.end <= end;
    }
    bool is_compound() const { return tags.size() > 1; }

    friend bool operator==(const RedactionSpan&, const RedactionSpan&) = default;
};

using SpanList = std::vector<RedactionSpan>;

/// "<a|b>" rendering of a tag set.
std::string placeholder(const TagSet& tags);

/// Replaces every span by its placeholder. Spans must be sorted and
/// non-overlapping; otherwise std::invalid_argument.
std::string materialize(std::string_view text, const SpanList& spans);

/// Positions of the redacted placeholders inside the materialized string.
SpanList materialized_spans(const SpanList& spans);

/// Regions of `text` that already hold a placeholder such as "<email>".
std::vector<std::pair<std::size_t, std::size_t>> placeholder_regions(std::string_view text);

class DetectorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Lower priority wins when detections overlap.
enum class Priority : int { structural = 0, regex = 1, entity = 2 };

class Detector {
public:
    virtual ~Detector() = default;

    virtual const std::string& name() const = 0;
    virtual Priority priority() const = 0;

    /// Complete matches inside `text`.
    virtual SpanList match(std::string_view text) const = 0;

    /// True when text[from, end) could still grow into a complete match that
    /// starts at `from`. Never false for a true prefix of a matchable string.
    virtual bool possible_prefix(std::string_view text, std::size_t from) const = 0;

    /// Labels a completed match starting at `from` could carry.
    virtual TagSet prefix_tags(std::string_view text, std::size_t from) const {
        return possible_prefix(text, from) ? TagSet{name()} : TagSet{};
    }
};

struct CatalogueEntry {
    std::string label;
    std::string pattern;
    std::size_t min_complete_length = 1;
};

/// One catalogue line compiled with Boost.Regex (perl syntax).
class RegexDetector final : public Detector {
public:
    explicit RegexDetector(CatalogueEntry entry);
    ~RegexDetector() override;
    RegexDetector(RegexDetector&&) noexcept;
    RegexDetector& operator=(RegexDetector&&) noexcept;

    const std::string& name() const override { return entry_.label; }
    Priority priority() const override { return Priority::regex; }
    SpanList match(std::string_view text) const override;
    bool possible_prefix(std::string_view text, std::size_t from) const override;

    const CatalogueEntry& entry() const { return entry_; }

private:
    struct Compiled;
    CatalogueEntry entry_;
    std::unique_ptr<Compiled> compiled_;
};

/// The built-in common-format catalogue. Its bytes are identical to
/// data/regex_catalogue.tsv.
std::string_view default_catalogue_text();

/// The built-in gazetteer, identical to data/gazetteer.tsv.
std::string_view default_gazetteer_text();

/// Parses `label<TAB>pattern[<TAB>min_length]` lines; '#' starts a comment.
std::vector<CatalogueEntry> parse_catalogue(std::string_view text);

/// Case-folded multi-word surface forms per label, matched longest-first.
class Gazetteer {
public:
    void add(const std::string& label, std::string_view surface_form);

    /// `label<TAB>surface form` per line.
    static Gazetteer parse(std::string_view text);

    bool empty() const { return forms_.empty(); }
    std::size_t size() const { return forms_.size(); }

    struct Hit {
        std::size_t token_count;
        std::string label;
    };
    /// Longest entry whose tokens equal words[from, from + n).
    std::vector<Hit> longest_at(const std::vector<std::string>& words, std::size_t from) const;
    /// Labels of surface forms starting with the folded, space-joined `key`.
    TagSet labels_with_prefix(const std::string& key) const;

private:
    // surface form (space-joined folded tokens) -> labels
    std::map<std::string, std::set<std::string>> forms_;
    std::size_t max_tokens_ = 0;
};

/// Named-entity stage. Implementations label spans with entity categories.
class EntityRecognizer : public Detector {
public:
    Priority priority() const override { return Priority::entity; }
};

/// Gazetteer lookup over word tokens. Entries labelled "person" only match
/// when every word is capitalized in the text.
class GazetteerRecognizer final : public EntityRecognizer {
public:
    explicit GazetteerRecognizer(Gazetteer gazetteer);

    const std::string& name() const override { return name_; }
    SpanList match(std::string_view text) const override;
    bool possible_prefix(std::string_view text, std::size_t from) const override;
    TagSet prefix_tags(std::string_view text, std::size_t from) const override;

private:
    std::string name_ = "entity";
    Gazetteer gazetteer_;
};

/// Ordered detector collection with overlap resolution.
class DetectorSuite {
public:
    DetectorSuite() = default;

    void add(std::shared_ptr<const Detector> detector);
    const std::vector<std::shared_ptr<const Detector>>& detectors() const { return detectors_; }

    /// Union of detector spans resolved by priority, then length, then
    /// leftmost, then label. Nested matches lose to the winner; partially
    /// overlapping ones merge into a compound span. Spans touching an existing
    /// placeholder are dropped.
    SpanList detect_all(std::string_view text) const;

    /// Labels of detectors for which text[from, end) is a possible prefix.
    TagSet possible_prefix_tags(std::string_view text, std::size_t from) const;

    /// Regex catalogue plus an optional gazetteer recognizer.
    static DetectorSuite standard(const std::vector<CatalogueEntry>& catalogue,
                                  const Gazetteer* gazetteer = nullptr);
    /// Built-in catalogue and built-in gazetteer.
    static DetectorSuite standard();

private:
    std::vector<std::shared_ptr<const Detector>> detectors_;
};

/// Regex detectors only, over the built-in catalogue.
SpanList match_common_formats(std::string_view text);

/// Lower-cases ASCII letters.
std::string fold_case(std::string_view text);

}  // namespace xplat::detect
