#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "xplat/detectors.hpp"

namespace xplat::redact {

using detect::DetectorSuite;
using detect::RedactionSpan;
using detect::SpanList;
using detect::TagSet;

/// One logged snapshot of a text field.
struct KeystrokeEvent {
    std::string user_id;
    std::int64_t timestamp = 0;  // ms since epoch
    std::string app_id;
    std::string current_text;
    bool is_password = false;
    bool is_phone_field = false;
};

struct StreamKey {
    std::string user_id;
    std::string app_id;

    auto operator<=>(const StreamKey&) const = default;
};

enum class Structural { none, phone, password };

std::string_view structural_tag(Structural s);

/// A span plus whether it only reflects a possible-prefix guess.
struct TrackedSpan {
    RedactionSpan span;
    bool provisional = false;

    friend bool operator==(const TrackedSpan&, const TrackedSpan&) = default;
};

struct Snapshot {
    std::int64_t timestamp = 0;
    std::string raw;
    std::vector<TrackedSpan> spans;  // sorted, non-overlapping
};

/// Per-stream history of the entry being typed.
struct EntryBuffer {
    StreamKey key;
    std::vector<Snapshot> history;
    std::size_t token_boundary = 0;  // end of the last completed token
    Structural structural = Structural::none;
    std::int64_t start_timestamp = 0;
    std::int64_t last_timestamp = 0;

    bool active() const { return structural != Structural::none || !history.empty(); }
};

struct RedactedSnapshot {
    std::int64_t timestamp = 0;
    std::string text;
    SpanList source_spans;  // redacted ranges of the raw snapshot; kept in memory only

    friend bool operator==(const RedactedSnapshot&, const RedactedSnapshot&) = default;
};

struct SanitizedEntry {
    StreamKey key;
    std::int64_t start_timestamp = 0;
    std::int64_t end_timestamp = 0;
    std::string final_text;
    SpanList spans;  // placeholder positions within final_text
    std::vector<RedactedSnapshot> snapshots;
    Structural structural = Structural::none;

    friend bool operator==(const SanitizedEntry&, const SanitizedEntry&) = default;
};

class OrderingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyBufferError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Characters that terminate a token.
class BoundarySet {
public:
    BoundarySet() : BoundarySet(" \t\n\r\v\f.,!?;:") {}
    explicit BoundarySet(std::string_view chars);

    bool contains(char c) const { return table_[static_cast<unsigned char>(c)]; }

private:
    bool table_[256] = {};
};

struct TokenRange {
    std::size_t start = 0;
    std::size_t end = 0;

    friend bool operator==(const TokenRange&, const TokenRange&) = default;
};

/// Range of the trailing token completed by the edit `previous` -> `current`,
/// i.e. when the edit appends a boundary character right after a
/// non-boundary one. Replacements count as delete-then-append.
std::optional<TokenRange> detect_token_completion(std::string_view previous, std::string_view current,
                                                  const BoundarySet& boundaries = BoundarySet());

std::size_t common_prefix(std::string_view a, std::string_view b);

/// Where a detection on the reference text lands inside `snapshot`, given
/// their common prefix length. Empty when the snapshot never reaches it.
std::optional<RedactionSpan> project_span(const RedactionSpan& detection, std::string_view snapshot,
                                          std::size_t common);

/// Overlays `incoming` on `existing`. An existing span wholly inside an
/// incoming one takes the incoming tags; partially overlapping spans merge
/// into one span carrying every tag.
std::vector<TrackedSpan> overlay_spans(const std::vector<TrackedSpan>& existing,
                                       const std::vector<TrackedSpan>& incoming);

/// Spans for a fresh snapshot: complete detections plus a provisional span
/// over a trailing fragment that could still become PII.
std::vector<TrackedSpan> provisional_spans(std::string_view text, const DetectorSuite& suite,
                                           const std::vector<TrackedSpan>* previous_spans = nullptr,
                                           std::string_view previous_text = {});

/// Stage one: propagate the detections found for the just-completed token
/// back through earlier snapshots, and clear provisional guesses the token
/// disproved.
void rollback_stage1(EntryBuffer& buffer, TokenRange token, const SpanList& detections,
                     const DetectorSuite& suite);

/// Stage two: overlay the full-entry detections on every retained snapshot
/// and emit the entry. Empties the buffer.
SanitizedEntry finalize_entry(EntryBuffer& buffer, const SpanList& final_detections, bool keep_snapshots);

struct RedactedText {
    std::string text;
    SpanList spans;  // placeholder positions within text
};

/// Redacts a complete document.
RedactedText redact_string(std::string_view text, const DetectorSuite& suite);

struct RedactorConfig {
    std::string boundary_chars = " \t\n\r\v\f.,!?;:";
    std::int64_t inactivity_timeout_ms = 60'000;
    bool keep_snapshots = false;
    std::set<std::string> allowed_apps;  // empty admits every app
};

struct RedactorStats {
    std::size_t events = 0;
    std::size_t dropped_app = 0;
    std::size_t entries = 0;
    std::size_t token_completions = 0;
};

/// Streaming redactor over many (user, app) streams.
class Redactor {
public:
    explicit Redactor(DetectorSuite suite, RedactorConfig config = {});

    /// Throws OrderingError when the timestamp goes backwards within a stream.
    std::vector<SanitizedEntry> ingest(const KeystrokeEvent& event);

    /// Finalizes every open entry, in stream-key order.
    std::vector<SanitizedEntry> flush();

    const EntryBuffer* buffer(const StreamKey& key) const;
    const RedactorStats& stats() const { return stats_; }
    const RedactorConfig& config() const { return config_; }
    const DetectorSuite& suite() const { return suite_; }

private:
    struct Stream {
        EntryBuffer entry;
        bool seen = false;
        std::int64_t last_timestamp = 0;
    };

    SanitizedEntry finish(EntryBuffer& entry);

    DetectorSuite suite_;
    RedactorConfig config_;
    BoundarySet boundaries_;
    std::map<StreamKey, Stream> streams_;
    RedactorStats stats_;
};

}  // namespace xplat::redact
