#include "xplat/redactor.hpp"

#include <algorithm>
#include <cctype>

namespace xplat::redact {

namespace {

// How far back a trailing fragment may start and still be considered.
constexpr std::size_t kMaxFragment = 64;

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool has_format_evidence(std::string_view fragment) {
    return std::any_of(fragment.begin(), fragment.end(), [](char c) {
        auto u = static_cast<unsigned char>(c);
        return !std::isalpha(u) && !std::isspace(u);
    });
}

std::size_t whitespace_end(std::string_view s, std::size_t from) {
    for (std::size_t i = from; i < s.size(); ++i) {
        if (is_space(s[i])) return i;
    }
    return s.size();
}

std::vector<TrackedSpan> track(const SpanList& spans, bool provisional) {
    std::vector<TrackedSpan> out;
    out.reserve(spans.size());
    for (const auto& s : spans) out.push_back({s, provisional});
    return out;
}

}  // namespace

std::string_view structural_tag(Structural s) {
    switch (s) {
        case Structural::phone: return "phone";
        case Structural::password: return "password";
        case Structural::none: break;
    }
    return "";
}

BoundarySet::BoundarySet(std::string_view chars) {
    for (char c : chars) table_[static_cast<unsigned char>(c)] = true;
}

std::size_t common_prefix(std::string_view a, std::string_view b) {
    auto n = std::min(a.size(), b.size());
    std::size_t i = 0;
    while (i < n && a[i] == b[i]) ++i;
    return i;
}

std::optional<TokenRange> detect_token_completion(std::string_view previous, std::string_view current,
                                                  const BoundarySet& boundaries) {
    if (current.size() < 2) return std::nullopt;
    const std::size_t appended_from = common_prefix(previous, current);
    const std::size_t last = current.size() - 1;
    if (last < appended_from) return std::nullopt;  // pure deletion
    if (!boundaries.contains(current[last]) || boundaries.contains(current[last - 1])) return std::nullopt;
    std::size_t start = last;
    while (start > 0 && !boundaries.contains(current[start - 1])) --start;
    return TokenRange{start, last};
}

std::optional<RedactionSpan> project_span(const RedactionSpan& detection, std::string_view snapshot,
                                          std::size_t common) {
    if (detection.start > common || detection.start >= snapshot.size()) return std::nullopt;
    const bool word_continues = common == detection.end && common < snapshot.size() && !is_space(snapshot[common]);
    if (common >= detection.end && !word_continues) return RedactionSpan{detection.start, detection.end, detection.tags};
    if (common >= snapshot.size()) return RedactionSpan{detection.start, snapshot.size(), detection.tags};
    // the snapshot diverges inside the detection: cover the diverging word too
    auto end = std::max(std::min(detection.end, snapshot.size()), whitespace_end(snapshot, common));
    return RedactionSpan{detection.start, end, detection.tags};
}

std::vector<TrackedSpan> overlay_spans(const std::vector<TrackedSpan>& existing,
                                       const std::vector<TrackedSpan>& incoming) {
    struct Item {
        TrackedSpan span;
        bool incoming;
    };
    std::vector<Item> items;
    items.reserve(existing.size() + incoming.size());
    for (const auto& s : existing) items.push_back({s, false});
    for (const auto& s : incoming) items.push_back({s, true});
    std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
        return a.span.span.start < b.span.span.start;
    });

    std::vector<TrackedSpan> out;
    std::size_t i = 0;
    while (i < items.size()) {
        std::size_t j = i + 1;
        std::size_t group_end = items[i].span.span.end;
        while (j < items.size() && items[j].span.span.start < group_end) {
            group_end = std::max(group_end, items[j].span.span.end);
            ++j;
        }
        if (j == i + 1) {
            out.push_back(items[i].span);
            i = j;
            continue;
        }
        bool plain_overlay = true;
        for (std::size_t k = i; k < j && plain_overlay; ++k) {
            if (items[k].incoming) continue;
            bool covered = false;
            for (std::size_t m = i; m < j; ++m) {
                if (items[m].incoming && items[m].span.span.contains(items[k].span.span)) covered = true;
            }
            plain_overlay = covered;
        }
        std::size_t incoming_count = 0;
        for (std::size_t k = i; k < j; ++k) incoming_count += items[k].incoming ? 1 : 0;
        if (plain_overlay && incoming_count > 0) {
            for (std::size_t k = i; k < j; ++k) {
                if (items[k].incoming) out.push_back(items[k].span);
            }
        } else {
            TrackedSpan merged{{items[i].span.span.start, group_end, {}}, true};
            for (std::size_t k = i; k < j; ++k) {
                merged.span.tags.insert(items[k].span.span.tags.begin(), items[k].span.span.tags.end());
                merged.provisional = merged.provisional && items[k].span.provisional;
            }
            out.push_back(std::move(merged));
        }
        i = j;
    }
    return out;
}

std::vector<TrackedSpan> provisional_spans(std::string_view text, const DetectorSuite& suite,
                                           const std::vector<TrackedSpan>* previous_spans,
                                           std::string_view previous_text) {
    auto complete = track(suite.detect_all(text), false);

    std::optional<TrackedSpan> guess;
    const std::size_t lowest = text.size() > kMaxFragment ? text.size() - kMaxFragment : 0;
    for (std::size_t p = lowest; p < text.size() && !guess; ++p) {
        if (is_space(text[p]) || (p > 0 && !is_space(text[p - 1]))) continue;
        auto fragment = text.substr(p);
        TagSet kept;
        for (const auto& d : suite.detectors()) {
            auto tags = d->prefix_tags(text, p);
            if (tags.empty()) continue;
            // letters alone are no evidence of a format; entity guesses need a few characters
            bool evidence = d->priority() == detect::Priority::entity ? fragment.size() >= 3
                                                                      : has_format_evidence(fragment);
            if (evidence) kept.merge(tags);
        }
        if (!kept.empty()) guess = TrackedSpan{{p, text.size(), std::move(kept)}, true};
    }

    // a guess stays attached to a fragment that is still being edited
    if (previous_spans != nullptr) {
        for (const auto& ps : *previous_spans) {
            if (!ps.provisional || ps.span.end != previous_text.size()) continue;
            const auto p = ps.span.start;
            if (text.size() <= p || common_prefix(previous_text, text) < p) continue;
            if (guess && guess->span.start <= p) {
                guess->span.tags.insert(ps.span.tags.begin(), ps.span.tags.end());
                continue;
            }
            TagSet tags = ps.span.tags;
            if (guess) tags.insert(guess->span.tags.begin(), guess->span.tags.end());
            guess = TrackedSpan{{p, text.size(), std::move(tags)}, true};
        }
    }

    if (!guess) return complete;
    return overlay_spans({*guess}, complete);
}

void rollback_stage1(EntryBuffer& buffer, TokenRange token, const SpanList& detections,
                     const DetectorSuite& suite) {
    if (buffer.history.empty()) return;
    const std::string current = buffer.history.back().raw;
    const std::size_t through = std::min(token.end + 1, current.size());
    const std::string_view completed = std::string_view(current).substr(0, through);

    std::size_t rollback_start = token.start;
    SpanList relevant;
    for (const auto& d : detections) {
        if (d.end > token.start && d.start < through) {
            relevant.push_back(d);
            rollback_start = std::min(rollback_start, d.start);
        }
    }

    for (auto& snap : buffer.history) {
        if (snap.raw.size() <= rollback_start) continue;
        if (std::string_view(snap.raw).substr(0, rollback_start) != completed.substr(0, rollback_start)) continue;
        const auto common = common_prefix(snap.raw, current);
        const bool is_prefix = common == snap.raw.size();

        // "or lack thereof": drop guesses the completed token rules out
        std::vector<TrackedSpan> kept;
        for (const auto& ts : snap.spans) {
            if (ts.provisional && is_prefix && ts.span.end > rollback_start && ts.span.start < through) {
                auto still = suite.possible_prefix_tags(completed, ts.span.start);
                bool alive = std::any_of(ts.span.tags.begin(), ts.span.tags.end(),
                                         [&](const std::string& t) { return still.count(t) > 0; });
                if (!alive) continue;
            }
            kept.push_back(ts);
        }

        std::vector<TrackedSpan> projected;
        for (const auto& d : relevant) {
            if (auto p = project_span(d, snap.raw, common)) projected.push_back({*p, false});
        }
        snap.spans = overlay_spans(kept, projected);
    }
    buffer.token_boundary = token.end;
}

SanitizedEntry finalize_entry(EntryBuffer& buffer, const SpanList& final_detections, bool keep_snapshots) {
    if (!buffer.active()) throw EmptyBufferError("finalize_entry: buffer for " + buffer.key.user_id + "/" +
                                                 buffer.key.app_id + " is empty");
    SanitizedEntry entry;
    entry.key = buffer.key;
    entry.start_timestamp = buffer.start_timestamp;
    entry.end_timestamp = buffer.last_timestamp;
    entry.structural = buffer.structural;

    if (buffer.structural != Structural::none) {
        const std::string tag(structural_tag(buffer.structural));
        entry.final_text = detect::placeholder({tag});
        entry.spans = {{0, entry.final_text.size(), {tag}}};
    } else {
        const std::string final_raw = buffer.history.back().raw;
        for (auto& snap : buffer.history) {
            const auto common = common_prefix(snap.raw, final_raw);
            std::vector<TrackedSpan> projected;
            for (const auto& d : final_detections) {
                if (auto p = project_span(d, snap.raw, common)) projected.push_back({*p, false});
            }
            if (common == snap.raw.size()) {
                // every character also survives into the final text, whose detections are authoritative
                snap.spans = std::move(projected);
            } else {
                std::vector<TrackedSpan> diverging;
                for (const auto& ts : snap.spans) {
                    if (ts.span.end > common) diverging.push_back(ts);
                }
                snap.spans = overlay_spans(diverging, projected);
            }
        }
        entry.final_text = detect::materialize(final_raw, final_detections);
        entry.spans = detect::materialized_spans(final_detections);
        if (keep_snapshots) {
            for (std::size_t i = 0; i + 1 < buffer.history.size(); ++i) {
                const auto& snap = buffer.history[i];
                SpanList plain;
                for (const auto& ts : snap.spans) plain.push_back(ts.span);
                entry.snapshots.push_back({snap.timestamp, detect::materialize(snap.raw, plain), plain});
            }
        }
    }

    buffer.history.clear();
    buffer.structural = Structural::none;
    buffer.token_boundary = 0;
    return entry;
}

RedactedText redact_string(std::string_view text, const DetectorSuite& suite) {
    auto spans = suite.detect_all(text);
    return {detect::materialize(text, spans), detect::materialized_spans(spans)};
}

// ---------------------------------------------------------------------------

Redactor::Redactor(DetectorSuite suite, RedactorConfig config)
    : suite_(std::move(suite)), config_(std::move(config)), boundaries_(config_.boundary_chars) {}

const EntryBuffer* Redactor::buffer(const StreamKey& key) const {
    auto it = streams_.find(key);
    return it == streams_.end() ? nullptr : &it->second.entry;
}

SanitizedEntry Redactor::finish(EntryBuffer& entry) {
    SpanList final_detections;
    if (entry.structural == Structural::none) final_detections = suite_.detect_all(entry.history.back().raw);
    ++stats_.entries;
    return finalize_entry(entry, final_detections, config_.keep_snapshots);
}

std::vector<SanitizedEntry> Redactor::ingest(const KeystrokeEvent& event) {
    std::vector<SanitizedEntry> out;
    if (!config_.allowed_apps.empty() && config_.allowed_apps.count(event.app_id) == 0) {
        ++stats_.dropped_app;
        return out;
    }
    StreamKey key{event.user_id, event.app_id};
    auto& stream = streams_[key];
    if (stream.seen && event.timestamp < stream.last_timestamp) {
        throw OrderingError("event for " + key.user_id + "/" + key.app_id + " at " +
                            std::to_string(event.timestamp) + " precedes " +
                            std::to_string(stream.last_timestamp));
    }
    ++stats_.events;
    stream.seen = true;
    stream.last_timestamp = event.timestamp;
    auto& entry = stream.entry;
    entry.key = key;

    if (entry.active() && event.timestamp - entry.last_timestamp > config_.inactivity_timeout_ms) {
        out.push_back(finish(entry));
    }
    if (event.current_text.empty()) {
        if (entry.active()) {
            entry.last_timestamp = event.timestamp;
            out.push_back(finish(entry));
        }
        return out;
    }
    if (!entry.active()) entry.start_timestamp = event.timestamp;
    entry.last_timestamp = event.timestamp;

    Structural flag = event.is_password ? Structural::password
                      : event.is_phone_field ? Structural::phone
                                             : Structural::none;
    if (flag != Structural::none || entry.structural != Structural::none) {
        entry.structural = std::max(entry.structural, flag);
        entry.history.clear();  // structural entries retain no content
        return out;
    }

    const Snapshot* previous = entry.history.empty() ? nullptr : &entry.history.back();
    Snapshot snap;
    snap.timestamp = event.timestamp;
    snap.raw = event.current_text;
    snap.spans = previous ? provisional_spans(snap.raw, suite_, &previous->spans, previous->raw)
                          : provisional_spans(snap.raw, suite_);
    const std::string previous_raw = previous ? previous->raw : std::string();
    entry.history.push_back(std::move(snap));

    if (auto token = detect_token_completion(previous_raw, event.current_text, boundaries_)) {
        ++stats_.token_completions;
        // an edit may complete text further back than the trailing token
        const auto edit_from = common_prefix(previous_raw, event.current_text);
        std::size_t word_start = std::min(edit_from, token->start);
        while (word_start > 0 && !boundaries_.contains(event.current_text[word_start - 1])) --word_start;
        rollback_stage1(entry, {word_start, token->end}, suite_.detect_all(event.current_text), suite_);
    }
    return out;
}

std::vector<SanitizedEntry> Redactor::flush() {
    std::vector<SanitizedEntry> out;
    for (auto& [key, stream] : streams_) {
        if (stream.entry.active()) out.push_back(finish(stream.entry));
    }
    return out;
}

}  // namespace xplat::redact
