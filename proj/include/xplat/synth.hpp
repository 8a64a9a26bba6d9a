#pragma once

// Synthetic data: simulated typing sessions and the bundled multi-user
// fixture used for end-to-end runs.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "xplat/redactor.hpp"

namespace xplat::synth {

struct TypedEntry {
    std::string target;
    std::vector<std::string> pii;                // embedded PII strings, in order
    std::vector<std::string> raw_snapshots;      // every non-empty field state
    std::vector<redact::KeystrokeEvent> events;  // ends with the clearing event
};

struct SimOptions {
    double typo_rate = 0.06;
    double backspace_burst_rate = 0.03;
    double autocorrect_rate = 0.15;
    int min_words = 3;
    int max_words = 9;
    int min_pii = 1;
    int max_pii = 2;
};

/// A phone number, SSN, email address or bare 10-digit number.
std::string random_pii(std::mt19937_64& rng);

/// Types `words` (PII strings marked in `is_pii`) as one entry starting at
/// `t0`. Timestamps advance 50..400 ms per keystroke; the last event clears
/// the field.
TypedEntry type_entry(std::mt19937_64& rng, const std::vector<std::string>& words, const std::vector<bool>& is_pii,
                      const std::string& user, const std::string& app, std::int64_t t0, const SimOptions& options = {});

/// Random filler words with embedded PII, typed with type_entry.
TypedEntry simulate_entry(std::mt19937_64& rng, const std::string& user, const std::string& app, std::int64_t t0,
                          const SimOptions& options = {});

struct FixtureOptions {
    int users = 20;
    std::uint64_t seed = 20240521;
    int facebook_posts = 60;   // per user
    int sms_entries = 30;      // per user
    int embedding_dim = 48;
};

/// Contents of every input file of a fixture, keyed by file name.
struct Fixture {
    std::vector<std::pair<std::string, std::string>> files;
};

/// Deterministic multi-user fixture: keystroke log, Facebook posts,
/// outcomes, a category dictionary, lexica, embeddings and a run config.
/// Outcomes are planted in platform-specific vocabulary.
Fixture make_fixture(const FixtureOptions& options = {});

void write_fixture(const Fixture& fixture, const std::filesystem::path& dir);

}  // namespace xplat::synth
