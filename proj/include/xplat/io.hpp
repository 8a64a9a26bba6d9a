#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "xplat/features.hpp"
#include "xplat/redactor.hpp"

namespace xplat::io {

/// Malformed input; the message names the file and line.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view bytes);

/// One JSON object per line: user_id, timestamp, app_id, current_text and
/// the optional booleans is_password / is_phone_field.
std::vector<redact::KeystrokeEvent> parse_keystrokes(std::string_view jsonl, const std::string& source = "keystrokes");

struct Document {
    std::string user_id;
    features::Platform platform = features::Platform::facebook;
    std::string text;
};

/// One JSON object per line: user_id, platform, text.
std::vector<Document> parse_corpus(std::string_view jsonl, const std::string& source = "corpus");
std::string corpus_jsonl(const std::vector<Document>& docs);

/// CSV keyed by a user_id column; empty cells are missing (NaN).
struct OutcomeTable {
    std::vector<std::string> columns;  // outcome names, file order
    std::map<std::string, std::vector<double>> rows;
};

OutcomeTable parse_outcomes(std::string_view csv, const std::string& source = "outcomes");

/// CSV "user_id,platform,e0,e1,...": one row per user and platform.
using EmbeddingTable = std::map<std::pair<std::string, features::Platform>, std::vector<double>>;
EmbeddingTable parse_embeddings(std::string_view csv, const std::string& source = "embeddings");

/// Splits one CSV record (double-quoted fields allowed).
std::vector<std::string> split_csv(const std::string& line);
std::string csv_field(std::string_view value);

// ---------------------------------------------------------------------------

struct RunConfig {
    std::filesystem::path keystrokes;
    std::filesystem::path facebook;
    std::filesystem::path outcomes;
    std::filesystem::path dictionary;
    std::filesystem::path lexica;
    std::filesystem::path embeddings;
    std::filesystem::path output_dir = "out";

    std::uint64_t seed = 1;
    double fdr_alpha = 0.05;
    std::size_t min_words = 500;
    double min_user_fraction = 0.05;
    double ridge_alpha = 1.0;
    std::size_t bootstrap_iterations = 10'000;
    std::set<std::string> allowed_apps;
    std::int64_t inactivity_timeout_ms = 60'000;
    bool redact_facebook = true;
    std::set<std::string> binary_outcomes = {"gender"};
    std::string model_features = "ngrams";  // or "embeddings"
    std::string cross_mode = "leave_one_out";  // or "full_source"
    int nmf_k = 128;
    int nmf_iterations = 500;

    /// Throws InputError on an out-of-range value or a missing input file.
    void validate() const;
};

/// "key = value" lines; '#' comments; values may be double-quoted. Relative
/// paths resolve against the config file's directory.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Applies one key/value pair, as from the config file.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value,
                      const std::filesystem::path& base_dir = {});

}  // namespace xplat::io
