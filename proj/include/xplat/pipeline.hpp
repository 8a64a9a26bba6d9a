#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "xplat/detectors.hpp"
#include "xplat/features.hpp"
#include "xplat/io.hpp"
#include "xplat/modeling.hpp"
#include "xplat/redactor.hpp"

namespace xplat::pipeline {

/// A stage failure; what() starts with the stage name.
class StageError : public std::runtime_error {
public:
    StageError(const std::string& stage, const std::string& cause)
        : std::runtime_error("stage " + stage + ": " + cause), stage_(stage) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

// --- redaction --------------------------------------------------------------

struct RedactionResult {
    std::vector<io::Document> sms;  // one document per finished non-structural entry
    redact::RedactorStats stats;
    std::size_t structural_entries = 0;
};

RedactionResult redact_keystrokes(const std::vector<redact::KeystrokeEvent>& events,
                                  const redact::RedactorConfig& config, const detect::DetectorSuite& suite);

// --- corpora ----------------------------------------------------------------

struct UserData {
    std::string user_id;
    features::UserCorpus facebook;
    features::UserCorpus sms;
    std::size_t words = 0;  // both platforms
};

struct Exclusion {
    std::string user_id;
    std::string reason;
};

struct Corpora {
    std::vector<UserData> users;  // analysed users, sorted by id
    std::vector<Exclusion> excluded;
};

/// Groups documents per user and applies the inclusion rules: posts on both
/// platforms and at least `min_words` words in total.
Corpora assemble(const std::vector<io::Document>& documents, std::size_t min_words);

// --- summary ----------------------------------------------------------------

struct Describe {
    double median = 0;
    double mean = 0;
    double sd = 0;
    bool sd_defined = false;  // false with fewer than two users (sd reported as 0)
};

Describe describe(const std::vector<double>& values);

struct PlatformSummary {
    features::Platform platform;
    std::size_t users = 0;
    Describe words;  // per user
    Describe posts;  // per user
};

std::vector<PlatformSummary> summarize(const Corpora& corpora);

// --- features ---------------------------------------------------------------

struct UserFeatures {
    features::FeatureVector ngrams[2];      // indexed by Platform
    features::FeatureVector categories[2];  // dictionary categories
};

struct FeatureSet {
    std::vector<std::string> users;
    std::vector<UserFeatures> per_user;
    std::vector<std::string> ngrams;      // kept after the user-frequency filter, sorted
    std::vector<std::string> categories;  // dictionary order
};

FeatureSet extract_features(const Corpora& corpora, const features::DictionarySpec* dictionary,
                            double min_user_fraction);

// --- differential analysis --------------------------------------------------

struct NgramDiff {
    std::string feature;
    double d = 0;  // Facebook minus SMS, paired over users
    bool d_degenerate = false;
    double p = 1;  // univariate logistic regression on the platform label
    bool separated = false;
    bool converged = true;
    bool significant = false;
    double freq_facebook = 0;
    double freq_sms = 0;
};

struct CategoryDiff {
    std::string category;
    double t = 0;
    double p = 1;
    double d = 0;
    bool degenerate = false;
    bool significant = false;
    double mean_facebook = 0;
    double mean_sms = 0;
};

/// Word-cloud datum: size follows |d|, darkness follows frequency.
struct CloudDatum {
    std::string ngram;
    double d = 0;
    double frequency = 0;  // mean relative frequency on `side`
    features::Platform side;
};

struct DiffReport {
    std::size_t users = 0;
    double alpha = 0.05;
    std::vector<NgramDiff> ngrams;
    std::vector<CategoryDiff> categories;
    std::vector<CloudDatum> cloud;  // FDR-significant n-grams only, largest |d| first
};

DiffReport differential(const FeatureSet& features, double alpha);

// --- models -----------------------------------------------------------------

struct ModelInputs {
    std::vector<std::string> users;
    std::vector<std::string> feature_names;
    Eigen::MatrixXd facebook;
    Eigen::MatrixXd sms;
    std::string kind;  // "ngrams" or "embeddings"
    Eigen::VectorXd nmf_shift;
    double nmf_objective = 0;
};

ModelInputs ngram_inputs(const FeatureSet& features);

/// NMF over the stacked Facebook and SMS embeddings of the given users.
ModelInputs embedding_inputs(const std::vector<std::string>& users, const io::EmbeddingTable& table, int k,
                             int iterations, std::uint64_t seed);

/// Outcome vectors aligned with `users`. Binary columns hold 0/1 or -1/+1
/// and become -1/+1 labels. Users without a row get NaN.
std::vector<model::Outcome> outcome_vectors(const std::vector<std::string>& users, const io::OutcomeTable& table,
                                            const std::set<std::string>& binary);

struct LexiconEval {
    std::string outcome;
    model::Metric metric = model::Metric::pearson;
    std::size_t n = 0;
    double facebook = 0;  // metric of the Facebook-based estimates
    double sms = 0;
    double delta_r = 0;
    double p = 1;
};

/// Applies pretrained lexica to each platform's n-gram frequencies and
/// compares how well the two estimates track the self-reports.
std::vector<LexiconEval> evaluate_lexica(const std::map<std::string, model::LexiconModel>& lexica,
                                         const FeatureSet& features, const std::vector<model::Outcome>& outcomes,
                                         std::size_t bootstrap_iterations, std::uint64_t seed);

/// Ridge models fitted on every user of one platform, as lexica.
std::map<std::string, model::LexiconModel> train_models(const ModelInputs& inputs, features::Platform platform,
                                                        const std::vector<model::Outcome>& outcomes,
                                                        const model::RidgeOptions& options);

struct ImportanceTable {
    std::string model;
    std::vector<model::Importance> rows;
};

std::vector<ImportanceTable> importance_tables(const std::map<std::string, model::LexiconModel>& models,
                                               const FeatureSet& features);

// --- serialization ----------------------------------------------------------

std::string lexica_csv(const std::map<std::string, model::LexiconModel>& models);

/// Report files produced by a command, as (file name, content).
using Files = std::vector<std::pair<std::string, std::string>>;

Files redaction_files(const RedactionResult& r, const Corpora* corpora);
Files summary_files(const std::vector<PlatformSummary>& s);
Files feature_files(const FeatureSet& f);
Files diff_files(const DiffReport& d);
Files evaluation_files(const model::EvalReport& e, const ModelInputs& inputs);
Files lexicon_eval_files(const std::vector<LexiconEval>& rows);
Files importance_files(const std::vector<ImportanceTable>& tables);

// --- commands ---------------------------------------------------------------

enum class Command { redact, summary, features, diff, train, evaluate, importance, pipeline };

std::string_view command_name(Command c);

/// Runs a command from a validated config. `pipeline` also writes a
/// manifest. Outputs are staged and only moved into config.output_dir when
/// every stage succeeded.
Files run(Command command, const io::RunConfig& config);

void write_outputs(const Files& files, const std::filesystem::path& dir);

/// Manifest with tool version, seeds, thresholds and SHA-256 digests of the
/// inputs and outputs.
std::string manifest_json(const io::RunConfig& config, const Files& outputs);

}  // namespace xplat::pipeline
