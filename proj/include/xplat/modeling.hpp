#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "xplat/features.hpp"

namespace xplat::model {

using features::FeatureVector;

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sparse linear model over named features.
struct LexiconModel {
    std::string outcome;
    double intercept = 0;
    std::map<std::string, double> weights;
};

/// sum_f w_f * freq(f) + intercept; features missing on either side add 0.
double apply_lexicon(const LexiconModel& model, const FeatureVector& features);

/// Reads a "term,category,weight" CSV (header required). The term
/// "_intercept" sets the intercept of its category. One model per category.
std::map<std::string, LexiconModel> parse_lexica(std::string_view csv);

struct RidgeOptions {
    double alpha = 1.0;
    bool fit_intercept = true;  // centre X and y on the training rows
    bool scale = true;          // divide columns by their training sd
};

/// A fitted ridge model expressed on the raw feature scale.
struct RidgeModel {
    Eigen::VectorXd weights;
    double intercept = 0;

    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
    double predict_row(const Eigen::MatrixXd& x, Eigen::Index row) const;
};

/// Minimises |y - b - Zw|^2 + alpha |w|^2 with Z the (optionally
/// standardised) columns of X. Uses the dual form when X is wide.
RidgeModel ridge_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const RidgeOptions& options = {});

LexiconModel to_lexicon(const RidgeModel& model, const std::vector<std::string>& feature_names,
                        const std::string& outcome);

enum class Metric { pearson, accuracy };

/// Fraction of predictions with the right sign (+1 / -1 labels). A zero
/// prediction counts as `tie_sign`.
double sign_accuracy(const Eigen::VectorXd& predictions, const Eigen::VectorXd& labels, double tie_sign);

/// +1 when non-negative labels are at least as common as negative ones.
double majority_sign(const Eigen::VectorXd& labels);

struct LoocvResult {
    Eigen::VectorXd predictions;
    double metric = 0;
    std::size_t folds = 0;
    std::size_t skipped = 0;
};

/// Held-out prediction for each row from a model fit on the other rows.
/// The closed-form hat-matrix shortcut is used when `shortcut` is set;
/// it is exact only for unscaled fits (RidgeOptions::scale == false).
LoocvResult loocv_evaluate(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const RidgeOptions& options,
                           Metric metric, bool shortcut = false);

/// Diagonal-based leave-one-out predictions of the ridge smoother.
Eigen::VectorXd loocv_shortcut_predictions(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                           const RidgeOptions& options);

/// Indices of the training rows used for fold `held_out`.
std::vector<Eigen::Index> fold_rows(Eigen::Index n, Eigen::Index held_out);

// ---------------------------------------------------------------------------
// Cross-domain evaluation

enum class CrossMode {
    leave_one_out,  // source model for user i never saw user i
    full_source,    // source model trained on every source user
};

struct Outcome {
    std::string name;
    Eigen::VectorXd values;  // NaN marks a missing self-report
    bool binary = false;     // +1 / -1 labels scored by sign accuracy
};

struct Cell {
    std::string train;  // "facebook" / "sms"
    std::string test;
    double metric = 0;
    std::size_t n = 0;
    Eigen::VectorXd predictions;
};

struct Comparison {
    std::string train;  // cells sharing this training platform are compared
    double delta_r = 0;
    double p = 1;
    std::size_t skipped = 0;
};

struct OutcomeReport {
    std::string outcome;
    Metric metric = Metric::pearson;
    std::vector<Cell> cells;  // FB/FB, FB/SMS, SMS/SMS, SMS/FB
    std::vector<Comparison> comparisons;

    const Cell& cell(std::string_view train, std::string_view test) const;
};

struct EvalReport {
    std::vector<std::string> user_ids;
    RidgeOptions ridge;
    CrossMode mode = CrossMode::leave_one_out;
    std::size_t bootstrap_iterations = 0;
    std::uint64_t seed = 0;
    std::vector<OutcomeReport> outcomes;
};

struct CrossDomainOptions {
    RidgeOptions ridge;
    CrossMode mode = CrossMode::leave_one_out;
    std::size_t bootstrap_iterations = 10'000;
    std::uint64_t seed = 1;
};

/// Fills the four train/test cells for every outcome. Rows of both matrices
/// are the same users in the same order.
EvalReport cross_domain_matrix(const std::vector<std::string>& user_ids, const Eigen::MatrixXd& facebook,
                               const Eigen::MatrixXd& sms, const std::vector<Outcome>& outcomes,
                               const CrossDomainOptions& options = {});

/// Throws ModelError naming the users present on only one side.
void require_same_users(const std::vector<std::string>& a, const std::vector<std::string>& b);

// ---------------------------------------------------------------------------
// Feature importance

enum class Quadrant {
    A,     // positive weight, more frequent on Facebook
    B,     // positive weight, more frequent in SMS
    C,     // negative weight, more frequent on Facebook
    D,     // negative weight, more frequent in SMS
    none,  // zero weight or equal frequency
};

std::string_view quadrant_name(Quadrant q);
Quadrant quadrant_of(double weight, double freq_diff);

struct Importance {
    std::string feature;
    double weight = 0;
    double freq_diff = 0;  // freq_facebook - freq_sms
    double importance = 0;
    Quadrant quadrant = Quadrant::none;
};

/// i(f) = w_f * (freq_fb(f) - freq_sms(f)), ranked from most positive to
/// most negative (ties by feature id).
std::vector<Importance> feature_importance(const LexiconModel& model, const FeatureVector& freq_facebook,
                                           const FeatureVector& freq_sms);

/// Mean relative frequency of every feature over the given users.
FeatureVector mean_frequencies(const std::vector<FeatureVector>& users);

// ---------------------------------------------------------------------------
// NMF

struct NmfResult {
    Eigen::MatrixXd w;  // n x k
    Eigen::MatrixXd h;  // k x d
    Eigen::VectorXd shift;  // added per column to make the input non-negative
    std::vector<double> objective;  // squared Frobenius error after each iteration
};

/// Lee-Seung multiplicative updates for min |V - WH|_F^2 with W, H >= 0.
/// Columns with negative entries are shifted up by their minimum first.
NmfResult nmf_reduce(const Eigen::MatrixXd& v, Eigen::Index k, int iterations, std::uint64_t seed);

}  // namespace xplat::model
