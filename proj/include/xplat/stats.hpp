#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace xplat::stats {

/// Raised when a statistic is undefined for the input (zero variance etc.).
class DegenerateError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

double mean(const std::vector<double>& x);
/// Sample (n - 1) standard deviation; 0 for fewer than two values.
double sample_sd(const std::vector<double>& x);
double median(std::vector<double> x);

struct EffectSize {
    double d = 0;
    bool degenerate = false;  // constant non-zero differences: d is +-inf
};

/// mean(x - y) / sd(x - y). Positive when x (platform A) is higher.
EffectSize cohens_d_paired(const std::vector<double>& x, const std::vector<double>& y);

struct TTest {
    double t = 0;
    double p = 1;
    std::size_t df = 0;
    bool degenerate = false;
};

/// Two-sided paired t-test, df = n - 1.
TTest paired_t_test(const std::vector<double>& x, const std::vector<double>& y);

/// Two-sided tail probability of Student's t.
double student_t_two_sided_p(double t, double df);

struct LogisticResult {
    double intercept = 0;
    double coefficient = 0;  // on the raw feature scale
    double z = 0;
    double p = 1;
    int iterations = 0;
    bool separated = false;  // perfect separation: p is the likelihood-ratio limit
};

/// Intercept + one feature logistic regression fitted by IRLS; Wald p for
/// the feature. Labels are 0/1. Throws PreconditionError when a class is
/// empty, ConvergenceError after `max_iterations`.
LogisticResult univariate_logistic(const std::vector<double>& x, const std::vector<int>& labels,
                                   double tolerance = 1e-8, int max_iterations = 100);

/// Benjamini-Hochberg step-up at level alpha. Output aligned with input.
std::vector<bool> bh_fdr(const std::vector<double>& p_values, double alpha);

/// Sample Pearson correlation; DegenerateError on zero variance.
double pearson_r(const std::vector<double>& x, const std::vector<double>& y);

struct BootstrapResult {
    double delta_r = 0;  // r(A, truth) - r(B, truth)
    double p = 1;
    std::size_t iterations = 0;
    std::size_t skipped = 0;  // degenerate resamples
    std::uint64_t seed = 0;
};

/// Paired bootstrap over users for the difference of two dependent
/// correlations with a shared truth vector. The resampled differences are
/// centred on the observed one to form the null distribution; p is the
/// two-sided proportion at least as extreme as the observed difference.
BootstrapResult bootstrap_corr_diff(const std::vector<double>& a, const std::vector<double>& b,
                                    const std::vector<double>& truth, std::size_t iterations, std::uint64_t seed);

}  // namespace xplat::stats
