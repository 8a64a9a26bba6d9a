#include "xplat/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include <boost/math/distributions/students_t.hpp>

namespace xplat::stats {

namespace {

void require_paired(const std::vector<double>& x, const std::vector<double>& y, std::size_t min_n) {
    if (x.size() != y.size()) throw PreconditionError("paired vectors differ in length");
    if (x.size() < min_n) throw PreconditionError("need at least " + std::to_string(min_n) + " pairs");
}

std::vector<double> differences(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
    return d;
}

double chi2_1_sf(double stat) { return std::erfc(std::sqrt(std::max(stat, 0.0) / 2.0)); }

// Log-likelihood of an intercept-only model.
double null_loglik(std::size_t ones, std::size_t n) {
    double ll = 0;
    const double p = static_cast<double>(ones) / static_cast<double>(n);
    if (ones > 0) ll += static_cast<double>(ones) * std::log(p);
    if (ones < n) ll += static_cast<double>(n - ones) * std::log1p(-p);
    return ll;
}

}  // namespace

double mean(const std::vector<double>& x) {
    if (x.empty()) return 0;
    double s = 0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double sample_sd(const std::vector<double>& x) {
    if (x.size() < 2) return 0;
    const double m = mean(x);
    double ss = 0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double median(std::vector<double> x) {
    if (x.empty()) return 0;
    std::sort(x.begin(), x.end());
    const auto n = x.size();
    return n % 2 ? x[n / 2] : (x[n / 2 - 1] + x[n / 2]) / 2.0;
}

EffectSize cohens_d_paired(const std::vector<double>& x, const std::vector<double>& y) {
    require_paired(x, y, 2);
    const auto d = differences(x, y);
    const double m = mean(d);
    const double sd = sample_sd(d);
    if (sd == 0) {
        if (m == 0) return {0.0, false};
        return {std::copysign(std::numeric_limits<double>::infinity(), m), true};
    }
    return {m / sd, false};
}

double student_t_two_sided_p(double t, double df) {
    if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
    if (std::isinf(t)) return 0.0;
    boost::math::students_t dist(df);
    return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))));
}

TTest paired_t_test(const std::vector<double>& x, const std::vector<double>& y) {
    require_paired(x, y, 2);
    const auto d = differences(x, y);
    const double m = mean(d);
    const double sd = sample_sd(d);
    TTest out;
    out.df = d.size() - 1;
    if (sd == 0) {
        if (m == 0) return out;
        out.t = std::copysign(std::numeric_limits<double>::infinity(), m);
        out.p = 0;
        out.degenerate = true;
        return out;
    }
    out.t = m / (sd / std::sqrt(static_cast<double>(d.size())));
    out.p = student_t_two_sided_p(out.t, static_cast<double>(out.df));
    return out;
}

LogisticResult univariate_logistic(const std::vector<double>& x, const std::vector<int>& labels, double tolerance,
                                   int max_iterations) {
    if (x.size() != labels.size()) throw PreconditionError("feature and label vectors differ in length");
    const std::size_t n = x.size();
    std::size_t ones = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw PreconditionError("labels must be 0 or 1");
        ones += static_cast<std::size_t>(y);
    }
    if (ones == 0 || ones == n) throw PreconditionError("both classes must be present");

    LogisticResult out;
    const double m = mean(x);
    const double s = sample_sd(x);
    if (s == 0) {
        out.intercept = std::log(static_cast<double>(ones) / static_cast<double>(n - ones));
        return out;
    }

    double max0 = -INFINITY, min0 = INFINITY, max1 = -INFINITY, min1 = INFINITY;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i]) {
            max1 = std::max(max1, x[i]);
            min1 = std::min(min1, x[i]);
        } else {
            max0 = std::max(max0, x[i]);
            min0 = std::min(min0, x[i]);
        }
    }
    if (max0 <= min1 || max1 <= min0) {
        // the MLE runs off to infinity; the fitted log-likelihood tends to
        // that of the points tied on the boundary value, all others fitted exactly
        const double boundary = max0 <= min1 ? max0 : max1;
        const bool tied_boundary = max0 <= min1 ? max0 == min1 : max1 == min0;
        double limit_ll = 0;
        if (tied_boundary) {
            std::size_t k = 0, k1 = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (x[i] == boundary) {
                    ++k;
                    k1 += static_cast<std::size_t>(labels[i]);
                }
            }
            limit_ll = null_loglik(k1, k);
        }
        out.separated = true;
        out.coefficient = max0 <= min1 ? INFINITY : -INFINITY;
        out.z = out.coefficient;
        out.p = chi2_1_sf(2.0 * (limit_ll - null_loglik(ones, n)));
        return out;
    }

    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = (x[i] - m) / s;
    double b0 = 0, b1 = 0;
    double i00 = 0, i01 = 0, i11 = 0;
    bool converged = false;
    for (int it = 1; it <= max_iterations; ++it) {
        double g0 = 0, g1 = 0;
        i00 = i01 = i11 = 0;
        for (std::size_t k = 0; k < n; ++k) {
            const double mu = 1.0 / (1.0 + std::exp(-(b0 + b1 * z[k])));
            const double w = mu * (1.0 - mu);
            const double r = labels[k] - mu;
            g0 += r;
            g1 += r * z[k];
            i00 += w;
            i01 += w * z[k];
            i11 += w * z[k] * z[k];
        }
        const double det = i00 * i11 - i01 * i01;
        if (!(det > 0)) throw ConvergenceError("singular information matrix in logistic fit");
        const double d0 = (i11 * g0 - i01 * g1) / det;
        const double d1 = (i00 * g1 - i01 * g0) / det;
        b0 += d0;
        b1 += d1;
        out.iterations = it;
        if (std::max(std::fabs(d0), std::fabs(d1)) < tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw ConvergenceError("logistic fit did not converge in " + std::to_string(max_iterations) + " iterations");
    }
    // information at the final estimate
    i00 = i01 = i11 = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double mu = 1.0 / (1.0 + std::exp(-(b0 + b1 * z[k])));
        const double w = mu * (1.0 - mu);
        i00 += w;
        i01 += w * z[k];
        i11 += w * z[k] * z[k];
    }
    const double var1 = i00 / (i00 * i11 - i01 * i01);
    out.coefficient = b1 / s;
    out.intercept = b0 - b1 * m / s;
    out.z = b1 / std::sqrt(var1);
    out.p = std::erfc(std::fabs(out.z) / std::sqrt(2.0));
    return out;
}

std::vector<bool> bh_fdr(const std::vector<double>& p_values, double alpha) {
    const std::size_t m = p_values.size();
    for (double p : p_values) {
        if (!(p >= 0 && p <= 1)) throw PreconditionError("p-values must lie in [0, 1]");
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p_values[a] < p_values[b]; });
    double cutoff = -1;
    for (std::size_t k = m; k >= 1; --k) {
        const double p = p_values[order[k - 1]];
        if (p <= static_cast<double>(k) * alpha / static_cast<double>(m)) {
            cutoff = p;
            break;
        }
    }
    std::vector<bool> out(m, false);
    for (std::size_t i = 0; i < m; ++i) out[i] = p_values[i] <= cutoff;
    return out;
}

double pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
    require_paired(x, y, 2);
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0 || syy == 0) throw DegenerateError("zero variance in correlation");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

BootstrapResult bootstrap_corr_diff(const std::vector<double>& a, const std::vector<double>& b,
                                    const std::vector<double>& truth, std::size_t iterations, std::uint64_t seed) {
    const std::size_t n = truth.size();
    if (a.size() != n || b.size() != n) throw PreconditionError("bootstrap vectors differ in length");
    if (n < 3) throw PreconditionError("bootstrap needs at least 3 users");
    if (iterations == 0) throw PreconditionError("bootstrap needs at least one iteration");

    BootstrapResult out;
    out.iterations = iterations;
    out.seed = seed;
    out.delta_r = pearson_r(a, truth) - pearson_r(b, truth);

    std::mt19937_64 rng(seed);
    std::vector<double> ra(n), rb(n), rt(n);
    std::size_t extreme = 0, valid = 0;
    const double observed = std::fabs(out.delta_r);
    for (std::size_t it = 0; it < iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = rng() % n;
            ra[i] = a[k];
            rb[i] = b[k];
            rt[i] = truth[k];
        }
        double delta;
        try {
            delta = pearson_r(ra, rt) - pearson_r(rb, rt);
        } catch (const DegenerateError&) {
            ++out.skipped;
            continue;
        }
        ++valid;
        if (std::fabs(delta - out.delta_r) >= observed) ++extreme;
    }
    out.p = static_cast<double>(extreme + 1) / static_cast<double>(valid + 1);
    return out;
}

}  // namespace xplat::stats
