#include "xplat/modeling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "xplat/io.hpp"
#include "xplat/stats.hpp"

namespace xplat::model {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string s) {
    auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && ws(s.back())) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && ws(s[i])) ++i;
    return s.substr(i);
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(rows[i]);
    return out;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

double score(const Eigen::VectorXd& pred, const Eigen::VectorXd& y, Metric metric) {
    std::vector<Eigen::Index> ok;
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
        if (std::isfinite(pred(i))) ok.push_back(i);
    }
    if (ok.size() < 2) return kNaN;
    const auto p = take(pred, ok);
    const auto t = take(y, ok);
    if (metric == Metric::accuracy) return sign_accuracy(p, t, majority_sign(t));
    try {
        return stats::pearson_r(to_std(p), to_std(t));
    } catch (const stats::DegenerateError&) {
        return kNaN;
    }
}

void require_finite(const Eigen::MatrixXd& m, const char* what) {
    if (!m.allFinite()) throw ModelError(std::string("non-finite values in ") + what);
}

// Standardised copy of x plus the column means and scales used.
struct Standardized {
    Eigen::MatrixXd z;
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd scale;
};

Standardized standardize(const Eigen::MatrixXd& x, const RidgeOptions& options) {
    Standardized s;
    const auto n = x.rows();
    s.mean = options.fit_intercept && n > 0 ? Eigen::RowVectorXd(x.colwise().mean())
                                            : Eigen::RowVectorXd::Zero(x.cols());
    s.scale = Eigen::RowVectorXd::Ones(x.cols());
    if (options.scale && n > 1) {
        const Eigen::RowVectorXd m = x.colwise().mean();
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double sd = std::sqrt((x.col(j).array() - m(j)).square().sum() / static_cast<double>(n - 1));
            if (sd > 0) s.scale(j) = sd;
        }
    }
    s.z = (x.rowwise() - s.mean).array().rowwise() / s.scale.array();
    return s;
}

}  // namespace

double apply_lexicon(const LexiconModel& model, const FeatureVector& features) {
    double s = model.intercept;
    // iterate over the smaller side
    if (features.size() < model.weights.size()) {
        for (const auto& [f, x] : features) {
            if (auto it = model.weights.find(f); it != model.weights.end()) s += it->second * x;
        }
    } else {
        for (const auto& [f, w] : model.weights) {
            if (auto it = features.find(f); it != features.end()) s += w * it->second;
        }
    }
    return s;
}

std::map<std::string, LexiconModel> parse_lexica(std::string_view csv) {
    std::map<std::string, LexiconModel> out;
    std::size_t pos = 0, line_no = 0;
    bool header = false;
    while (pos < csv.size()) {
        auto eol = csv.find('\n', pos);
        if (eol == std::string_view::npos) eol = csv.size();
        std::string line(csv.substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto cells = io::split_csv(line);
        for (auto& c : cells) c = trim(c);
        if (!header) {
            if (cells != std::vector<std::string>{"term", "category", "weight"}) {
                throw ModelError("lexicon header must be term,category,weight");
            }
            header = true;
            continue;
        }
        if (cells.size() != 3) throw ModelError("lexicon line " + std::to_string(line_no) + ": expected 3 fields");
        double w;
        try {
            std::size_t used = 0;
            w = std::stod(cells[2], &used);
            if (used != cells[2].size()) throw std::invalid_argument(cells[2]);
        } catch (const std::exception&) {
            throw ModelError("lexicon line " + std::to_string(line_no) + ": bad weight \"" + cells[2] + "\"");
        }
        if (!std::isfinite(w)) throw ModelError("lexicon line " + std::to_string(line_no) + ": non-finite weight");
        auto& m = out[cells[1]];
        m.outcome = cells[1];
        if (cells[0] == "_intercept") {
            m.intercept = w;
        } else {
            m.weights[cells[0]] += w;
        }
    }
    if (!header) throw ModelError("empty lexicon file");
    return out;
}

Eigen::VectorXd RidgeModel::predict(const Eigen::MatrixXd& x) const {
    return (x * weights).array() + intercept;
}

double RidgeModel::predict_row(const Eigen::MatrixXd& x, Eigen::Index row) const {
    return x.row(row).dot(weights) + intercept;
}

RidgeModel ridge_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const RidgeOptions& options) {
    if (x.rows() != y.size()) throw ModelError("ridge: X and y differ in row count");
    if (x.rows() == 0) throw ModelError("ridge: no rows");
    if (!(options.alpha > 0)) throw ModelError("ridge: alpha must be positive");
    require_finite(x, "feature matrix");
    require_finite(y, "outcome vector");

    const auto s = standardize(x, options);
    const double ybar = options.fit_intercept ? y.mean() : 0.0;
    const Eigen::VectorXd yc = y.array() - ybar;
    const auto n = x.rows();
    const auto p = x.cols();
    Eigen::VectorXd wz;
    if (p <= n) {
        Eigen::MatrixXd a = s.z.transpose() * s.z;
        a.diagonal().array() += options.alpha;
        wz = a.ldlt().solve(s.z.transpose() * yc);
    } else {
        Eigen::MatrixXd k = s.z * s.z.transpose();
        k.diagonal().array() += options.alpha;
        wz = s.z.transpose() * k.ldlt().solve(yc);
    }
    RidgeModel m;
    m.weights = wz.array() / s.scale.transpose().array();
    m.intercept = ybar - s.mean.dot(m.weights);
    return m;
}

LexiconModel to_lexicon(const RidgeModel& model, const std::vector<std::string>& feature_names,
                        const std::string& outcome) {
    if (static_cast<Eigen::Index>(feature_names.size()) != model.weights.size()) {
        throw ModelError("feature names do not match model width");
    }
    LexiconModel out{outcome, model.intercept, {}};
    for (std::size_t j = 0; j < feature_names.size(); ++j) {
        out.weights[feature_names[j]] = model.weights(static_cast<Eigen::Index>(j));
    }
    return out;
}

double majority_sign(const Eigen::VectorXd& labels) {
    const auto pos = (labels.array() >= 0).count();
    return 2 * pos >= labels.size() ? 1.0 : -1.0;
}

double sign_accuracy(const Eigen::VectorXd& predictions, const Eigen::VectorXd& labels, double tie_sign) {
    if (predictions.size() != labels.size() || labels.size() == 0) throw ModelError("accuracy: size mismatch");
    std::size_t right = 0;
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        const double p = predictions(i) == 0 ? tie_sign : predictions(i);
        right += (p > 0) == (labels(i) > 0) ? 1 : 0;
    }
    return static_cast<double>(right) / static_cast<double>(labels.size());
}

std::vector<Eigen::Index> fold_rows(Eigen::Index n, Eigen::Index held_out) {
    std::vector<Eigen::Index> rows;
    rows.reserve(static_cast<std::size_t>(n > 0 ? n - 1 : 0));
    for (Eigen::Index i = 0; i < n; ++i) {
        if (i != held_out) rows.push_back(i);
    }
    return rows;
}

Eigen::VectorXd loocv_shortcut_predictions(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                           const RidgeOptions& options) {
    if (x.rows() != y.size()) throw ModelError("loocv: X and y differ in row count");
    require_finite(x, "feature matrix");
    const auto n = x.rows();
    const auto s = standardize(x, options);
    Eigen::MatrixXd hat;
    if (x.cols() <= n) {
        Eigen::MatrixXd a = s.z.transpose() * s.z;
        a.diagonal().array() += options.alpha;
        hat = s.z * a.ldlt().solve(s.z.transpose());
    } else {
        Eigen::MatrixXd k = s.z * s.z.transpose();
        Eigen::MatrixXd reg = k;
        reg.diagonal().array() += options.alpha;
        hat = reg.ldlt().solve(k).transpose();  // K (K + aI)^-1, both symmetric
    }
    if (options.fit_intercept) hat.array() += 1.0 / static_cast<double>(n);
    const Eigen::VectorXd fitted = hat * y;
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double h = hat(i, i);
        out(i) = (fitted(i) - h * y(i)) / (1.0 - h);
    }
    return out;
}

LoocvResult loocv_evaluate(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const RidgeOptions& options,
                           Metric metric, bool shortcut) {
    const auto n = x.rows();
    if (n < 3) throw ModelError("loocv needs at least 3 rows");
    LoocvResult out;
    if (shortcut) {
        out.predictions = loocv_shortcut_predictions(x, y, options);
        out.folds = static_cast<std::size_t>(n);
    } else {
        out.predictions = Eigen::VectorXd::Constant(n, kNaN);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto rows = fold_rows(n, i);
            try {
                const auto m = ridge_fit(take_rows(x, rows), take(y, rows), options);
                out.predictions(i) = m.predict_row(x, i);
                ++out.folds;
            } catch (const ModelError&) {
                ++out.skipped;
            }
        }
    }
    out.metric = score(out.predictions, y, metric);
    return out;
}

// ---------------------------------------------------------------------------

const Cell& OutcomeReport::cell(std::string_view train, std::string_view test) const {
    for (const auto& c : cells) {
        if (c.train == train && c.test == test) return c;
    }
    throw ModelError("no cell " + std::string(train) + "/" + std::string(test));
}

void require_same_users(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::string> sa(a), sb(b), only;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    std::set_symmetric_difference(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(only));
    if (only.empty()) return;
    std::string msg = "users not present on both platforms:";
    for (const auto& u : only) msg += " " + u;
    throw ModelError(msg);
}

EvalReport cross_domain_matrix(const std::vector<std::string>& user_ids, const Eigen::MatrixXd& facebook,
                               const Eigen::MatrixXd& sms, const std::vector<Outcome>& outcomes,
                               const CrossDomainOptions& options) {
    const auto n_all = static_cast<Eigen::Index>(user_ids.size());
    if (facebook.rows() != n_all || sms.rows() != n_all) throw ModelError("feature rows do not match the user list");
    if (facebook.cols() != sms.cols()) throw ModelError("platform feature matrices differ in width");

    EvalReport report;
    report.user_ids = user_ids;
    report.ridge = options.ridge;
    report.mode = options.mode;
    report.bootstrap_iterations = options.bootstrap_iterations;
    report.seed = options.seed;

    for (std::size_t oi = 0; oi < outcomes.size(); ++oi) {
        const auto& outcome = outcomes[oi];
        if (outcome.values.size() != n_all) throw ModelError("outcome " + outcome.name + " has the wrong length");
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < n_all; ++i) {
            if (std::isfinite(outcome.values(i))) rows.push_back(i);
        }
        const auto n = static_cast<Eigen::Index>(rows.size());
        if (n < 3) throw ModelError("outcome " + outcome.name + ": fewer than 3 users with a value");
        const Eigen::VectorXd y = take(outcome.values, rows);
        const Eigen::MatrixXd domain[2] = {take_rows(facebook, rows), take_rows(sms, rows)};
        const char* names[2] = {"facebook", "sms"};

        OutcomeReport rep;
        rep.outcome = outcome.name;
        rep.metric = outcome.binary ? Metric::accuracy : Metric::pearson;
        for (int src = 0; src < 2; ++src) {
            const int tgt = 1 - src;
            Eigen::VectorXd in_pred(n), cross_pred(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto train = fold_rows(n, i);
                const auto m = ridge_fit(take_rows(domain[src], train), take(y, train), options.ridge);
                in_pred(i) = m.predict_row(domain[src], i);
                if (options.mode == CrossMode::leave_one_out) cross_pred(i) = m.predict_row(domain[tgt], i);
            }
            if (options.mode == CrossMode::full_source) {
                cross_pred = ridge_fit(domain[src], y, options.ridge).predict(domain[tgt]);
            }
            rep.cells.push_back({names[src], names[src], score(in_pred, y, rep.metric), rows.size(), in_pred});
            rep.cells.push_back({names[src], names[tgt], score(cross_pred, y, rep.metric), rows.size(), cross_pred});

            Comparison cmp{names[src], kNaN, kNaN, 0};
            if (options.bootstrap_iterations > 0) {
                try {
                    // one stream per outcome, shared by both training platforms
                    auto b = stats::bootstrap_corr_diff(to_std(in_pred), to_std(cross_pred), to_std(y),
                                                        options.bootstrap_iterations, options.seed + oi);
                    cmp.delta_r = b.delta_r;
                    cmp.p = b.p;
                    cmp.skipped = b.skipped;
                } catch (const stats::DegenerateError&) {
                }
            }
            rep.comparisons.push_back(cmp);
        }
        report.outcomes.push_back(std::move(rep));
    }
    return report;
}

// ---------------------------------------------------------------------------

std::string_view quadrant_name(Quadrant q) {
    switch (q) {
        case Quadrant::A: return "A";
        case Quadrant::B: return "B";
        case Quadrant::C: return "C";
        case Quadrant::D: return "D";
        case Quadrant::none: break;
    }
    return "none";
}

Quadrant quadrant_of(double weight, double freq_diff) {
    if (weight == 0 || freq_diff == 0) return Quadrant::none;
    if (weight > 0) return freq_diff > 0 ? Quadrant::A : Quadrant::B;
    return freq_diff > 0 ? Quadrant::C : Quadrant::D;
}

std::vector<Importance> feature_importance(const LexiconModel& model, const FeatureVector& freq_facebook,
                                           const FeatureVector& freq_sms) {
    auto get = [](const FeatureVector& v, const std::string& f) {
        auto it = v.find(f);
        return it == v.end() ? 0.0 : it->second;
    };
    std::vector<Importance> out;
    out.reserve(model.weights.size());
    for (const auto& [f, w] : model.weights) {
        const double diff = get(freq_facebook, f) - get(freq_sms, f);
        out.push_back({f, w, diff, w * diff, quadrant_of(w, diff)});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Importance& a, const Importance& b) { return a.importance > b.importance; });
    return out;
}

FeatureVector mean_frequencies(const std::vector<FeatureVector>& users) {
    FeatureVector out;
    if (users.empty()) return out;
    for (const auto& u : users) {
        for (const auto& [f, x] : u) out[f] += x;
    }
    for (auto& [f, x] : out) x /= static_cast<double>(users.size());
    return out;
}

// ---------------------------------------------------------------------------

NmfResult nmf_reduce(const Eigen::MatrixXd& v_in, Eigen::Index k, int iterations, std::uint64_t seed) {
    const auto n = v_in.rows();
    const auto d = v_in.cols();
    if (k < 1 || k > std::min(n, d)) {
        throw ModelError("nmf: k must lie in [1, " + std::to_string(std::min(n, d)) + "]");
    }
    if (iterations < 0) throw ModelError("nmf: negative iteration count");
    require_finite(v_in, "nmf input");

    NmfResult r;
    r.shift = Eigen::VectorXd::Zero(d);
    for (Eigen::Index j = 0; j < d; ++j) r.shift(j) = std::max(0.0, -v_in.col(j).minCoeff());
    const Eigen::MatrixXd v = v_in.rowwise() + r.shift.transpose();

    std::mt19937_64 rng(seed);
    const double scale = std::sqrt(std::max(v.mean(), 1e-12) / static_cast<double>(k));
    auto draw = [&] { return scale * static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    r.w.resize(n, k);
    r.h.resize(k, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < k; ++j) r.w(i, j) = draw();
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < d; ++j) r.h(i, j) = draw();

    auto update = [](Eigen::MatrixXd& m, const Eigen::MatrixXd& num, const Eigen::MatrixXd& den) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                if (den(i, j) > 0) m(i, j) *= num(i, j) / den(i, j);
            }
        }
    };
    r.objective.reserve(static_cast<std::size_t>(iterations));
    for (int it = 0; it < iterations; ++it) {
        update(r.h, r.w.transpose() * v, (r.w.transpose() * r.w) * r.h);
        update(r.w, v * r.h.transpose(), r.w * (r.h * r.h.transpose()));
        r.objective.push_back((v - r.w * r.h).squaredNorm());
    }
    return r;
}

}  // namespace xplat::model
