#include "xplat/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

#include <json.hpp>

#include "xplat/stats.hpp"

#ifndef XPLAT_VERSION
#define XPLAT_VERSION "0.0.0"
#endif

namespace xplat::pipeline {

using features::Platform;
using json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kFb = static_cast<int>(Platform::facebook);
constexpr int kSms = static_cast<int>(Platform::sms);

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string cell(double v) {
    if (std::isnan(v)) return "";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string row(std::initializer_list<std::string> cells) {
    std::string out;
    bool first = true;
    for (const auto& c : cells) {
        if (!first) out += ',';
        out += io::csv_field(c);
        first = false;
    }
    return out + "\n";
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string metric_name(model::Metric m) { return m == model::Metric::accuracy ? "accuracy" : "pearson_r"; }

std::vector<double> column(const std::vector<UserFeatures>& users, int platform, const std::string& feature,
                           bool categories) {
    std::vector<double> out;
    out.reserve(users.size());
    for (const auto& u : users) {
        const auto& v = categories ? u.categories[platform] : u.ngrams[platform];
        auto it = v.find(feature);
        out.push_back(it == v.end() ? 0.0 : it->second);
    }
    return out;
}

template <typename Fn>
auto stage(const std::string& name, Fn fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

}  // namespace

// --- redaction --------------------------------------------------------------

RedactionResult redact_keystrokes(const std::vector<redact::KeystrokeEvent>& events,
                                  const redact::RedactorConfig& config, const detect::DetectorSuite& suite) {
    RedactionResult r;
    redact::Redactor redactor(suite, config);
    auto take = [&](std::vector<redact::SanitizedEntry> entries) {
        for (auto& e : entries) {
            if (e.structural != redact::Structural::none) {
                ++r.structural_entries;
                continue;
            }
            r.sms.push_back({e.key.user_id, Platform::sms, std::move(e.final_text)});
        }
    };
    for (const auto& e : events) take(redactor.ingest(e));
    take(redactor.flush());
    r.stats = redactor.stats();
    return r;
}

// --- corpora ----------------------------------------------------------------

Corpora assemble(const std::vector<io::Document>& documents, std::size_t min_words) {
    std::map<std::string, UserData> users;
    for (const auto& d : documents) {
        auto& u = users[d.user_id];
        u.user_id = d.user_id;
        auto& corpus = d.platform == Platform::facebook ? u.facebook : u.sms;
        corpus.user_id = d.user_id;
        corpus.platform = d.platform;
        corpus.documents.push_back(d.text);
    }
    Corpora out;
    for (auto& [id, u] : users) {
        u.facebook.user_id = u.sms.user_id = id;
        u.facebook.platform = Platform::facebook;
        u.sms.platform = Platform::sms;
        if (u.facebook.documents.empty()) {
            out.excluded.push_back({id, "no facebook posts"});
            continue;
        }
        if (u.sms.documents.empty()) {
            out.excluded.push_back({id, "no sms messages"});
            continue;
        }
        u.words = features::word_count(u.facebook) + features::word_count(u.sms);
        if (u.words < min_words) {
            out.excluded.push_back(
                {id, "fewer than " + std::to_string(min_words) + " words (" + std::to_string(u.words) + ")"});
            continue;
        }
        out.users.push_back(std::move(u));
    }
    return out;
}

// --- summary ----------------------------------------------------------------

Describe describe(const std::vector<double>& values) {
    Describe d;
    if (values.empty()) return d;
    d.median = stats::median(values);
    d.mean = stats::mean(values);
    d.sd_defined = values.size() > 1;
    d.sd = stats::sample_sd(values);
    return d;
}

std::vector<PlatformSummary> summarize(const Corpora& corpora) {
    std::vector<PlatformSummary> out;
    for (Platform p : {Platform::facebook, Platform::sms}) {
        std::vector<double> words, posts;
        for (const auto& u : corpora.users) {
            const auto& c = p == Platform::facebook ? u.facebook : u.sms;
            words.push_back(static_cast<double>(features::word_count(c)));
            posts.push_back(static_cast<double>(c.documents.size()));
        }
        out.push_back({p, corpora.users.size(), describe(words), describe(posts)});
    }
    return out;
}

// --- features ---------------------------------------------------------------

FeatureSet extract_features(const Corpora& corpora, const features::DictionarySpec* dictionary,
                            double min_user_fraction) {
    FeatureSet fs;
    std::vector<features::FeatureVector> used;  // per user: features seen on either platform
    for (const auto& u : corpora.users) {
        fs.users.push_back(u.user_id);
        UserFeatures uf;
        features::FeatureVector seen;
        for (const auto* c : {&u.facebook, &u.sms}) {
            const int p = static_cast<int>(c->platform);
            const auto segments = features::modeling_segments(c->documents);
            uf.ngrams[p] = features::extract_ngrams(segments);
            for (const auto& [f, v] : uf.ngrams[p]) seen[f] = 1;
            if (dictionary != nullptr) {
                std::vector<std::string> tokens;
                for (const auto& s : segments) tokens.insert(tokens.end(), s.begin(), s.end());
                uf.categories[p] = features::extract_dictionary(tokens, *dictionary);
            }
        }
        fs.per_user.push_back(std::move(uf));
        used.push_back(std::move(seen));
    }
    std::vector<const features::FeatureVector*> ptrs;
    for (const auto& u : used) ptrs.push_back(&u);
    const auto kept = features::frequent_features(ptrs, min_user_fraction);
    fs.ngrams.assign(kept.begin(), kept.end());
    if (dictionary != nullptr) fs.categories = dictionary->categories();
    return fs;
}

// --- differential analysis --------------------------------------------------

DiffReport differential(const FeatureSet& fs, double alpha) {
    const std::size_t n = fs.users.size();
    if (n < 2) {
        throw std::runtime_error("differential analysis needs at least 2 users with both platforms, got " +
                                 std::to_string(n));
    }
    DiffReport report;
    report.users = n;
    report.alpha = alpha;

    std::vector<int> labels(2 * n, 0);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n), 1);
    std::vector<double> p_values;
    for (const auto& f : fs.ngrams) {
        const auto fb = column(fs.per_user, kFb, f, false);
        const auto sms = column(fs.per_user, kSms, f, false);
        NgramDiff d;
        d.feature = f;
        const auto e = stats::cohens_d_paired(fb, sms);
        d.d = e.d;
        d.d_degenerate = e.degenerate;
        std::vector<double> x = fb;
        x.insert(x.end(), sms.begin(), sms.end());
        try {
            const auto lr = stats::univariate_logistic(x, labels);
            d.p = lr.p;
            d.separated = lr.separated;
        } catch (const stats::ConvergenceError&) {
            d.converged = false;
            d.p = 1;
        }
        d.freq_facebook = stats::mean(fb);
        d.freq_sms = stats::mean(sms);
        p_values.push_back(d.p);
        report.ngrams.push_back(std::move(d));
    }
    const auto sig = stats::bh_fdr(p_values, alpha);
    for (std::size_t i = 0; i < sig.size(); ++i) report.ngrams[i].significant = sig[i];

    p_values.clear();
    for (const auto& c : fs.categories) {
        const auto fb = column(fs.per_user, kFb, c, true);
        const auto sms = column(fs.per_user, kSms, c, true);
        const auto t = stats::paired_t_test(fb, sms);
        const auto e = stats::cohens_d_paired(fb, sms);
        report.categories.push_back(
            {c, t.t, t.p, e.d, t.degenerate, false, stats::mean(fb), stats::mean(sms)});
        p_values.push_back(t.p);
    }
    const auto csig = stats::bh_fdr(p_values, alpha);
    for (std::size_t i = 0; i < csig.size(); ++i) report.categories[i].significant = csig[i];

    for (const auto& d : report.ngrams) {
        if (!d.significant) continue;
        const bool fb_side = d.d > 0 || (d.d == 0 && d.freq_facebook > d.freq_sms);
        report.cloud.push_back({d.feature, d.d, fb_side ? d.freq_facebook : d.freq_sms,
                                fb_side ? Platform::facebook : Platform::sms});
    }
    std::stable_sort(report.cloud.begin(), report.cloud.end(), [](const CloudDatum& a, const CloudDatum& b) {
        return std::fabs(a.d) > std::fabs(b.d);
    });
    return report;
}

// --- models -----------------------------------------------------------------

ModelInputs ngram_inputs(const FeatureSet& fs) {
    ModelInputs in;
    in.kind = "ngrams";
    in.users = fs.users;
    in.feature_names = fs.ngrams;
    const auto n = static_cast<Eigen::Index>(fs.users.size());
    const auto p = static_cast<Eigen::Index>(fs.ngrams.size());
    in.facebook = Eigen::MatrixXd::Zero(n, p);
    in.sms = Eigen::MatrixXd::Zero(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto& f = fs.ngrams[static_cast<std::size_t>(j)];
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& u = fs.per_user[static_cast<std::size_t>(i)];
            if (auto it = u.ngrams[kFb].find(f); it != u.ngrams[kFb].end()) in.facebook(i, j) = it->second;
            if (auto it = u.ngrams[kSms].find(f); it != u.ngrams[kSms].end()) in.sms(i, j) = it->second;
        }
    }
    return in;
}

ModelInputs embedding_inputs(const std::vector<std::string>& users, const io::EmbeddingTable& table, int k,
                             int iterations, std::uint64_t seed) {
    std::vector<std::string> missing;
    std::size_t dim = 0;
    for (const auto& u : users) {
        for (Platform p : {Platform::facebook, Platform::sms}) {
            auto it = table.find({u, p});
            if (it == table.end()) {
                missing.push_back(u + "/" + std::string(features::platform_name(p)));
            } else {
                dim = it->second.size();
            }
        }
    }
    if (!missing.empty()) {
        std::string msg = "no embedding for";
        for (const auto& m : missing) msg += " " + m;
        throw std::runtime_error(msg);
    }
    const auto n = static_cast<Eigen::Index>(users.size());
    Eigen::MatrixXd stacked(2 * n, static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& u = users[static_cast<std::size_t>(i)];
        const auto& fb = table.at({u, Platform::facebook});
        const auto& sms = table.at({u, Platform::sms});
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(dim); ++j) {
            stacked(i, j) = fb[static_cast<std::size_t>(j)];
            stacked(n + i, j) = sms[static_cast<std::size_t>(j)];
        }
    }
    const auto nmf = model::nmf_reduce(stacked, k, iterations, seed);
    ModelInputs in;
    in.kind = "embeddings";
    in.users = users;
    for (int c = 0; c < k; ++c) in.feature_names.push_back("nmf" + std::to_string(c));
    in.facebook = nmf.w.topRows(n);
    in.sms = nmf.w.bottomRows(n);
    in.nmf_shift = nmf.shift;
    in.nmf_objective = nmf.objective.empty() ? kNaN : nmf.objective.back();
    return in;
}

std::vector<model::Outcome> outcome_vectors(const std::vector<std::string>& users, const io::OutcomeTable& table,
                                            const std::set<std::string>& binary) {
    std::vector<model::Outcome> out;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        model::Outcome o;
        o.name = table.columns[c];
        o.binary = binary.count(o.name) > 0;
        o.values = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(users.size()), kNaN);
        for (std::size_t i = 0; i < users.size(); ++i) {
            auto it = table.rows.find(users[i]);
            if (it == table.rows.end()) continue;
            double v = it->second[c];
            if (o.binary && std::isfinite(v)) {
                if (v == 1) {
                    v = 1;
                } else if (v == 0 || v == -1) {
                    v = -1;
                } else {
                    throw io::InputError("binary outcome " + o.name + " has value " + cell(v) + " for " + users[i]);
                }
            }
            o.values(static_cast<Eigen::Index>(i)) = v;
        }
        out.push_back(std::move(o));
    }
    return out;
}

std::vector<LexiconEval> evaluate_lexica(const std::map<std::string, model::LexiconModel>& lexica,
                                         const FeatureSet& fs, const std::vector<model::Outcome>& outcomes,
                                         std::size_t bootstrap_iterations, std::uint64_t seed) {
    std::vector<LexiconEval> out;
    for (std::size_t oi = 0; oi < outcomes.size(); ++oi) {
        const auto& o = outcomes[oi];
        auto lex = lexica.find(o.name);
        if (lex == lexica.end()) continue;
        std::vector<double> fb, sms, truth;
        for (std::size_t i = 0; i < fs.users.size(); ++i) {
            const double y = o.values(static_cast<Eigen::Index>(i));
            if (!std::isfinite(y)) continue;
            fb.push_back(model::apply_lexicon(lex->second, fs.per_user[i].ngrams[kFb]));
            sms.push_back(model::apply_lexicon(lex->second, fs.per_user[i].ngrams[kSms]));
            truth.push_back(y);
        }
        if (truth.size() < 3) continue;
        LexiconEval e;
        e.outcome = o.name;
        e.n = truth.size();
        e.metric = o.binary ? model::Metric::accuracy : model::Metric::pearson;
        auto metric = [&](const std::vector<double>& est) {
            const Eigen::Map<const Eigen::VectorXd> p(est.data(), static_cast<Eigen::Index>(est.size()));
            const Eigen::Map<const Eigen::VectorXd> t(truth.data(), static_cast<Eigen::Index>(truth.size()));
            if (o.binary) return model::sign_accuracy(p, t, model::majority_sign(t));
            try {
                return stats::pearson_r(est, truth);
            } catch (const stats::DegenerateError&) {
                return kNaN;
            }
        };
        e.facebook = metric(fb);
        e.sms = metric(sms);
        e.delta_r = e.p = kNaN;
        if (bootstrap_iterations > 0) {
            try {
                const auto b = stats::bootstrap_corr_diff(fb, sms, truth, bootstrap_iterations, seed + oi);
                e.delta_r = b.delta_r;
                e.p = b.p;
            } catch (const stats::DegenerateError&) {
            }
        }
        out.push_back(e);
    }
    return out;
}

std::map<std::string, model::LexiconModel> train_models(const ModelInputs& inputs, Platform platform,
                                                        const std::vector<model::Outcome>& outcomes,
                                                        const model::RidgeOptions& options) {
    const auto& x = platform == Platform::facebook ? inputs.facebook : inputs.sms;
    std::map<std::string, model::LexiconModel> out;
    for (const auto& o : outcomes) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < o.values.size(); ++i) {
            if (std::isfinite(o.values(i))) rows.push_back(i);
        }
        if (rows.empty()) continue;
        Eigen::MatrixXd xs(static_cast<Eigen::Index>(rows.size()), x.cols());
        Eigen::VectorXd ys(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t k = 0; k < rows.size(); ++k) {
            xs.row(static_cast<Eigen::Index>(k)) = x.row(rows[k]);
            ys(static_cast<Eigen::Index>(k)) = o.values(rows[k]);
        }
        out[o.name] = model::to_lexicon(model::ridge_fit(xs, ys, options), inputs.feature_names, o.name);
    }
    return out;
}

std::vector<ImportanceTable> importance_tables(const std::map<std::string, model::LexiconModel>& models,
                                               const FeatureSet& fs) {
    std::vector<features::FeatureVector> fb, sms;
    for (const auto& u : fs.per_user) {
        fb.push_back(u.ngrams[kFb]);
        sms.push_back(u.ngrams[kSms]);
    }
    const auto mean_fb = model::mean_frequencies(fb);
    const auto mean_sms = model::mean_frequencies(sms);
    std::vector<ImportanceTable> out;
    for (const auto& [name, m] : models) out.push_back({name, model::feature_importance(m, mean_fb, mean_sms)});
    return out;
}

// --- serialization ----------------------------------------------------------

std::string lexica_csv(const std::map<std::string, model::LexiconModel>& models) {
    std::string out = "term,category,weight\n";
    for (const auto& [name, m] : models) {
        out += row({"_intercept", name, cell(m.intercept)});
        for (const auto& [term, w] : m.weights) out += row({term, name, cell(w)});
    }
    return out;
}

Files redaction_files(const RedactionResult& r, const Corpora* corpora) {
    Files files;
    files.emplace_back("sms_corpus.jsonl", io::corpus_jsonl(r.sms));
    json j = {{"events", r.stats.events},
              {"dropped_other_apps", r.stats.dropped_app},
              {"entries", r.stats.entries},
              {"structural_entries", r.structural_entries},
              {"sms_documents", r.sms.size()},
              {"token_completions", r.stats.token_completions}};
    files.emplace_back("redaction.json", dump(j));
    if (corpora != nullptr) {
        std::string csv = "user_id,reason\n";
        for (const auto& e : corpora->excluded) csv += row({e.user_id, e.reason});
        files.emplace_back("exclusions.csv", csv);
    }
    return files;
}

Files summary_files(const std::vector<PlatformSummary>& s) {
    json arr = json::array();
    std::string csv = "platform,users,words_median,words_mean,words_sd,posts_median,posts_mean,posts_sd,sd_defined\n";
    auto stat = [](const Describe& d) {
        return json{{"median", num(d.median)}, {"mean", num(d.mean)}, {"sd", num(d.sd)}, {"sd_defined", d.sd_defined}};
    };
    for (const auto& p : s) {
        arr.push_back({{"platform", features::platform_name(p.platform)},
                       {"users", p.users},
                       {"words", stat(p.words)},
                       {"posts", stat(p.posts)}});
        csv += row({std::string(features::platform_name(p.platform)), std::to_string(p.users), cell(p.words.median),
                    cell(p.words.mean), cell(p.words.sd), cell(p.posts.median), cell(p.posts.mean), cell(p.posts.sd),
                    p.words.sd_defined ? "true" : "false"});
    }
    return {{"summary.json", dump({{"platforms", arr}})}, {"summary.csv", csv}};
}

Files feature_files(const FeatureSet& f) {
    std::string ngrams = "user_id,platform,feature,frequency\n";
    std::string cats = "user_id,platform,category,frequency\n";
    for (std::size_t i = 0; i < f.users.size(); ++i) {
        for (int p : {kFb, kSms}) {
            const std::string pname(features::platform_name(static_cast<Platform>(p)));
            for (const auto& feat : f.ngrams) {
                auto it = f.per_user[i].ngrams[p].find(feat);
                if (it != f.per_user[i].ngrams[p].end()) ngrams += row({f.users[i], pname, feat, cell(it->second)});
            }
            for (const auto& c : f.categories) {
                auto it = f.per_user[i].categories[p].find(c);
                cats += row({f.users[i], pname, c, cell(it == f.per_user[i].categories[p].end() ? 0 : it->second)});
            }
        }
    }
    Files files{{"features_ngrams.csv", ngrams}};
    if (!f.categories.empty()) files.emplace_back("features_categories.csv", cats);
    return files;
}

Files diff_files(const DiffReport& d) {
    json ngrams = json::array(), cats = json::array(), cloud = json::array();
    std::string ncsv = "feature,d,p,significant,separated,freq_facebook,freq_sms\n";
    std::string ccsv = "category,t,p,d,significant,mean_facebook,mean_sms\n";
    std::string cloud_csv = "ngram,d,size,frequency,side\n";
    for (const auto& n : d.ngrams) {
        ngrams.push_back({{"feature", n.feature},
                          {"d", num(n.d)},
                          {"d_degenerate", n.d_degenerate},
                          {"p", num(n.p)},
                          {"separated", n.separated},
                          {"converged", n.converged},
                          {"significant", n.significant},
                          {"freq_facebook", n.freq_facebook},
                          {"freq_sms", n.freq_sms}});
        ncsv += row({n.feature, cell(n.d), cell(n.p), n.significant ? "true" : "false", n.separated ? "true" : "false",
                     cell(n.freq_facebook), cell(n.freq_sms)});
    }
    for (const auto& c : d.categories) {
        cats.push_back({{"category", c.category},
                        {"t", num(c.t)},
                        {"p", num(c.p)},
                        {"d", num(c.d)},
                        {"degenerate", c.degenerate},
                        {"significant", c.significant},
                        {"mean_facebook", c.mean_facebook},
                        {"mean_sms", c.mean_sms}});
        ccsv += row({c.category, cell(c.t), cell(c.p), cell(c.d), c.significant ? "true" : "false",
                     cell(c.mean_facebook), cell(c.mean_sms)});
    }
    for (const auto& c : d.cloud) {
        const std::string side(features::platform_name(c.side));
        cloud.push_back(
            {{"ngram", c.ngram}, {"d", num(c.d)}, {"size", num(std::fabs(c.d))}, {"frequency", c.frequency}, {"side", side}});
        cloud_csv += row({c.ngram, cell(c.d), cell(std::fabs(c.d)), cell(c.frequency), side});
    }
    json j = {{"users", d.users}, {"fdr_alpha", d.alpha}, {"ngrams", ngrams}, {"categories", cats}};
    return {{"diff.json", dump(j)},
            {"diff_ngrams.csv", ncsv},
            {"diff_categories.csv", ccsv},
            {"cloud.json", dump({{"fdr_alpha", d.alpha}, {"cloud", cloud}})},
            {"cloud.csv", cloud_csv}};
}

Files evaluation_files(const model::EvalReport& e, const ModelInputs& inputs) {
    json outcomes = json::array();
    std::string csv = "outcome,metric,train,test,value,n\n";
    std::string cmp_csv = "outcome,train,delta_r,p\n";
    for (const auto& o : e.outcomes) {
        json cells = json::array(), cmps = json::array();
        for (const auto& c : o.cells) {
            cells.push_back({{"train", c.train}, {"test", c.test}, {"value", num(c.metric)}, {"n", c.n}});
            csv += row({o.outcome, metric_name(o.metric), c.train, c.test, cell(c.metric), std::to_string(c.n)});
        }
        for (const auto& c : o.comparisons) {
            cmps.push_back({{"train", c.train}, {"delta_r", num(c.delta_r)}, {"p", num(c.p)}, {"skipped", c.skipped}});
            cmp_csv += row({o.outcome, c.train, cell(c.delta_r), cell(c.p)});
        }
        outcomes.push_back(
            {{"outcome", o.outcome}, {"metric", metric_name(o.metric)}, {"cells", cells}, {"comparisons", cmps}});
    }
    json j = {{"features", inputs.kind},
              {"feature_count", inputs.feature_names.size()},
              {"users", e.user_ids.size()},
              {"ridge_alpha", e.ridge.alpha},
              {"cross_mode", e.mode == model::CrossMode::full_source ? "full_source" : "leave_one_out"},
              {"bootstrap_iterations", e.bootstrap_iterations},
              {"seed", e.seed},
              {"outcomes", outcomes}};
    if (inputs.kind == "embeddings") j["nmf_final_objective"] = num(inputs.nmf_objective);
    return {{"evaluation.json", dump(j)}, {"evaluation.csv", csv}, {"evaluation_comparisons.csv", cmp_csv}};
}

Files lexicon_eval_files(const std::vector<LexiconEval>& rows) {
    json arr = json::array();
    std::string csv = "outcome,metric,n,facebook,sms,delta_r,p\n";
    for (const auto& r : rows) {
        arr.push_back({{"outcome", r.outcome},
                       {"metric", metric_name(r.metric)},
                       {"n", r.n},
                       {"facebook", num(r.facebook)},
                       {"sms", num(r.sms)},
                       {"delta_r", num(r.delta_r)},
                       {"p", num(r.p)}});
        csv += row({r.outcome, metric_name(r.metric), std::to_string(r.n), cell(r.facebook), cell(r.sms),
                    cell(r.delta_r), cell(r.p)});
    }
    return {{"lexicon_eval.json", dump({{"outcomes", arr}})}, {"lexicon_eval.csv", csv}};
}

Files importance_files(const std::vector<ImportanceTable>& tables) {
    json arr = json::array();
    std::string csv = "model,feature,weight,freq_diff,importance,quadrant\n";
    for (const auto& t : tables) {
        json rows = json::array();
        for (const auto& r : t.rows) {
            const std::string q(model::quadrant_name(r.quadrant));
            rows.push_back({{"feature", r.feature},
                            {"weight", r.weight},
                            {"freq_diff", r.freq_diff},
                            {"importance", r.importance},
                            {"quadrant", q}});
            csv += row({t.model, r.feature, cell(r.weight), cell(r.freq_diff), cell(r.importance), q});
        }
        arr.push_back({{"model", t.model}, {"features", rows}});
    }
    return {{"importance.json", dump({{"models", arr}})}, {"importance.csv", csv}};
}

// --- commands ---------------------------------------------------------------

std::string_view command_name(Command c) {
    switch (c) {
        case Command::redact: return "redact";
        case Command::summary: return "summary";
        case Command::features: return "features";
        case Command::diff: return "diff";
        case Command::train: return "train";
        case Command::evaluate: return "evaluate";
        case Command::importance: return "importance";
        case Command::pipeline: return "pipeline";
    }
    return "?";
}

namespace {

// Lazily computed stage results shared by the commands.
class Run {
public:
    explicit Run(const io::RunConfig& c) : config_(c) {}

    const detect::DetectorSuite& suite() {
        if (!suite_) suite_ = stage("load", [] { return detect::DetectorSuite::standard(); });
        return *suite_;
    }

    const RedactionResult& redaction() {
        if (!redaction_) {
            redaction_ = stage("redact", [&] {
                if (config_.keystrokes.empty()) throw std::runtime_error("no keystrokes file configured");
                const auto events = io::parse_keystrokes(io::read_file(config_.keystrokes), config_.keystrokes.string());
                redact::RedactorConfig rc;
                rc.allowed_apps = config_.allowed_apps;
                rc.inactivity_timeout_ms = config_.inactivity_timeout_ms;
                return redact_keystrokes(events, rc, suite());
            });
        }
        return *redaction_;
    }

    const Corpora& corpora() {
        if (!corpora_) {
            const auto& sms = redaction().sms;
            corpora_ = stage("ingest", [&] {
                if (config_.facebook.empty()) throw std::runtime_error("no facebook corpus configured");
                auto docs = io::parse_corpus(io::read_file(config_.facebook), config_.facebook.string());
                for (auto& d : docs) {
                    if (d.platform != Platform::facebook) {
                        throw io::InputError(config_.facebook.string() + ": only facebook documents are accepted");
                    }
                    if (config_.redact_facebook) d.text = redact::redact_string(d.text, suite()).text;
                }
                docs.insert(docs.end(), sms.begin(), sms.end());
                return assemble(docs, config_.min_words);
            });
        }
        return *corpora_;
    }

    const FeatureSet& features() {
        if (!features_) {
            const auto& c = corpora();
            features_ = stage("features", [&] {
                std::optional<features::DictionarySpec> dict;
                if (!config_.dictionary.empty()) {
                    dict = features::DictionarySpec::parse(io::read_file(config_.dictionary));
                }
                return extract_features(c, dict ? &*dict : nullptr, config_.min_user_fraction);
            });
        }
        return *features_;
    }

    const std::vector<model::Outcome>& outcomes() {
        if (!outcomes_) {
            const auto& f = features();
            outcomes_ = stage("modeling", [&] {
                if (config_.outcomes.empty()) throw std::runtime_error("no outcomes file configured");
                const auto table = io::parse_outcomes(io::read_file(config_.outcomes), config_.outcomes.string());
                return outcome_vectors(f.users, table, config_.binary_outcomes);
            });
        }
        return *outcomes_;
    }

    const ModelInputs& inputs() {
        if (!inputs_) {
            const auto& f = features();
            inputs_ = stage("modeling", [&] {
                if (config_.model_features == "embeddings") {
                    const auto table = io::parse_embeddings(io::read_file(config_.embeddings), config_.embeddings.string());
                    return embedding_inputs(f.users, table, config_.nmf_k, config_.nmf_iterations, config_.seed);
                }
                return ngram_inputs(f);
            });
        }
        return *inputs_;
    }

    model::RidgeOptions ridge() const { return {config_.ridge_alpha, true, true}; }

    std::map<std::string, model::LexiconModel> lexica() {
        return stage("modeling", [&] { return model::parse_lexica(io::read_file(config_.lexica)); });
    }

    Files diff() {
        const auto& f = features();
        return stage("diff", [&] { return diff_files(differential(f, config_.fdr_alpha)); });
    }

    Files train() {
        const auto& in = inputs();
        const auto& o = outcomes();
        return stage("train", [&] {
            return Files{{"models_facebook.csv", lexica_csv(train_models(in, Platform::facebook, o, ridge()))},
                         {"models_sms.csv", lexica_csv(train_models(in, Platform::sms, o, ridge()))}};
        });
    }

    Files evaluate() {
        const auto& in = inputs();
        const auto& o = outcomes();
        const auto& f = features();
        std::optional<std::map<std::string, model::LexiconModel>> lex;
        if (!config_.lexica.empty()) lex = lexica();
        return stage("evaluate", [&] {
            model::CrossDomainOptions opt;
            opt.ridge = ridge();
            opt.mode = config_.cross_mode == "full_source" ? model::CrossMode::full_source
                                                            : model::CrossMode::leave_one_out;
            opt.bootstrap_iterations = config_.bootstrap_iterations;
            opt.seed = config_.seed;
            auto files = evaluation_files(model::cross_domain_matrix(in.users, in.facebook, in.sms, o, opt), in);
            if (lex) {
                auto more = lexicon_eval_files(evaluate_lexica(*lex, f, o, config_.bootstrap_iterations, config_.seed));
                files.insert(files.end(), more.begin(), more.end());
            }
            return files;
        });
    }

    Files importance() {
        const auto& f = features();
        std::map<std::string, model::LexiconModel> models;
        if (!config_.lexica.empty()) {
            models = lexica();
        } else {
            const auto& o = outcomes();
            models = stage("importance", [&] { return train_models(ngram_inputs(f), Platform::facebook, o, ridge()); });
        }
        return stage("importance", [&] { return importance_files(importance_tables(models, f)); });
    }

private:
    const io::RunConfig& config_;
    std::optional<detect::DetectorSuite> suite_;
    std::optional<RedactionResult> redaction_;
    std::optional<Corpora> corpora_;
    std::optional<FeatureSet> features_;
    std::optional<std::vector<model::Outcome>> outcomes_;
    std::optional<ModelInputs> inputs_;
};

void append(Files& to, Files from) {
    for (auto& f : from) to.push_back(std::move(f));
}

}  // namespace

Files run(Command command, const io::RunConfig& config) {
    stage("config", [&] {
        config.validate();
        return 0;
    });
    Run r(config);
    Files files;
    switch (command) {
        case Command::redact:
            append(files, redaction_files(r.redaction(), config.facebook.empty() ? nullptr : &r.corpora()));
            break;
        case Command::summary: append(files, summary_files(summarize(r.corpora()))); break;
        case Command::features: append(files, feature_files(r.features())); break;
        case Command::diff: append(files, r.diff()); break;
        case Command::train: append(files, r.train()); break;
        case Command::evaluate: append(files, r.evaluate()); break;
        case Command::importance: append(files, r.importance()); break;
        case Command::pipeline:
            append(files, redaction_files(r.redaction(), &r.corpora()));
            append(files, summary_files(summarize(r.corpora())));
            append(files, feature_files(r.features()));
            append(files, r.diff());
            append(files, r.train());
            append(files, r.evaluate());
            append(files, r.importance());
            files.emplace_back("manifest.json", stage("manifest", [&] { return manifest_json(config, files); }));
            break;
    }
    return files;
}

void write_outputs(const Files& files, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path staging = dir.string() + ".partial";
    fs::remove_all(staging);
    try {
        for (const auto& [name, content] : files) io::write_file(staging / name, content);
        fs::create_directories(dir);
        for (const auto& [name, content] : files) fs::rename(staging / name, dir / name);
        fs::remove_all(staging);
    } catch (...) {
        fs::remove_all(staging);
        throw;
    }
}

std::string manifest_json(const io::RunConfig& c, const Files& outputs) {
    json inputs = json::array();
    const std::pair<const char*, const std::filesystem::path*> roles[] = {
        {"keystrokes", &c.keystrokes}, {"facebook", &c.facebook},   {"outcomes", &c.outcomes},
        {"dictionary", &c.dictionary}, {"lexica", &c.lexica},       {"embeddings", &c.embeddings}};
    for (const auto& [role, path] : roles) {
        if (path->empty()) continue;
        const auto bytes = io::read_file(*path);
        inputs.push_back({{"role", role},
                          {"file", path->filename().string()},
                          {"bytes", bytes.size()},
                          {"sha256", io::sha256_hex(bytes)}});
    }
    json outs = json::array();
    for (const auto& [name, content] : outputs) {
        outs.push_back({{"file", name}, {"bytes", content.size()}, {"sha256", io::sha256_hex(content)}});
    }
    json thresholds = {{"fdr_alpha", c.fdr_alpha},
                       {"min_words", c.min_words},
                       {"min_user_fraction", c.min_user_fraction},
                       {"ridge_alpha", c.ridge_alpha},
                       {"bootstrap_iterations", c.bootstrap_iterations},
                       {"inactivity_timeout_ms", c.inactivity_timeout_ms},
                       {"model_features", c.model_features},
                       {"cross_mode", c.cross_mode},
                       {"nmf_k", c.nmf_k},
                       {"nmf_iterations", c.nmf_iterations}};
    json j = {{"tool", "xplat"},
              {"version", XPLAT_VERSION},
              {"seeds", {{"bootstrap", c.seed}, {"nmf", c.seed}}},
              {"prng", "mt19937_64"},
              {"thresholds", thresholds},
              {"allowed_apps", c.allowed_apps},
              {"binary_outcomes", c.binary_outcomes},
              {"inputs", inputs},
              {"outputs", outs}};
    return dump(j);
}

}  // namespace xplat::pipeline
