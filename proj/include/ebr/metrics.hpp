#pragma once

// Evaluation metrics over scored pools.

#include <ebr/core.hpp>
#include <ebr/select.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ebr {

struct LabeledEnergy {
    double mu = 0.0;
    bool correct = false;
};

/// Mean mu of incorrect minus mean mu of correct candidates; empty when a
/// class is absent.
inline std::optional<double> energy_gap(std::span<const LabeledEnergy> xs) {
    double sc = 0.0, si = 0.0;
    std::size_t nc = 0, ni = 0;
    for (const auto& x : xs) {
        if (x.correct) {
            sc += x.mu;
            ++nc;
        } else {
            si += x.mu;
            ++ni;
        }
    }
    if (nc == 0 || ni == 0) return std::nullopt;
    return si / static_cast<double>(ni) - sc / static_cast<double>(nc);
}

/// Tie-corrected Kendall tau-b; empty when either variable is constant.
inline std::optional<double> kendall_tau_b(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InvalidConfig("kendall tau needs equal-length inputs");
    long long concordant = 0, discordant = 0, tx = 0, ty = 0, n0 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            ++n0;
            const int sx = (x[i] > x[j]) - (x[i] < x[j]);
            const int sy = (y[i] > y[j]) - (y[i] < y[j]);
            if (sx == 0) ++tx;
            if (sy == 0) ++ty;
            if (sx != 0 && sy != 0) (sx == sy ? concordant : discordant)++;
        }
    }
    const double denom = std::sqrt(static_cast<double>(n0 - tx)) * std::sqrt(static_cast<double>(n0 - ty));
    if (denom == 0.0) return std::nullopt;
    return static_cast<double>(concordant - discordant) / denom;
}

/// AUROC of `score` for the positive class, ties counted one half.
inline std::optional<double> auroc(std::span<const double> score, std::span<const std::uint8_t> positive) {
    std::vector<std::size_t> idx(score.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
    double pos = 0, neg = 0, wins = 0;
    for (bool p : positive) (p ? pos : neg) += 1;
    if (pos == 0 || neg == 0) return std::nullopt;
    double neg_below = 0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        double p_run = 0, n_run = 0;
        for (; j < idx.size() && score[idx[j]] == score[idx[i]]; ++j) (positive[idx[j]] ? p_run : n_run) += 1;
        wins += p_run * (neg_below + 0.5 * n_run);
        neg_below += n_run;
        i = j;
    }
    return wins / (pos * neg);
}

struct SigmaOutcome {
    double sigma = 0.0;
    bool correct = false;
};

/// AUROC of sigma as a predictor of an incorrect selection.
inline std::optional<double> sigma_auroc(std::span<const SigmaOutcome> xs) {
    std::vector<double> s;
    std::vector<std::uint8_t> wrong;
    for (const auto& x : xs) {
        s.push_back(x.sigma);
        wrong.push_back(x.correct ? 0 : 1);
    }
    return auroc(s, wrong);
}

struct ConfidenceOutcome {
    double confidence = 0.0;
    bool correct = false;
};

inline double ece(std::span<const ConfidenceOutcome> xs, int bins = 10) {
    if (xs.empty()) return 0.0;
    if (bins < 1) throw InvalidConfig("ece needs at least one bin");
    std::vector<double> conf(bins, 0.0), acc(bins, 0.0), count(bins, 0.0);
    for (const auto& x : xs) {
        if (!(x.confidence >= 0.0 && x.confidence <= 1.0)) throw InvalidConfig("confidence outside [0,1]");
        const int b = std::min(static_cast<int>(std::floor(x.confidence * bins)), bins - 1);
        conf[b] += x.confidence;
        acc[b] += x.correct ? 1.0 : 0.0;
        count[b] += 1.0;
    }
    double e = 0.0;
    const double n = static_cast<double>(xs.size());
    for (int b = 0; b < bins; ++b) {
        if (count[b] == 0) continue;
        e += (count[b] / n) * std::abs(acc[b] / count[b] - conf[b] / count[b]);
    }
    return e;
}

/// Softmax weight of candidate `index` under exp(-total). Infinite totals get
/// zero weight; an all-infinite pool is uniform.
inline double selection_confidence(std::span<const EnergyBreakdown> bd, std::size_t index) {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& b : bd) lo = std::min(lo, b.total);
    if (std::isinf(lo)) return 1.0 / static_cast<double>(bd.size());
    double z = 0.0;
    for (const auto& b : bd) z += std::exp(-(b.total - lo));
    return std::exp(-(bd[index].total - lo)) / z;
}

struct SelectiveItem {
    std::string problem_id;
    double sigma = 0.0;
    bool correct = false;
};

/// For each fraction f, drops the ceil(f n) highest-sigma problems (ties by
/// problem id) and reports pass@1 on the rest; empty when nothing remains.
inline std::map<double, std::optional<double>> selective_sweep(std::span<const SelectiveItem> items,
                                                               std::span<const double> fractions) {
    std::vector<const SelectiveItem*> order;
    for (const auto& i : items) order.push_back(&i);
    std::sort(order.begin(), order.end(), [](const SelectiveItem* a, const SelectiveItem* b) {
        if (a->sigma != b->sigma) return a->sigma > b->sigma;
        return a->problem_id < b->problem_id;
    });
    std::map<double, std::optional<double>> out;
    const double n = static_cast<double>(order.size());
    for (double f : fractions) {
        if (!(f >= 0.0 && f <= 1.0)) throw InvalidConfig("abstention fraction outside [0,1]");
        const auto drop = std::min(order.size(), static_cast<std::size_t>(std::max(0.0, std::ceil(f * n - 1e-9))));
        std::size_t kept = 0, ok = 0;
        for (std::size_t i = drop; i < order.size(); ++i) {
            ++kept;
            ok += order[i]->correct;
        }
        out[f] = kept == 0 ? std::nullopt : std::optional<double>(static_cast<double>(ok) / static_cast<double>(kept));
    }
    return out;
}

struct ReliabilityBin {
    double sigma_lo = 0.0;
    double sigma_hi = 0.0;
    std::size_t count = 0;
    double accuracy = 0.0;
    double mean_confidence = 0.0;
};

/// Accuracy per equal-width sigma bin over [0, max sigma].
inline std::vector<ReliabilityBin> sigma_reliability(std::span<const SigmaOutcome> xs, std::span<const double> confidence,
                                                     int bins = 10) {
    double hi = 0.0;
    for (const auto& x : xs) hi = std::max(hi, x.sigma);
    std::vector<ReliabilityBin> out(static_cast<std::size_t>(bins));
    const double width = hi > 0.0 ? hi / bins : 1.0;
    for (int b = 0; b < bins; ++b) {
        out[b].sigma_lo = b * width;
        out[b].sigma_hi = (b + 1) * width;
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const int b = std::min(static_cast<int>(xs[i].sigma / width), bins - 1);
        auto& r = out[b];
        ++r.count;
        r.accuracy += xs[i].correct;
        r.mean_confidence += i < confidence.size() ? confidence[i] : 0.0;
    }
    for (auto& r : out) {
        if (r.count) {
            r.accuracy /= static_cast<double>(r.count);
            r.mean_confidence /= static_cast<double>(r.count);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Report

/// A scored pool with its selection, ready for aggregation.
struct ScoredProblem {
    CandidatePool pool;
    std::vector<EnergyBreakdown> breakdowns;
    Selection selection;
    Baselines baselines;
};

inline ScoredProblem score_problem(const CandidatePool& pool, const QualityFn& quality, const ConstraintContext& ctx,
                                   const RunConfig& cfg) {
    ScoredProblem sp{pool, score_pool(pool, quality, ctx, cfg.lambda_for(pool.problem.task_kind)), {}, {}};
    sp.selection = select_best(sp.breakdowns);
    sp.baselines = baselines(pool, static_cast<std::uint64_t>(cfg.master_seed), cfg.pass_threshold);
    return sp;
}

struct EvalReport {
    std::size_t n_problems = 0;
    double pass_at_1 = 0.0;
    std::map<int, double> pass_at_n_curve;
    std::optional<double> mean_violation;
    std::optional<double> energy_gap;
    std::optional<double> kendall_tau;
    std::optional<double> sigma_auroc;
    double ece = 0.0;
    std::map<double, std::optional<double>> selective_curve;
    std::map<std::string, double> baseline_pass_at_1;
    std::vector<ReliabilityBin> reliability;
};

inline bool selected_correct(const ScoredProblem& sp, std::size_t index, double threshold) {
    const auto ok = is_correct(sp.pool.problem, sp.pool.candidates[index], threshold);
    return ok && *ok;
}

/// Quality label for rank correlation: correctness, or minus the violation score.
inline std::optional<double> quality_label(const Problem& p, const Candidate& c) {
    if (p.task_kind == TaskKind::itinerary) {
        if (!c.violation) return std::nullopt;
        return -*c.violation;
    }
    const auto l = binary_label(c);
    if (!l) return std::nullopt;
    return *l ? 1.0 : 0.0;
}

inline EvalReport evaluate(std::span<const ScoredProblem> problems, const RunConfig& cfg,
                           std::span<const double> abstain_fractions = {}) {
    EvalReport r;
    r.n_problems = problems.size();
    if (problems.empty()) return r;
    const double th = cfg.pass_threshold;

    std::size_t max_n = 1;
    for (const auto& sp : problems) max_n = std::max(max_n, sp.pool.candidates.size());
    std::vector<int> ns;
    for (std::size_t n = 1; n < max_n; n *= 2) ns.push_back(static_cast<int>(n));
    ns.push_back(static_cast<int>(max_n));

    std::vector<LabeledEnergy> energies;
    std::vector<SigmaOutcome> sig;
    std::vector<ConfidenceOutcome> conf;
    std::vector<double> conf_only;
    std::vector<SelectiveItem> sel_items;
    double tau_sum = 0.0, viol_sum = 0.0;
    std::size_t tau_n = 0, viol_n = 0, ok_total = 0;
    bool sigma_defined = true;
    std::map<std::string, std::size_t> base_ok, base_n;

    for (const auto& sp : problems) {
        const auto& cs = sp.pool.candidates;
        const bool ok = selected_correct(sp, sp.selection.index, th);
        ok_total += ok;
        for (const auto& [n, hit] : pass_at_n(sp.breakdowns, sp.pool, ns, th)) r.pass_at_n_curve[n] += hit;

        std::vector<double> x, y;
        for (std::size_t i = 0; i < cs.size(); ++i) {
            const auto corr = is_correct(sp.pool.problem, cs[i], th);
            if (corr) energies.push_back({sp.breakdowns[i].mu, *corr});
            const auto q = quality_label(sp.pool.problem, cs[i]);
            if (!q) continue;
            x.push_back(-sp.breakdowns[i].total);
            y.push_back(*q);
        }
        if (x.size() >= 2) {
            if (auto t = kendall_tau_b(x, y)) {
                tau_sum += *t;
                ++tau_n;
            }
        }
        const auto& b = sp.breakdowns[sp.selection.index];
        sigma_defined = sigma_defined && b.sigma_defined;
        sig.push_back({b.sigma, ok});
        const double c = selection_confidence(sp.breakdowns, sp.selection.index);
        conf.push_back({c, ok});
        conf_only.push_back(c);
        sel_items.push_back({sp.pool.problem.id, b.sigma, ok});
        if (sp.pool.problem.task_kind == TaskKind::itinerary) {
            const auto& sc = cs[sp.selection.index];
            if (sc.violation) viol_sum += *sc.violation;
            else if (b.report) viol_sum += b.report->violation_score;
            ++viol_n;
        }
        auto tally = [&](const char* name, const std::optional<Selection>& s) {
            if (!s) return;
            ++base_n[name];
            base_ok[name] += selected_correct(sp, s->index, th);
        };
        tally("greedy", sp.baselines.greedy);
        tally("random", sp.baselines.random);
        tally("self_consistency", sp.baselines.self_consistency);
        tally("oracle", sp.baselines.oracle);
    }
    const double n = static_cast<double>(problems.size());
    r.pass_at_1 = static_cast<double>(ok_total) / n;
    for (auto& [k, v] : r.pass_at_n_curve) v /= n;
    if (viol_n) r.mean_violation = viol_sum / static_cast<double>(viol_n);
    r.energy_gap = energy_gap(energies);
    if (tau_n) r.kendall_tau = tau_sum / static_cast<double>(tau_n);
    if (sigma_defined) r.sigma_auroc = sigma_auroc(sig);
    r.ece = ece(conf);
    std::vector<double> fr(abstain_fractions.begin(), abstain_fractions.end());
    if (fr.empty()) fr = {0.0, 0.1, 0.2, 0.3, 0.5};
    if (sigma_defined) r.selective_curve = selective_sweep(sel_items, fr);
    for (const auto& [k, cnt] : base_n) r.baseline_pass_at_1[k] = static_cast<double>(base_ok[k]) / static_cast<double>(cnt);
    r.reliability = sigma_reliability(sig, conf_only);
    return r;
}

inline Json optional_json(const std::optional<double>& v) { return v ? json_number(*v) : Json(nullptr); }

inline Json to_json(const EvalReport& r) {
    Json j;
    j["n_problems"] = r.n_problems;
    j["pass_at_1"] = r.pass_at_1;
    Json curve = Json::object();
    for (const auto& [n, v] : r.pass_at_n_curve) curve[std::to_string(n)] = v;
    j["pass_at_n_curve"] = curve;
    j["mean_violation"] = optional_json(r.mean_violation);
    j["energy_gap"] = optional_json(r.energy_gap);
    j["kendall_tau"] = optional_json(r.kendall_tau);
    j["sigma_auroc"] = optional_json(r.sigma_auroc);
    j["ece"] = r.ece;
    Json sel = Json::object();
    for (const auto& [f, v] : r.selective_curve) sel[detail::fmt(f)] = optional_json(v);
    j["selective_curve"] = sel;
    j["baseline_pass_at_1"] = r.baseline_pass_at_1;
    Json rel = Json::array();
    for (const auto& b : r.reliability) {
        rel.push_back({{"sigma_lo", b.sigma_lo},
                       {"sigma_hi", b.sigma_hi},
                       {"count", b.count},
                       {"accuracy", b.accuracy},
                       {"mean_confidence", b.mean_confidence}});
    }
    j["sigma_reliability"] = rel;
    return j;
}

/// Long-format CSV: metric,key,value.
inline std::string to_csv(const EvalReport& r) {
    std::string out = "metric,key,value\n";
    auto row = [&](const std::string& m, const std::string& k, const std::optional<double>& v) {
        out += m + "," + k + "," + (v ? detail::fmt(*v) : std::string("undefined")) + "\n";
    };
    row("n_problems", "", static_cast<double>(r.n_problems));
    row("pass_at_1", "", r.pass_at_1);
    for (const auto& [n, v] : r.pass_at_n_curve) row("pass_at_n", std::to_string(n), v);
    row("mean_violation", "", r.mean_violation);
    row("energy_gap", "", r.energy_gap);
    row("kendall_tau", "", r.kendall_tau);
    row("sigma_auroc", "", r.sigma_auroc);
    row("ece", "", r.ece);
    for (const auto& [f, v] : r.selective_curve) row("selective_pass_at_1", detail::fmt(f), v);
    for (const auto& [k, v] : r.baseline_pass_at_1) row("baseline_pass_at_1", k, v);
    return out;
}

} // namespace ebr
