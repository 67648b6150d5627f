#pragma once

// Generator-confounding screen and last-layer retraining on balanced data.

#include <ebr/core.hpp>
#include <ebr/metrics.hpp>
#include <ebr/parallel.hpp>
#include <ebr/scorer.hpp>
#include <ebr/select.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ebr {

/// Share of selections per generator.
inline std::map<std::string, double> pick_distribution(std::span<const std::string> selected_generators) {
    std::map<std::string, double> out;
    for (const auto& g : selected_generators) out[g] += 1.0;
    for (auto& [g, v] : out) v /= static_cast<double>(selected_generators.size());
    return out;
}

struct GeneratorEnergy {
    std::string generator_id;
    double mu = 0.0;
    bool correct = false;
};

/// Mean mu of correct candidates per generator, pooled over all problems.
inline std::map<std::string, double> correct_energy_means(std::span<const GeneratorEnergy> xs) {
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (const auto& x : xs) {
        if (!x.correct) continue;
        auto& a = acc[x.generator_id];
        a.first += x.mu;
        ++a.second;
    }
    std::map<std::string, double> out;
    for (const auto& [g, a] : acc) out[g] = a.first / static_cast<double>(a.second);
    return out;
}

/// Population standard deviation of the per-generator correct-candidate means.
inline double correct_energy_spread(std::span<const GeneratorEnergy> xs) {
    const auto means = correct_energy_means(xs);
    if (means.size() < 2) throw DegenerateData("energy spread needs two generators with correct candidates");
    std::vector<double> m;
    for (const auto& [g, v] : means) m.push_back(v);
    return std::sqrt(population_variance(m));
}

/// At most `cap_per_cell` candidates per (generator, label) cell, chosen
/// uniformly under the seed; smaller cells are kept whole. Unlabelled
/// candidates and emptied pools are dropped; candidate order is preserved.
inline std::vector<CandidatePool> group_balance(std::span<const CandidatePool> pools, std::size_t cap_per_cell,
                                                std::uint64_t seed, double violation_threshold = 0.0) {
    std::map<std::pair<std::string, bool>, std::vector<std::pair<std::size_t, std::size_t>>> cells;
    for (std::size_t p = 0; p < pools.size(); ++p) {
        for (std::size_t c = 0; c < pools[p].candidates.size(); ++c) {
            const auto ok = is_correct(pools[p].problem, pools[p].candidates[c], violation_threshold);
            if (!ok) continue;
            cells[{pools[p].candidates[c].generator_id, *ok}].emplace_back(p, c);
        }
    }
    std::vector<std::vector<char>> keep(pools.size());
    for (std::size_t p = 0; p < pools.size(); ++p) keep[p].assign(pools[p].candidates.size(), 0);
    for (const auto& [cell, members] : cells) {
        Rng rng(derive_seed(seed, cell.first + (cell.second ? "|1" : "|0")));
        for (std::size_t k : rng.sample_without_replacement(members.size(), std::min(cap_per_cell, members.size()))) {
            keep[members[k].first][members[k].second] = 1;
        }
    }
    std::vector<CandidatePool> out;
    for (std::size_t p = 0; p < pools.size(); ++p) {
        CandidatePool q{pools[p].problem, {}, pools[p].shuffle_seed};
        for (std::size_t c = 0; c < pools[p].candidates.size(); ++c) {
            if (keep[p][c]) q.candidates.push_back(pools[p].candidates[c]);
        }
        if (!q.candidates.empty()) out.push_back(std::move(q));
    }
    return out;
}

struct DfrOptions {
    int epochs = 10;
    double learning_rate = 0.5;
    int cap = 16;
};

/// Continues training every head on within-problem pairs from the balanced
/// pools. Featurizer, masks and normalisation are left untouched.
inline EnsembleScorer dfr_retrain(const EnsembleScorer& scorer, std::span<const CandidatePool> balanced,
                                  const DfrOptions& opt, int workers = 0, std::vector<TrainStats>* stats = nullptr) {
    EnsembleScorer out = scorer;
    if (opt.epochs == 0) return out;
    const FeatureTable table(balanced, scorer.featurizer, workers);
    std::vector<TrainStats> st(scorer.members.size());
    std::vector<std::vector<ContrastivePair>> pairs(scorer.members.size());
    for (std::size_t k = 0; k < scorer.members.size(); ++k) {
        for (const auto& p : balanced) {
            auto ps = sample_pairs(p, opt.cap, derive_seed(scorer.members[k].config.bag_seed, "dfr"));
            pairs[k].insert(pairs[k].end(), ps.begin(), ps.end());
        }
        if (pairs[k].empty()) throw DegenerateData("no contrastive pairs in the balanced set");
    }
    parallel_for(scorer.members.size(), workers, [&](std::size_t k) {
        MemberConfig cfg = scorer.members[k].config;
        cfg.epochs = opt.epochs;
        cfg.learning_rate = opt.learning_rate;
        fit_head(out.members[k].head, pairs[k], table, cfg, &st[k]);
    });
    if (stats) *stats = std::move(st);
    return out;
}

/// Smallest (generator, label) cell over labelled candidates.
inline std::size_t smallest_cell(std::span<const CandidatePool> pools, double violation_threshold = 0.0) {
    std::map<std::pair<std::string, bool>, std::size_t> cells;
    for (const auto& p : pools) {
        for (const auto& c : p.candidates) {
            if (const auto ok = is_correct(p.problem, c, violation_threshold)) ++cells[{c.generator_id, *ok}];
        }
    }
    if (cells.empty()) throw MissingLabels("no labelled candidates to balance");
    std::size_t m = cells.begin()->second;
    for (const auto& [k, n] : cells) m = std::min(m, n);
    return m;
}

struct Screen {
    std::map<std::string, double> pick_distribution;
    std::optional<double> spread;
    double pass_at_1 = 0.0;
};

/// Selection shares, correct-energy spread and pass@1 of a scorer over pools.
inline Screen screen(const EnsembleScorer& scorer, std::span<const CandidatePool> pools, const RunConfig& cfg,
                     const ConstraintContext& ctx = {}) {
    if (pools.empty()) throw DegenerateData("no pools to screen");
    std::vector<std::vector<EnergyBreakdown>> bd(pools.size());
    const auto quality = ensemble_quality(scorer);
    parallel_for(pools.size(), cfg.workers, [&](std::size_t i) {
        bd[i] = score_pool(pools[i], quality, ctx, cfg.lambda_for(pools[i].problem.task_kind));
    });
    std::vector<std::string> picked;
    std::vector<GeneratorEnergy> energies;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < pools.size(); ++i) {
        const auto sel = select_best(bd[i]);
        const auto& c = pools[i].candidates[sel.index];
        picked.push_back(c.generator_id);
        const auto good = is_correct(pools[i].problem, c, cfg.pass_threshold);
        ok += good && *good;
        for (std::size_t j = 0; j < bd[i].size(); ++j) {
            const auto l = is_correct(pools[i].problem, pools[i].candidates[j], cfg.pass_threshold);
            if (l) energies.push_back({pools[i].candidates[j].generator_id, bd[i][j].mu, *l});
        }
    }
    Screen s;
    s.pick_distribution = pick_distribution(picked);
    try {
        s.spread = correct_energy_spread(energies);
    } catch (const DegenerateData&) {
    }
    s.pass_at_1 = static_cast<double>(ok) / static_cast<double>(pools.size());
    return s;
}

inline double max_share(const std::map<std::string, double>& dist) {
    double m = 0.0;
    for (const auto& [g, v] : dist) m = std::max(m, v);
    return m;
}

inline Json dfr_report_json(const Screen& pre, const Screen& post) {
    auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
    return Json{{"pick_distribution", post.pick_distribution},
                {"pick_distribution_pre", pre.pick_distribution},
                {"spread_pre", opt(pre.spread)},
                {"spread_post", opt(post.spread)},
                {"pass1_pre", pre.pass_at_1},
                {"pass1_post", post.pass_at_1}};
}

} // namespace ebr
