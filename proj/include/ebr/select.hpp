#pragma once

// Energy combination, argmin selection and reference selectors.

#include <ebr/constraints.hpp>
#include <ebr/core.hpp>
#include <ebr/scorer.hpp>
#include <ebr/theory.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ebr {

struct EnergyBreakdown {
    std::string candidate_id;
    std::vector<double> member_energies;
    double mu = 0.0;
    double sigma = 0.0;
    bool sigma_defined = false;
    double e_constraint = 0.0;
    double total = 0.0;
    std::optional<ConstraintReport> report;
};

/// mu + lambda * C, with the constraint term dropped entirely at lambda = 0.
inline double total_energy(double mu, double e_constraint, double lambda) {
    return lambda == 0.0 ? mu : mu + lambda * e_constraint;
}

/// Quality scoring function: (problem, candidate) -> member energies summary.
using QualityFn = std::function<EnsembleScore(const Problem&, const Candidate&)>;

inline QualityFn ensemble_quality(const EnsembleScorer& scorer) {
    return [&scorer](const Problem& p, const Candidate& c) { return ensemble_score(scorer, p.statement, c.body); };
}

/// Stub scorer with energy 0 for correct and 1 for incorrect (or unlabelled)
/// candidates; itinerary candidates get their violation score.
inline QualityFn perfect_quality(double violation_threshold = 0.0) {
    return [violation_threshold](const Problem& p, const Candidate& c) {
        if (p.task_kind == TaskKind::itinerary && c.violation) return summarize({*c.violation});
        const auto ok = is_correct(p, c, violation_threshold);
        return summarize({ok && *ok ? 0.0 : 1.0});
    };
}

inline EnergyBreakdown score_candidate(const Problem& p, const Candidate& c, const QualityFn& quality,
                                       const ConstraintContext& ctx, double lambda) {
    EnergyBreakdown b;
    b.candidate_id = c.id;
    EnsembleScore q = quality(p, c);
    b.member_energies = std::move(q.energies);
    b.mu = q.mu;
    b.sigma = q.sigma;
    b.sigma_defined = q.sigma_defined;
    ConstraintResult r = e_constraint(p, c, ctx);
    b.e_constraint = r.value;
    b.report = std::move(r.report);
    b.total = total_energy(b.mu, b.e_constraint, lambda);
    return b;
}

inline std::vector<EnergyBreakdown> score_pool(const CandidatePool& pool, const QualityFn& quality,
                                               const ConstraintContext& ctx, double lambda) {
    std::vector<EnergyBreakdown> out;
    out.reserve(pool.candidates.size());
    for (const auto& c : pool.candidates) out.push_back(score_candidate(pool.problem, c, quality, ctx, lambda));
    return out;
}

inline std::vector<EnergyBreakdown> score_pool(const CandidatePool& pool, const EnsembleScorer& scorer,
                                               const ConstraintContext& ctx, double lambda) {
    return score_pool(pool, ensemble_quality(scorer), ctx, lambda);
}

struct Selection {
    std::size_t index = 0;
    std::string candidate_id;
    /// Set when no candidate qualifies and position 0 was taken as a fallback.
    bool degraded = false;
};

/// Minimum total energy; ties go to the earliest position. A pool whose
/// totals are all infinite selects position 0 and is marked degraded.
inline Selection select_best(std::span<const EnergyBreakdown> bd) {
    if (bd.empty()) throw InvalidConfig("cannot select from an empty pool");
    Selection s;
    double best = bd[0].total;
    for (std::size_t i = 1; i < bd.size(); ++i) {
        if (bd[i].total < best) {
            best = bd[i].total;
            s.index = i;
        }
    }
    s.degraded = std::isinf(best) && best > 0;
    if (s.degraded) s.index = 0;
    s.candidate_id = bd[s.index].candidate_id;
    return s;
}

// ---------------------------------------------------------------------------
// Baselines

inline Selection at(const CandidatePool& pool, std::size_t i, bool degraded = false) {
    return {i, pool.candidates[i].id, degraded};
}

inline Selection greedy_pick(const CandidatePool& pool) {
    for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
        if (pool.candidates[i].greedy) return at(pool, i);
    }
    throw MissingGreedyFlag("no greedy candidate in pool " + pool.problem.id);
}

inline Selection random_pick(const CandidatePool& pool, std::uint64_t seed) {
    Rng rng(derive_seed(seed, pool.problem.id));
    return at(pool, rng.index(pool.candidates.size()));
}

/// Majority over extracted answers. Ties go to the answer whose first voter
/// comes earliest, and that voter is returned. Candidates without an
/// extractable answer do not vote.
inline Selection self_consistency_pick(const CandidatePool& pool) {
    std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> votes;  // key -> (count, first)
    for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
        const auto key = answer_key(pool.problem, pool.candidates[i]);
        if (!key) continue;
        auto [it, fresh] = votes.try_emplace(*key, 0, i);
        ++it->second.first;
    }
    if (votes.empty()) return at(pool, 0, true);
    std::size_t best_count = 0, best_first = 0;
    for (const auto& [k, v] : votes) {
        if (v.first > best_count || (v.first == best_count && v.second < best_first)) {
            best_count = v.first;
            best_first = v.second;
        }
    }
    return at(pool, best_first);
}

/// First correct candidate, or the minimum violation for itineraries. With no
/// correct candidate the first one is returned, marked degraded.
inline Selection oracle_pick(const CandidatePool& pool, double violation_threshold = 0.0) {
    const auto& cs = pool.candidates;
    if (pool.problem.task_kind == TaskKind::itinerary) {
        std::size_t best = cs.size();
        for (std::size_t i = 0; i < cs.size(); ++i) {
            if (!cs[i].violation) throw MissingLabels("itinerary candidate without violation score: " + cs[i].id);
            if (best == cs.size() || *cs[i].violation < *cs[best].violation) best = i;
        }
        return at(pool, best, *cs[best].violation > violation_threshold);
    }
    bool any_label = false;
    for (std::size_t i = 0; i < cs.size(); ++i) {
        const auto l = binary_label(cs[i]);
        any_label = any_label || l.has_value();
        if (l && *l) return at(pool, i);
    }
    if (!any_label) throw MissingLabels("no labelled candidate in pool " + pool.problem.id);
    return at(pool, 0, true);
}

struct Baselines {
    std::optional<Selection> greedy;
    Selection random;
    Selection self_consistency;
    std::optional<Selection> oracle;
};

/// All four reference selectors; greedy and oracle are empty when the pool
/// lacks greedy flags or labels.
inline Baselines baselines(const CandidatePool& pool, std::uint64_t seed, double violation_threshold = 0.0) {
    Baselines b{std::nullopt, random_pick(pool, seed), self_consistency_pick(pool), std::nullopt};
    try {
        b.greedy = greedy_pick(pool);
    } catch (const MissingGreedyFlag&) {
    }
    try {
        b.oracle = oracle_pick(pool, violation_threshold);
    } catch (const MissingLabels&) {
    }
    return b;
}

/// Candidate positions ordered by total energy, ties by position.
inline std::vector<std::size_t> energy_order(std::span<const EnergyBreakdown> bd) {
    std::vector<std::size_t> order(bd.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return bd[a].total < bd[b].total; });
    return order;
}

/// 1 if any of the n lowest-energy candidates is correct, per requested n.
inline std::map<int, int> pass_at_n(std::span<const EnergyBreakdown> bd, const CandidatePool& pool,
                                    std::span<const int> n_values, double violation_threshold = 0.0) {
    const auto order = energy_order(bd);
    std::map<int, int> out;
    for (int n : n_values) {
        int hit = 0;
        for (std::size_t r = 0; r < order.size() && r < static_cast<std::size_t>(std::max(n, 0)); ++r) {
            const auto ok = is_correct(pool.problem, pool.candidates[order[r]], violation_threshold);
            if (ok && *ok) {
                hit = 1;
                break;
            }
        }
        out[n] = hit;
    }
    return out;
}

inline VariancePartitionReport variance_partition_check(const CandidatePool& pool, const EnsembleScorer& scorer,
                                                        const ConstraintContext& ctx, double lambda) {
    const auto bd = score_pool(pool, scorer, ctx, lambda);
    std::vector<std::vector<double>> e;
    std::vector<double> c;
    for (const auto& b : bd) {
        e.push_back(b.member_energies);
        c.push_back(b.e_constraint);
    }
    return variance_partition_check(e, c, lambda);
}

// ---------------------------------------------------------------------------
// JSON

/// Finite numbers as numbers; infinities as the strings "inf" / "-inf".
inline Json json_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return nullptr;
    return v;
}

inline Json to_json(const EnergyBreakdown& b) {
    Json j;
    j["candidate_id"] = b.candidate_id;
    Json me = Json::array();
    for (double e : b.member_energies) me.push_back(json_number(e));
    j["member_energies"] = std::move(me);
    j["mu"] = json_number(b.mu);
    j["sigma"] = json_number(b.sigma);
    j["sigma_defined"] = b.sigma_defined;
    j["e_constraint"] = json_number(b.e_constraint);
    j["total"] = json_number(b.total);
    if (b.report) j["report"] = to_json(*b.report);
    return j;
}

inline Json to_json(const Selection& s) {
    Json j{{"candidate_id", s.candidate_id}, {"index", s.index}};
    if (s.degraded) j["degraded"] = true;
    return j;
}

} // namespace ebr
