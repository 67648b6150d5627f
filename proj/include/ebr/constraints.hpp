#pragma once

// Constraint energy routing: itinerary tasks use the sandbox checker, logic
// puzzles the statement checker, every other task contributes zero.

#include <ebr/answers.hpp>
#include <ebr/core.hpp>
#include <ebr/itinerary.hpp>
#include <ebr/knights.hpp>

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>

namespace ebr {

struct ConstraintContext {
    const SandboxDB* db = nullptr;
    /// Per-dimension weights; absent dimensions weigh 1.
    std::map<std::string, double> weights;

    double weight(const std::string& dim) const {
        auto it = weights.find(dim);
        return it == weights.end() ? 1.0 : it->second;
    }
};

struct ConstraintResult {
    double value = 0.0;
    std::optional<ConstraintReport> report;
};

inline double weighted_sum(const ConstraintReport& r, const ConstraintContext& ctx) {
    double s = 0.0;
    for (const auto& [dim, v] : r.dims) s += ctx.weight(dim) * v;
    return s;
}

inline ConstraintResult e_constraint(const Problem& problem, const Candidate& cand, const ConstraintContext& ctx) {
    ConstraintResult out;
    switch (problem.task_kind) {
    case TaskKind::itinerary: {
        if (!ctx.db) throw InvalidConfig("itinerary tasks need a sandbox database");
        try {
            const Itinerary it = parse_itinerary(cand.body);
            out.report = check_itinerary(it, *ctx.db, problem);
            out.value = weighted_sum(*out.report, ctx);
        } catch (const ParseFailure& e) {
            out.report = parse_failure_report(e.what());
            out.value = std::numeric_limits<double>::infinity();
        }
        return out;
    }
    case TaskKind::logic_puzzle: {
        if (!problem.puzzle) return out;
        const PuzzleSpec p = puzzle_from_json(*problem.puzzle);
        const KKCheck c = kk_checker(p, cand.body);
        out.value = c.e_constraint;
        out.report = kk_report(p, c);
        return out;
    }
    default: return out;
    }
}

/// Canonical final answer used for majority voting, or empty when the
/// candidate states none.
inline std::optional<std::string> answer_key(const Problem& problem, const Candidate& cand) {
    switch (problem.task_kind) {
    case TaskKind::math_answer: {
        const auto tok = extract_final_answer(cand.body);
        if (!tok) return std::nullopt;
        const auto v = parse_number(*tok);
        if (!v) return std::nullopt;
        return std::to_string(std::llround(*v * 1e6));
    }
    case TaskKind::multichoice: {
        const auto tok = extract_final_answer(cand.body);
        if (!tok) return std::nullopt;
        const auto c = parse_choice(*tok);
        if (!c) return std::nullopt;
        return std::to_string(*c);
    }
    case TaskKind::logic_puzzle: {
        const auto m = extract_role_map(cand.body);
        if (!m) return std::nullopt;
        return to_json(*m).dump();
    }
    case TaskKind::itinerary: {
        try {
            const Itinerary it = parse_itinerary(cand.body);
            std::string key;
            for (const auto& d : it.days) {
                key += canonical(d.current_city) + "|" + canonical(d.transportation.value_or("")) + "|" +
                       canonical(d.breakfast.value_or("")) + "|" + canonical(d.lunch.value_or("")) + "|" +
                       canonical(d.dinner.value_or("")) + "|";
                for (const auto& a : d.attractions) key += canonical(a) + ";";
                key += "|" + canonical(d.accommodation.value_or("")) + "\n";
            }
            return key;
        } catch (const ParseFailure&) {
            return std::nullopt;
        }
    }
    case TaskKind::code: {
        const std::string k = canonical(cand.body);
        if (k.empty()) return std::nullopt;
        return k;
    }
    }
    return std::nullopt;
}

} // namespace ebr
