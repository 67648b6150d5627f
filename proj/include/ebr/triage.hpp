#pragma once

// Two-pass inference: accept, regenerate with constraint feedback, or abstain.

#include <ebr/answers.hpp>
#include <ebr/constraints.hpp>
#include <ebr/core.hpp>
#include <ebr/select.hpp>

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ebr {

enum class Action { accept, regenerate, abstain };

inline const char* to_string(Action a) {
    switch (a) {
    case Action::accept: return "accept";
    case Action::regenerate: return "regenerate";
    case Action::abstain: return "abstain";
    }
    return "?";
}

struct TriageDecision {
    Action action = Action::accept;
    double sigma_selected = 0.0;
    double sigma_pool_mean = 0.0;
    double e_constraint_selected = 0.0;
};

/// Accept a confident, violation-free selection; abstain when sigma exceeds
/// the abstention threshold; regenerate otherwise.
inline Action decide(double sigma_sel, double e_c_sel, const RunConfig& cfg) {
    if (sigma_sel <= cfg.theta_sigma && e_c_sel == 0.0) return Action::accept;
    if (sigma_sel > cfg.theta_abstain) return Action::abstain;
    return Action::regenerate;
}

/// One sentence per violated dimension, ordered by dimension name.
inline std::string format_feedback(const ConstraintReport& report) {
    std::string out;
    for (const auto& [dim, v] : report.dims) {
        if (!(v > 0.0)) continue;
        auto it = report.messages.find(dim);
        std::string sentence = it != report.messages.end()
                                   ? it->second
                                   : "The " + dim + " constraint is violated (score " + detail::fmt(v) + ").";
        if (!out.empty()) out += ' ';
        out += sentence;
    }
    if (out.empty()) throw EmptyReport();
    return out;
}

// ---------------------------------------------------------------------------
// Generation backends

struct GeneratedCandidate {
    std::string body;
    std::optional<Correctness> correctness;
    std::optional<double> violation;
};

class GenerationBackend {
public:
    virtual ~GenerationBackend() = default;
    virtual std::string name() const = 0;
    virtual bool active() const { return true; }
    /// Up to n pass-2 candidates for the pool's problem.
    virtual std::vector<GeneratedCandidate> generate(const CandidatePool& pool, const std::string& feedback,
                                                     int n) const = 0;
};

class NoBackend final : public GenerationBackend {
public:
    std::string name() const override { return "none"; }
    bool active() const override { return false; }
    std::vector<GeneratedCandidate> generate(const CandidatePool&, const std::string&, int) const override { return {}; }
};

/// Pre-generated pass-2 candidates keyed by problem id.
class ReplayBackend final : public GenerationBackend {
public:
    explicit ReplayBackend(std::unordered_map<std::string, std::vector<GeneratedCandidate>> entries)
        : entries_(std::move(entries)) {}

    std::string name() const override { return "replay"; }

    std::vector<GeneratedCandidate> generate(const CandidatePool& pool, const std::string&, int n) const override {
        auto it = entries_.find(pool.problem.id);
        if (it == entries_.end()) throw BackendFailure("no replay entry for problem " + pool.problem.id);
        std::vector<GeneratedCandidate> out = it->second;
        if (out.size() > static_cast<std::size_t>(std::max(n, 0))) out.resize(static_cast<std::size_t>(std::max(n, 0)));
        return out;
    }

private:
    std::unordered_map<std::string, std::vector<GeneratedCandidate>> entries_;
};

/// Replay file: JSON Lines of {"problem_id": ..., "candidates": [...]} where
/// each candidate is a body string or {"body", "label"} object.
inline ReplayBackend load_replay(const std::filesystem::path& path) {
    std::unordered_map<std::string, std::vector<GeneratedCandidate>> m;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw SchemaViolation(lineno, "replay record must be a JSON object");
        if (!j.contains("problem_id") || !j["problem_id"].is_string()) throw SchemaViolation(lineno, "missing problem_id");
        if (!j.contains("candidates") || !j["candidates"].is_array()) throw SchemaViolation(lineno, "missing candidates");
        auto& list = m[j["problem_id"].get<std::string>()];
        for (const auto& c : j["candidates"]) {
            GeneratedCandidate g;
            if (c.is_string()) {
                g.body = c.get<std::string>();
            } else if (c.is_object() && c.contains("body")) {
                g.body = c["body"].get<std::string>();
                if (auto l = c.find("label"); l != c.end()) {
                    if (l->is_number()) g.violation = l->get<double>();
                    else if (*l == "correct") g.correctness = Correctness::correct;
                    else if (*l == "incorrect") g.correctness = Correctness::incorrect;
                }
            } else {
                throw SchemaViolation(lineno, "replay candidate must be a string or an object with a body");
            }
            list.push_back(std::move(g));
        }
    }
    return ReplayBackend(std::move(m));
}

/// Resamples bodies from the pass-1 pool: with probability `accuracy` a
/// best-labelled candidate, otherwise another one, tagged with a revision
/// marker. The stream depends only on (seed, problem id).
class SyntheticBackend final : public GenerationBackend {
public:
    SyntheticBackend(double accuracy, std::uint64_t seed) : accuracy_(accuracy), seed_(seed) {}

    std::string name() const override { return "synthetic"; }

    std::vector<GeneratedCandidate> generate(const CandidatePool& pool, const std::string&, int n) const override {
        Rng rng(derive_seed(seed_, pool.problem.id));
        std::vector<std::size_t> good, bad;
        double best_v = std::numeric_limits<double>::infinity();
        for (const auto& c : pool.candidates) {
            if (c.violation) best_v = std::min(best_v, *c.violation);
        }
        for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
            const auto& c = pool.candidates[i];
            const bool ok = c.violation ? *c.violation == best_v : binary_label(c).value_or(false);
            (ok ? good : bad).push_back(i);
        }
        std::vector<GeneratedCandidate> out;
        for (int k = 0; k < n; ++k) {
            const bool want_good = rng.bernoulli(accuracy_);
            const auto& from = (want_good && !good.empty()) || bad.empty() ? good : bad;
            const auto& src = pool.candidates[from[rng.index(from.size())]];
            GeneratedCandidate g;
            g.body = src.body + "\n(revision " + std::to_string(k + 1) + ")";
            g.correctness = src.correctness;
            g.violation = src.violation;
            out.push_back(std::move(g));
        }
        return out;
    }

private:
    double accuracy_;
    std::uint64_t seed_;
};

/// Labels a generated body from the problem's gold data where possible.
inline void auto_label(const Problem& p, Candidate& c, const ConstraintContext& ctx) {
    switch (p.task_kind) {
    case TaskKind::math_answer:
    case TaskKind::multichoice:
        if (p.gold) {
            const auto m = match_answer(c.body, *p.gold, p.task_kind);
            c.correctness = m == AnswerMatch::correct ? Correctness::correct : Correctness::incorrect;
        }
        break;
    case TaskKind::logic_puzzle:
        if (p.puzzle) {
            const auto r = kk_checker(puzzle_from_json(*p.puzzle), c.body);
            c.correctness = r.e_constraint == 0.0 ? Correctness::correct : Correctness::incorrect;
        }
        break;
    case TaskKind::itinerary:
        if (ctx.db) {
            const auto r = e_constraint(p, c, ctx);
            if (r.report) c.violation = r.report->violation_score;
        }
        break;
    case TaskKind::code: break;
    }
}

// ---------------------------------------------------------------------------
// Two-pass loop

struct TriageOutcome {
    std::string problem_id;
    TriageDecision pass1_decision;
    Selection pass1_selection;
    bool pass2_triggered = false;
    bool pass2_ran = false;
    std::size_t pass2_added = 0;
    bool adopted_pass2 = false;
    Selection selection;  // argmin over the final pool
    bool abstained = false;
    /// Abstention if the final check applied only after a second pass.
    bool abstained_if_pass2_only = false;
    std::optional<std::string> final_candidate;  // empty when abstaining
    std::string feedback;
    std::string warning;
    CandidatePool pool;  // pass-1 candidates followed by pass-2 candidates
    std::vector<EnergyBreakdown> breakdowns;
};

inline TriageOutcome run_two_pass(const CandidatePool& pool, const QualityFn& quality, const ConstraintContext& ctx,
                                  const GenerationBackend& backend, const RunConfig& cfg) {
    TriageOutcome out;
    out.problem_id = pool.problem.id;
    out.pool = pool;
    const double lambda = cfg.lambda_for(pool.problem.task_kind);
    out.breakdowns = score_pool(pool, quality, ctx, lambda);
    out.pass1_selection = select_best(out.breakdowns);

    const auto& sel1 = out.breakdowns[out.pass1_selection.index];
    double mean_sigma = 0.0;
    for (const auto& b : out.breakdowns) mean_sigma += b.sigma;
    mean_sigma /= static_cast<double>(out.breakdowns.size());
    out.pass1_decision = {decide(sel1.sigma, sel1.e_constraint, cfg), sel1.sigma, mean_sigma, sel1.e_constraint};
    out.pass2_triggered = sel1.e_constraint > 0.0 || mean_sigma > cfg.theta_sigma;

    if (out.pass2_triggered && backend.active() && cfg.n_pass2 > 0) {
        if (sel1.e_constraint > 0.0 && sel1.report) {
            try {
                out.feedback = format_feedback(*sel1.report);
            } catch (const EmptyReport&) {
            }
        }
        if (out.feedback.empty()) {
            out.feedback = "The selected answer is uncertain (ensemble spread " + detail::fmt(mean_sigma) +
                           "). Re-derive the solution carefully.";
        }
        try {
            const auto gen = backend.generate(pool, out.feedback, cfg.n_pass2);
            const std::size_t n1 = out.pool.candidates.size();
            for (std::size_t i = 0; i < gen.size(); ++i) {
                Candidate c;
                c.id = pool.problem.id + ":p2:" + std::to_string(i);
                c.problem_id = pool.problem.id;
                c.generator_id = "pass2:" + backend.name();
                c.body = gen[i].body;
                c.correctness = gen[i].correctness;
                c.violation = gen[i].violation;
                if (!c.correctness && !c.violation) auto_label(pool.problem, c, ctx);
                out.breakdowns.push_back(score_candidate(pool.problem, c, quality, ctx, lambda));
                out.pool.candidates.push_back(std::move(c));
            }
            out.pass2_ran = true;
            out.pass2_added = out.pool.candidates.size() - n1;
        } catch (const BackendFailure& e) {
            out.warning = std::string("pass 2 skipped: ") + e.what();
        }
    }

    out.selection = select_best(out.breakdowns);
    out.adopted_pass2 = out.selection.index >= pool.candidates.size();
    const double final_sigma = out.breakdowns[out.selection.index].sigma;
    out.abstained = final_sigma > cfg.theta_abstain;
    out.abstained_if_pass2_only = out.pass2_ran && out.abstained;
    if (!out.abstained) out.final_candidate = out.selection.candidate_id;
    return out;
}

inline Json to_json(const TriageOutcome& o) {
    Json j;
    j["problem_id"] = o.problem_id;
    j["pass1"] = {{"decision", to_string(o.pass1_decision.action)},
                  {"sigma_selected", json_number(o.pass1_decision.sigma_selected)},
                  {"sigma_pool_mean", json_number(o.pass1_decision.sigma_pool_mean)},
                  {"e_constraint_selected", json_number(o.pass1_decision.e_constraint_selected)},
                  {"selected", to_json(o.pass1_selection)}};
    j["pass2_triggered"] = o.pass2_triggered;
    j["pass2_ran"] = o.pass2_ran;
    j["pass2_added"] = o.pass2_added;
    j["adopted_pass2"] = o.adopted_pass2;
    j["selected"] = to_json(o.selection);
    j["abstained"] = o.abstained;
    j["abstained_if_pass2_only"] = o.abstained_if_pass2_only;
    j["final"] = o.final_candidate ? Json(*o.final_candidate) : Json("ABSTAIN");
    if (!o.feedback.empty()) j["feedback"] = o.feedback;
    if (!o.warning.empty()) j["warning"] = o.warning;
    Json added = Json::array();
    for (std::size_t i = o.pool.candidates.size() - o.pass2_added; i < o.pool.candidates.size(); ++i) {
        added.push_back(to_json(o.pool.candidates[i]));
    }
    j["pass2_candidates"] = std::move(added);
    return j;
}

} // namespace ebr
