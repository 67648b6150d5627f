#pragma once

// Pipeline commands behind the `ebr` executable. Each returns a process exit
// status: 0 success, 2 input error, 3 degenerate data, 4 invariant failure.

#include <ebr/core.hpp>
#include <ebr/diagnostics.hpp>
#include <ebr/metrics.hpp>
#include <ebr/parallel.hpp>
#include <ebr/scorer.hpp>
#include <ebr/select.hpp>
#include <ebr/synthetic.hpp>
#include <ebr/theory.hpp>
#include <ebr/triage.hpp>

#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace ebr {

namespace fs = std::filesystem;

enum ExitCode : int { kExitOk = 0, kExitInput = 2, kExitDegenerate = 3, kExitInvariant = 4 };

/// Runs `body`, translating exceptions into exit codes and a one-line message.
inline int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const DegenerateData& e) {
        err << "error: " << e.what() << "\n";
        return kExitDegenerate;
    } catch (const RhoZero& e) {
        err << "error: " << e.what() << "\n";
        return kExitDegenerate;
    } catch (const IOFailure& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const SchemaViolation& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const DuplicateProblemId& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const InvalidConfig& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const MissingLabels& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const MissingGreedyFlag& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const BackendFailure& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const Json::exception& e) {
        err << "error: malformed JSON: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInvariant;
    }
}

/// Defaults, then the config file, then explicit overrides.
inline RunConfig resolve_config(const std::optional<fs::path>& file, const Json& overrides) {
    RunConfig c;
    if (file) c = load_config(*file);
    if (!overrides.is_null()) c = merge_config(c, overrides);
    c.validate();
    return c;
}

inline Json provenance(const RunConfig& cfg) {
    return Json{{"artifact_version", kArtifactVersion}, {"config_hash", config_hash(cfg)}};
}

inline std::string jsonl(const std::vector<Json>& records) {
    std::string out;
    for (const auto& r : records) out += r.dump() + "\n";
    return out;
}

struct CommonInputs {
    std::optional<fs::path> config;
    Json overrides;
    fs::path pools;
    std::optional<fs::path> db;
};

struct Loaded {
    RunConfig cfg;
    std::vector<CandidatePool> pools;
    std::unique_ptr<SandboxDB> db;

    ConstraintContext ctx() const { return {db.get(), {}}; }
};

inline Loaded load_inputs(const CommonInputs& in) {
    Loaded l;
    l.cfg = resolve_config(in.config, in.overrides);
    l.pools = load_pools(in.pools);
    if (in.db) l.db = std::make_unique<SandboxDB>(load_sandbox(*in.db));
    return l;
}

/// Loads a checkpoint, optionally keeping only its first `members` heads.
inline EnsembleScorer load_scorer_subset(const fs::path& path, int members) {
    EnsembleScorer s = load_scorer(path);
    if (members > 0) {
        if (static_cast<std::size_t>(members) > s.members.size()) {
            throw InvalidConfig("checkpoint has only " + std::to_string(s.members.size()) + " members");
        }
        s.members.resize(static_cast<std::size_t>(members));
    }
    return s;
}

/// Keeps the first n candidates of each pool (n = 0 keeps all).
inline void truncate_pools(std::vector<CandidatePool>& pools, int n) {
    if (n <= 0) return;
    for (auto& p : pools) {
        if (p.candidates.size() > static_cast<std::size_t>(n)) p.candidates.resize(static_cast<std::size_t>(n));
    }
}

/// Keeps only candidates of one generator; emptied pools are dropped.
inline void filter_generator(std::vector<CandidatePool>& pools, const std::string& generator) {
    if (generator.empty()) return;
    std::vector<CandidatePool> out;
    for (auto& p : pools) {
        std::erase_if(p.candidates, [&](const Candidate& c) { return c.generator_id != generator; });
        if (!p.candidates.empty()) out.push_back(std::move(p));
    }
    pools = std::move(out);
}

// ---------------------------------------------------------------------------
// ingest

struct IngestOptions {
    fs::path input;
    fs::path output;
    bool json_array = false;
    bool shuffle = false;
};

inline int cmd_ingest(const IngestOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        auto pools = load_pools(o.input, o.json_array ? PoolFormat::json_array : PoolFormat::jsonl);
        std::size_t cands = 0, labelled = 0, greedy = 0, usable = 0;
        for (auto& p : pools) {
            if (o.shuffle) p = shuffle_pool(p, p.shuffle_seed);
            cands += p.candidates.size();
            for (const auto& c : p.candidates) {
                labelled += is_correct(p.problem, c).has_value();
                greedy += c.greedy;
            }
            usable += !sample_pairs(p, 1, 0).empty();
        }
        save_pools(o.output, pools);
        out << "problems " << pools.size() << ", candidates " << cands << ", labelled " << labelled << ", greedy "
            << greedy << ", trainable " << usable << "\n";
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
    CommonInputs in;
    fs::path checkpoint;
};

inline int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Loaded l = load_inputs(o.in);
        FeaturizerConfig fcfg;
        fcfg.dim = l.cfg.feature_dim;
        std::vector<TrainStats> stats;
        const auto scorer = train_ensemble(l.pools, fcfg, default_member_configs(l.cfg), l.cfg, &stats);
        save_scorer(o.checkpoint, scorer);
        for (std::size_t k = 0; k < stats.size(); ++k) {
            out << "member " << k << ": final pair loss " << detail::fmt(stats[k].final_train_loss) << " ("
                << stats[k].train_pairs << " pairs, " << stats[k].epochs_run << " epochs";
            if (stats[k].validation_pairs > 0) out << ", validation loss " << detail::fmt(stats[k].best_validation_loss);
            out << ")\n";
        }
        out << "config_hash " << scorer.config_hash << "\n";
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------
// score / select / eval

struct ScorerSource {
    std::optional<fs::path> checkpoint;
    /// Replaces the learned scorer with the label-derived stub.
    bool perfect = false;
    int members = 0;
};

struct QualityHandle {
    std::shared_ptr<EnsembleScorer> scorer;
    QualityFn fn;
    std::string scorer_hash;
};

inline QualityHandle make_quality(const ScorerSource& src, const RunConfig& cfg) {
    QualityHandle q;
    if (src.perfect) {
        q.fn = perfect_quality(cfg.pass_threshold);
        q.scorer_hash = "perfect";
        return q;
    }
    if (!src.checkpoint) throw InvalidConfig("a checkpoint is required unless the perfect scorer is requested");
    q.scorer = std::make_shared<EnsembleScorer>(load_scorer_subset(*src.checkpoint, src.members));
    q.fn = ensemble_quality(*q.scorer);
    q.scorer_hash = q.scorer->config_hash;
    return q;
}

inline std::vector<ScoredProblem> score_all(const Loaded& l, const QualityFn& quality) {
    std::vector<ScoredProblem> out(l.pools.size());
    const auto ctx = l.ctx();
    parallel_for(l.pools.size(), l.cfg.workers,
                 [&](std::size_t i) { out[i] = score_problem(l.pools[i], quality, ctx, l.cfg); });
    return out;
}

inline Json to_json(const Baselines& b) {
    Json j;
    auto put = [&](const char* k, const std::optional<Selection>& s) { j[k] = s ? Json(s->candidate_id) : Json(nullptr); };
    put("greedy", b.greedy);
    put("random", b.random);
    put("self_consistency", b.self_consistency);
    put("oracle", b.oracle);
    return j;
}

inline Json scored_record(const ScoredProblem& sp, const Json& prov) {
    Json j = prov;
    j["problem_id"] = sp.pool.problem.id;
    Json bd = Json::array();
    for (const auto& b : sp.breakdowns) bd.push_back(to_json(b));
    j["breakdowns"] = std::move(bd);
    j["selection"] = to_json(sp.selection);
    j["baselines"] = to_json(sp.baselines);
    return j;
}

struct ScoreOptions {
    CommonInputs in;
    ScorerSource scorer;
    fs::path output;
    /// Selection records only, without per-candidate breakdowns.
    bool selections_only = false;
};

inline int cmd_score(const ScoreOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Loaded l = load_inputs(o.in);
        const auto q = make_quality(o.scorer, l.cfg);
        const auto scored = score_all(l, q.fn);
        Json prov = provenance(l.cfg);
        prov["scorer_config_hash"] = q.scorer_hash;
        std::vector<Json> recs;
        std::size_t degraded = 0;
        for (const auto& sp : scored) {
            degraded += sp.selection.degraded;
            if (o.selections_only) {
                Json j = prov;
                j["problem_id"] = sp.pool.problem.id;
                const auto& b = sp.breakdowns[sp.selection.index];
                j["selection"] = to_json(sp.selection);
                j["generator_id"] = sp.pool.candidates[sp.selection.index].generator_id;
                j["total"] = json_number(b.total);
                j["sigma"] = json_number(b.sigma);
                j["baselines"] = to_json(sp.baselines);
                recs.push_back(std::move(j));
            } else {
                recs.push_back(scored_record(sp, prov));
            }
        }
        write_file(o.output, jsonl(recs));
        out << "scored " << scored.size() << " problems";
        if (degraded) out << " (" << degraded << " degraded selections)";
        out << "\n";
        return kExitOk;
    });
}

struct EvalOptions {
    CommonInputs in;
    ScorerSource scorer;
    /// Output prefix: <prefix>.scored.jsonl, <prefix>.report.json, <prefix>.report.csv
    fs::path prefix;
    int pool_size = 0;
    std::string generator;
    std::vector<double> abstain_fractions;
};

inline Json report_document(const EvalReport& r, const RunConfig& cfg, const std::string& scorer_hash) {
    Json j = provenance(cfg);
    j["scorer_config_hash"] = scorer_hash;
    j["config"] = to_json(cfg);
    j["report"] = to_json(r);
    return j;
}

inline int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        Loaded l = load_inputs(o.in);
        truncate_pools(l.pools, o.pool_size);
        filter_generator(l.pools, o.generator);
        if (l.pools.empty()) throw DegenerateData("no pools to evaluate");
        const auto q = make_quality(o.scorer, l.cfg);
        const auto scored = score_all(l, q.fn);
        const auto report = evaluate(scored, l.cfg, o.abstain_fractions);
        Json prov = provenance(l.cfg);
        prov["scorer_config_hash"] = q.scorer_hash;
        std::vector<Json> recs;
        for (const auto& sp : scored) recs.push_back(scored_record(sp, prov));
        const std::string base = o.prefix.string();
        write_file(base + ".scored.jsonl", jsonl(recs));
        write_file(base + ".report.json", report_document(report, l.cfg, q.scorer_hash).dump(2) + "\n");
        write_file(base + ".report.csv", "metric,key,value\nmeta,artifact_version," + std::string(kArtifactVersion) +
                                             "\nmeta,config_hash," + config_hash(l.cfg) + "\n" +
                                             to_csv(report).substr(std::string("metric,key,value\n").size()));
        out << "pass@1 " << detail::fmt(report.pass_at_1) << " over " << report.n_problems << " problems";
        for (const auto& [k, v] : report.baseline_pass_at_1) out << ", " << k << " " << detail::fmt(v);
        out << "\n";
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------
// triage

struct TriageOptions {
    CommonInputs in;
    ScorerSource scorer;
    std::string backend = "none";
    std::optional<fs::path> replay;
    double synthetic_accuracy = 0.7;
    fs::path output;
};

inline std::unique_ptr<GenerationBackend> make_backend(const TriageOptions& o, std::uint64_t seed) {
    if (o.backend == "none") return std::make_unique<NoBackend>();
    if (o.backend == "replay") {
        if (!o.replay) throw InvalidConfig("the replay backend needs a replay file");
        return std::make_unique<ReplayBackend>(load_replay(*o.replay));
    }
    if (o.backend == "synthetic") {
        if (!(o.synthetic_accuracy >= 0.0 && o.synthetic_accuracy <= 1.0)) {
            throw InvalidConfig("synthetic accuracy must lie in [0,1]");
        }
        return std::make_unique<SyntheticBackend>(o.synthetic_accuracy, derive_seed(seed, "pass2"));
    }
    throw InvalidConfig("unknown backend '" + o.backend + "'");
}

inline int cmd_triage(const TriageOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Loaded l = load_inputs(o.in);
        const auto q = make_quality(o.scorer, l.cfg);
        const auto backend = make_backend(o, static_cast<std::uint64_t>(l.cfg.master_seed));
        const auto ctx = l.ctx();
        std::vector<TriageOutcome> res(l.pools.size());
        parallel_for(l.pools.size(), l.cfg.workers,
                     [&](std::size_t i) { res[i] = run_two_pass(l.pools[i], q.fn, ctx, *backend, l.cfg); });
        Json prov = provenance(l.cfg);
        prov["scorer_config_hash"] = q.scorer_hash;
        prov["backend"] = backend->name();
        prov["lambda"] = l.cfg.lambda;
        prov["lambda_itinerary"] = l.cfg.lambda_itinerary;
        prov["theta_sigma"] = l.cfg.theta_sigma;
        prov["theta_abstain"] = l.cfg.theta_abstain;
        std::vector<Json> recs;
        std::size_t triggered = 0, adopted = 0, abstained = 0, ok1 = 0, ok2 = 0, answered = 0;
        for (std::size_t i = 0; i < res.size(); ++i) {
            const auto& r = res[i];
            triggered += r.pass2_triggered;
            adopted += r.adopted_pass2;
            abstained += r.abstained;
            const auto c1 = is_correct(r.pool.problem, r.pool.candidates[r.pass1_selection.index], l.cfg.pass_threshold);
            const auto c2 = is_correct(r.pool.problem, r.pool.candidates[r.selection.index], l.cfg.pass_threshold);
            ok1 += c1 && *c1;
            ok2 += c2 && *c2;
            answered += !r.abstained;
            Json j = prov;
            j.update(to_json(r));
            recs.push_back(std::move(j));
        }
        write_file(o.output, jsonl(recs));
        const double n = static_cast<double>(std::max<std::size_t>(res.size(), 1));
        out << "problems " << res.size() << ", triggered " << triggered << ", adopted pass 2 " << adopted
            << ", abstained " << abstained << "\n";
        out << "pass@1 single-pass " << detail::fmt(static_cast<double>(ok1) / n) << ", two-pass "
            << detail::fmt(static_cast<double>(ok2) / n) << ", coverage " << detail::fmt(static_cast<double>(answered) / n)
            << "\n";
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------
// diagnose / dfr

struct DiagnoseOptions {
    CommonInputs in;
    fs::path checkpoint;
    fs::path output;
};

inline Json screen_json(const Screen& s) {
    return Json{{"pick_distribution", s.pick_distribution},
                {"spread", s.spread ? Json(*s.spread) : Json(nullptr)},
                {"pass1", s.pass_at_1},
                {"max_pick_share", max_share(s.pick_distribution)}};
}

inline int cmd_diagnose(const DiagnoseOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Loaded l = load_inputs(o.in);
        const auto scorer = load_scorer(o.checkpoint);
        const auto s = screen(scorer, l.pools, l.cfg, l.ctx());
        Json j = provenance(l.cfg);
        j.update(screen_json(s));
        write_file(o.output, j.dump(2) + "\n");
        for (const auto& [g, v] : s.pick_distribution) out << g << " " << detail::fmt(v) << "\n";
        out << "spread " << (s.spread ? detail::fmt(*s.spread) : std::string("undefined")) << "\n";
        return kExitOk;
    });
}

struct DfrCommandOptions {
    CommonInputs in;  // pools = training pools to balance
    std::optional<fs::path> eval_pools;
    fs::path checkpoint;
    fs::path out_checkpoint;
    fs::path report;
    /// 0 caps every cell at the smallest cell size.
    int cap_per_cell = 0;
    DfrOptions dfr;
};

inline int cmd_dfr(const DfrCommandOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Loaded l = load_inputs(o.in);
        const auto scorer = load_scorer(o.checkpoint);
        const std::size_t cap = o.cap_per_cell > 0 ? static_cast<std::size_t>(o.cap_per_cell)
                                                   : smallest_cell(l.pools, l.cfg.pass_threshold);
        const auto balanced =
            group_balance(l.pools, cap, derive_seed(static_cast<std::uint64_t>(l.cfg.master_seed), "balance"),
                          l.cfg.pass_threshold);
        const auto post = dfr_retrain(scorer, balanced, o.dfr, l.cfg.workers);
        save_scorer(o.out_checkpoint, post);
        const auto eval = o.eval_pools ? load_pools(*o.eval_pools) : l.pools;
        const auto pre_s = screen(scorer, eval, l.cfg, l.ctx());
        const auto post_s = screen(post, eval, l.cfg, l.ctx());
        Json j = provenance(l.cfg);
        j["cap_per_cell"] = cap;
        j.update(dfr_report_json(pre_s, post_s));
        write_file(o.report, j.dump(2) + "\n");
        out << "max pick share " << detail::fmt(max_share(pre_s.pick_distribution)) << " -> "
            << detail::fmt(max_share(post_s.pick_distribution)) << "\n";
        out << "spread " << (pre_s.spread ? detail::fmt(*pre_s.spread) : "undefined") << " -> "
            << (post_s.spread ? detail::fmt(*post_s.spread) : "undefined") << "\n";
        out << "pass@1 " << detail::fmt(pre_s.pass_at_1) << " -> " << detail::fmt(post_s.pass_at_1) << "\n";
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
    std::vector<int> K = {1, 3, 5, 9, 15};
    std::vector<double> q = {0.6, 0.7, 0.8};
    std::vector<double> rho = {0.0, 0.3, 0.6, 1.0};
    std::int64_t trials = 100000;
    std::uint64_t seed = 42;
    int workers = 0;
    fs::path output;
};

inline std::string simulate_csv(const SimulateOptions& o) {
    std::ostringstream os;
    os << "K,q,rho,p_gaussian,p_exact,p_mc,stderr,p_inf\n";
    for (int k : o.K) {
        for (double q : o.q) {
            for (double rho : o.rho) {
                const VoterModel m{k, q, rho, o.trials, o.seed};
                const auto mc = mc_majority(m, o.workers);
                os << k << "," << detail::fmt(q) << "," << detail::fmt(rho) << ","
                   << detail::fmt(p_ensemble_gaussian(k, q, rho)) << "," << detail::fmt(p_majority_exact(k, q, rho))
                   << "," << detail::fmt(mc.estimate) << "," << detail::fmt(mc.std_error) << ","
                   << (rho > 0.0 ? detail::fmt(p_infinity(q, rho)) : std::string("1")) << "\n";
            }
        }
    }
    return os.str();
}

inline int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        for (int k : o.K) {
            if (k < 1) throw InvalidConfig("K must be at least 1");
        }
        for (double q : o.q) {
            if (!(q > 0.5 && q < 1.0)) throw InvalidConfig("q must lie in (0.5, 1)");
        }
        for (double r : o.rho) {
            if (!(r >= 0.0 && r <= 1.0)) throw InvalidConfig("rho must lie in [0, 1]");
        }
        if (o.trials < 10000) throw InvalidConfig("trials must be at least 10000");
        const std::string csv = simulate_csv(o);
        if (o.output.empty()) out << csv;
        else write_file(o.output, csv);
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------
// generate-synthetic

struct GenerateOptions {
    std::string kind;
    int problems = 100;
    int candidates = 8;
    std::uint64_t seed = 42;
    /// Character count for puzzles (both bounds when min/max are unset).
    int tier = 3;
    int min_characters = 0;
    int max_characters = 0;
    double imbalance = 0.9;
    double styled_accuracy = 0.9;
    int salience = 3;
    bool balanced_eval = false;
    fs::path output;
    std::optional<fs::path> db_output;
};

inline int cmd_generate_synthetic(const GenerateOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (o.problems < 1) throw InvalidConfig("problems must be at least 1");
        if (o.candidates < 1) throw InvalidConfig("candidates must be at least 1");
        std::vector<CandidatePool> pools;
        if (o.kind == "separable") {
            pools = generate_separable({o.problems, o.candidates, "verified", o.seed});
        } else if (o.kind == "confounded") {
            if (o.salience < 1) throw InvalidConfig("salience must be at least 1");
            const int per_gen = std::max(1, o.candidates / 4);
            ConfoundedParams cp{o.problems, per_gen, o.imbalance, o.styled_accuracy, o.salience,
                                "consistent", "stylemark", o.seed};
            pools = o.balanced_eval ? generate_confounded_eval(cp, o.problems) : generate_confounded(cp);
        } else if (o.kind == "kk_puzzles") {
            const int lo = o.min_characters > 0 ? o.min_characters : o.tier;
            const int hi = o.max_characters > 0 ? o.max_characters : o.tier;
            pools = generate_kk_pools({o.problems, lo, hi, o.candidates, o.seed});
        } else if (o.kind == "itineraries") {
            auto [db, ps] = generate_itineraries({o.problems, o.candidates, o.seed});
            pools = std::move(ps);
            const fs::path dbp = o.db_output ? *o.db_output : fs::path(o.output.string() + ".db.json");
            write_file(dbp, to_json(db).dump(2) + "\n");
            out << "sandbox written to " << dbp.string() << "\n";
        } else {
            throw InvalidConfig("unknown synthetic kind '" + o.kind +
                                "' (expected separable, confounded, kk_puzzles or itineraries)");
        }
        save_pools(o.output, pools);
        std::size_t n = 0;
        for (const auto& p : pools) n += p.candidates.size();
        out << "wrote " << pools.size() << " pools with " << n << " candidates\n";
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------
// report

struct ReportOptions {
    std::vector<fs::path> reports;
    fs::path output;
};

/// Side-by-side Markdown table of eval reports, one column per file.
inline std::string compare_reports(const std::vector<std::pair<std::string, Json>>& docs) {
    auto cell = [](const Json& j) -> std::string {
        if (j.is_null()) return "-";
        if (j.is_number()) return detail::fmt(j.get<double>());
        if (j.is_string()) return j.get<std::string>();
        return j.dump();
    };
    std::vector<std::pair<std::string, std::vector<const char*>>> rows = {
        {"config_hash", {"config_hash"}},
        {"lambda", {"config", "lambda"}},
        {"lambda_itinerary", {"config", "lambda_itinerary"}},
        {"theta_sigma", {"config", "theta_sigma"}},
        {"theta_abstain", {"config", "theta_abstain"}},
        {"problems", {"report", "n_problems"}},
        {"pass@1", {"report", "pass_at_1"}},
        {"mean violation", {"report", "mean_violation"}},
        {"energy gap", {"report", "energy_gap"}},
        {"kendall tau", {"report", "kendall_tau"}},
        {"sigma auroc", {"report", "sigma_auroc"}},
        {"ece", {"report", "ece"}},
        {"greedy", {"report", "baseline_pass_at_1", "greedy"}},
        {"random", {"report", "baseline_pass_at_1", "random"}},
        {"self-consistency", {"report", "baseline_pass_at_1", "self_consistency"}},
        {"oracle", {"report", "baseline_pass_at_1", "oracle"}},
    };
    std::string md = "| metric |";
    std::string sep = "|---|";
    for (const auto& [name, d] : docs) {
        md += " " + name + " |";
        sep += "---|";
    }
    md += "\n" + sep + "\n";
    for (const auto& [label, path] : rows) {
        md += "| " + label + " |";
        for (const auto& [name, d] : docs) {
            Json v = d;
            for (const char* k : path) {
                if (!v.is_object() || !v.contains(k)) {
                    v = nullptr;
                    break;
                }
                v = v[k];
            }
            md += " " + cell(v) + " |";
        }
        md += "\n";
    }
    return md;
}

inline int cmd_report(const ReportOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (o.reports.empty()) throw InvalidConfig("no report files given");
        std::vector<std::pair<std::string, Json>> docs;
        for (const auto& p : o.reports) {
            Json j = Json::parse(read_file(p), nullptr, false);
            if (j.is_discarded() || !j.is_object() || !j.contains("report")) {
                throw SchemaViolation(0, p.string() + " is not an eval report");
            }
            docs.emplace_back(p.stem().string(), std::move(j));
        }
        const std::string md = compare_reports(docs);
        if (o.output.empty()) out << md;
        else write_file(o.output, md);
        return kExitOk;
    });
}

} // namespace ebr
