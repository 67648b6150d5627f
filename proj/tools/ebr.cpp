#include <ebr/commands.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

using ebr::Json;

// RunConfig overrides given on the command line.
struct ConfigFlags {
    std::optional<std::string> file;
    std::optional<double> lambda, lambda_itinerary, theta_sigma, theta_abstain, bag_fraction, learning_rate,
        validation_fraction, dropout, pass_threshold;
    std::optional<int> K, max_pairs, n_pass2, epochs, batch_size, patience, feature_dim, workers;
    std::optional<std::int64_t> seed;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", file, "JSON config file");
        app->add_option("--lambda", lambda, "Constraint weight");
        app->add_option("--lambda-itinerary", lambda_itinerary, "Constraint weight for itinerary tasks");
        app->add_option("--theta-sigma", theta_sigma, "Accept threshold on sigma");
        app->add_option("--theta-abstain", theta_abstain, "Abstain threshold on sigma");
        app->add_option("--K", K, "Ensemble size");
        app->add_option("--max-pairs", max_pairs, "Pair cap per problem");
        app->add_option("--bag-fraction", bag_fraction, "Share of problems per member");
        app->add_option("--n-pass2", n_pass2, "Second-pass candidates");
        app->add_option("--seed", seed, "Master seed");
        app->add_option("--epochs", epochs, "Training epochs");
        app->add_option("--learning-rate", learning_rate, "Peak learning rate");
        app->add_option("--batch-size", batch_size, "Minibatch size in pairs");
        app->add_option("--patience", patience, "Early-stopping patience");
        app->add_option("--validation-fraction", validation_fraction, "Held-out share of problems");
        app->add_option("--dropout", dropout, "Hidden dropout rate");
        app->add_option("--feature-dim", feature_dim, "Hashed feature dimension");
        app->add_option("--pass-threshold", pass_threshold, "Violation threshold counted as a pass");
        app->add_option("-j,--workers", workers, "Worker threads (0 = all cores)");
    }

    Json overrides() const {
        Json j = Json::object();
        auto put = [&](const char* key, const auto& v) {
            if (v) j[key] = *v;
        };
        put("lambda", lambda);
        put("lambda_itinerary", lambda_itinerary);
        put("theta_sigma", theta_sigma);
        put("theta_abstain", theta_abstain);
        put("K", K);
        put("max_pairs_per_problem", max_pairs);
        put("bag_fraction", bag_fraction);
        put("n_pass2", n_pass2);
        put("master_seed", seed);
        put("epochs", epochs);
        put("learning_rate", learning_rate);
        put("batch_size", batch_size);
        put("patience", patience);
        put("validation_fraction", validation_fraction);
        put("dropout", dropout);
        put("feature_dim", feature_dim);
        put("pass_threshold", pass_threshold);
        put("workers", workers);
        return j;
    }

    ebr::CommonInputs inputs(const std::string& pools, const std::optional<std::string>& db) const {
        ebr::CommonInputs in;
        if (file) in.config = *file;
        in.overrides = overrides();
        in.pools = pools;
        if (db) in.db = *db;
        return in;
    }
};

struct ScorerFlags {
    std::optional<std::string> checkpoint;
    bool perfect = false;
    int members = 0;

    void attach(CLI::App* app) {
        app->add_option("--checkpoint", checkpoint, "Trained scorer checkpoint");
        app->add_flag("--perfect-scorer", perfect, "Use label-derived energies instead of a checkpoint");
        app->add_option("--members", members, "Use only the first N ensemble members");
    }

    ebr::ScorerSource source() const {
        ebr::ScorerSource s;
        if (checkpoint) s.checkpoint = *checkpoint;
        s.perfect = perfect;
        s.members = members;
        return s;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy-based reranking of candidate pools"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(ebr::kArtifactVersion));
    int status = 0;
    auto& out = std::cout;
    auto& err = std::cerr;

    // ingest
    ebr::IngestOptions ingest;
    std::string ingest_in, ingest_out;
    auto* c_ingest = app.add_subcommand("ingest", "Validate and normalise a pool file");
    c_ingest->add_option("input", ingest_in, "Pool file")->required();
    c_ingest->add_option("-o,--output", ingest_out, "Normalised JSONL output")->required();
    c_ingest->add_flag("--json-array", ingest.json_array, "Input is a single JSON array");
    c_ingest->add_flag("--shuffle", ingest.shuffle, "Apply each pool's seeded shuffle");
    c_ingest->callback([&] {
        ingest.input = ingest_in;
        ingest.output = ingest_out;
        status = ebr::cmd_ingest(ingest, out, err);
    });

    // train
    ConfigFlags train_cfg;
    std::string train_pools, train_ckpt;
    auto* c_train = app.add_subcommand("train", "Train the scorer ensemble");
    c_train->add_option("pools", train_pools, "Labelled pool file")->required();
    c_train->add_option("-o,--output", train_ckpt, "Checkpoint path")->required();
    train_cfg.attach(c_train);
    c_train->callback([&] {
        status = ebr::cmd_train({train_cfg.inputs(train_pools, std::nullopt), train_ckpt}, out, err);
    });

    // score and select
    for (const char* name : {"score", "select"}) {
        auto* c = app.add_subcommand(name, std::string(name) == "score" ? "Write per-candidate energies"
                                                                         : "Write selections and baseline picks");
        auto cfg = std::make_shared<ConfigFlags>();
        auto sc = std::make_shared<ScorerFlags>();
        auto pools = std::make_shared<std::string>();
        auto db = std::make_shared<std::optional<std::string>>();
        auto output = std::make_shared<std::string>();
        c->add_option("pools", *pools, "Pool file")->required();
        c->add_option("--db", *db, "Sandbox database for itinerary tasks");
        c->add_option("-o,--output", *output, "JSONL output")->required();
        cfg->attach(c);
        sc->attach(c);
        const bool selections = std::string(name) == "select";
        c->callback([=, &status, &out, &err] {
            ebr::ScoreOptions o{cfg->inputs(*pools, *db), sc->source(), *output, selections};
            status = ebr::cmd_score(o, out, err);
        });
    }

    // eval
    ConfigFlags eval_cfg;
    ScorerFlags eval_sc;
    std::string eval_pools, eval_prefix;
    std::optional<std::string> eval_db;
    ebr::EvalOptions eval;
    auto* c_eval = app.add_subcommand("eval", "Score, select and report metrics with all baselines");
    c_eval->add_option("pools", eval_pools, "Pool file")->required();
    c_eval->add_option("--db", eval_db, "Sandbox database for itinerary tasks");
    c_eval->add_option("-o,--output", eval_prefix, "Output prefix")->required();
    c_eval->add_option("--pool-size", eval.pool_size, "Keep the first N candidates per pool");
    c_eval->add_option("--generator", eval.generator, "Keep one generator's candidates only");
    c_eval->add_option("--abstain-fractions", eval.abstain_fractions, "Selective-prediction fractions");
    eval_cfg.attach(c_eval);
    eval_sc.attach(c_eval);
    c_eval->callback([&] {
        eval.in = eval_cfg.inputs(eval_pools, eval_db);
        eval.scorer = eval_sc.source();
        eval.prefix = eval_prefix;
        status = ebr::cmd_eval(eval, out, err);
    });

    // triage
    ConfigFlags tri_cfg;
    ScorerFlags tri_sc;
    std::string tri_pools, tri_out;
    std::optional<std::string> tri_db, tri_replay;
    ebr::TriageOptions tri;
    auto* c_tri = app.add_subcommand("triage", "Two-pass selection with feedback-driven regeneration");
    c_tri->add_option("pools", tri_pools, "Pool file")->required();
    c_tri->add_option("--db", tri_db, "Sandbox database for itinerary tasks");
    c_tri->add_option("-o,--output", tri_out, "JSONL output")->required();
    c_tri->add_option("--backend", tri.backend, "none, replay or synthetic")
        ->check(CLI::IsMember({"none", "replay", "synthetic"}));
    c_tri->add_option("--replay", tri_replay, "Replay file for the replay backend");
    c_tri->add_option("--synthetic-accuracy", tri.synthetic_accuracy, "Hit rate of the synthetic backend");
    tri_cfg.attach(c_tri);
    tri_sc.attach(c_tri);
    c_tri->callback([&] {
        tri.in = tri_cfg.inputs(tri_pools, tri_db);
        tri.scorer = tri_sc.source();
        if (tri_replay) tri.replay = *tri_replay;
        tri.output = tri_out;
        status = ebr::cmd_triage(tri, out, err);
    });

    // diagnose
    ConfigFlags diag_cfg;
    std::string diag_pools, diag_ckpt, diag_out;
    auto* c_diag = app.add_subcommand("diagnose", "Pick distribution and cross-generator energy spread");
    c_diag->add_option("pools", diag_pools, "Labelled pool file")->required();
    c_diag->add_option("--checkpoint", diag_ckpt, "Scorer checkpoint")->required();
    c_diag->add_option("-o,--output", diag_out, "JSON report")->required();
    diag_cfg.attach(c_diag);
    c_diag->callback([&] {
        status = ebr::cmd_diagnose({diag_cfg.inputs(diag_pools, std::nullopt), diag_ckpt, diag_out}, out, err);
    });

    // dfr
    ConfigFlags dfr_cfg;
    std::string dfr_pools, dfr_ckpt, dfr_out, dfr_report;
    std::optional<std::string> dfr_eval;
    ebr::DfrCommandOptions dfr;
    auto* c_dfr = app.add_subcommand("dfr", "Retrain energy heads on group-balanced data");
    c_dfr->add_option("pools", dfr_pools, "Labelled pools to balance")->required();
    c_dfr->add_option("--checkpoint", dfr_ckpt, "Scorer checkpoint")->required();
    c_dfr->add_option("-o,--output", dfr_out, "Retrained checkpoint")->required();
    c_dfr->add_option("--report", dfr_report, "JSON report")->required();
    c_dfr->add_option("--eval-pools", dfr_eval, "Pools for the before/after comparison");
    c_dfr->add_option("--cap", dfr.cap_per_cell, "Candidates per (generator, label) cell; 0 = smallest cell");
    c_dfr->add_option("--dfr-epochs", dfr.dfr.epochs, "Retraining epochs");
    c_dfr->add_option("--dfr-learning-rate", dfr.dfr.learning_rate, "Retraining learning rate");
    c_dfr->add_option("--dfr-pairs", dfr.dfr.cap, "Pair cap per problem during retraining");
    dfr_cfg.attach(c_dfr);
    c_dfr->callback([&] {
        dfr.in = dfr_cfg.inputs(dfr_pools, std::nullopt);
        if (dfr_eval) dfr.eval_pools = *dfr_eval;
        dfr.checkpoint = dfr_ckpt;
        dfr.out_checkpoint = dfr_out;
        dfr.report = dfr_report;
        status = ebr::cmd_dfr(dfr, out, err);
    });

    // simulate
    ebr::SimulateOptions sim;
    std::string sim_out;
    auto* c_sim = app.add_subcommand("simulate", "Ensemble accuracy: closed form, exact and Monte Carlo");
    c_sim->add_option("--K", sim.K, "Ensemble sizes");
    c_sim->add_option("--q", sim.q, "Member accuracies");
    c_sim->add_option("--rho", sim.rho, "Vote correlations");
    c_sim->add_option("--trials", sim.trials, "Monte Carlo trials");
    c_sim->add_option("--seed", sim.seed, "Seed");
    c_sim->add_option("-j,--workers", sim.workers, "Worker threads");
    c_sim->add_option("-o,--output", sim_out, "CSV output (default stdout)");
    c_sim->callback([&] {
        sim.output = sim_out;
        status = ebr::cmd_simulate(sim, out, err);
    });

    // generate-synthetic
    ebr::GenerateOptions gen;
    std::string gen_out;
    std::optional<std::string> gen_db;
    auto* c_gen = app.add_subcommand("generate-synthetic", "Write synthetic pools with known ground truth");
    c_gen->add_option("kind", gen.kind, "separable, confounded, kk_puzzles or itineraries")->required();
    c_gen->add_option("-o,--output", gen_out, "Pool file")->required();
    c_gen->add_option("-n,--problems", gen.problems, "Number of problems");
    c_gen->add_option("--candidates", gen.candidates, "Candidates per problem");
    c_gen->add_option("--seed", gen.seed, "Seed");
    c_gen->add_option("--tier", gen.tier, "Characters per puzzle");
    c_gen->add_option("--min-characters", gen.min_characters, "Smallest puzzle");
    c_gen->add_option("--max-characters", gen.max_characters, "Largest puzzle");
    c_gen->add_option("--imbalance", gen.imbalance, "Share of positives from the styled generator");
    c_gen->add_option("--styled-accuracy", gen.styled_accuracy, "Correct rate of the styled generator");
    c_gen->add_option("--salience", gen.salience, "Style phrase repetitions");
    c_gen->add_flag("--balanced-eval", gen.balanced_eval, "One correct and one incorrect candidate per generator");
    c_gen->add_option("--db-output", gen_db, "Sandbox output for itineraries");
    c_gen->callback([&] {
        gen.output = gen_out;
        if (gen_db) gen.db_output = *gen_db;
        status = ebr::cmd_generate_synthetic(gen, out, err);
    });

    // report
    std::vector<std::string> rep_in;
    std::string rep_out;
    auto* c_rep = app.add_subcommand("report", "Compare eval reports side by side");
    c_rep->add_option("reports", rep_in, "Report JSON files")->required();
    c_rep->add_option("-o,--output", rep_out, "Markdown output (default stdout)");
    c_rep->callback([&] {
        ebr::ReportOptions o;
        for (const auto& r : rep_in) o.reports.emplace_back(r);
        o.output = rep_out;
        status = ebr::cmd_report(o, out, err);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : ebr::kExitInput;
    }
    return status;
}
