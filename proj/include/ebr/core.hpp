#pragma once

// Canonical data model: problems, candidates, pools and run configuration,
// plus JSON Lines ingestion and the seeded pool shuffle.

#include <ebr/errors.hpp>
#include <ebr/random.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

namespace ebr {

using Json = nlohmann::json;

inline constexpr const char* kArtifactVersion = "0.3.0";

enum class TaskKind { math_answer, multichoice, itinerary, code, logic_puzzle };

inline const char* to_string(TaskKind k) {
    switch (k) {
    case TaskKind::math_answer: return "math_answer";
    case TaskKind::multichoice: return "multichoice";
    case TaskKind::itinerary: return "itinerary";
    case TaskKind::code: return "code";
    case TaskKind::logic_puzzle: return "logic_puzzle";
    }
    return "?";
}

inline std::optional<TaskKind> parse_task_kind(std::string_view s) {
    for (auto k : {TaskKind::math_answer, TaskKind::multichoice, TaskKind::itinerary, TaskKind::code,
                   TaskKind::logic_puzzle}) {
        if (s == to_string(k)) {
            return k;
        }
    }
    return std::nullopt;
}

enum class Correctness { correct, incorrect };

enum class Verdict { pass, wrong_answer, runtime_error, timeout };

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::wrong_answer: return "wrong_answer";
    case Verdict::runtime_error: return "runtime_error";
    case Verdict::timeout: return "timeout";
    }
    return "?";
}

inline std::optional<Verdict> parse_verdict(std::string_view s) {
    for (auto v : {Verdict::pass, Verdict::wrong_answer, Verdict::runtime_error, Verdict::timeout}) {
        if (s == to_string(v)) {
            return v;
        }
    }
    return std::nullopt;
}

struct Problem {
    std::string id;
    TaskKind task_kind = TaskKind::math_answer;
    std::string statement;
    std::optional<Json> gold;
    std::optional<double> budget;
    std::vector<std::string> preferences;
    std::optional<std::string> difficulty;
    /// Structured knights-and-knaves puzzle (logic_puzzle tasks only).
    std::optional<Json> puzzle;

    bool operator==(const Problem&) const = default;
};

struct Candidate {
    std::string id;
    std::string problem_id;
    std::string generator_id = "unknown";
    std::string body;
    bool greedy = false;
    std::optional<Correctness> correctness;
    /// Continuous violation score in [0,1] (itinerary tasks).
    std::optional<double> violation;
    std::optional<Verdict> execution_verdict;

    bool operator==(const Candidate&) const = default;
};

struct CandidatePool {
    Problem problem;
    std::vector<Candidate> candidates;
    std::int64_t shuffle_seed = 42;

    bool operator==(const CandidatePool&) const = default;
};

/// Binary correctness of a candidate, falling back to the execution verdict
/// for code tasks. Empty when the candidate carries no binary label.
inline std::optional<bool> binary_label(const Candidate& c) {
    if (c.correctness) {
        return *c.correctness == Correctness::correct;
    }
    if (c.execution_verdict) {
        return *c.execution_verdict == Verdict::pass;
    }
    return std::nullopt;
}

/// Whether a candidate counts as correct for evaluation. Itinerary tasks are
/// correct when the violation score is at most `violation_threshold`.
inline std::optional<bool> is_correct(const Problem& p, const Candidate& c, double violation_threshold = 0.0) {
    if (p.task_kind == TaskKind::itinerary) {
        if (!c.violation) {
            return std::nullopt;
        }
        return *c.violation <= violation_threshold;
    }
    return binary_label(c);
}

// ---------------------------------------------------------------------------
// JSON mapping

inline Json to_json(const Problem& p) {
    Json j;
    j["id"] = p.id;
    j["task_kind"] = to_string(p.task_kind);
    j["statement"] = p.statement;
    if (p.gold) j["gold"] = *p.gold;
    if (p.budget) j["budget"] = *p.budget;
    if (!p.preferences.empty()) j["preferences"] = p.preferences;
    if (p.difficulty) j["difficulty"] = *p.difficulty;
    if (p.puzzle) j["puzzle"] = *p.puzzle;
    return j;
}

inline Json to_json(const Candidate& c) {
    Json j;
    j["id"] = c.id;
    j["problem_id"] = c.problem_id;
    j["generator_id"] = c.generator_id;
    j["body"] = c.body;
    j["greedy"] = c.greedy;
    if (c.correctness) {
        j["label"] = *c.correctness == Correctness::correct ? "correct" : "incorrect";
    } else if (c.violation) {
        j["label"] = *c.violation;
    }
    if (c.execution_verdict) j["execution_verdict"] = to_string(*c.execution_verdict);
    return j;
}

inline Json to_json(const CandidatePool& pool) {
    Json j;
    j["problem"] = to_json(pool.problem);
    Json cands = Json::array();
    for (const auto& c : pool.candidates) {
        cands.push_back(to_json(c));
    }
    j["candidates"] = std::move(cands);
    j["shuffle_seed"] = pool.shuffle_seed;
    return j;
}

namespace detail {

inline const Json& require(const Json& obj, const char* key, std::size_t line, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw SchemaViolation(line, where + " missing field '" + key + "'");
    }
    return *it;
}

inline std::string require_string(const Json& obj, const char* key, std::size_t line, const std::string& where) {
    const Json& v = require(obj, key, line, where);
    if (!v.is_string()) {
        throw SchemaViolation(line, where + " field '" + key + "' must be a string");
    }
    return v.get<std::string>();
}

} // namespace detail

inline Problem problem_from_json(const Json& j, std::size_t line = 0) {
    if (!j.is_object()) {
        throw SchemaViolation(line, "problem must be an object");
    }
    Problem p;
    p.id = detail::require_string(j, "id", line, "problem");
    if (p.id.empty()) {
        throw SchemaViolation(line, "problem id must be nonempty");
    }
    const std::string kind = detail::require_string(j, "task_kind", line, "problem");
    auto tk = parse_task_kind(kind);
    if (!tk) {
        throw SchemaViolation(line, "unknown task_kind '" + kind + "'");
    }
    p.task_kind = *tk;
    p.statement = detail::require_string(j, "statement", line, "problem");
    if (auto it = j.find("gold"); it != j.end() && !it->is_null()) p.gold = *it;
    if (auto it = j.find("budget"); it != j.end() && !it->is_null()) {
        if (!it->is_number() || it->get<double>() < 0.0) {
            throw SchemaViolation(line, "budget must be a nonnegative number");
        }
        p.budget = it->get<double>();
    }
    if (auto it = j.find("preferences"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) throw SchemaViolation(line, "preferences must be an array");
        for (const auto& t : *it) {
            if (!t.is_string()) throw SchemaViolation(line, "preference tags must be strings");
            p.preferences.push_back(t.get<std::string>());
        }
    }
    if (auto it = j.find("difficulty"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw SchemaViolation(line, "difficulty must be a string");
        p.difficulty = it->get<std::string>();
    }
    if (auto it = j.find("puzzle"); it != j.end() && !it->is_null()) p.puzzle = *it;

    const bool itinerary = p.task_kind == TaskKind::itinerary;
    if (itinerary != p.budget.has_value()) {
        throw SchemaViolation(line, "budget must be present exactly for itinerary tasks");
    }
    return p;
}

inline Candidate candidate_from_json(const Json& j, TaskKind kind, std::size_t line = 0) {
    if (!j.is_object()) {
        throw SchemaViolation(line, "candidate must be an object");
    }
    Candidate c;
    c.id = detail::require_string(j, "id", line, "candidate");
    c.problem_id = detail::require_string(j, "problem_id", line, "candidate");
    c.body = detail::require_string(j, "body", line, "candidate");
    if (auto it = j.find("generator_id"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw SchemaViolation(line, "generator_id must be a string");
        c.generator_id = it->get<std::string>();
    }
    if (auto it = j.find("greedy"); it != j.end() && !it->is_null()) {
        if (!it->is_boolean()) throw SchemaViolation(line, "greedy must be a boolean");
        c.greedy = it->get<bool>();
    }
    if (auto it = j.find("label"); it != j.end() && !it->is_null()) {
        if (kind == TaskKind::itinerary) {
            if (!it->is_number()) {
                throw SchemaViolation(line, "itinerary candidates take a numeric violation label");
            }
            const double v = it->get<double>();
            if (!(v >= 0.0 && v <= 1.0)) {
                throw SchemaViolation(line, "violation label must lie in [0,1]");
            }
            c.violation = v;
        } else {
            if (!it->is_string()) {
                throw SchemaViolation(line, "label must be \"correct\" or \"incorrect\"");
            }
            const auto s = it->get<std::string>();
            if (s == "correct") {
                c.correctness = Correctness::correct;
            } else if (s == "incorrect") {
                c.correctness = Correctness::incorrect;
            } else {
                throw SchemaViolation(line, "label must be \"correct\" or \"incorrect\"");
            }
        }
    }
    if (auto it = j.find("execution_verdict"); it != j.end() && !it->is_null()) {
        auto v = it->is_string() ? parse_verdict(it->get<std::string>()) : std::nullopt;
        if (!v) throw SchemaViolation(line, "unknown execution_verdict");
        c.execution_verdict = v;
    }
    return c;
}

inline CandidatePool pool_from_json(const Json& j, std::size_t line = 0) {
    if (!j.is_object()) {
        throw SchemaViolation(line, "record must be a JSON object");
    }
    CandidatePool pool;
    pool.problem = problem_from_json(detail::require(j, "problem", line, "record"), line);
    const Json& cands = detail::require(j, "candidates", line, "record");
    if (!cands.is_array() || cands.empty()) {
        throw SchemaViolation(line, "candidates must be a nonempty array");
    }
    std::unordered_set<std::string> ids;
    for (const auto& cj : cands) {
        Candidate c = candidate_from_json(cj, pool.problem.task_kind, line);
        if (c.problem_id != pool.problem.id) {
            throw SchemaViolation(line, "candidate '" + c.id + "' has problem_id '" + c.problem_id +
                                            "' but belongs to '" + pool.problem.id + "'");
        }
        if (!ids.insert(c.id).second) {
            throw SchemaViolation(line, "duplicate candidate id '" + c.id + "'");
        }
        pool.candidates.push_back(std::move(c));
    }
    if (auto it = j.find("shuffle_seed"); it != j.end() && !it->is_null()) {
        if (!it->is_number_integer()) throw SchemaViolation(line, "shuffle_seed must be an integer");
        pool.shuffle_seed = it->get<std::int64_t>();
    }
    return pool;
}

enum class PoolFormat { jsonl, json_array };

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IOFailure("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IOFailure("cannot write " + path.string());
    }
    out << content;
    if (!out) {
        throw IOFailure("write failed for " + path.string());
    }
}

/// Parses pool records from text. Line numbers are 1-based; for json_array
/// they refer to the array position instead.
inline std::vector<CandidatePool> parse_pools(const std::string& text, PoolFormat format = PoolFormat::jsonl) {
    std::vector<CandidatePool> pools;
    std::unordered_set<std::string> seen;
    auto accept = [&](CandidatePool pool) {
        if (!seen.insert(pool.problem.id).second) {
            throw DuplicateProblemId(pool.problem.id);
        }
        pools.push_back(std::move(pool));
    };
    if (format == PoolFormat::json_array) {
        Json arr;
        try {
            arr = Json::parse(text);
        } catch (const Json::parse_error& e) {
            throw SchemaViolation(0, std::string("malformed JSON: ") + e.what());
        }
        if (!arr.is_array()) throw SchemaViolation(0, "expected a top-level array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            accept(pool_from_json(arr[i], i + 1));
        }
        return pools;
    }
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw SchemaViolation(lineno, std::string("malformed JSON: ") + e.what());
        }
        accept(pool_from_json(j, lineno));
    }
    return pools;
}

inline std::vector<CandidatePool> load_pools(const std::filesystem::path& path, PoolFormat format = PoolFormat::jsonl) {
    return parse_pools(read_file(path), format);
}

inline std::string dump_pools(const std::vector<CandidatePool>& pools) {
    std::string out;
    for (const auto& p : pools) {
        out += to_json(p).dump();
        out += '\n';
    }
    return out;
}

inline void save_pools(const std::filesystem::path& path, const std::vector<CandidatePool>& pools) {
    write_file(path, dump_pools(pools));
}

/// Seeded permutation of the candidates. The stream also depends on the
/// problem id so equal-size pools are not permuted identically.
inline CandidatePool shuffle_pool(const CandidatePool& pool, std::int64_t seed) {
    CandidatePool out = pool;
    Rng rng(derive_seed(static_cast<std::uint64_t>(seed), pool.problem.id));
    rng.shuffle(out.candidates);
    return out;
}

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
    double lambda = 1.0;
    double lambda_itinerary = 2.0;
    double theta_sigma = 0.8;
    double theta_abstain = 1.5;
    int K = 5;
    int max_pairs_per_problem = 16;
    double bag_fraction = 0.8;
    int n_pass2 = 8;
    std::int64_t master_seed = 42;

    // Trainer knobs.
    int epochs = 10;
    double learning_rate = 0.5;
    int batch_size = 32;
    int patience = 2;
    double validation_fraction = 0.1;
    double dropout = 0.2;
    int feature_dim = 4096;
    // Itinerary candidates count as correct at or below this violation score.
    double pass_threshold = 0.0;
    int workers = 0;

    double lambda_for(TaskKind k) const { return k == TaskKind::itinerary ? lambda_itinerary : lambda; }

    void validate() const {
        auto fail = [](const std::string& m) { throw InvalidConfig(m); };
        if (!(lambda > 0.0) || !(lambda_itinerary > 0.0)) fail("lambda must be positive");
        if (!(theta_sigma > 0.0) || !(theta_abstain > 0.0)) fail("thresholds must be positive");
        if (!(theta_sigma < theta_abstain)) fail("theta_sigma must be below theta_abstain");
        if (K < 1) fail("K must be at least 1");
        if (max_pairs_per_problem < 1) fail("max_pairs_per_problem must be at least 1");
        if (!(bag_fraction > 0.0 && bag_fraction <= 1.0)) fail("bag_fraction must lie in (0,1]");
        if (n_pass2 < 0) fail("n_pass2 must be nonnegative");
        if (epochs < 0) fail("epochs must be nonnegative");
        if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
        if (batch_size < 1) fail("batch_size must be at least 1");
        if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0,1)");
        if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) fail("validation_fraction must lie in [0,1)");
        if (feature_dim < 2) fail("feature_dim must be at least 2");
        if (!(pass_threshold >= 0.0 && pass_threshold <= 1.0)) fail("pass_threshold must lie in [0,1]");
    }
};

inline Json to_json(const RunConfig& c) {
    return Json{{"lambda", c.lambda},
                {"lambda_itinerary", c.lambda_itinerary},
                {"theta_sigma", c.theta_sigma},
                {"theta_abstain", c.theta_abstain},
                {"K", c.K},
                {"max_pairs_per_problem", c.max_pairs_per_problem},
                {"bag_fraction", c.bag_fraction},
                {"n_pass2", c.n_pass2},
                {"master_seed", c.master_seed},
                {"epochs", c.epochs},
                {"learning_rate", c.learning_rate},
                {"batch_size", c.batch_size},
                {"patience", c.patience},
                {"validation_fraction", c.validation_fraction},
                {"dropout", c.dropout},
                {"feature_dim", c.feature_dim},
                {"pass_threshold", c.pass_threshold}};
}

/// Applies the keys present in `j` on top of `base`. Unknown keys are rejected.
inline RunConfig merge_config(RunConfig base, const Json& j) {
    if (!j.is_object()) throw InvalidConfig("config must be a flat JSON object");
    for (const auto& [key, value] : j.items()) {
        auto num = [&]() {
            if (!value.is_number()) throw InvalidConfig("config key '" + key + "' must be numeric");
            return value.get<double>();
        };
        auto integer = [&]() {
            if (!value.is_number_integer()) throw InvalidConfig("config key '" + key + "' must be an integer");
            return value.get<std::int64_t>();
        };
        if (key == "lambda") base.lambda = num();
        else if (key == "lambda_itinerary") base.lambda_itinerary = num();
        else if (key == "theta_sigma") base.theta_sigma = num();
        else if (key == "theta_abstain") base.theta_abstain = num();
        else if (key == "K") base.K = static_cast<int>(integer());
        else if (key == "max_pairs_per_problem") base.max_pairs_per_problem = static_cast<int>(integer());
        else if (key == "bag_fraction") base.bag_fraction = num();
        else if (key == "n_pass2") base.n_pass2 = static_cast<int>(integer());
        else if (key == "master_seed") base.master_seed = integer();
        else if (key == "epochs") base.epochs = static_cast<int>(integer());
        else if (key == "learning_rate") base.learning_rate = num();
        else if (key == "batch_size") base.batch_size = static_cast<int>(integer());
        else if (key == "patience") base.patience = static_cast<int>(integer());
        else if (key == "validation_fraction") base.validation_fraction = num();
        else if (key == "dropout") base.dropout = num();
        else if (key == "feature_dim") base.feature_dim = static_cast<int>(integer());
        else if (key == "pass_threshold") base.pass_threshold = num();
        else if (key == "workers") base.workers = static_cast<int>(integer());
        else throw InvalidConfig("unknown config key '" + key + "'");
    }
    return base;
}

inline RunConfig config_from_json(const Json& j) {
    RunConfig c = merge_config(RunConfig{}, j);
    c.validate();
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw InvalidConfig(std::string("malformed config: ") + e.what());
    }
    return config_from_json(j);
}

/// Stable hex digest of the effective configuration, embedded in outputs.
inline std::string config_hash(const RunConfig& c) {
    const std::uint64_t h = fnv1a(to_json(c).dump());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace ebr
