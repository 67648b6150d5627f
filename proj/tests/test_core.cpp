#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <set>

using namespace ebr;
using testing::TempDir;

namespace {

const char* kTwoCandidates =
    R"({"problem":{"id":"q1","task_kind":"math_answer","statement":"2+2?","gold":4},)"
    R"("candidates":[{"id":"a","problem_id":"q1","generator_id":"m1","body":"#### 4","greedy":true,"label":"correct"},)"
    R"({"id":"b","problem_id":"q1","generator_id":"m2","body":"#### 5","label":"incorrect"}]})";

std::vector<std::string> ids(const CandidatePool& p) {
    std::vector<std::string> out;
    for (const auto& c : p.candidates) out.push_back(c.id);
    return out;
}

} // namespace

TEST_CASE("single record loads as one pool of two candidates") {
    const auto pools = parse_pools(kTwoCandidates);
    REQUIRE(pools.size() == 1);
    CHECK(pools[0].candidates.size() == 2);
    CHECK(pools[0].problem.id == "q1");
    CHECK(pools[0].candidates[0].greedy);
    CHECK(pools[0].candidates[0].correctness == Correctness::correct);
    CHECK(pools[0].candidates[1].correctness == Correctness::incorrect);
    CHECK(pools[0].shuffle_seed == 42);
}

TEST_CASE("missing problem_id is a schema violation with its line number") {
    std::string text = std::string(kTwoCandidates) + "\n" +
                       R"({"problem":{"id":"q2","task_kind":"math_answer","statement":"s"},"candidates":[{"id":"a","body":"x"}]})";
    try {
        parse_pools(text);
        FAIL("expected SchemaViolation");
    } catch (const SchemaViolation& e) {
        CHECK(e.line() == 2);
        CHECK(e.reason().find("problem_id") != std::string::npos);
    }
}

TEST_CASE("malformed records are rejected") {
    const std::vector<std::string> bad = {
        "not json",
        R"({"problem":{"id":"q","task_kind":"poetry","statement":"s"},"candidates":[{"id":"a","problem_id":"q","body":"x"}]})",
        R"({"problem":{"id":"q","task_kind":"math_answer","statement":"s"},"candidates":[]})",
        R"({"problem":{"id":"q","task_kind":"itinerary","statement":"s"},"candidates":[{"id":"a","problem_id":"q","body":"x"}]})",
        R"({"problem":{"id":"q","task_kind":"math_answer","statement":"s","budget":10},"candidates":[{"id":"a","problem_id":"q","body":"x"}]})",
        R"({"problem":{"id":"q","task_kind":"itinerary","statement":"s","budget":10},"candidates":[{"id":"a","problem_id":"q","body":"x","label":1.5}]})",
        R"({"problem":{"id":"q","task_kind":"math_answer","statement":"s"},"candidates":[{"id":"a","problem_id":"q","body":"x","label":"maybe"}]})",
        R"({"problem":{"id":"q","task_kind":"math_answer","statement":"s"},"candidates":[{"id":"a","problem_id":"other","body":"x"}]})",
        R"({"problem":{"id":"q","task_kind":"math_answer","statement":"s"},"candidates":[{"id":"a","problem_id":"q","body":"x"},{"id":"a","problem_id":"q","body":"y"}]})",
        R"({"problem":{"id":"q","task_kind":"code","statement":"s"},"candidates":[{"id":"a","problem_id":"q","body":"x","execution_verdict":"segfault"}]})",
    };
    for (const auto& line : bad) {
        INFO(line);
        CHECK_THROWS_AS(parse_pools(line), SchemaViolation);
    }
}

TEST_CASE("duplicate problem ids are rejected") {
    const std::string text = std::string(kTwoCandidates) + "\n" + kTwoCandidates + "\n";
    CHECK_THROWS_AS(parse_pools(text), DuplicateProblemId);
}

TEST_CASE("missing file is an IO failure") {
    CHECK_THROWS_AS(load_pools("/nonexistent/pools.jsonl"), IOFailure);
}

TEST_CASE("json array format is accepted") {
    const auto pools = parse_pools(std::string("[") + kTwoCandidates + "]", PoolFormat::json_array);
    REQUIRE(pools.size() == 1);
    CHECK(pools[0].candidates.size() == 2);
}

TEST_CASE("save then load is the identity on generated pools") {
    TempDir dir;
    Rng rng(7);
    for (int round = 0; round < 20; ++round) {
        const auto pools = testing::random_pools(rng, 15);
        save_pools(dir / "pools.jsonl", pools);
        const auto back = load_pools(dir / "pools.jsonl");
        REQUIRE(back == pools);
    }
}

TEST_CASE("labels resolve per task kind") {
    Problem math{"m", TaskKind::math_answer, "s"};
    Problem trip{"t", TaskKind::itinerary, "s"};
    trip.budget = 100;
    Candidate c;
    CHECK_FALSE(is_correct(math, c).has_value());
    c.correctness = Correctness::correct;
    CHECK(*is_correct(math, c));
    CHECK_FALSE(is_correct(trip, c).has_value());
    c.violation = 0.1;
    CHECK_FALSE(*is_correct(trip, c));
    CHECK(*is_correct(trip, c, 0.15));
    Candidate code;
    code.execution_verdict = Verdict::pass;
    CHECK(*binary_label(code));
    code.execution_verdict = Verdict::runtime_error;
    CHECK_FALSE(*binary_label(code));
}

TEST_CASE("shuffle of a one-candidate pool is the identity") {
    Rng rng(1);
    auto pools = testing::random_pools(rng, 30);
    for (auto& p : pools) {
        p.candidates.resize(1);
        CHECK(shuffle_pool(p, 42) == p);
        CHECK(shuffle_pool(p, 7) == p);
    }
}

TEST_CASE("shuffle is deterministic and a bijection") {
    Rng rng(2);
    for (const auto& p : testing::random_pools(rng, 50)) {
        const auto a = shuffle_pool(p, 42);
        const auto b = shuffle_pool(p, 42);
        CHECK(a == b);
        auto before = ids(p), after = ids(a);
        std::sort(before.begin(), before.end());
        std::sort(after.begin(), after.end());
        CHECK(before == after);
        CHECK(a.problem == p.problem);
    }
}

TEST_CASE("shuffles of 32-candidate pools differ between seeds 42 and 43") {
    Rng rng(3);
    int differ = 0;
    for (int i = 0; i < 100; ++i) {
        CandidatePool p;
        p.problem = {"pool" + std::to_string(rng.below(1u << 30)), TaskKind::math_answer, "s"};
        for (int k = 0; k < 32; ++k) p.candidates.push_back(testing::make_candidate(p.problem.id, std::to_string(k), "b"));
        differ += ids(shuffle_pool(p, 42)) != ids(shuffle_pool(p, 43));
    }
    CHECK(differ >= 99);
}

TEST_CASE("greedy flag travels with its candidate through shuffling") {
    Rng rng(4);
    for (const auto& p : testing::random_pools(rng, 30)) {
        const auto s = shuffle_pool(p, 42);
        for (const auto& c : s.candidates) {
            const auto it = std::find_if(p.candidates.begin(), p.candidates.end(), [&](const auto& o) { return o.id == c.id; });
            CHECK(it->greedy == c.greedy);
        }
    }
}

TEST_CASE("run config defaults") {
    const RunConfig c;
    CHECK(c.lambda == 1.0);
    CHECK(c.lambda_itinerary == 2.0);
    CHECK(c.theta_sigma == 0.8);
    CHECK(c.theta_abstain == 1.5);
    CHECK(c.K == 5);
    CHECK(c.max_pairs_per_problem == 16);
    CHECK(c.bag_fraction == 0.8);
    CHECK(c.n_pass2 == 8);
    CHECK(c.master_seed == 42);
    CHECK_NOTHROW(c.validate());
    CHECK(c.lambda_for(TaskKind::itinerary) == 2.0);
    CHECK(c.lambda_for(TaskKind::math_answer) == 1.0);
}

TEST_CASE("thresholds must be ordered") {
    RunConfig c;
    c.theta_sigma = 1.5;
    CHECK_THROWS_AS(c.validate(), InvalidConfig);
    c.theta_sigma = 2.0;
    CHECK_THROWS_AS(c.validate(), InvalidConfig);
    CHECK_THROWS_AS(config_from_json(Json{{"theta_sigma", 1.6}}), InvalidConfig);
}

TEST_CASE("invalid config values are rejected") {
    for (const Json& j : {Json{{"K", 0}}, Json{{"bag_fraction", 0.0}}, Json{{"bag_fraction", 1.5}}, Json{{"lambda", -1.0}},
                          Json{{"dropout", 1.0}}, Json{{"K", 2.5}}, Json{{"unknown_key", 1}}, Json{{"lambda", "one"}}}) {
        INFO(j.dump());
        CHECK_THROWS_AS(config_from_json(j), InvalidConfig);
    }
}

TEST_CASE("config merging applies later layers on top") {
    const RunConfig file = config_from_json(Json{{"lambda", 0.5}, {"K", 3}});
    const RunConfig cli = merge_config(file, Json{{"lambda", 2.5}});
    CHECK(cli.lambda == 2.5);
    CHECK(cli.K == 3);
    CHECK(cli.theta_sigma == 0.8);
}

TEST_CASE("config hash tracks effective values") {
    RunConfig a, b;
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    b.lambda = 1.5;
    CHECK(config_hash(a) != config_hash(b));
    b = a;
    b.workers = 8;
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_from_json(to_json(a)).lambda == a.lambda);
}

TEST_CASE("seed derivation is stable and salt-sensitive") {
    CHECK(derive_seed(42, "bag") == derive_seed(42, "bag"));
    CHECK(derive_seed(42, "bag") != derive_seed(42, "init"));
    CHECK(derive_seed(42, "bag") != derive_seed(43, "bag"));
    CHECK(fnv1a("") == 14695981039346656037ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    Rng r(9);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform();
        CHECK((u >= 0.0 && u < 1.0));
        CHECK(r.below(7) < 7);
    }
    const auto s = r.sample_without_replacement(20, 20);
    CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 20);
}
