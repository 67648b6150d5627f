#include "itinerary_fixtures.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>

using namespace ebr;
using Catch::Approx;

namespace {

const char* kTravelSample =
    R"([{"days": 1, "current_city": "from Las Vegas to Denver", "transportation": "Flight F3877057", )"
    R"("lunch": "The Urban Socialite, Denver", "dinner": "Kloof Street House, Denver", )"
    R"("accommodation": "Luxury Studio Suite, Denver"}])";

PuzzleSpec oliver_ethan() {
    return puzzle_from_json(Json::parse(R"({"characters": ["Oliver", "Ethan"],
        "statements": {"Oliver": ["knight", "Ethan"], "Ethan": ["or", ["knave", "Oliver"], ["knight", "I"]]}})"));
}

// Truth-table evaluation written against the JSON form, independent of Statement::eval.
bool truth(const Json& s, const std::vector<std::string>& names, int speaker, std::uint32_t knights) {
    const std::string op = s[0];
    auto idx = [&](const Json& n) {
        const std::string name = n;
        if (name == "I" || name == "self") return speaker;
        return static_cast<int>(std::find(names.begin(), names.end(), name) - names.begin());
    };
    if (op == "knight") return (knights >> idx(s[1])) & 1u;
    if (op == "knave") return !((knights >> idx(s[1])) & 1u);
    if (op == "not") return !truth(s[1], names, speaker, knights);
    if (op == "and") {
        for (std::size_t i = 1; i < s.size(); ++i)
            if (!truth(s[i], names, speaker, knights)) return false;
        return true;
    }
    if (op == "or") {
        for (std::size_t i = 1; i < s.size(); ++i)
            if (truth(s[i], names, speaker, knights)) return true;
        return false;
    }
    const bool a = truth(s[1], names, speaker, knights), b = truth(s[2], names, speaker, knights);
    return op == "implies" ? (!a || b) : a == b;
}

bool table_consistent(const Json& puzzle, std::uint32_t knights) {
    const std::vector<std::string> names = puzzle.at("characters");
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (truth(puzzle.at("statements").at(names[i]), names, static_cast<int>(i), knights) != bool((knights >> i) & 1u))
            return false;
    }
    return true;
}

} // namespace

TEST_CASE("hand-counted itinerary fixtures match every dimension") {
    const auto db = fixtures::toy_db();
    for (const auto& fx : fixtures::itinerary_cases()) {
        INFO(fx.name);
        const Problem p = fx.problem();
        Candidate c = testing::make_candidate(p.id, "c", fx.body);
        const auto res = e_constraint(p, c, ConstraintContext{&db, {}});
        REQUIRE(res.report);
        const auto& r = *res.report;
        REQUIRE(r.dims.size() == 8);
        double sum = 0.0;
        for (std::size_t d = 0; d < 8; ++d) {
            INFO(kItineraryDims[d]);
            CHECK(r.dims.at(kItineraryDims[d]) == fx.dims[d]);
            sum += fx.dims[d];
            if (fx.dims[d] > 0.0) CHECK(r.messages.count(kItineraryDims[d]) == 1);
        }
        CHECK(r.messages.size() == static_cast<std::size_t>(std::count_if(fx.dims.begin(), fx.dims.end(), [](double v) { return v > 0; })));
        CHECK(r.violation_score == Approx(sum / 8).margin(1e-15));
        if (fx.parses) {
            CHECK(res.value == Approx(sum).margin(1e-12));
            CHECK(*r.total_cost == Approx(fx.total_cost).margin(1e-9));
        } else {
            CHECK(std::isinf(res.value));
        }
    }
}

TEST_CASE("budget excess is relative and clamped") {
    const auto db = fixtures::toy_db();
    const auto vegas = parse_itinerary(fixtures::itinerary_cases()[1].body);
    CHECK(check_budget(vegas, db, 1600) == Approx(0.10).margin(1e-15));
    CHECK(check_budget(vegas, db, 1760) == 0.0);
    CHECK(check_budget(vegas, db, 440) == 1.0);
    CHECK(check_budget(vegas, db, 1000) == Approx(0.76).margin(1e-15));
}

TEST_CASE("budget message names the overrun") {
    const auto db = fixtures::toy_db();
    const auto fx = fixtures::itinerary_cases()[1];
    const auto r = check_itinerary(parse_itinerary(fx.body), db, fx.problem());
    CHECK(r.messages.at("budget").find("160") != std::string::npos);
}

TEST_CASE("travel sample parses with aliased day field") {
    const auto it = parse_itinerary(kTravelSample);
    REQUIRE(it.days.size() == 1);
    CHECK(it.days[0].transportation == "Flight F3877057");
    CHECK(it.days[0].current_city == "from Las Vegas to Denver");
    CHECK(it.days[0].lunch == "The Urban Socialite, Denver");
    CHECK_FALSE(it.days[0].breakfast.has_value());
}

TEST_CASE("bodies without a day array fail to parse") {
    CHECK_THROWS_AS(parse_itinerary("no plan here"), ParseFailure);
    CHECK_THROWS_AS(parse_itinerary("[1, 2, 3]"), ParseFailure);
    CHECK_THROWS_AS(parse_itinerary(R"([{"day": 2, "current_city": "X"}])"), ParseFailure);
    CHECK_THROWS_AS(parse_itinerary(R"([{"day": 1, "current_city": "X"}, {"day": 3, "current_city": "X"}])"), ParseFailure);
    CHECK_THROWS_AS(parse_itinerary(R"([{"day": 1, "current_city": "X")"), ParseFailure);
}

TEST_CASE("the last of two day arrays is used") {
    const std::string body = R"(First try: [{"day": 1, "current_city": "Denver", "lunch": "A"}]
        Revised: [{"day": 1, "current_city": "Aspen", "lunch": "B"}, {"day": 2, "current_city": "Aspen"}] done)";
    const auto it = parse_itinerary(body);
    Itinerary expected;
    expected.days.push_back({1, "Aspen", std::nullopt, std::nullopt, std::string("B"), std::nullopt, {}, std::nullopt});
    expected.days.push_back({2, "Aspen", std::nullopt, std::nullopt, std::nullopt, std::nullopt, {}, std::nullopt});
    CHECK(it == expected);
}

TEST_CASE("attraction lists split on semicolons") {
    const auto it = parse_itinerary(R"([{"day":1,"current_city":"Denver","attraction":"Red Rocks, Denver; Art Museum, Denver;"}])");
    CHECK(it.days[0].attractions == std::vector<std::string>{"Red Rocks, Denver", "Art Museum, Denver"});
}

TEST_CASE("connectivity fractions") {
    const auto db = fixtures::toy_db();
    const auto cases = fixtures::itinerary_cases();
    CHECK(check_connectivity(parse_itinerary(cases[0].body), db) == 0.0);
    CHECK(check_connectivity(parse_itinerary(cases[2].body), db) == 0.5);
    // A valid route id in the wrong direction does not connect the leg.
    const auto back = parse_itinerary(R"([{"day":1,"current_city":"from Las Vegas to Denver","transportation":"F1000001"}])");
    CHECK(check_connectivity(back, db) == 1.0);
}

TEST_CASE("connectivity agrees with a brute-force route scan on random plans") {
    Rng rng(2024);
    const std::vector<std::string> cities = {"Alpha", "Bravo", "Charlie", "Delta"};
    for (int trial = 0; trial < 100; ++trial) {
        SandboxDB db;
        int rid = 0;
        for (const auto& a : cities) {
            for (const auto& b : cities) {
                if (a != b && rng.bernoulli(0.5)) db.routes.push_back({a, b, "flight", "R" + std::to_string(rid++), 10});
            }
        }
        db.index();
        Json days = Json::array();
        const int n = 1 + static_cast<int>(rng.index(5));
        std::size_t legs = 0, bad = 0;
        for (int d = 1; d <= n; ++d) {
            Json day{{"day", d}};
            if (rng.bernoulli(0.6)) {
                const auto& from = cities[rng.index(4)];
                const auto& to = cities[rng.index(4)];
                day["current_city"] = "from " + from + " to " + to;
                std::string transport;
                if (rng.bernoulli(0.5) && !db.routes.empty()) {
                    transport = "Flight " + db.routes[rng.index(db.routes.size())].route_id;
                } else if (rng.bernoulli(0.5)) {
                    transport = "Flight X" + std::to_string(rng.below(100));
                }
                if (!transport.empty()) day["transportation"] = transport;
                ++legs;
                bool ok = false;
                for (const auto& r : db.routes) {
                    const bool named = !transport.empty() && transport.substr(7) == r.route_id;
                    ok = ok || (named && r.origin == from && r.destination == to);
                }
                bad += !ok;
            } else {
                day["current_city"] = cities[rng.index(4)];
            }
            days.push_back(day);
        }
        const double expected = legs == 0 ? 0.0 : double(bad) / double(legs);
        CHECK(check_connectivity(parse_itinerary(days.dump()), db) == expected);
    }
}

TEST_CASE("violation score is the mean of the dimensions") {
    ConstraintReport r;
    for (const char* d : kItineraryDims) r.dims[d] = 0.0;
    CHECK(violation_score(r) == 0.0);
    r.dims["budget"] = 0.10;
    CHECK(violation_score(r) == Approx(0.0125).margin(1e-15));
    for (const char* d : kItineraryDims) r.dims[d] = 1.0;
    CHECK(violation_score(r) == 1.0);
}

TEST_CASE("dimensions stay in the unit interval on noisy plans") {
    const auto db = fixtures::toy_db();
    Rng rng(5);
    const std::vector<std::string> refs = {"Cafe Sol, Las Vegas", "Union Deli", "Ghost Bar, Denver", "Aspen Lodge, Aspen",
                                           "Red Rocks, Denver", "-", "Maroon Bells", "Mile High Hotel, Denver"};
    const std::vector<std::string> where = {"Denver", "Aspen", "from Denver to Aspen", "from Las Vegas to Denver", "Nowhere"};
    for (int trial = 0; trial < 300; ++trial) {
        Json days = Json::array();
        const int n = 1 + static_cast<int>(rng.index(4));
        for (int d = 1; d <= n; ++d) {
            Json day{{"day", d}, {"current_city", where[rng.index(where.size())]}};
            for (const char* slot : {"breakfast", "lunch", "dinner", "attraction", "accommodation", "transportation"}) {
                if (rng.bernoulli(0.7)) day[slot] = rng.bernoulli(0.8) ? refs[rng.index(refs.size())] : "F3877057";
            }
            days.push_back(day);
        }
        Problem p{"p", TaskKind::itinerary, "s"};
        p.budget = rng.bernoulli(0.5) ? 300.0 : 3000.0;
        if (rng.bernoulli(0.5)) p.preferences = {"vegetarian", "outdoors", "spa"};
        const auto res = e_constraint(p, testing::make_candidate("p", "c", days.dump()), ConstraintContext{&db, {}});
        for (const auto& [k, v] : res.report->dims) {
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
        }
        CHECK(res.report->violation_score >= 0.0);
        CHECK(res.report->violation_score <= 1.0);
        CHECK(res.value >= 0.0);
        CHECK(e_constraint(p, testing::make_candidate("p", "c", days.dump()), ConstraintContext{&db, {}}).value == res.value);
    }
}

TEST_CASE("dimension weights scale the constraint energy") {
    const auto db = fixtures::toy_db();
    const auto fx = fixtures::itinerary_cases()[2];
    ConstraintContext ctx{&db, {{"connectivity", 4.0}, {"hallucination", 0.0}}};
    const auto res = e_constraint(fx.problem(), testing::make_candidate("p", "c", fx.body), ctx);
    CHECK(res.value == Approx(2.0).margin(1e-15));
}

TEST_CASE("sandbox database validates uniqueness and round-trips") {
    const auto db = fixtures::toy_db();
    const auto back = sandbox_from_json(to_json(db));
    CHECK(to_json(back) == to_json(db));
    Json dup = to_json(db);
    dup["restaurants"].push_back(dup["restaurants"][0]);
    CHECK_THROWS_AS(sandbox_from_json(dup), SchemaViolation);
    Json dup_route = to_json(db);
    dup_route["routes"].push_back(dup_route["routes"][0]);
    CHECK_THROWS_AS(sandbox_from_json(dup_route), SchemaViolation);
    Json negative = to_json(db);
    negative["attractions"][0]["cost"] = -1;
    CHECK_THROWS_AS(sandbox_from_json(negative), SchemaViolation);
}

TEST_CASE("itinerary tasks need a database") {
    Problem p{"p", TaskKind::itinerary, "s"};
    p.budget = 10;
    CHECK_THROWS_AS(e_constraint(p, testing::make_candidate("p", "c", "[]"), ConstraintContext{}), InvalidConfig);
}

TEST_CASE("two-character sample puzzle has both knights") {
    const auto p = oliver_ethan();
    const Assignment expected{{"Oliver", Role::knight}, {"Ethan", Role::knight}};
    CHECK(solve_kk(p) == expected);
    const std::string body = "If Oliver is a knight, Ethan is a knight. Consistent.\n"
                             R"({"Oliver": "knight", "Ethan": "knight"})";
    const auto c = kk_checker(p, body);
    CHECK(c.e_constraint == 0.0);
    CHECK(c.parsed == expected);
    const auto swapped = kk_checker(p, R"({"Oliver": "knave", "Ethan": "knight"})");
    CHECK(swapped.e_constraint > 0.0);
}

TEST_CASE("self-affirmation has two solutions") {
    const auto p = puzzle_from_json(Json::parse(R"({"characters": ["A", "B"],
        "statements": {"A": ["knight", "A"], "B": ["knight", "B"]}})"));
    CHECK(count_solutions(p) == 4);
    const auto one = puzzle_from_json(Json::parse(R"({"characters": ["A", "B"],
        "statements": {"A": ["knight", "I"], "B": ["knave", "A"]}})"));
    try {
        solve_kk(one);
        FAIL("expected MultipleSolutions");
    } catch (const MultipleSolutions& e) {
        CHECK(e.count() == 2);
    }
}

TEST_CASE("liar paradox has no solution") {
    const auto p = puzzle_from_json(Json::parse(R"({"characters": ["A", "B"],
        "statements": {"A": ["knave", "I"], "B": ["knight", "B"]}})"));
    CHECK_THROWS_AS(solve_kk(p), NoSolution);
}

TEST_CASE("malformed puzzles are rejected") {
    for (const char* text : {R"({"characters": ["A"], "statements": {"A": ["knight", "A"]}})",
                             R"({"characters": ["A", "B"], "statements": {"A": ["knight", "C"], "B": ["knight", "A"]}})",
                             R"({"characters": ["A", "B"], "statements": {"A": ["xor", "A", "B"], "B": ["knight", "A"]}})",
                             R"({"characters": ["A", "B"], "statements": {"A": ["knight", "A"]}})",
                             R"({"characters": ["A", "A"], "statements": [["knight", "A"], ["knight", "A"]]})",
                             R"({"characters": ["A", "B"], "statements": {"A": ["implies", ["knight", "A"]], "B": ["knight", "A"]}})"}) {
        INFO(text);
        CHECK_THROWS_AS(puzzle_from_json(Json::parse(text)), SchemaViolation);
    }
}

TEST_CASE("puzzle json round-trips") {
    Rng rng(8);
    for (int i = 0; i < 50; ++i) {
        const auto p = generate_kk_puzzle(2 + static_cast<int>(rng.index(5)), rng);
        CHECK(puzzle_from_json(to_json(p)) == p);
    }
}

TEST_CASE("solver consistency matches a truth-table evaluator") {
    Rng rng(31);
    std::size_t judgements = 0;
    for (int i = 0; i < 1000; ++i) {
        const int n = 3 + static_cast<int>(rng.index(3));
        const auto p = generate_kk_puzzle(n, rng);
        const Json j = to_json(p);
        for (std::uint32_t m = 0; m < (1u << n); ++m) {
            REQUIRE(consistent(p, m) == table_consistent(j, m));
            ++judgements;
        }
        CHECK(to_mask(p, solve_kk(p)) < (1u << n));
        CHECK(table_consistent(j, to_mask(p, solve_kk(p))));
    }
    CHECK(judgements > 8000);
}

TEST_CASE("checker is zero exactly on the solver answer") {
    Rng rng(77);
    int zero = 0, positive = 0, infinite = 0;
    for (int i = 0; i < 300; ++i) {
        const int n = 2 + static_cast<int>(rng.index(5));
        const auto p = generate_kk_puzzle(n, rng);
        const auto truth_mask = to_mask(p, solve_kk(p));
        for (std::uint32_t m = 0; m < (1u << n); ++m) {
            const auto c = kk_checker(p, kk_candidate_body(to_assignment(p, m)));
            REQUIRE((c.e_constraint == 0.0) == (m == truth_mask));
            zero += c.e_constraint == 0.0;
            positive += c.e_constraint > 0.0;
        }
        infinite += std::isinf(kk_checker(p, "I am not sure.").e_constraint);
    }
    CHECK(zero == 300);
    CHECK(positive > 0);
    CHECK(infinite == 300);
}

TEST_CASE("checker counts inconsistent characters") {
    const auto p = puzzle_from_json(Json::parse(R"({"characters": ["A", "B", "C"],
        "statements": {"A": ["knave", "B"], "B": ["knave", "C"], "C": ["and", ["knave", "A"], ["knave", "B"]]}})"));
    // A knave, B knight, C knave is the unique solution.
    CHECK(solve_kk(p) == Assignment{{"A", Role::knave}, {"B", Role::knight}, {"C", Role::knave}});
    const auto all_knights = kk_checker(p, R"({"A": "knight", "B": "knight", "C": "knight"})");
    CHECK(all_knights.e_constraint == 3.0);
    const auto one_off = kk_checker(p, R"({"A": "knave", "B": "knight", "C": "knight"})");
    // C's statement is false under this assignment, and B's statement is now false.
    CHECK(one_off.e_constraint == 2.0);
    CHECK(kk_checker(p, R"({"A": "knave", "B": "knight"})").parsed == std::nullopt);
    CHECK(kk_report(p, all_knights).dims.at("consistency") == 1.0);
}

TEST_CASE("role maps are read from the last qualifying object") {
    const auto p = oliver_ethan();
    const std::string body = R"(Guess {"Oliver": "knave", "Ethan": "knave"} then {"note": 3} and finally )"
                             R"({"Oliver": "Knight", "Ethan": " knight "}.)";
    const auto a = parse_assignment(p, body);
    REQUIRE(a);
    CHECK(a->at("Oliver") == Role::knight);
    CHECK(a->at("Ethan") == Role::knight);
}

TEST_CASE("final answers match after the delimiter") {
    CHECK(match_answer("... 9 x 2 = 18. #### 18", Json(18), TaskKind::math_answer) == AnswerMatch::correct);
    CHECK(match_answer("#### 1,234", Json(1234), TaskKind::math_answer) == AnswerMatch::correct);
    CHECK(match_answer("#### $1,234.50", Json("1234.5"), TaskKind::math_answer) == AnswerMatch::correct);
    CHECK(match_answer("#### 17", Json(18), TaskKind::math_answer) == AnswerMatch::incorrect);
    CHECK(match_answer("#### 18.0000001", Json(18), TaskKind::math_answer) == AnswerMatch::correct);
    CHECK(match_answer("#### 18.00001", Json(18), TaskKind::math_answer) == AnswerMatch::incorrect);
    CHECK(match_answer("the answer is 18", Json(18), TaskKind::math_answer) == AnswerMatch::unparseable);
    CHECK(match_answer("#### eighteen", Json(18), TaskKind::math_answer) == AnswerMatch::unparseable);
    CHECK(match_answer("#### 3 #### 18.", Json(18), TaskKind::math_answer) == AnswerMatch::correct);
    CHECK(match_answer("#### 2", Json(2), TaskKind::multichoice) == AnswerMatch::correct);
    CHECK(match_answer("#### (B)", Json(2), TaskKind::multichoice) == AnswerMatch::correct);
    CHECK(match_answer("#### c", Json("C"), TaskKind::multichoice) == AnswerMatch::correct);
    CHECK(match_answer("#### A", Json(2), TaskKind::multichoice) == AnswerMatch::incorrect);
    CHECK_THROWS_AS(match_answer("#### 1", Json(1), TaskKind::code), InvalidConfig);
}

TEST_CASE("constraint energy routes by task kind") {
    Candidate c = testing::make_candidate("p", "c", "#### 5");
    for (auto kind : {TaskKind::math_answer, TaskKind::multichoice, TaskKind::code}) {
        Problem p{"p", kind, "s"};
        const auto r = e_constraint(p, c, ConstraintContext{});
        CHECK(r.value == 0.0);
        CHECK_FALSE(r.report);
    }
    Problem puzzle{"k", TaskKind::logic_puzzle, "s"};
    CHECK(e_constraint(puzzle, c, ConstraintContext{}).value == 0.0);
    puzzle.puzzle = to_json(oliver_ethan());
    c.body = R"({"Oliver": "knave", "Ethan": "knave"})";
    CHECK(e_constraint(puzzle, c, ConstraintContext{}).value >= 1.0);
    c.body = R"({"Oliver": "knight", "Ethan": "knight"})";
    CHECK(e_constraint(puzzle, c, ConstraintContext{}).value == 0.0);
}

TEST_CASE("answer keys canonicalise final answers") {
    Problem math{"m", TaskKind::math_answer, "s"};
    CHECK(answer_key(math, testing::make_candidate("m", "a", "#### 1,000")) ==
          answer_key(math, testing::make_candidate("m", "b", "so #### 1000.")));
    CHECK_FALSE(answer_key(math, testing::make_candidate("m", "c", "no answer")).has_value());
    Problem mc{"q", TaskKind::multichoice, "s"};
    CHECK(answer_key(mc, testing::make_candidate("q", "a", "#### B")) == "2");
    Problem kk{"k", TaskKind::logic_puzzle, "s"};
    CHECK(answer_key(kk, testing::make_candidate("k", "a", R"({"A": "knight", "B": "knave"})")) ==
          answer_key(kk, testing::make_candidate("k", "b", R"(so {"B": "knave", "A": "knight"})")));
}
