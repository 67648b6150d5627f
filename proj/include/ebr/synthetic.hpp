#pragma once

// Seeded synthetic pools with known ground truth.

#include <ebr/constraints.hpp>
#include <ebr/core.hpp>
#include <ebr/itinerary.hpp>
#include <ebr/knights.hpp>

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace ebr {

inline std::string filler_word(Rng& rng) {
    static constexpr std::array<const char*, 24> syl = {"ba", "ko", "ri", "ve", "lu", "ta", "mi", "so", "pe", "da", "ni", "go",
                                                         "ru", "fa", "le", "zo", "ki", "mu", "sa", "te", "po", "di", "na", "vo"};
    std::string w = syl[rng.index(syl.size())];
    w += syl[rng.index(syl.size())];
    if (rng.bernoulli(0.5)) w += syl[rng.index(syl.size())];
    return w;
}

inline std::string filler(Rng& rng, int words) {
    std::string s;
    for (int i = 0; i < words; ++i) {
        if (i) s += ' ';
        s += filler_word(rng);
    }
    return s;
}

struct SeparableParams {
    int problems = 500;
    int candidates = 8;
    std::string sentinel = "verified";
    std::uint64_t seed = 42;
};

/// Math pools where every correct candidate, and no incorrect one, contains
/// the sentinel word. Each pool has at least one candidate of each class.
inline std::vector<CandidatePool> generate_separable(const SeparableParams& sp) {
    if (sp.problems < 1 || sp.candidates < 2) throw InvalidConfig("separable pools need >= 1 problem and >= 2 candidates");
    Rng rng(derive_seed(sp.seed, "separable"));
    std::vector<CandidatePool> out;
    for (int i = 0; i < sp.problems; ++i) {
        CandidatePool pool;
        auto& p = pool.problem;
        p.id = "sep-" + std::to_string(i);
        p.task_kind = TaskKind::math_answer;
        const int gold = 10 + static_cast<int>(rng.index(90));
        p.statement = "Problem " + std::to_string(i) + ": " + filler(rng, 8) + ". What is the total?";
        p.gold = gold;
        const int n_correct = 1 + static_cast<int>(rng.index(sp.candidates - 1));
        std::vector<char> correct(sp.candidates, 0);
        for (std::size_t k : rng.sample_without_replacement(sp.candidates, n_correct)) correct[k] = 1;
        for (int k = 0; k < sp.candidates; ++k) {
            Candidate c;
            c.id = p.id + ":" + std::to_string(k);
            c.problem_id = p.id;
            c.generator_id = "g" + std::to_string(k % 4);
            c.greedy = k == 0;
            const int answer = correct[k] ? gold : gold + 1 + static_cast<int>(rng.index(9));
            c.body = filler(rng, 12) + (correct[k] ? " " + sp.sentinel : std::string()) + ". " + filler(rng, 4) +
                     " #### " + std::to_string(answer);
            c.correctness = correct[k] ? Correctness::correct : Correctness::incorrect;
            pool.candidates.push_back(std::move(c));
        }
        out.push_back(std::move(pool));
    }
    return out;
}

struct ConfoundedParams {
    int problems = 400;
    int per_generator = 8;
    /// Share of positives produced by the styled generator.
    double imbalance = 0.9;
    /// Correctness rate of the styled generator.
    double styled_accuracy = 0.9;
    /// Copies of the style phrase in every styled body.
    int salience = 3;
    std::string content_token = "consistent";
    std::string style_token = "stylemark";
    std::uint64_t seed = 42;
};

inline constexpr std::array<const char*, 4> kConfoundGenerators = {"A", "B", "C", "D"};

namespace detail {

inline Candidate confounded_candidate(const ConfoundedParams& cp, Rng& rng, const std::string& pid, int gold,
                                      const std::string& gen, bool correct, std::size_t k) {
    Candidate c;
    c.id = pid + ":" + std::to_string(k);
    c.problem_id = pid;
    c.generator_id = gen;
    std::string body = filler(rng, 10);
    if (gen == kConfoundGenerators[0]) {
        for (int s = 0; s < cp.salience; ++s) body += " " + cp.style_token;
    }
    if (correct) body += " " + cp.content_token;
    body += " " + filler(rng, 4);
    body += " #### " + std::to_string(correct ? gold : gold + 1 + static_cast<int>(rng.index(9)));
    c.body = std::move(body);
    c.correctness = correct ? Correctness::correct : Correctness::incorrect;
    return c;
}

} // namespace detail

/// Four generators; the first stamps a style phrase on every body and holds
/// `imbalance` of all positives. Correct bodies carry the content token.
inline std::vector<CandidatePool> generate_confounded(const ConfoundedParams& cp) {
    if (!(cp.imbalance > 0.25 && cp.imbalance < 1.0)) throw InvalidConfig("imbalance must lie in (0.25, 1)");
    if (!(cp.styled_accuracy > 0.0 && cp.styled_accuracy < 1.0)) throw InvalidConfig("styled_accuracy must lie in (0,1)");
    // Styled share of positives: pa / (pa + 3 po) = imbalance.
    const double po = cp.styled_accuracy * (1.0 - cp.imbalance) / (3.0 * cp.imbalance);
    Rng rng(derive_seed(cp.seed, "confounded"));
    std::vector<CandidatePool> out;
    for (int i = 0; i < cp.problems; ++i) {
        CandidatePool pool;
        auto& p = pool.problem;
        p.id = "conf-" + std::to_string(i);
        p.task_kind = TaskKind::math_answer;
        const int gold = 10 + static_cast<int>(rng.index(90));
        p.statement = "Problem " + std::to_string(i) + ": " + filler(rng, 8) + ".";
        p.gold = gold;
        std::size_t k = 0;
        for (const char* g : kConfoundGenerators) {
            const double rate = g == kConfoundGenerators[0] ? cp.styled_accuracy : po;
            for (int j = 0; j < cp.per_generator; ++j) {
                pool.candidates.push_back(detail::confounded_candidate(cp, rng, p.id, gold, g, rng.bernoulli(rate), k++));
            }
        }
        pool.candidates.front().greedy = true;
        out.push_back(std::move(pool));
    }
    return out;
}

/// Balanced evaluation pools: one correct and one incorrect candidate per
/// generator, in seeded order.
inline std::vector<CandidatePool> generate_confounded_eval(const ConfoundedParams& cp, int problems) {
    Rng rng(derive_seed(cp.seed, "confounded-eval"));
    std::vector<CandidatePool> out;
    for (int i = 0; i < problems; ++i) {
        CandidatePool pool;
        auto& p = pool.problem;
        p.id = "conf-eval-" + std::to_string(i);
        p.task_kind = TaskKind::math_answer;
        const int gold = 10 + static_cast<int>(rng.index(90));
        p.statement = "Problem " + std::to_string(i) + ": " + filler(rng, 8) + ".";
        p.gold = gold;
        std::size_t k = 0;
        for (const char* g : kConfoundGenerators) {
            for (bool correct : {true, false}) {
                pool.candidates.push_back(detail::confounded_candidate(cp, rng, p.id, gold, g, correct, k++));
            }
        }
        rng.shuffle(pool.candidates);
        pool.candidates.front().greedy = true;
        out.push_back(std::move(pool));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Knights and knaves

inline std::string describe(const Statement& s, const PuzzleSpec& p, int speaker) {
    using Op = Statement::Op;
    auto name = [&](int who) { return who == speaker ? std::string("I") : p.characters[who]; };
    auto atom = [&](const Statement& a) {
        const bool me = a.subject == speaker;
        return name(a.subject) + (me ? " am a " : " is a ") + (a.op == Op::knight ? "knight" : "knave");
    };
    switch (s.op) {
    case Op::knight:
    case Op::knave: return atom(s);
    case Op::negation: return "it is not the case that " + describe(s.args[0], p, speaker);
    case Op::conjunction:
    case Op::disjunction: {
        std::string out;
        for (std::size_t i = 0; i < s.args.size(); ++i) {
            if (i) out += s.op == Op::conjunction ? " and " : " or ";
            out += describe(s.args[i], p, speaker);
        }
        return out;
    }
    case Op::implies: return "if " + describe(s.args[0], p, speaker) + " then " + describe(s.args[1], p, speaker);
    case Op::iff: return describe(s.args[0], p, speaker) + " if and only if " + describe(s.args[1], p, speaker);
    }
    return {};
}

inline std::string puzzle_text(const PuzzleSpec& p) {
    std::string out = "Each person is a knight, who always tells the truth, or a knave, who always lies.";
    for (std::size_t i = 0; i < p.characters.size(); ++i) {
        out += " " + p.characters[i] + " says \"" + describe(p.statements[i], p, static_cast<int>(i)) + ".\"";
    }
    return out + " Who is a knight and who is a knave?";
}

struct PuzzleParams {
    int problems = 100;
    int min_characters = 3;
    int max_characters = 3;
    int candidates = 8;
    std::uint64_t seed = 42;
};

/// Logic-puzzle pools. Candidate 0 of each pool (before the seeded shuffle)
/// states the solution; the others flip one or more roles.
inline std::vector<CandidatePool> generate_kk_pools(const PuzzleParams& pp) {
    if (pp.min_characters < 2 || pp.max_characters > 8 || pp.min_characters > pp.max_characters) {
        throw InvalidConfig("character counts must lie in 2..8");
    }
    if (pp.candidates < 1) throw InvalidConfig("need at least one candidate");
    Rng rng(derive_seed(pp.seed, "kk"));
    std::vector<CandidatePool> out;
    for (int i = 0; i < pp.problems; ++i) {
        const int n = pp.min_characters + static_cast<int>(rng.index(pp.max_characters - pp.min_characters + 1));
        const PuzzleSpec puzzle = generate_kk_puzzle(n, rng);
        const Assignment truth = solve_kk(puzzle);
        const std::uint32_t tmask = to_mask(puzzle, truth);
        CandidatePool pool;
        auto& p = pool.problem;
        p.id = "kk-" + std::to_string(i);
        p.task_kind = TaskKind::logic_puzzle;
        p.statement = puzzle_text(puzzle);
        p.gold = to_json(truth);
        p.puzzle = to_json(puzzle);
        p.difficulty = std::to_string(n) + "ppl";
        for (int k = 0; k < pp.candidates; ++k) {
            std::uint32_t m = tmask;
            if (k > 0) {
                m ^= static_cast<std::uint32_t>(1 + rng.below((1u << n) - 1));
            }
            Candidate c;
            c.id = p.id + ":" + std::to_string(k);
            c.problem_id = p.id;
            c.generator_id = "g" + std::to_string(k % 4);
            c.greedy = k == 1 % pp.candidates;
            c.body = kk_candidate_body(to_assignment(puzzle, m));
            c.correctness = m == tmask ? Correctness::correct : Correctness::incorrect;
            pool.candidates.push_back(std::move(c));
        }
        rng.shuffle(pool.candidates);
        out.push_back(std::move(pool));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Itineraries

struct ItineraryParams {
    int problems = 50;
    int candidates = 8;
    std::uint64_t seed = 42;
};

inline const std::vector<std::string>& toy_cities() {
    static const std::vector<std::string> c = {"Las Vegas", "Denver", "Austin", "Boston", "Seattle", "Miami"};
    return c;
}

/// Toy sandbox: per city 3 hotels, 6 restaurants and 4 attractions; a route
/// each way between every pair of cities.
inline SandboxDB generate_sandbox(std::uint64_t seed) {
    static const std::vector<std::string> tags = {"vegetarian", "seafood", "museum", "outdoor", "luxury", "budget"};
    Rng rng(derive_seed(seed, "sandbox"));
    SandboxDB db;
    const auto& cities = toy_cities();
    auto pick_tags = [&]() {
        std::vector<std::string> t;
        for (std::size_t k : rng.sample_without_replacement(tags.size(), 2)) t.push_back(tags[k]);
        return t;
    };
    for (const auto& city : cities) {
        for (int h = 0; h < 3; ++h) {
            db.accommodations.push_back({city + " Inn " + std::to_string(h + 1), city,
                                         static_cast<double>(80 + 60 * h + rng.index(40)), pick_tags()});
        }
        for (int r = 0; r < 6; ++r) {
            db.restaurants.push_back({city + " Kitchen " + std::to_string(r + 1), city,
                                      static_cast<double>(10 + rng.index(50)), pick_tags()});
        }
        for (int a = 0; a < 4; ++a) {
            db.attractions.push_back({city + " Sight " + std::to_string(a + 1), city,
                                      static_cast<double>(rng.index(40)), pick_tags()});
        }
    }
    int id = 1000000;
    for (const auto& a : cities) {
        for (const auto& b : cities) {
            if (a == b) continue;
            db.routes.push_back({a, b, "flight", "F" + std::to_string(id++), static_cast<double>(100 + rng.index(300))});
        }
    }
    db.index();
    return db;
}

namespace detail {

inline std::string ref(const Entity& e) { return e.name + ", " + e.city; }

inline const Route* find_route(const SandboxDB& db, const std::string& a, const std::string& b) {
    for (const auto& r : db.routes) {
        if (r.origin == a && r.destination == b) return &r;
    }
    return nullptr;
}

inline std::vector<const Entity*> in_city(const std::vector<Entity>& t, const std::string& city) {
    std::vector<const Entity*> out;
    for (const auto& e : t) {
        if (e.city == city) out.push_back(&e);
    }
    return out;
}

// A sound plan: fly out on day 1, stay, fly back on the last day.
inline Json base_plan(const SandboxDB& db, Rng& rng, const std::string& origin, const std::string& dest, int days) {
    Json plan = Json::array();
    const auto rest = in_city(db.restaurants, dest);
    const auto sights = in_city(db.attractions, dest);
    const auto hotels = in_city(db.accommodations, dest);
    const auto order = rng.sample_without_replacement(rest.size(), rest.size());
    const Entity* hotel = hotels[rng.index(hotels.size())];
    for (int d = 1; d <= days; ++d) {
        Json day;
        day["day"] = d;
        if (d == 1) {
            day["current_city"] = "from " + origin + " to " + dest;
            day["transportation"] = "Flight " + find_route(db, origin, dest)->route_id;
        } else if (d == days) {
            day["current_city"] = "from " + dest + " to " + origin;
            day["transportation"] = "Flight " + find_route(db, dest, origin)->route_id;
        } else {
            day["current_city"] = dest;
            day["transportation"] = "-";
        }
        const std::size_t base = static_cast<std::size_t>(3 * (d - 1));
        day["breakfast"] = ref(*rest[order[base % rest.size()]]);
        day["lunch"] = ref(*rest[order[(base + 1) % rest.size()]]);
        day["dinner"] = ref(*rest[order[(base + 2) % rest.size()]]);
        day["attraction"] = ref(*sights[static_cast<std::size_t>(d - 1) % sights.size()]) + ";";
        day["accommodation"] = d == days ? "-" : ref(*hotel);
        plan.push_back(day);
    }
    return plan;
}

} // namespace detail

/// Itinerary pools over the toy sandbox. Candidates are perturbations of a
/// sound plan; labels are the checker's violation scores.
inline std::pair<SandboxDB, std::vector<CandidatePool>> generate_itineraries(const ItineraryParams& ip) {
    SandboxDB db = generate_sandbox(ip.seed);
    Rng rng(derive_seed(ip.seed, "itineraries"));
    static const std::vector<std::string> tags = {"vegetarian", "seafood", "museum", "outdoor"};
    const auto& cities = toy_cities();
    const ConstraintContext ctx{&db, {}};
    std::vector<CandidatePool> out;
    for (int i = 0; i < ip.problems; ++i) {
        const auto oc = rng.sample_without_replacement(cities.size(), 2);
        const std::string origin = cities[oc[0]], dest = cities[oc[1]];
        const int days = 2 + static_cast<int>(rng.index(2));
        CandidatePool pool;
        auto& p = pool.problem;
        p.id = "trip-" + std::to_string(i);
        p.task_kind = TaskKind::itinerary;
        p.preferences = {tags[rng.index(tags.size())]};
        const Json base = detail::base_plan(db, rng, origin, dest, days);
        const double base_cost = itinerary_cost(parse_itinerary(base.dump()), db, 1.0).first;
        p.budget = std::round(base_cost * (1.05 + 0.3 * rng.uniform()));
        p.statement = "Please provide a travel plan departing from " + origin + " to " + dest + " for " +
                      std::to_string(days) + " days. Budget: $" + detail::fmt(*p.budget) + ". Preference: " +
                      p.preferences[0] + ".";
        for (int k = 0; k < ip.candidates; ++k) {
            Json plan = detail::base_plan(db, rng, origin, dest, days);
            std::string tail;
            const int faults = k == 0 ? 0 : static_cast<int>(rng.index(4));
            bool broken = false;
            for (int f = 0; f < faults; ++f) {
                Json& day = plan[rng.index(plan.size())];
                switch (rng.index(6)) {
                case 0: day["lunch"] = "-"; break;
                case 1: day["dinner"] = "Phantom Bistro, " + dest; break;
                case 2: day["breakfast"] = plan[0]["breakfast"]; break;
                case 3: day["accommodation"] = detail::ref(*detail::in_city(db.accommodations, dest).back()); break;
                case 4: day["attraction"] = detail::ref(*detail::in_city(db.attractions, origin).front()); break;
                default: broken = rng.bernoulli(0.3); break;
                }
            }
            std::string body = "Here is the plan.\n" + plan.dump();
            if (broken) body = "Here is the plan.\n" + plan.dump().substr(0, 40);
            Candidate c;
            c.id = p.id + ":" + std::to_string(k);
            c.problem_id = p.id;
            c.generator_id = "g" + std::to_string(k % 4);
            c.greedy = k == 1 % ip.candidates;
            c.body = std::move(body);
            const auto r = e_constraint(p, c, ctx);
            c.violation = r.report->violation_score;
            pool.candidates.push_back(std::move(c));
        }
        rng.shuffle(pool.candidates);
        out.push_back(std::move(pool));
    }
    return {std::move(db), std::move(out)};
}

} // namespace ebr
