#pragma once

// Knights-and-knaves puzzles: statement formulas, a brute-force solver, a
// candidate checker and a generator of unique-solution puzzles.
//
// Statements are nested JSON arrays:
//   ["knight", name] | ["knave", name] | ["not", s] | ["and", s, s, ...]
//   ["or", s, s, ...] | ["implies", s, s] | ["iff", s, s]
// The names "I" and "self" refer to the speaker.

#include <ebr/core.hpp>
#include <ebr/itinerary.hpp>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ebr {

struct Statement {
    enum class Op { knight, knave, negation, conjunction, disjunction, implies, iff };

    Op op = Op::knight;
    int subject = 0;  // character index for knight/knave atoms
    std::vector<Statement> args;

    bool operator==(const Statement&) const = default;

    static Statement atom(bool knight, int who) { return {knight ? Op::knight : Op::knave, who, {}}; }
    static Statement make(Op op, std::vector<Statement> args) { return {op, 0, std::move(args)}; }

    /// Truth under an assignment; bit i of `knights` set means character i is a knight.
    bool eval(std::uint32_t knights) const {
        switch (op) {
        case Op::knight: return (knights >> subject) & 1u;
        case Op::knave: return !((knights >> subject) & 1u);
        case Op::negation: return !args[0].eval(knights);
        case Op::conjunction:
            return std::all_of(args.begin(), args.end(), [&](const Statement& s) { return s.eval(knights); });
        case Op::disjunction:
            return std::any_of(args.begin(), args.end(), [&](const Statement& s) { return s.eval(knights); });
        case Op::implies: return !args[0].eval(knights) || args[1].eval(knights);
        case Op::iff: return args[0].eval(knights) == args[1].eval(knights);
        }
        return false;
    }
};

struct PuzzleSpec {
    std::vector<std::string> characters;
    std::vector<Statement> statements;  // one per character, same order

    bool operator==(const PuzzleSpec&) const = default;
};

enum class Role { knight, knave };

using Assignment = std::map<std::string, Role>;

namespace detail {

inline Statement parse_statement(const Json& j, const std::vector<std::string>& names, int speaker) {
    if (!j.is_array() || j.empty() || !j[0].is_string()) {
        throw SchemaViolation(0, "statement must be a nonempty array headed by an operator: " + j.dump());
    }
    const std::string op = lower(j[0].get<std::string>());
    auto who = [&](const Json& n) {
        if (!n.is_string()) throw SchemaViolation(0, "character name must be a string");
        const std::string s = n.get<std::string>();
        if (s == "I" || lower(s) == "self") return speaker;
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i] == s) return static_cast<int>(i);
        }
        throw SchemaViolation(0, "statement references undeclared character '" + s + "'");
    };
    auto sub = [&](std::size_t from) {
        std::vector<Statement> out;
        for (std::size_t i = from; i < j.size(); ++i) out.push_back(parse_statement(j[i], names, speaker));
        return out;
    };
    using Op = Statement::Op;
    if (op == "knight" || op == "knave") {
        if (j.size() != 2) throw SchemaViolation(0, op + " takes one name");
        return Statement::atom(op == "knight", who(j[1]));
    }
    if (op == "not") {
        if (j.size() != 2) throw SchemaViolation(0, "not takes one operand");
        return Statement::make(Op::negation, sub(1));
    }
    if (op == "and" || op == "or") {
        if (j.size() < 3) throw SchemaViolation(0, op + " takes at least two operands");
        return Statement::make(op == "and" ? Op::conjunction : Op::disjunction, sub(1));
    }
    if (op == "implies" || op == "iff") {
        if (j.size() != 3) throw SchemaViolation(0, op + " takes two operands");
        return Statement::make(op == "implies" ? Op::implies : Op::iff, sub(1));
    }
    throw SchemaViolation(0, "unknown statement operator '" + op + "'");
}

inline Json statement_json(const Statement& s, const std::vector<std::string>& names) {
    using Op = Statement::Op;
    auto list = [&](const char* head) {
        Json a = Json::array({head});
        for (const auto& x : s.args) a.push_back(statement_json(x, names));
        return a;
    };
    switch (s.op) {
    case Op::knight: return Json::array({"knight", names[s.subject]});
    case Op::knave: return Json::array({"knave", names[s.subject]});
    case Op::negation: return list("not");
    case Op::conjunction: return list("and");
    case Op::disjunction: return list("or");
    case Op::implies: return list("implies");
    case Op::iff: return list("iff");
    }
    return nullptr;
}

} // namespace detail

/// Accepts {"characters": [...], "statements": {name: stmt}} or statements as
/// an array aligned with characters.
inline PuzzleSpec puzzle_from_json(const Json& j) {
    PuzzleSpec p;
    if (!j.is_object() || !j.contains("characters") || !j.contains("statements")) {
        throw SchemaViolation(0, "puzzle needs 'characters' and 'statements'");
    }
    for (const auto& c : j.at("characters")) {
        if (!c.is_string()) throw SchemaViolation(0, "character names must be strings");
        p.characters.push_back(c.get<std::string>());
    }
    const auto n = p.characters.size();
    if (n < 2 || n > 8) throw SchemaViolation(0, "puzzles have 2 to 8 characters");
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = i + 1; k < n; ++k) {
            if (p.characters[i] == p.characters[k]) throw SchemaViolation(0, "duplicate character " + p.characters[i]);
        }
    }
    const Json& st = j.at("statements");
    for (std::size_t i = 0; i < n; ++i) {
        const Json* s = nullptr;
        if (st.is_object()) {
            auto it = st.find(p.characters[i]);
            if (it == st.end()) throw SchemaViolation(0, "no statement for " + p.characters[i]);
            s = &*it;
        } else if (st.is_array() && st.size() == n) {
            s = &st[i];
        } else {
            throw SchemaViolation(0, "exactly one statement per character is required");
        }
        p.statements.push_back(detail::parse_statement(*s, p.characters, static_cast<int>(i)));
    }
    if (st.is_object() && st.size() != n) throw SchemaViolation(0, "statement for an undeclared character");
    return p;
}

inline Json to_json(const PuzzleSpec& p) {
    Json st = Json::object();
    for (std::size_t i = 0; i < p.characters.size(); ++i) {
        st[p.characters[i]] = detail::statement_json(p.statements[i], p.characters);
    }
    return Json{{"characters", p.characters}, {"statements", st}};
}

inline bool consistent(const PuzzleSpec& p, std::uint32_t knights) {
    for (std::size_t i = 0; i < p.characters.size(); ++i) {
        if (p.statements[i].eval(knights) != static_cast<bool>((knights >> i) & 1u)) return false;
    }
    return true;
}

inline std::size_t count_solutions(const PuzzleSpec& p) {
    std::size_t count = 0;
    for (std::uint32_t m = 0; m < (1u << p.characters.size()); ++m) count += consistent(p, m);
    return count;
}

inline Assignment to_assignment(const PuzzleSpec& p, std::uint32_t knights) {
    Assignment a;
    for (std::size_t i = 0; i < p.characters.size(); ++i) {
        a[p.characters[i]] = (knights >> i) & 1u ? Role::knight : Role::knave;
    }
    return a;
}

inline std::uint32_t to_mask(const PuzzleSpec& p, const Assignment& a) {
    std::uint32_t m = 0;
    for (std::size_t i = 0; i < p.characters.size(); ++i) {
        if (a.at(p.characters[i]) == Role::knight) m |= 1u << i;
    }
    return m;
}

inline Assignment solve_kk(const PuzzleSpec& p) {
    if (p.characters.size() < 2 || p.characters.size() > 8) throw InvalidConfig("puzzles have 2 to 8 characters");
    std::size_t count = 0;
    std::uint32_t found = 0;
    for (std::uint32_t m = 0; m < (1u << p.characters.size()); ++m) {
        if (consistent(p, m)) {
            ++count;
            found = m;
        }
    }
    if (count == 0) throw NoSolution();
    if (count > 1) throw MultipleSolutions(count);
    return to_assignment(p, found);
}

inline Json to_json(const Assignment& a) {
    Json j = Json::object();
    for (const auto& [name, role] : a) j[name] = role == Role::knight ? "knight" : "knave";
    return j;
}

/// The last JSON object in the body whose values are all "knight"/"knave".
inline std::optional<std::map<std::string, Role>> extract_role_map(std::string_view body) {
    std::optional<std::map<std::string, Role>> last;
    detail::scan_json(body, '{', [&](const Json& j) {
        if (!j.is_object() || j.empty()) return false;
        std::map<std::string, Role> m;
        for (const auto& [k, v] : j.items()) {
            if (!v.is_string()) return false;
            const std::string r = lower(trim(v.get<std::string>()));
            if (r == "knight") m[k] = Role::knight;
            else if (r == "knave") m[k] = Role::knave;
            else return false;
        }
        last = std::move(m);
        return true;
    });
    return last;
}

/// Assignment stated in the body, if it names exactly the puzzle's characters.
inline std::optional<Assignment> parse_assignment(const PuzzleSpec& p, std::string_view body) {
    auto m = extract_role_map(body);
    if (!m || m->size() != p.characters.size()) return std::nullopt;
    for (const auto& c : p.characters) {
        if (!m->count(c)) return std::nullopt;
    }
    return m;
}

struct KKCheck {
    double e_constraint = 0.0;
    std::optional<Assignment> parsed;
    std::vector<std::string> inconsistent;
};

/// Zero when the stated assignment satisfies every statement; one unit per
/// character whose role disagrees with the truth of its statement; infinite
/// when no complete assignment can be read.
inline KKCheck kk_checker(const PuzzleSpec& p, std::string_view body) {
    KKCheck r;
    r.parsed = parse_assignment(p, body);
    if (!r.parsed) {
        r.e_constraint = std::numeric_limits<double>::infinity();
        return r;
    }
    const std::uint32_t m = to_mask(p, *r.parsed);
    for (std::size_t i = 0; i < p.characters.size(); ++i) {
        if (p.statements[i].eval(m) != static_cast<bool>((m >> i) & 1u)) r.inconsistent.push_back(p.characters[i]);
    }
    r.e_constraint = static_cast<double>(r.inconsistent.size());
    return r;
}

inline ConstraintReport kk_report(const PuzzleSpec& p, const KKCheck& c) {
    ConstraintReport rep;
    if (!c.parsed) {
        rep.dims = {{"consistency", 1.0}, {"parse", 1.0}};
        rep.messages["parse"] = "No complete knight/knave assignment for all characters was found.";
        rep.messages["consistency"] = "Not checked: no assignment to test against the statements.";
    } else {
        rep.dims = {{"consistency", static_cast<double>(c.inconsistent.size()) / static_cast<double>(p.characters.size())},
                    {"parse", 0.0}};
        if (!c.inconsistent.empty()) {
            rep.messages["consistency"] = "Roles contradict the statements of: " + detail::join(c.inconsistent, ", ") + ".";
        }
    }
    rep.violation_score = violation_score(rep);
    return rep;
}

// ---------------------------------------------------------------------------
// Generation

inline const std::vector<std::string>& kk_names() {
    static const std::vector<std::string> names = {"Oliver", "Ethan", "Mia", "Liam", "Ava", "Noah", "Zoe", "Lucas"};
    return names;
}

namespace detail {

inline Statement random_atom(Rng& rng, int n) { return Statement::atom(rng.bernoulli(0.5), static_cast<int>(rng.index(n))); }

inline Statement random_statement(Rng& rng, int n) {
    using Op = Statement::Op;
    switch (rng.index(6)) {
    case 0: return random_atom(rng, n);
    case 1: return Statement::make(Op::negation, {random_atom(rng, n)});
    case 2: return Statement::make(Op::conjunction, {random_atom(rng, n), random_atom(rng, n)});
    case 3: return Statement::make(Op::disjunction, {random_atom(rng, n), random_atom(rng, n)});
    case 4: return Statement::make(Op::implies, {random_atom(rng, n), random_atom(rng, n)});
    default: return Statement::make(Op::iff, {random_atom(rng, n), random_atom(rng, n)});
    }
}

} // namespace detail

/// A unique-solution puzzle with n characters. Statements are drawn so the
/// hidden assignment is consistent, then redrawn until it is the only one.
inline PuzzleSpec generate_kk_puzzle(int n, Rng& rng) {
    if (n < 2 || n > 8) throw InvalidConfig("puzzles have 2 to 8 characters");
    PuzzleSpec p;
    p.characters.assign(kk_names().begin(), kk_names().begin() + n);
    for (int attempt = 0; attempt < 100000; ++attempt) {
        const auto truth = static_cast<std::uint32_t>(rng.below(1u << n));
        p.statements.clear();
        for (int i = 0; i < n; ++i) {
            const bool want = (truth >> i) & 1u;
            Statement s = detail::random_statement(rng, n);
            while (s.eval(truth) != want) s = detail::random_statement(rng, n);
            p.statements.push_back(std::move(s));
        }
        if (count_solutions(p) == 1) return p;
    }
    throw DegenerateData("could not generate a unique-solution puzzle");
}

/// Body in the style of a model answer, ending with the role map.
inline std::string kk_candidate_body(const Assignment& a, std::string_view preamble = "Checking each statement in turn.") {
    return std::string(preamble) + "\n" + to_json(a).dump();
}

} // namespace ebr
