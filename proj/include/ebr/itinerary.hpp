#pragma once

// Itinerary verification against a sandbox database.
//
// Entity references are "Name, City" (split at the last comma) and match
// case-insensitively; a bare name matches when it is unique in its table.
// Several attractions in one field are separated by ';' or given as a JSON
// array. A transportation reference resolves when any token equals a route id.

#include <ebr/core.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ebr {

struct Entity {
    std::string name;
    std::string city;
    double cost = 0.0;
    std::vector<std::string> tags;
};

struct Route {
    std::string origin;
    std::string destination;
    std::string mode;
    std::string route_id;
    double cost = 0.0;
};

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

/// Lowercased, trimmed, inner whitespace collapsed.
inline std::string canonical(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : trim(s)) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = true;
            continue;
        }
        if (space && !out.empty()) out += ' ';
        space = false;
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

enum class EntityKind { accommodation, restaurant, attraction };

class SandboxDB {
public:
    std::vector<Entity> accommodations;
    std::vector<Entity> restaurants;
    std::vector<Entity> attractions;
    std::vector<Route> routes;

    /// Validates uniqueness and builds lookup indexes. Call after filling the tables.
    void index() {
        for (auto kind : {EntityKind::accommodation, EntityKind::restaurant, EntityKind::attraction}) {
            auto& by_key = by_key_[static_cast<int>(kind)];
            auto& by_name = by_name_[static_cast<int>(kind)];
            by_key.clear();
            by_name.clear();
            const auto& t = table(kind);
            for (std::size_t i = 0; i < t.size(); ++i) {
                if (!(t[i].cost >= 0.0)) throw SchemaViolation(0, "entity cost must be nonnegative: " + t[i].name);
                if (!by_key.emplace(key(t[i].name, t[i].city), i).second) {
                    throw SchemaViolation(0, "duplicate entity '" + t[i].name + ", " + t[i].city + "'");
                }
                by_name[canonical(t[i].name)].push_back(i);
            }
        }
        route_by_id_.clear();
        for (std::size_t i = 0; i < routes.size(); ++i) {
            if (!(routes[i].cost >= 0.0)) throw SchemaViolation(0, "route cost must be nonnegative");
            if (!route_by_id_.emplace(canonical(routes[i].route_id), i).second) {
                throw SchemaViolation(0, "duplicate route_id '" + routes[i].route_id + "'");
            }
        }
    }

    const std::vector<Entity>& table(EntityKind k) const {
        switch (k) {
        case EntityKind::accommodation: return accommodations;
        case EntityKind::restaurant: return restaurants;
        case EntityKind::attraction: return attractions;
        }
        return attractions;
    }

    const Entity* resolve(EntityKind kind, std::string_view ref) const {
        const std::string r = trim(ref);
        const auto comma = r.rfind(',');
        const auto& t = table(kind);
        if (comma != std::string::npos) {
            auto it = by_key_[static_cast<int>(kind)].find(key(r.substr(0, comma), r.substr(comma + 1)));
            if (it != by_key_[static_cast<int>(kind)].end()) return &t[it->second];
        }
        auto it = by_name_[static_cast<int>(kind)].find(canonical(r));
        if (it != by_name_[static_cast<int>(kind)].end() && it->second.size() == 1) return &t[it->second.front()];
        return nullptr;
    }

    /// First route whose id appears as a token of the reference.
    const Route* resolve_route(std::string_view ref) const {
        std::string tok;
        auto check = [&]() -> const Route* {
            if (tok.empty()) return nullptr;
            auto it = route_by_id_.find(tok);
            tok.clear();
            return it == route_by_id_.end() ? nullptr : &routes[it->second];
        };
        for (char c : ref) {
            const auto u = static_cast<unsigned char>(c);
            if (std::isalnum(u) || c == '-' || c == '_') {
                tok += static_cast<char>(std::tolower(u));
            } else if (const Route* r = check()) {
                return r;
            }
        }
        return check();
    }

private:
    static std::string key(std::string_view name, std::string_view city) {
        return canonical(name) + "\x1f" + canonical(city);
    }

    std::array<std::unordered_map<std::string, std::size_t>, 3> by_key_;
    std::array<std::unordered_map<std::string, std::vector<std::size_t>>, 3> by_name_;
    std::unordered_map<std::string, std::size_t> route_by_id_;
};

inline SandboxDB sandbox_from_json(const Json& j) {
    SandboxDB db;
    auto entities = [&](const char* field, std::vector<Entity>& out) {
        if (!j.contains(field)) return;
        for (const auto& e : j.at(field)) {
            Entity x;
            x.name = e.at("name").get<std::string>();
            x.city = e.at("city").get<std::string>();
            x.cost = e.value("cost", 0.0);
            x.tags = e.value("tags", std::vector<std::string>{});
            out.push_back(std::move(x));
        }
    };
    try {
        entities("accommodations", db.accommodations);
        entities("restaurants", db.restaurants);
        entities("attractions", db.attractions);
        if (j.contains("routes")) {
            for (const auto& r : j.at("routes")) {
                db.routes.push_back({r.at("origin").get<std::string>(), r.at("destination").get<std::string>(),
                                     r.value("mode", std::string{}), r.at("route_id").get<std::string>(),
                                     r.value("cost", 0.0)});
            }
        }
    } catch (const Json::exception& e) {
        throw SchemaViolation(0, std::string("sandbox database: ") + e.what());
    }
    db.index();
    return db;
}

inline Json to_json(const SandboxDB& db) {
    auto entities = [](const std::vector<Entity>& es) {
        Json a = Json::array();
        for (const auto& e : es) a.push_back({{"name", e.name}, {"city", e.city}, {"cost", e.cost}, {"tags", e.tags}});
        return a;
    };
    Json routes = Json::array();
    for (const auto& r : db.routes) {
        routes.push_back({{"origin", r.origin},
                          {"destination", r.destination},
                          {"mode", r.mode},
                          {"route_id", r.route_id},
                          {"cost", r.cost}});
    }
    return Json{{"accommodations", entities(db.accommodations)},
                {"restaurants", entities(db.restaurants)},
                {"attractions", entities(db.attractions)},
                {"routes", routes}};
}

inline SandboxDB load_sandbox(const std::filesystem::path& path) {
    try {
        return sandbox_from_json(Json::parse(read_file(path)));
    } catch (const Json::parse_error& e) {
        throw SchemaViolation(0, std::string("sandbox database: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Itinerary

struct DayPlan {
    int day = 0;
    std::string current_city;
    std::optional<std::string> transportation;
    std::optional<std::string> breakfast;
    std::optional<std::string> lunch;
    std::optional<std::string> dinner;
    std::vector<std::string> attractions;
    std::optional<std::string> accommodation;

    bool operator==(const DayPlan&) const = default;
};

struct Itinerary {
    std::vector<DayPlan> days;

    bool operator==(const Itinerary&) const = default;
};

struct CityLeg {
    std::string from;
    std::string to;
};

/// Parses "from A to B"; empty for a plain city.
inline std::optional<CityLeg> parse_leg(std::string_view current_city) {
    const std::string s = trim(current_city);
    const std::string l = lower(s);
    if (l.rfind("from ", 0) != 0) return std::nullopt;
    const auto to = l.rfind(" to ");
    if (to == std::string::npos || to < 5) return std::nullopt;
    return CityLeg{trim(s.substr(5, to - 5)), trim(s.substr(to + 4))};
}

namespace detail {

// Index one past the bracket matching the opener at `open`, skipping string
// literals; npos if unbalanced.
inline std::size_t match_bracket(std::string_view s, std::size_t open) {
    const char o = s[open];
    const char c = o == '[' ? ']' : '}';
    int depth = 0;
    bool in_str = false, esc = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        const char ch = s[i];
        if (in_str) {
            if (esc) esc = false;
            else if (ch == '\\') esc = true;
            else if (ch == '"') in_str = false;
            continue;
        }
        if (ch == '"') in_str = true;
        else if (ch == o) ++depth;
        else if (ch == c && --depth == 0) return i + 1;
    }
    return std::string_view::npos;
}

/// Every JSON value delimited by `opener` that parses, scanning left to right.
/// Once a value is accepted its interior is skipped.
template <class Accept>
void scan_json(std::string_view s, char opener, Accept&& accept) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != opener) continue;
        const std::size_t end = match_bracket(s, i);
        if (end == std::string_view::npos) continue;
        Json j = Json::parse(s.substr(i, end - i), nullptr, false);
        if (j.is_discarded()) continue;
        if (accept(j)) i = end - 1;
    }
}

inline const Json* field(const Json& obj, std::initializer_list<const char*> names) {
    for (const char* n : names) {
        auto it = obj.find(n);
        if (it != obj.end() && !it->is_null()) return &*it;
    }
    return nullptr;
}

inline std::optional<int> day_index(const Json& obj) {
    const Json* d = field(obj, {"day", "days", "Day"});
    if (!d) return std::nullopt;
    if (d->is_number_integer()) return d->get<int>();
    if (d->is_number()) {
        const double v = d->get<double>();
        if (v == std::floor(v)) return static_cast<int>(v);
        return std::nullopt;
    }
    if (d->is_string()) {
        const std::string s = trim(d->get<std::string>());
        if (!s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            return std::stoi(s);
        }
    }
    return std::nullopt;
}

inline bool is_day_array(const Json& j) {
    if (!j.is_array() || j.empty()) return false;
    return std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_object() && field(e, {"day", "days", "Day"}); });
}

// Missing, null, empty and "-" all mean "no entry".
inline std::optional<std::string> slot(const Json& obj, std::initializer_list<const char*> names) {
    const Json* v = field(obj, names);
    if (!v) return std::nullopt;
    if (!v->is_string()) return v->dump();
    std::string s = trim(v->get<std::string>());
    if (s.empty() || s == "-") return std::nullopt;
    return s;
}

} // namespace detail

/// The last well-formed JSON array of day objects in the body. Day indices
/// must run 1..n in order.
inline Itinerary parse_itinerary(std::string_view body) {
    std::optional<Json> last;
    detail::scan_json(body, '[', [&](const Json& j) {
        if (!detail::is_day_array(j)) return false;
        last = j;
        return true;
    });
    if (!last) throw ParseFailure("no JSON array of day objects found");
    Itinerary it;
    int expect = 1;
    for (const auto& d : *last) {
        DayPlan p;
        const auto idx = detail::day_index(d);
        if (!idx || *idx != expect) throw ParseFailure("day indices must run 1..n in order");
        ++expect;
        p.day = *idx;
        p.current_city = detail::slot(d, {"current_city", "city", "location"}).value_or("");
        p.transportation = detail::slot(d, {"transportation", "transport"});
        p.breakfast = detail::slot(d, {"breakfast"});
        p.lunch = detail::slot(d, {"lunch"});
        p.dinner = detail::slot(d, {"dinner"});
        p.accommodation = detail::slot(d, {"accommodation", "hotel", "lodging"});
        if (const Json* a = detail::field(d, {"attraction", "attractions"})) {
            auto add = [&](std::string_view s) {
                std::string t = trim(s);
                if (!t.empty() && t != "-") p.attractions.push_back(std::move(t));
            };
            if (a->is_array()) {
                for (const auto& x : *a) {
                    if (x.is_string()) add(x.get<std::string>());
                }
            } else if (a->is_string()) {
                const std::string s = a->get<std::string>();
                std::size_t start = 0;
                for (std::size_t k = 0; k <= s.size(); ++k) {
                    if (k == s.size() || s[k] == ';') {
                        add(std::string_view(s).substr(start, k - start));
                        start = k + 1;
                    }
                }
            }
        }
        it.days.push_back(std::move(p));
    }
    return it;
}

// ---------------------------------------------------------------------------
// Report

inline constexpr std::array<const char*, 8> kItineraryDims = {
    "budget", "connectivity", "completeness", "preferences", "diversity", "hallucination", "structure", "parse"};

struct ConstraintReport {
    /// Dimension name -> normalised violation in [0,1].
    std::map<std::string, double> dims;
    /// Dimension name -> human-readable specifics, for violated dimensions.
    std::map<std::string, std::string> messages;
    double violation_score = 0.0;
    std::optional<double> total_cost;
    std::optional<double> budget;

    bool operator==(const ConstraintReport&) const = default;
};

inline double violation_score(const ConstraintReport& r) {
    if (r.dims.empty()) return 0.0;
    double s = 0.0;
    for (const auto& [k, v] : r.dims) s += v;
    return s / static_cast<double>(r.dims.size());
}

inline Json to_json(const ConstraintReport& r) {
    Json j;
    j["dims"] = r.dims;
    j["messages"] = r.messages;
    j["violation_score"] = r.violation_score;
    if (r.total_cost) j["total_cost"] = *r.total_cost;
    if (r.budget) j["budget"] = *r.budget;
    return j;
}

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(10);
    ss << v;
    return ss.str();
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

struct Ref {
    EntityKind kind;
    const std::string* text;
    const char* slot;
    int day;
};

inline std::vector<Ref> entity_refs(const Itinerary& it) {
    std::vector<Ref> refs;
    for (const auto& d : it.days) {
        if (d.breakfast) refs.push_back({EntityKind::restaurant, &*d.breakfast, "breakfast", d.day});
        if (d.lunch) refs.push_back({EntityKind::restaurant, &*d.lunch, "lunch", d.day});
        if (d.dinner) refs.push_back({EntityKind::restaurant, &*d.dinner, "dinner", d.day});
        for (const auto& a : d.attractions) refs.push_back({EntityKind::attraction, &a, "attraction", d.day});
        if (d.accommodation) refs.push_back({EntityKind::accommodation, &*d.accommodation, "accommodation", d.day});
    }
    return refs;
}

} // namespace detail

/// Total resolved cost (each appearance counts) and the normalised excess.
inline std::pair<double, double> itinerary_cost(const Itinerary& it, const SandboxDB& db, double budget) {
    double total = 0.0;
    for (const auto& r : detail::entity_refs(it)) {
        if (const Entity* e = db.resolve(r.kind, *r.text)) total += e->cost;
    }
    for (const auto& d : it.days) {
        if (d.transportation) {
            if (const Route* r = db.resolve_route(*d.transportation)) total += r->cost;
        }
    }
    double excess;
    if (budget > 0.0) {
        excess = std::clamp((total - budget) / budget, 0.0, 1.0);
    } else {
        excess = total > 0.0 ? 1.0 : 0.0;
    }
    return {total, excess};
}

inline double check_budget(const Itinerary& it, const SandboxDB& db, double budget) {
    return itinerary_cost(it, db, budget).second;
}

namespace detail {

inline std::pair<double, std::vector<std::string>> connectivity(const Itinerary& it, const SandboxDB& db) {
    std::size_t legs = 0;
    std::vector<std::string> bad;
    for (const auto& d : it.days) {
        const auto leg = parse_leg(d.current_city);
        if (!leg) continue;
        ++legs;
        const Route* r = d.transportation ? db.resolve_route(*d.transportation) : nullptr;
        const bool ok = r && canonical(r->origin) == canonical(leg->from) && canonical(r->destination) == canonical(leg->to);
        if (!ok) {
            bad.push_back("day " + std::to_string(d.day) + " has no valid route from " + leg->from + " to " + leg->to +
                          (d.transportation ? " ('" + *d.transportation + "')" : " (no transportation given)"));
        }
    }
    return {legs == 0 ? 0.0 : static_cast<double>(bad.size()) / static_cast<double>(legs), bad};
}

} // namespace detail

inline double check_connectivity(const Itinerary& it, const SandboxDB& db) {
    return detail::connectivity(it, db).first;
}

/// Fills every dimension except parse, plus cost details.
inline ConstraintReport check_itinerary(const Itinerary& it, const SandboxDB& db, const Problem& problem) {
    ConstraintReport rep;
    const double budget = problem.budget.value_or(0.0);

    const auto [total, excess] = itinerary_cost(it, db, budget);
    rep.dims["budget"] = excess;
    rep.total_cost = total;
    rep.budget = budget;
    if (excess > 0.0) {
        rep.messages["budget"] = "The plan is over budget by " + detail::fmt(total - budget) + " (total " +
                                 detail::fmt(total) + ", budget " + detail::fmt(budget) + ").";
    }

    const auto [conn, bad_legs] = detail::connectivity(it, db);
    rep.dims["connectivity"] = conn;
    if (conn > 0.0) rep.messages["connectivity"] = "Invalid transport legs: " + detail::join(bad_legs, "; ") + ".";

    // Completeness: three meals and an attraction every day, accommodation except on the final day.
    std::size_t required = 0, missing = 0;
    std::vector<std::string> gaps;
    for (std::size_t i = 0; i < it.days.size(); ++i) {
        const auto& d = it.days[i];
        std::vector<std::string> m;
        auto need = [&](bool present, const char* name) {
            ++required;
            if (!present) {
                ++missing;
                m.emplace_back(name);
            }
        };
        need(d.breakfast.has_value(), "breakfast");
        need(d.lunch.has_value(), "lunch");
        need(d.dinner.has_value(), "dinner");
        need(!d.attractions.empty(), "attraction");
        if (i + 1 < it.days.size()) need(d.accommodation.has_value(), "accommodation");
        if (!m.empty()) gaps.push_back("day " + std::to_string(d.day) + " is missing " + detail::join(m, ", "));
    }
    rep.dims["completeness"] = required == 0 ? 0.0 : static_cast<double>(missing) / static_cast<double>(required);
    if (missing > 0) rep.messages["completeness"] = "Missing slots: " + detail::join(gaps, "; ") + ".";

    const auto refs = detail::entity_refs(it);
    std::vector<const Entity*> resolved(refs.size(), nullptr);
    for (std::size_t i = 0; i < refs.size(); ++i) resolved[i] = db.resolve(refs[i].kind, *refs[i].text);

    // Preferences: a tag is satisfied if any resolved entity carries it.
    std::vector<std::string> unmet;
    for (const auto& tag : problem.preferences) {
        const std::string t = canonical(tag);
        bool ok = false;
        for (const Entity* e : resolved) {
            if (!e) continue;
            for (const auto& et : e->tags) ok = ok || canonical(et) == t;
        }
        if (!ok) unmet.push_back(tag);
    }
    rep.dims["preferences"] = problem.preferences.empty()
                                  ? 0.0
                                  : static_cast<double>(unmet.size()) / static_cast<double>(problem.preferences.size());
    if (!unmet.empty()) rep.messages["preferences"] = "Unsatisfied preferences: " + detail::join(unmet, ", ") + ".";

    // Diversity over restaurant and attraction references.
    std::size_t div_total = 0;
    std::map<std::string, int> counts;
    for (const auto& r : refs) {
        if (r.kind == EntityKind::accommodation) continue;
        ++div_total;
        ++counts[std::string(r.kind == EntityKind::restaurant ? "r:" : "a:") + canonical(*r.text)];
    }
    const std::size_t repeats = div_total - counts.size();
    rep.dims["diversity"] = div_total == 0 ? 0.0 : static_cast<double>(repeats) / static_cast<double>(div_total);
    if (repeats > 0) {
        std::vector<std::string> rep_names;
        for (const auto& [k, c] : counts) {
            if (c > 1) rep_names.push_back("\"" + k.substr(2) + "\" x" + std::to_string(c));
        }
        rep.messages["diversity"] = "Repeated entities: " + detail::join(rep_names, ", ") + ".";
    }

    // Hallucination over all references, transportation included.
    std::size_t all_refs = refs.size(), unresolved = 0;
    std::vector<std::string> ghosts;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (!resolved[i]) {
            ++unresolved;
            ghosts.push_back("day " + std::to_string(refs[i].day) + " " + refs[i].slot + " '" + *refs[i].text + "'");
        }
    }
    for (const auto& d : it.days) {
        if (!d.transportation) continue;
        ++all_refs;
        if (!db.resolve_route(*d.transportation)) {
            ++unresolved;
            ghosts.push_back("day " + std::to_string(d.day) + " transportation '" + *d.transportation + "'");
        }
    }
    rep.dims["hallucination"] = all_refs == 0 ? 0.0 : static_cast<double>(unresolved) / static_cast<double>(all_refs);
    if (unresolved > 0) rep.messages["hallucination"] = "Entities not in the database: " + detail::join(ghosts, "; ") + ".";

    // Structure: resolved entities must sit in the day's city (either end of a
    // leg), and a leg must depart from where the previous day ended.
    std::size_t bad_days = 0;
    std::vector<std::string> why;
    std::string prev_end;
    for (std::size_t i = 0; i < it.days.size(); ++i) {
        const auto& d = it.days[i];
        const auto leg = parse_leg(d.current_city);
        std::set<std::string> here;
        std::string end;
        if (leg) {
            here = {canonical(leg->from), canonical(leg->to)};
            end = canonical(leg->to);
        } else {
            here = {canonical(d.current_city)};
            end = canonical(d.current_city);
        }
        bool bad = false;
        std::vector<std::string> reasons;
        for (std::size_t r = 0; r < refs.size(); ++r) {
            if (refs[r].day != d.day || !resolved[r]) continue;
            if (!here.count(canonical(resolved[r]->city))) {
                bad = true;
                reasons.push_back(resolved[r]->name + " is in " + resolved[r]->city);
            }
        }
        if (leg && i > 0 && canonical(leg->from) != prev_end) {
            bad = true;
            reasons.push_back("departs " + leg->from + " but the previous day ended elsewhere");
        }
        if (bad) {
            ++bad_days;
            why.push_back("day " + std::to_string(d.day) + ": " + detail::join(reasons, ", "));
        }
        prev_end = end;
    }
    rep.dims["structure"] = it.days.empty() ? 0.0 : static_cast<double>(bad_days) / static_cast<double>(it.days.size());
    if (bad_days > 0) rep.messages["structure"] = "Inconsistent city chain: " + detail::join(why, "; ") + ".";

    rep.dims["parse"] = 0.0;
    rep.violation_score = violation_score(rep);
    return rep;
}

/// Report for an unparseable body: every dimension at 1.
inline ConstraintReport parse_failure_report(const std::string& reason) {
    ConstraintReport rep;
    for (const char* d : kItineraryDims) {
        rep.dims[d] = 1.0;
        rep.messages[d] = std::string("Not checked (") + d + "): the itinerary could not be parsed.";
    }
    rep.messages["parse"] = "The itinerary could not be parsed: " + reason + ".";
    rep.violation_score = 1.0;
    return rep;
}

} // namespace ebr
