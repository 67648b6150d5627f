#pragma once

// Final-answer extraction after the "####" delimiter.

#include <ebr/core.hpp>
#include <ebr/itinerary.hpp>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>

namespace ebr {

enum class AnswerMatch { correct, incorrect, unparseable };

inline const char* to_string(AnswerMatch m) {
    switch (m) {
    case AnswerMatch::correct: return "correct";
    case AnswerMatch::incorrect: return "incorrect";
    case AnswerMatch::unparseable: return "unparseable";
    }
    return "?";
}

/// First whitespace-delimited token after the last "####", if any.
inline std::optional<std::string> extract_final_answer(std::string_view body) {
    const auto pos = body.rfind("####");
    if (pos == std::string_view::npos) return std::nullopt;
    std::string_view rest = body.substr(pos + 4);
    const auto b = rest.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return std::nullopt;
    rest = rest.substr(b);
    const auto e = rest.find_first_of(" \t\r\n");
    return std::string(rest.substr(0, e));
}

/// Number after stripping thousands separators, currency signs and a trailing period.
inline std::optional<double> parse_number(std::string_view token) {
    std::string s;
    for (std::size_t i = 0; i < token.size(); ++i) {
        const char c = token[i];
        if (c == ',' || c == '$') continue;
        if (token.substr(i, 3) == "\xE2\x82\xAC") {  // euro sign
            i += 2;
            continue;
        }
        if (token.substr(i, 2) == "\xC2\xA3") {  // pound sign
            i += 1;
            continue;
        }
        s += c;
    }
    while (!s.empty() && s.back() == '.') s.pop_back();
    if (s.empty()) return std::nullopt;
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end != begin + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

/// 1-based choice index from "2", "B", "(B)" or "B)".
inline std::optional<int> parse_choice(std::string_view token) {
    std::string s;
    for (char c : token) {
        if (c != '(' && c != ')' && c != '.' && c != ':') s += c;
    }
    if (s.size() == 1 && std::isalpha(static_cast<unsigned char>(s[0]))) {
        return std::toupper(static_cast<unsigned char>(s[0])) - 'A' + 1;
    }
    if (!s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        return std::stoi(s);
    }
    return std::nullopt;
}

inline std::optional<double> gold_number(const Json& gold) {
    if (gold.is_number()) return gold.get<double>();
    if (gold.is_string()) return parse_number(gold.get<std::string>());
    return std::nullopt;
}

inline std::optional<int> gold_choice(const Json& gold) {
    if (gold.is_number_integer()) return gold.get<int>();
    if (gold.is_string()) return parse_choice(gold.get<std::string>());
    return std::nullopt;
}

inline AnswerMatch match_answer(std::string_view body, const Json& gold, TaskKind kind) {
    const auto tok = extract_final_answer(body);
    if (!tok) return AnswerMatch::unparseable;
    if (kind == TaskKind::multichoice) {
        const auto c = parse_choice(*tok);
        if (!c) return AnswerMatch::unparseable;
        const auto g = gold_choice(gold);
        return g && *g == *c ? AnswerMatch::correct : AnswerMatch::incorrect;
    }
    if (kind != TaskKind::math_answer) throw InvalidConfig("answer matching applies to math and multichoice tasks");
    const auto v = parse_number(*tok);
    if (!v) return AnswerMatch::unparseable;
    const auto g = gold_number(gold);
    return g && std::abs(*g - *v) <= 1e-6 ? AnswerMatch::correct : AnswerMatch::incorrect;
}

} // namespace ebr
