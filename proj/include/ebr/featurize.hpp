#pragma once

// Hashed n-gram featurization of a (problem, candidate) text pair.
//
// Feature keys are "<tag>|w<n>|<tokens>" for word n-grams and "<tag>|c|<gram>"
// for character n-grams of "<token>", where tag is "P" for the problem stream
// and "C" for the candidate stream. A key hashes with FNV-1a 64 to h; it lands
// on index 1 + h % (dim - 1) with sign + if the top bit of mix64(h) is clear,
// - otherwise. Index 0 is a constant bias feature equal to 1 before
// normalisation.

#include <ebr/core.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ebr {

struct FeaturizerConfig {
    int dim = 4096;
    int word_min = 1;
    int word_max = 2;
    int char_min = 3;
    int char_max = 5;
    bool normalize = true;

    bool operator==(const FeaturizerConfig&) const = default;

    void validate() const {
        if (dim < 2) throw InvalidConfig("feature dim must be at least 2");
        if (word_min < 1 || word_max < word_min) throw InvalidConfig("bad word n-gram range");
        if (char_min < 1 || char_max < char_min) throw InvalidConfig("bad char n-gram range");
    }
};

inline Json to_json(const FeaturizerConfig& c) {
    return Json{{"dim", c.dim},           {"word_ngrams", {c.word_min, c.word_max}},
                {"char_ngrams", {c.char_min, c.char_max}}, {"normalize", c.normalize}};
}

inline FeaturizerConfig featurizer_config_from_json(const Json& j) {
    FeaturizerConfig c;
    try {
        c.dim = j.at("dim").get<int>();
        c.word_min = j.at("word_ngrams").at(0).get<int>();
        c.word_max = j.at("word_ngrams").at(1).get<int>();
        c.char_min = j.at("char_ngrams").at(0).get<int>();
        c.char_max = j.at("char_ngrams").at(1).get<int>();
        c.normalize = j.at("normalize").get<bool>();
    } catch (const Json::exception& e) {
        throw InvalidConfig(std::string("featurizer config: ") + e.what());
    }
    c.validate();
    return c;
}

/// Sparse vector with strictly increasing indices and no explicit zeros.
struct SparseVec {
    std::vector<std::uint32_t> index;
    std::vector<double> value;

    std::size_t size() const { return index.size(); }
    bool operator==(const SparseVec&) const = default;
};

/// Lowercased tokens: runs of alphanumerics (bytes >= 0x80 count as letters)
/// and single punctuation characters. Whitespace separates.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    };
    for (unsigned char ch : text) {
        if (std::isalnum(ch) || ch >= 0x80) {
            cur.push_back(static_cast<char>(std::tolower(ch)));
        } else {
            flush();
            if (!std::isspace(ch)) {
                out.emplace_back(1, static_cast<char>(ch));
            }
        }
    }
    flush();
    return out;
}

namespace detail {

struct FeatureSink {
    int dim;
    std::vector<std::pair<std::uint32_t, double>> hits;

    void add(std::string_view key) {
        const std::uint64_t h = fnv1a(key);
        const auto idx = static_cast<std::uint32_t>(1 + h % static_cast<std::uint64_t>(dim - 1));
        const double sign = (mix64(h) >> 63) != 0 ? -1.0 : 1.0;
        hits.emplace_back(idx, sign);
    }
};

inline void emit_stream(FeatureSink& sink, char tag, std::string_view text, const FeaturizerConfig& cfg) {
    const auto toks = tokenize(text);
    std::string key;
    for (int n = cfg.word_min; n <= cfg.word_max; ++n) {
        if (toks.size() < static_cast<std::size_t>(n)) break;
        for (std::size_t i = 0; i + n <= toks.size(); ++i) {
            key.assign(1, tag);
            key += "|w";
            key += std::to_string(n);
            key += '|';
            for (int k = 0; k < n; ++k) {
                if (k) key += ' ';
                key += toks[i + k];
            }
            sink.add(key);
        }
    }
    std::string padded;
    for (const auto& t : toks) {
        padded = "<" + t + ">";
        for (int n = cfg.char_min; n <= cfg.char_max; ++n) {
            if (padded.size() < static_cast<std::size_t>(n)) break;
            for (std::size_t i = 0; i + n <= padded.size(); ++i) {
                key.assign(1, tag);
                key += "|c|";
                key.append(padded, i, n);
                sink.add(key);
            }
        }
    }
}

} // namespace detail

inline SparseVec featurize_sparse(std::string_view problem_text, std::string_view candidate_text,
                                  const FeaturizerConfig& cfg) {
    detail::FeatureSink sink{cfg.dim, {}};
    sink.hits.emplace_back(0u, 1.0);
    detail::emit_stream(sink, 'P', problem_text, cfg);
    detail::emit_stream(sink, 'C', candidate_text, cfg);
    std::sort(sink.hits.begin(), sink.hits.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    SparseVec v;
    for (std::size_t i = 0; i < sink.hits.size();) {
        const std::uint32_t idx = sink.hits[i].first;
        double acc = 0.0;
        for (; i < sink.hits.size() && sink.hits[i].first == idx; ++i) {
            acc += sink.hits[i].second;
        }
        if (acc != 0.0) {
            v.index.push_back(idx);
            v.value.push_back(acc);
        }
    }
    if (cfg.normalize) {
        double ss = 0.0;
        for (double x : v.value) ss += x * x;
        const double norm = std::sqrt(ss);
        for (double& x : v.value) x /= norm;
    }
    return v;
}

inline std::vector<double> to_dense(const SparseVec& v, int dim) {
    std::vector<double> out(static_cast<std::size_t>(dim), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[v.index[i]] = v.value[i];
    }
    return out;
}

inline std::vector<double> featurize(std::string_view problem_text, std::string_view candidate_text,
                                     const FeaturizerConfig& cfg) {
    return to_dense(featurize_sparse(problem_text, candidate_text, cfg), cfg.dim);
}

struct MemberMask {
    std::uint64_t mask_seed = 0;
    double keep_fraction = 1.0;

    bool operator==(const MemberMask&) const = default;
};

inline bool mask_keeps(const MemberMask& m, std::uint32_t index) {
    if (index == 0) return true;
    return unit_from_bits(derive_seed(m.mask_seed, std::uint64_t{index})) < m.keep_fraction;
}

/// Kept indices in increasing order; index 0 is always first.
inline std::vector<std::uint32_t> kept_indices(const MemberMask& m, int dim) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t j = 0; j < static_cast<std::uint32_t>(dim); ++j) {
        if (mask_keeps(m, j)) out.push_back(j);
    }
    return out;
}

inline std::vector<double> apply_mask(std::span<const double> v, const MemberMask& m) {
    std::vector<double> out(v.begin(), v.end());
    for (std::size_t j = 0; j < out.size(); ++j) {
        if (!mask_keeps(m, static_cast<std::uint32_t>(j))) out[j] = 0.0;
    }
    return out;
}

} // namespace ebr
