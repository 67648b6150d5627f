#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <map>

using namespace ebr;

namespace {

// Reference FNV-1a and splitmix64, written out independently.
std::uint64_t ref_fnv(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t ref_mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

} // namespace

TEST_CASE("tokenizer lowercases alphanumeric runs and splits punctuation") {
    CHECK(tokenize("Hello, World!  x2") == std::vector<std::string>{"hello", ",", "world", "!", "x2"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("#### 42") == std::vector<std::string>{"#", "#", "#", "#", "42"});
}

TEST_CASE("empty texts give only the bias feature") {
    const FeaturizerConfig cfg;
    const auto v = featurize("", "", cfg);
    REQUIRE(v.size() == 4096);
    CHECK(v[0] == 1.0);
    for (std::size_t i = 1; i < v.size(); ++i) REQUIRE(v[i] == 0.0);
}

TEST_CASE("hashed features match a hand-built key list") {
    FeaturizerConfig cfg;
    cfg.normalize = false;
    // "Hi" -> token "hi": word key C|w1|hi; char keys over "<hi>": <hi, hi>, <hi>
    std::map<std::uint32_t, double> expected{{0, 1.0}};
    for (const std::string key : {"C|w1|hi", "C|c|<hi", "C|c|hi>", "C|c|<hi>"}) {
        const std::uint64_t h = ref_fnv(key);
        const auto idx = static_cast<std::uint32_t>(1 + h % 4095);
        expected[idx] += (ref_mix(h) >> 63) ? -1.0 : 1.0;
    }
    const auto v = featurize_sparse("", "Hi", cfg);
    std::map<std::uint32_t, double> got;
    for (std::size_t i = 0; i < v.size(); ++i) got[v.index[i]] = v.value[i];
    std::erase_if(expected, [](const auto& kv) { return kv.second == 0.0; });
    CHECK(got == expected);
}

TEST_CASE("problem and candidate streams use disjoint tags") {
    FeaturizerConfig cfg;
    const auto a = featurize("apple", "", cfg);
    const auto b = featurize("", "apple", cfg);
    CHECK(a != b);
}

TEST_CASE("featurize is deterministic, unit norm and bias-anchored") {
    const FeaturizerConfig cfg;
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        const auto x = testing::random_text(rng), y = testing::random_text(rng, 30);
        const auto v1 = featurize(x, y, cfg);
        const auto v2 = featurize(x, y, cfg);
        REQUIRE(v1 == v2);
        CHECK(norm(v1) == Catch::Approx(1.0).epsilon(1e-12));
        CHECK(v1[0] > 0.0);
        FeaturizerConfig raw = cfg;
        raw.normalize = false;
        CHECK(featurize(x, y, raw)[0] == 1.0);
    }
}

TEST_CASE("one-word perturbations change the vector") {
    const FeaturizerConfig cfg;
    Rng rng(12);
    int changed = 0;
    for (int i = 0; i < 1000; ++i) {
        std::vector<std::string> words;
        for (int k = 0; k < 10; ++k) words.push_back(filler_word(rng));
        auto join = [](const std::vector<std::string>& w) {
            std::string s;
            for (const auto& x : w) s += x + " ";
            return s;
        };
        const std::string before = join(words);
        std::string repl;
        do repl = filler_word(rng) + "q";
        while (repl == words[0]);
        words[rng.index(words.size())] = repl;
        changed += featurize_sparse("problem", before, cfg) != featurize_sparse("problem", join(words), cfg);
    }
    CHECK(changed == 1000);
}

TEST_CASE("changing only the problem changes the vector") {
    const FeaturizerConfig cfg;
    CHECK(featurize("What is 2+2?", "#### 4", cfg) != featurize("What is 3+1?", "#### 4", cfg));
}

TEST_CASE("full keep fraction is the identity mask") {
    const FeaturizerConfig cfg;
    const auto v = featurize("some problem", "a candidate answer", cfg);
    CHECK(apply_mask(v, {123, 1.0}) == v);
    CHECK(kept_indices({5, 1.0}, 64).size() == 64);
}

TEST_CASE("masks are deterministic, idempotent and keep the bias") {
    const FeaturizerConfig cfg;
    const auto v = featurize("problem text", "candidate text here", cfg);
    const MemberMask m{77, 0.5};
    const auto once = apply_mask(v, m);
    CHECK(apply_mask(once, m) == once);
    CHECK(apply_mask(v, m) == once);
    CHECK(once[0] == v[0]);
    std::vector<double> zero(4096, 0.0);
    CHECK(apply_mask(zero, m) == zero);
    const auto kept = kept_indices(m, 4096);
    CHECK(kept.front() == 0);
    for (std::uint32_t j = 0; j < 4096; ++j) {
        const bool in = std::binary_search(kept.begin(), kept.end(), j);
        REQUIRE((once[j] == 0.0 || in));
    }
}

TEST_CASE("half masks from different seeds overlap on about a quarter of the features") {
    const int D = 4096;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto a = kept_indices({1000 + s, 0.5}, D);
        const auto b = kept_indices({2000 + s, 0.5}, D);
        CHECK(a != b);
        std::vector<std::uint32_t> both;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
        // Bias is shared; the remaining D-1 indices overlap with probability 1/4.
        const double overlap = static_cast<double>(both.size() - 1);
        CHECK(std::abs(overlap - (D - 1) / 4.0) <= 0.1 * (D - 1) / 4.0);
        CHECK(std::abs(static_cast<double>(a.size()) - D / 2.0) <= 0.1 * D / 2.0);
    }
}

TEST_CASE("featurizer config round-trips and validates") {
    FeaturizerConfig c;
    c.dim = 128;
    c.char_max = 4;
    CHECK(featurizer_config_from_json(to_json(c)) == c);
    Json bad = to_json(c);
    bad["dim"] = 1;
    CHECK_THROWS_AS(featurizer_config_from_json(bad), InvalidConfig);
}
