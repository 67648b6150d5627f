#pragma once

// Ensemble ranking accuracy under correlated members: the Gaussian closed
// form, its K -> infinity ceiling, an exact exchangeable-vote oracle and a
// Monte Carlo estimator of the same model.

#include <ebr/errors.hpp>
#include <ebr/parallel.hpp>
#include <ebr/random.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace ebr {

/// Standard normal CDF via the complementary error function.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

namespace detail {

inline void check_voters(int K, double q, double rho) {
    if (K < 1) throw InvalidConfig("K must be at least 1");
    if (!(q > 0.0 && q < 1.0)) throw InvalidConfig("q must lie in (0,1)");
    if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidConfig("rho must lie in [0,1]");
}

} // namespace detail

inline double p_ensemble_gaussian(int K, double q, double rho) {
    detail::check_voters(K, q, rho);
    const double z = std::sqrt(static_cast<double>(K)) * (q - 0.5) /
                     std::sqrt(q * (1.0 - q) * (1.0 + (K - 1) * rho));
    return normal_cdf(z);
}

inline double p_infinity(double q, double rho) {
    detail::check_voters(1, q, rho);
    if (rho == 0.0) throw RhoZero();
    return normal_cdf((q - 0.5) / std::sqrt(q * (1.0 - q) * rho));
}

/// P(strictly more than K/2 of K Bernoulli(q) votes are correct) for
/// independent votes.
inline double binomial_majority(int K, double q) {
    double total = 0.0;
    const double lq = std::log(q);
    const double lp = std::log1p(-q);
    for (int j = K / 2 + 1; j <= K; ++j) {
        const double lc = std::lgamma(K + 1.0) - std::lgamma(j + 1.0) - std::lgamma(K - j + 1.0);
        total += std::exp(lc + j * lq + (K - j) * lp);
    }
    return total;
}

/// Exact majority accuracy under the exchangeable mixture: with probability
/// rho every member copies one shared Bernoulli(q) vote, otherwise votes are
/// independent.
inline double p_majority_exact(int K, double q, double rho) {
    detail::check_voters(K, q, rho);
    return rho * q + (1.0 - rho) * binomial_majority(K, q);
}

struct VoterModel {
    int K = 5;
    double q = 0.6;
    double rho = 0.3;
    std::int64_t trials = 100000;
    std::uint64_t seed = 42;
};

struct MonteCarloResult {
    double estimate = 0.0;
    double std_error = 0.0;
    /// Sample pairwise correlation between member votes (NaN when K < 2).
    double vote_correlation = std::numeric_limits<double>::quiet_NaN();
};

inline MonteCarloResult mc_majority(const VoterModel& m, int workers = 0) {
    detail::check_voters(m.K, m.q, m.rho);
    if (m.trials < 1) throw InvalidConfig("trials must be positive");
    constexpr std::int64_t kChunk = 8192;
    const auto chunks = static_cast<std::size_t>((m.trials + kChunk - 1) / kChunk);

    struct Tally {
        std::int64_t wins = 0;
        double votes = 0.0;
        double pair_votes = 0.0;
    };
    std::vector<Tally> tallies(chunks);
    parallel_for(chunks, workers, [&](std::size_t c) {
        Rng rng(derive_seed(m.seed, std::uint64_t{c}));
        const std::int64_t begin = static_cast<std::int64_t>(c) * kChunk;
        const std::int64_t end = std::min(m.trials, begin + kChunk);
        Tally t;
        for (std::int64_t i = begin; i < end; ++i) {
            int s = 0;
            if (rng.bernoulli(m.rho)) {
                s = rng.bernoulli(m.q) ? m.K : 0;
            } else {
                for (int k = 0; k < m.K; ++k) s += rng.bernoulli(m.q) ? 1 : 0;
            }
            if (2 * s > m.K) ++t.wins;
            t.votes += s;
            t.pair_votes += static_cast<double>(s) * (s - 1);
        }
        tallies[c] = t;
    });

    Tally all;
    for (const auto& t : tallies) {
        all.wins += t.wins;
        all.votes += t.votes;
        all.pair_votes += t.pair_votes;
    }
    const double n = static_cast<double>(m.trials);
    MonteCarloResult r;
    r.estimate = static_cast<double>(all.wins) / n;
    r.std_error = std::sqrt(r.estimate * (1.0 - r.estimate) / n);
    if (m.K >= 2) {
        const double p = all.votes / (n * m.K);
        const double both = all.pair_votes / (n * m.K * (m.K - 1.0));
        const double var = p * (1.0 - p);
        if (var > 0.0) r.vote_correlation = (both - p * p) / var;
    }
    return r;
}

inline double population_variance(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(xs.size());
}

namespace detail {

inline long double population_variance_ext(const std::vector<long double>& xs) {
    long double mean = 0.0L;
    for (long double x : xs) mean += x;
    mean /= static_cast<long double>(xs.size());
    long double ss = 0.0L;
    for (long double x : xs) ss += (x - mean) * (x - mean);
    return ss / static_cast<long double>(xs.size());
}

} // namespace detail

struct VariancePartitionReport {
    double max_relative_deviation = 0.0;
    std::size_t checked = 0;
    /// Candidates with an infinite constraint term, whose total variance is undefined.
    std::size_t skipped_infinite = 0;
};

/// Compares the member variance of (E^k + lambda * C) with that of E^k for each
/// candidate. member_energies[i] are the K member energies of candidate i.
inline VariancePartitionReport variance_partition_check(const std::vector<std::vector<double>>& member_energies,
                                                        std::span<const double> e_constraint, double lambda) {
    if (member_energies.size() != e_constraint.size()) {
        throw InvalidConfig("member energies and constraint terms differ in length");
    }
    VariancePartitionReport rep;
    std::vector<long double> shifted;
    for (std::size_t i = 0; i < member_energies.size(); ++i) {
        const auto& e = member_energies[i];
        if (e.size() < 2) throw InvalidConfig("variance partition needs K >= 2");
        if (!std::isfinite(e_constraint[i])) {
            ++rep.skipped_infinite;
            continue;
        }
        // Extended precision keeps the rounding of E^k + lambda * C from
        // swamping spreads far smaller than the offset.
        const long double offset = lambda == 0.0 ? 0.0L : static_cast<long double>(lambda) * e_constraint[i];
        shifted.assign(e.begin(), e.end());
        for (long double& x : shifted) x += offset;
        const long double vq = detail::population_variance_ext(std::vector<long double>(e.begin(), e.end()));
        const long double vt = detail::population_variance_ext(shifted);
        const long double diff = std::fabs(vt - vq);
        const double rel = diff == 0.0L
                               ? 0.0
                               : static_cast<double>(diff / std::max(vq, static_cast<long double>(std::numeric_limits<double>::min())));
        rep.max_relative_deviation = std::max(rep.max_relative_deviation, rel);
        ++rep.checked;
    }
    return rep;
}

} // namespace ebr
