#include "metric_oracles.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

using namespace ebr;
using Catch::Approx;

namespace {

std::vector<ScoredProblem> random_scored(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<ScoredProblem> out;
    for (const auto& pool : generate_separable({n, 6, "verified", seed})) {
        std::map<std::string, std::vector<double>> e;
        for (const auto& c : pool.candidates) e[c.id] = {rng.normal(), rng.normal(), rng.normal()};
        QualityFn q = [e](const Problem&, const Candidate& c) { return summarize(e.at(c.id)); };
        out.push_back(score_problem(pool, q, ConstraintContext{}, RunConfig{}));
    }
    return out;
}

} // namespace

TEST_CASE("energy gap examples") {
    std::vector<LabeledEnergy> xs = {{-1, true}, {-1, true}, {1, false}, {1, false}, {1, false}};
    CHECK(*energy_gap(xs) == 2.0);
    for (auto& x : xs) x.correct = !x.correct;
    CHECK(*energy_gap(xs) == -2.0);
    CHECK_FALSE(energy_gap(std::vector<LabeledEnergy>{{0.3, true}}).has_value());
}

TEST_CASE("energy gap matches a hand-summed fixture") {
    Rng rng(1);
    std::vector<LabeledEnergy> xs;
    double sc = 0, si = 0;
    int nc = 0, ni = 0;
    for (int i = 0; i < 50; ++i) {
        const double mu = rng.normal();
        const bool ok = i % 3 == 0;
        xs.push_back({mu, ok});
        if (ok) sc += mu, ++nc;
        else si += mu, ++ni;
    }
    CHECK(std::abs(*energy_gap(xs) - (si / ni - sc / nc)) <= 1e-12);
}

TEST_CASE("tau-b examples") {
    const std::vector<double> e = {-1, -1, 1, 1}, y = {1, 1, 0, 0};
    std::vector<double> neg_e;
    for (double v : e) neg_e.push_back(-v);
    CHECK(*kendall_tau_b(neg_e, y) == Approx(1.0).margin(1e-15));
    CHECK(*kendall_tau_b(e, y) == Approx(-1.0).margin(1e-15));
    // Distinct energies against binary labels cap tau-b at sqrt(4/6).
    CHECK(*kendall_tau_b(std::vector<double>{3, 2, -5, -7}, y) == Approx(std::sqrt(4.0 / 6.0)).margin(1e-15));
    CHECK_FALSE(kendall_tau_b(e, std::vector<double>{1, 1, 1, 1}).has_value());
    // x = (1,2,3,4), y = (1,0,1,0): pairs (1,2)- (1,3)t (1,4)- (2,3)+ (2,4)t (3,4)-; 4 untied y pairs
    CHECK(*kendall_tau_b(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 0, 1, 0}) ==
          Approx((1.0 - 3.0) / std::sqrt(6.0 * 4.0)).margin(1e-15));
}

TEST_CASE("tau-b matches the pair-counting oracle on 100-point fixtures") {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x, y;
        for (int i = 0; i < 100; ++i) {
            x.push_back(std::round(rng.normal() * 3));
            y.push_back(trial % 2 ? static_cast<double>(rng.bernoulli(0.4)) : std::round(rng.normal() * 2));
        }
        CHECK(std::abs(*kendall_tau_b(x, y) - oracles::kendall_tau_b(x, y)) <= 1e-12);
        std::vector<double> flipped;
        for (double v : y) flipped.push_back(-v);
        CHECK(std::abs(*kendall_tau_b(x, flipped) + *kendall_tau_b(x, y)) <= 1e-12);
        std::vector<double> cubed;
        for (double v : x) cubed.push_back(v * v * v + 2 * v);
        CHECK(*kendall_tau_b(cubed, y) == *kendall_tau_b(x, y));
    }
}

TEST_CASE("tau is centred on zero for label-independent energies") {
    Rng rng(3);
    double sum = 0;
    int n = 0;
    for (int i = 0; i < 10000; ++i) {
        std::vector<double> e(8), y(8);
        for (int k = 0; k < 8; ++k) {
            e[k] = rng.normal();
            y[k] = rng.bernoulli(0.5);
        }
        if (auto t = kendall_tau_b(e, y)) sum += *t, ++n;
    }
    CHECK(std::abs(sum / n) < 0.02);
}

TEST_CASE("sigma AUROC fixture and edge cases") {
    const std::vector<SigmaOutcome> fixture = {{0.9, false}, {0.8, true}, {0.7, false}, {0.6, true}};
    CHECK(*sigma_auroc(fixture) == 0.75);
    CHECK(*sigma_auroc(std::vector<SigmaOutcome>{{2, false}, {1.5, false}, {0.1, true}, {0.2, true}}) == 1.0);
    CHECK(*sigma_auroc(std::vector<SigmaOutcome>{{1, false}, {1, true}, {1, true}}) == 0.5);
    CHECK_FALSE(sigma_auroc(std::vector<SigmaOutcome>{{1, true}, {2, true}}).has_value());
}

TEST_CASE("AUROC matches pair counting and ignores monotone transforms") {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> s, t;
        std::vector<std::uint8_t> pos;
        std::vector<bool> posb;
        for (int i = 0; i < 60; ++i) {
            s.push_back(std::round(rng.normal() * 4) / 4);
            t.push_back(std::exp(s.back()));
            const bool p = rng.bernoulli(0.3) || i == 0;
            pos.push_back(i == 1 ? 0 : p);
            posb.push_back(pos.back());
        }
        CHECK(std::abs(*auroc(s, pos) - oracles::auroc(s, posb)) <= 1e-12);
        CHECK(*auroc(t, pos) == *auroc(s, pos));
    }
}

TEST_CASE("ECE examples") {
    std::vector<ConfidenceOutcome> all(10, {1.0, true});
    CHECK(ece(all) == 0.0);
    for (int i = 0; i < 5; ++i) all[i].correct = false;
    CHECK(ece(all) == 0.5);
    // Accuracy equals mean confidence in every bin.
    std::vector<ConfidenceOutcome> calibrated = {{0.25, true}, {0.25, false}, {0.25, false}, {0.25, false},
                                                 {0.75, true}, {0.75, true}, {0.75, true}, {0.75, false}};
    CHECK(ece(calibrated) == Approx(0.0).margin(1e-15));
    CHECK_THROWS_AS(ece(std::vector<ConfidenceOutcome>{{1.5, true}}), InvalidConfig);
}

TEST_CASE("ECE matches hand binning on 100-point fixtures") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ConfidenceOutcome> xs;
        std::vector<double> c;
        std::vector<bool> ok;
        for (int i = 0; i < 100; ++i) {
            const double conf = i == 0 ? 1.0 : rng.uniform();
            xs.push_back({conf, rng.bernoulli(conf)});
            c.push_back(conf);
            ok.push_back(xs.back().correct);
        }
        CHECK(std::abs(ece(xs) - oracles::ece(c, ok)) <= 1e-12);
        CHECK(std::abs(ece(xs, 5) - oracles::ece(c, ok, 5)) <= 1e-12);
    }
}

TEST_CASE("selection confidence is a softmax over negative energy") {
    std::vector<EnergyBreakdown> bd(3);
    bd[0].total = 0.0;
    bd[1].total = 1.0;
    bd[2].total = std::numeric_limits<double>::infinity();
    const double z = 1.0 + std::exp(-1.0);
    CHECK(selection_confidence(bd, 0) == Approx(1.0 / z).margin(1e-15));
    CHECK(selection_confidence(bd, 2) == 0.0);
    bd[0].total = bd[1].total = bd[2].total;
    CHECK(selection_confidence(bd, 1) == Approx(1.0 / 3).margin(1e-15));
}

TEST_CASE("selective sweep examples") {
    std::vector<SelectiveItem> items;
    for (int i = 0; i < 10; ++i) items.push_back({"p" + std::to_string(i), i < 3 ? 2.0 : 0.5, i >= 3});
    const std::vector<double> fr = {0.0, 0.3, 1.0};
    const auto s = selective_sweep(items, fr);
    CHECK(*s.at(0.0) == 0.7);
    CHECK(*s.at(0.3) == 1.0);
    CHECK_FALSE(s.at(1.0).has_value());
}

TEST_CASE("selective sweep matches sort and slice") {
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<SelectiveItem> items;
        const int n = 1 + static_cast<int>(rng.index(40));
        for (int i = 0; i < n; ++i) {
            items.push_back({"id" + std::to_string(rng.below(1000)) + "-" + std::to_string(i),
                             std::round(rng.uniform() * 5) / 5, rng.bernoulli(0.6)});
        }
        const std::vector<double> fr = {0.0, 0.1, 0.25, 0.5, 0.9};
        const auto got = selective_sweep(items, fr);
        auto sorted = items;
        std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
            return a.sigma != b.sigma ? a.sigma > b.sigma : a.problem_id < b.problem_id;
        });
        for (double f : fr) {
            std::size_t drop = 0;
            while (static_cast<double>(drop) < f * n - 1e-9) ++drop;
            double ok = 0, kept = 0;
            for (std::size_t i = drop; i < sorted.size(); ++i) ok += sorted[i].correct, kept += 1;
            if (kept == 0) CHECK_FALSE(got.at(f).has_value());
            else CHECK(*got.at(f) == ok / kept);
        }
    }
}

TEST_CASE("evaluation report is bounded and consistent") {
    const auto scored = random_scored(150, 12);
    const std::vector<double> fr = {0.0, 0.2};
    const auto r = evaluate(scored, RunConfig{}, fr);
    CHECK(r.n_problems == 150);
    CHECK(r.pass_at_1 >= 0.0);
    CHECK(r.pass_at_1 <= 1.0);
    CHECK(*r.selective_curve.at(0.0) == r.pass_at_1);
    double prev = 0.0;
    for (const auto& [n, v] : r.pass_at_n_curve) {
        CHECK(v >= prev);
        CHECK(v <= 1.0);
        prev = v;
    }
    CHECK(r.pass_at_n_curve.at(1) == r.pass_at_1);
    CHECK(r.pass_at_n_curve.rbegin()->second == r.baseline_pass_at_1.at("oracle"));
    CHECK(*r.sigma_auroc >= 0.0);
    CHECK(*r.sigma_auroc <= 1.0);
    CHECK(r.ece >= 0.0);
    CHECK(r.ece <= 1.0);
    CHECK(*r.kendall_tau >= -1.0);
    CHECK(*r.kendall_tau <= 1.0);
    CHECK_FALSE(r.mean_violation.has_value());
    const Json j = to_json(r);
    CHECK(j["pass_at_1"] == r.pass_at_1);
    CHECK(j["selective_curve"]["0"] == r.pass_at_1);
    const auto csv = to_csv(r);
    CHECK(csv.rfind("metric,key,value\n", 0) == 0);
    CHECK(csv.find("mean_violation,,undefined") != std::string::npos);
}

TEST_CASE("single-member runs leave sigma metrics undefined") {
    std::vector<ScoredProblem> scored;
    Rng rng(7);
    for (const auto& pool : generate_separable({30, 4, "verified", 1})) {
        QualityFn q = [&rng](const Problem&, const Candidate&) { return summarize({rng.normal()}); };
        scored.push_back(score_problem(pool, q, ConstraintContext{}, RunConfig{}));
    }
    const auto r = evaluate(scored, RunConfig{});
    CHECK_FALSE(r.sigma_auroc.has_value());
    CHECK(r.selective_curve.empty());
}

TEST_CASE("evaluation is independent of problem order") {
    auto scored = random_scored(60, 13);
    const auto a = to_json(evaluate(scored, RunConfig{}));
    std::reverse(scored.begin(), scored.end());
    const auto b = to_json(evaluate(scored, RunConfig{}));
    CHECK(a["pass_at_1"] == b["pass_at_1"]);
    CHECK(a["sigma_auroc"] == b["sigma_auroc"]);
    CHECK(std::abs(a["ece"].get<double>() - b["ece"].get<double>()) < 1e-12);
    CHECK(std::abs(a["kendall_tau"].get<double>() - b["kendall_tau"].get<double>()) < 1e-12);
}
