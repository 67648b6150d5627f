#pragma once

// Ensemble of MLP energy heads trained with the pairwise Bradley-Terry loss.
//
// A head maps a sparse feature vector x to
//   z = ((x - shift) * scale) restricted to the member's kept columns
//   e = w2 . dropout(gelu(W1 z + b1)) + b2
// Lower energy means a better candidate.

#include <ebr/core.hpp>
#include <ebr/featurize.hpp>
#include <ebr/parallel.hpp>
#include <ebr/theory.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace ebr {

inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// log(1 + exp(e_pos - e_neg)).
inline double bt_loss(double e_pos, double e_neg) { return softplus(e_pos - e_neg); }

/// Probability that the lower-energy candidate of the pair is preferred.
inline double preference_probability(double e_pos, double e_neg) { return sigmoid(e_neg - e_pos); }

inline double gelu(double x) { return x * normal_cdf(x); }
inline double gelu_grad(double x) { return normal_cdf(x) + x * normal_pdf(x); }

// ---------------------------------------------------------------------------
// Configuration

enum class InitMode { random, zero };

struct MemberConfig {
    int hidden_dim = 64;
    MemberMask mask;
    double dropout = 0.2;
    double learning_rate = 0.5;
    int epochs = 10;
    int batch_size = 32;
    int patience = 2;
    double validation_fraction = 0.1;
    std::uint64_t init_seed = 0;
    std::uint64_t bag_seed = 0;
    InitMode init = InitMode::random;

    bool operator==(const MemberConfig&) const = default;
};

inline Json to_json(const MemberConfig& c) {
    return Json{{"hidden_dim", c.hidden_dim},
                {"mask_seed", c.mask.mask_seed},
                {"keep_fraction", c.mask.keep_fraction},
                {"dropout", c.dropout},
                {"learning_rate", c.learning_rate},
                {"epochs", c.epochs},
                {"batch_size", c.batch_size},
                {"patience", c.patience},
                {"validation_fraction", c.validation_fraction},
                {"init_seed", c.init_seed},
                {"bag_seed", c.bag_seed},
                {"init", c.init == InitMode::zero ? "zero" : "random"}};
}

inline MemberConfig member_config_from_json(const Json& j) {
    MemberConfig c;
    try {
        c.hidden_dim = j.at("hidden_dim").get<int>();
        c.mask.mask_seed = j.at("mask_seed").get<std::uint64_t>();
        c.mask.keep_fraction = j.at("keep_fraction").get<double>();
        c.dropout = j.at("dropout").get<double>();
        c.learning_rate = j.at("learning_rate").get<double>();
        c.epochs = j.at("epochs").get<int>();
        c.batch_size = j.at("batch_size").get<int>();
        c.patience = j.at("patience").get<int>();
        c.validation_fraction = j.at("validation_fraction").get<double>();
        c.init_seed = j.at("init_seed").get<std::uint64_t>();
        c.bag_seed = j.at("bag_seed").get<std::uint64_t>();
        c.init = j.at("init").get<std::string>() == "zero" ? InitMode::zero : InitMode::random;
    } catch (const Json::exception& e) {
        throw InvalidConfig(std::string("member config: ") + e.what());
    }
    return c;
}

/// Heterogeneous member configs: head widths {64, 64, 128, 32, 64} and feature
/// keep fractions {0.5, 0.75, 0.5, 0.5, 0.75}, cycled for K > 5. Seeds derive
/// from the master seed and the member index.
inline std::vector<MemberConfig> default_member_configs(const RunConfig& rc) {
    static constexpr int kHidden[] = {64, 64, 128, 32, 64};
    static constexpr double kKeep[] = {0.5, 0.75, 0.5, 0.5, 0.75};
    std::vector<MemberConfig> out;
    for (int k = 0; k < rc.K; ++k) {
        const std::uint64_t base = derive_seed(static_cast<std::uint64_t>(rc.master_seed), std::uint64_t(k));
        MemberConfig c;
        c.hidden_dim = kHidden[k % 5];
        c.mask = {derive_seed(base, "mask"), kKeep[k % 5]};
        c.dropout = rc.dropout;
        c.learning_rate = rc.learning_rate;
        c.epochs = rc.epochs;
        c.batch_size = rc.batch_size;
        c.patience = rc.patience;
        c.validation_fraction = rc.validation_fraction;
        c.init_seed = derive_seed(base, "init");
        c.bag_seed = derive_seed(base, "bag");
        out.push_back(c);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Energy head

struct EnergyHead {
    int hidden = 0;
    // Kept feature indices and their inverse map; derived from the mask.
    std::vector<std::uint32_t> kept;
    std::vector<std::int32_t> column;
    // Per kept column.
    std::vector<double> shift;
    std::vector<double> scale;
    // Layer 1 stored column-major: w1[col * hidden + h].
    std::vector<double> w1;
    std::vector<double> b1;
    std::vector<double> w2;
    double b2 = 0.0;
    // W1 (shift * scale), cached for the sparse forward pass.
    std::vector<double> offset;

    std::size_t columns() const { return kept.size(); }

    void refresh() {
        offset.assign(static_cast<std::size_t>(hidden), 0.0);
        for (std::size_t c = 0; c < kept.size(); ++c) {
            const double ms = shift[c] * scale[c];
            if (ms == 0.0) continue;
            const double* w = &w1[c * hidden];
            for (int h = 0; h < hidden; ++h) offset[h] += w[h] * ms;
        }
    }

    bool same_parameters(const EnergyHead& o) const {
        return hidden == o.hidden && kept == o.kept && shift == o.shift && scale == o.scale && w1 == o.w1 &&
               b1 == o.b1 && w2 == o.w2 && b2 == o.b2;
    }
};

inline void bind_mask(EnergyHead& head, const MemberMask& mask, int dim) {
    head.kept = kept_indices(mask, dim);
    head.column.assign(static_cast<std::size_t>(dim), -1);
    for (std::size_t c = 0; c < head.kept.size(); ++c) {
        head.column[head.kept[c]] = static_cast<std::int32_t>(c);
    }
}

/// Allocates a head for the member and draws initial weights. Normalisation
/// starts as identity; fit_normalization replaces it.
inline EnergyHead init_head(const MemberConfig& cfg, int dim) {
    if (cfg.hidden_dim < 1) throw InvalidConfig("hidden_dim must be positive");
    EnergyHead head;
    head.hidden = cfg.hidden_dim;
    bind_mask(head, cfg.mask, dim);
    const std::size_t cols = head.kept.size();
    const auto H = static_cast<std::size_t>(head.hidden);
    head.shift.assign(cols, 0.0);
    head.scale.assign(cols, 1.0);
    head.w1.assign(cols * H, 0.0);
    head.b1.assign(H, 0.0);
    head.w2.assign(H, 0.0);
    head.b2 = 0.0;
    if (cfg.init == InitMode::random) {
        Rng rng(derive_seed(cfg.init_seed, "weights"));
        for (double& w : head.w1) w = rng.normal();
        const double s2 = 1.0 / std::sqrt(static_cast<double>(H));
        for (double& w : head.w2) w = s2 * rng.normal();
    }
    head.refresh();
    return head;
}

/// Centres every kept column on its sample mean and applies one shared scale
/// so standardised inputs have unit expected squared norm. Columns that never
/// vary get scale 0.
inline void fit_normalization(EnergyHead& head, std::span<const SparseVec* const> sample) {
    const std::size_t cols = head.columns();
    std::vector<double> sum(cols, 0.0), sumsq(cols, 0.0);
    for (const SparseVec* v : sample) {
        for (std::size_t i = 0; i < v->size(); ++i) {
            const std::int32_t c = head.column[v->index[i]];
            if (c < 0) continue;
            sum[c] += v->value[i];
            sumsq[c] += v->value[i] * v->value[i];
        }
    }
    const double n = static_cast<double>(std::max<std::size_t>(sample.size(), 1));
    double total_var = 0.0;
    std::vector<double> var(cols, 0.0);
    for (std::size_t c = 0; c < cols; ++c) {
        const double mean = sum[c] / n;
        var[c] = std::max(0.0, sumsq[c] / n - mean * mean);
        head.shift[c] = mean;
        if (var[c] > 1e-18) total_var += var[c];
    }
    const double unit = total_var > 0.0 ? 1.0 / std::sqrt(total_var) : 0.0;
    for (std::size_t c = 0; c < cols; ++c) head.scale[c] = var[c] > 1e-18 ? unit : 0.0;
    head.refresh();
}

struct ForwardCache {
    std::vector<double> pre;   // W1 z + b1
    std::vector<double> act;   // gelu(pre) after dropout
    double energy = 0.0;
};

/// Forward pass. `drop` holds per-unit dropout multipliers, or is empty.
inline double forward(const EnergyHead& head, const SparseVec& x, std::span<const double> drop,
                      ForwardCache* cache = nullptr) {
    const int H = head.hidden;
    thread_local std::vector<double> pre;
    pre.assign(static_cast<std::size_t>(H), 0.0);
    for (int h = 0; h < H; ++h) pre[h] = head.b1[h] - head.offset[h];
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::int32_t c = head.column[x.index[i]];
        if (c < 0) continue;
        const double v = x.value[i] * head.scale[c];
        if (v == 0.0) continue;
        const double* w = &head.w1[static_cast<std::size_t>(c) * H];
        for (int h = 0; h < H; ++h) pre[h] += w[h] * v;
    }
    double e = head.b2;
    if (cache) {
        cache->pre.assign(pre.begin(), pre.end());
        cache->act.resize(static_cast<std::size_t>(H));
    }
    for (int h = 0; h < H; ++h) {
        double a = gelu(pre[h]);
        if (!drop.empty()) a *= drop[h];
        if (cache) cache->act[h] = a;
        e += head.w2[h] * a;
    }
    if (cache) cache->energy = e;
    return e;
}

inline double head_energy(const EnergyHead& head, const SparseVec& x) { return forward(head, x, {}); }

struct HeadGradient {
    std::vector<double> w1, b1, w2;
    double b2 = 0.0;

    void reset(const EnergyHead& head) {
        w1.assign(head.w1.size(), 0.0);
        b1.assign(head.b1.size(), 0.0);
        w2.assign(head.w2.size(), 0.0);
        b2 = 0.0;
    }
};

struct PairExample {
    const SparseVec* pos = nullptr;
    const SparseVec* neg = nullptr;
    double weight = 1.0;
};

namespace detail {

// Accumulates d(energy)/d(params) scaled by `de`. Layer-1 gradients from the
// shift term are collected in delta_sum and applied densely afterwards.
inline void backprop(const EnergyHead& head, const SparseVec& x, const ForwardCache& cache,
                     std::span<const double> drop, double de, HeadGradient& g, std::vector<double>& delta_sum) {
    const int H = head.hidden;
    g.b2 += de;
    thread_local std::vector<double> delta;
    delta.resize(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) {
        g.w2[h] += de * cache.act[h];
        double d = de * head.w2[h] * gelu_grad(cache.pre[h]);
        if (!drop.empty()) d *= drop[h];
        delta[h] = d;
        g.b1[h] += d;
        delta_sum[h] += d;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::int32_t c = head.column[x.index[i]];
        if (c < 0) continue;
        const double v = x.value[i] * head.scale[c];
        if (v == 0.0) continue;
        double* gw = &g.w1[static_cast<std::size_t>(c) * H];
        for (int h = 0; h < H; ++h) gw[h] += delta[h] * v;
    }
}

} // namespace detail

/// Mean weighted pair loss over `batch`, optionally with its gradient.
/// `drop` is empty or holds 2 * hidden multipliers per example (pos then neg).
inline double batch_loss(const EnergyHead& head, std::span<const PairExample> batch, std::span<const double> drop,
                         HeadGradient* grad) {
    if (batch.empty()) return 0.0;
    const auto H = static_cast<std::size_t>(head.hidden);
    const double inv = 1.0 / static_cast<double>(batch.size());
    std::vector<double> delta_sum;
    if (grad) {
        grad->reset(head);
        delta_sum.assign(H, 0.0);
    }
    ForwardCache cp, cn;
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        std::span<const double> dp, dn;
        if (!drop.empty()) {
            dp = drop.subspan(2 * i * H, H);
            dn = drop.subspan((2 * i + 1) * H, H);
        }
        const double ep = forward(head, *batch[i].pos, dp, grad ? &cp : nullptr);
        const double en = forward(head, *batch[i].neg, dn, grad ? &cn : nullptr);
        loss += batch[i].weight * bt_loss(ep, en);
        if (grad) {
            const double s = batch[i].weight * sigmoid(ep - en) * inv;
            detail::backprop(head, *batch[i].pos, cp, dp, s, *grad, delta_sum);
            detail::backprop(head, *batch[i].neg, cn, dn, -s, *grad, delta_sum);
        }
    }
    if (grad) {
        for (std::size_t c = 0; c < head.columns(); ++c) {
            const double ms = head.shift[c] * head.scale[c];
            if (ms == 0.0) continue;
            double* gw = &grad->w1[c * H];
            for (std::size_t h = 0; h < H; ++h) gw[h] -= delta_sum[h] * ms;
        }
    }
    return loss * inv;
}

// ---------------------------------------------------------------------------
// Pair construction and bagging

struct ContrastivePair {
    std::string problem_id;
    std::string positive_id;
    std::string negative_id;

    bool operator==(const ContrastivePair&) const = default;
};

/// Positive and negative candidate positions of a pool. Binary tasks split
/// on the label; itinerary tasks take the best quarter by violation score
/// (at least one) as positives and the rest as negatives.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_classes(const CandidatePool& pool) {
    std::vector<std::size_t> pos, neg;
    if (pool.problem.task_kind == TaskKind::itinerary) {
        std::vector<std::size_t> labelled;
        for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
            if (pool.candidates[i].violation) labelled.push_back(i);
        }
        std::stable_sort(labelled.begin(), labelled.end(), [&](std::size_t a, std::size_t b) {
            return *pool.candidates[a].violation < *pool.candidates[b].violation;
        });
        const std::size_t top = std::max<std::size_t>(1, labelled.size() / 4);
        for (std::size_t r = 0; r < labelled.size(); ++r) (r < top ? pos : neg).push_back(labelled[r]);
        std::sort(pos.begin(), pos.end());
        std::sort(neg.begin(), neg.end());
        return {pos, neg};
    }
    for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
        if (auto l = binary_label(pool.candidates[i])) (*l ? pos : neg).push_back(i);
    }
    return {pos, neg};
}

/// Up to `cap` distinct (positive, negative) pairs drawn uniformly without
/// replacement from the product set. Itinerary pairs with equal violation are
/// excluded from the product set.
inline std::vector<ContrastivePair> sample_pairs(const CandidatePool& pool, int cap, std::uint64_t seed) {
    const auto [pos, neg] = split_classes(pool);
    std::vector<std::pair<std::size_t, std::size_t>> product;
    const bool itinerary = pool.problem.task_kind == TaskKind::itinerary;
    for (std::size_t p : pos) {
        for (std::size_t n : neg) {
            if (itinerary && !(*pool.candidates[p].violation < *pool.candidates[n].violation)) continue;
            product.emplace_back(p, n);
        }
    }
    if (product.empty() || cap < 1) return {};
    Rng rng(derive_seed(seed, pool.problem.id));
    auto picks = rng.sample_without_replacement(product.size(), static_cast<std::size_t>(cap));
    std::sort(picks.begin(), picks.end());
    std::vector<ContrastivePair> out;
    out.reserve(picks.size());
    for (std::size_t k : picks) {
        out.push_back({pool.problem.id, pool.candidates[product[k].first].id, pool.candidates[product[k].second].id});
    }
    return out;
}

/// round(fraction * n) ids (at least one when n > 0) without replacement,
/// returned in their original order.
inline std::vector<std::string> bag_problems(std::span<const std::string> ids, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidConfig("bag fraction must lie in (0,1]");
    const std::size_t n = ids.size();
    if (n == 0) return {};
    const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
    Rng rng(derive_seed(seed, "bag"));
    auto picks = rng.sample_without_replacement(n, k);
    std::sort(picks.begin(), picks.end());
    std::vector<std::string> out;
    out.reserve(k);
    for (std::size_t i : picks) out.push_back(ids[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Feature table

/// Sparse features of every candidate in a set of pools.
class FeatureTable {
public:
    FeatureTable() = default;

    FeatureTable(std::span<const CandidatePool> pools, const FeaturizerConfig& cfg, int workers = 0) {
        pools_.reserve(pools.size());
        for (const auto& p : pools) add_pool_index(p);
        feats_.resize(pools.size());
        parallel_for(pools.size(), workers, [&](std::size_t i) {
            const auto& p = pools[i];
            auto& row = feats_[i];
            row.reserve(p.candidates.size());
            for (const auto& c : p.candidates) row.push_back(featurize_sparse(p.problem.statement, c.body, cfg));
        });
    }

    const SparseVec& get(const std::string& problem_id, const std::string& candidate_id) const {
        const std::size_t p = pool_at(problem_id);
        auto it = cand_index_[p].find(candidate_id);
        if (it == cand_index_[p].end()) throw InvalidConfig("unknown candidate '" + candidate_id + "'");
        return feats_[p][it->second];
    }

    const std::vector<SparseVec>& pool_features(const std::string& problem_id) const {
        return feats_[pool_at(problem_id)];
    }

    bool contains(const std::string& problem_id) const { return pool_index_.count(problem_id) != 0; }

private:
    void add_pool_index(const CandidatePool& p) {
        pool_index_.emplace(p.problem.id, pools_.size());
        pools_.push_back(p.problem.id);
        auto& m = cand_index_.emplace_back();
        for (std::size_t i = 0; i < p.candidates.size(); ++i) m.emplace(p.candidates[i].id, i);
    }

    std::size_t pool_at(const std::string& problem_id) const {
        auto it = pool_index_.find(problem_id);
        if (it == pool_index_.end()) throw InvalidConfig("unknown problem '" + problem_id + "'");
        return it->second;
    }

    std::vector<std::string> pools_;
    std::unordered_map<std::string, std::size_t> pool_index_;
    std::vector<std::unordered_map<std::string, std::size_t>> cand_index_;
    std::vector<std::vector<SparseVec>> feats_;
};

// ---------------------------------------------------------------------------
// Training

struct TrainStats {
    std::size_t train_pairs = 0;
    std::size_t train_problems = 0;
    std::size_t validation_pairs = 0;
    std::size_t validation_problems = 0;
    int epochs_run = 0;
    int best_epoch = 0;
    double final_train_loss = std::numeric_limits<double>::quiet_NaN();
    double best_validation_loss = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

// Pair examples weighted so the mean over any uniform minibatch is an
// unbiased estimate of the per-problem-averaged loss.
inline std::vector<PairExample> weighted_examples(std::span<const ContrastivePair* const> pairs,
                                                  const FeatureTable& table) {
    std::unordered_map<std::string, std::size_t> per_problem;
    for (const auto* p : pairs) ++per_problem[p->problem_id];
    const double total = static_cast<double>(pairs.size());
    const double problems = static_cast<double>(per_problem.size());
    std::vector<PairExample> out;
    out.reserve(pairs.size());
    for (const auto* p : pairs) {
        out.push_back({&table.get(p->problem_id, p->positive_id), &table.get(p->problem_id, p->negative_id),
                       total / (problems * static_cast<double>(per_problem[p->problem_id]))});
    }
    return out;
}

inline double full_loss(const EnergyHead& head, std::span<const PairExample> ex) {
    return batch_loss(head, ex, {}, nullptr);
}

} // namespace detail

/// Runs minibatch descent on `head` from its current weights. Normalisation
/// and masks are left untouched.
inline void fit_head(EnergyHead& head, std::span<const ContrastivePair> pairs, const FeatureTable& table,
                     const MemberConfig& cfg, TrainStats* stats = nullptr) {
    if (pairs.empty()) throw DegenerateData("no contrastive pairs");
    TrainStats st;

    std::vector<std::string> problems;
    {
        std::unordered_set<std::string> seen;
        for (const auto& p : pairs) {
            if (seen.insert(p.problem_id).second) problems.push_back(p.problem_id);
        }
    }
    const auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(problems.size())));
    std::unordered_set<std::string> val_set;
    if (n_val > 0 && n_val < problems.size()) {
        Rng rng(derive_seed(cfg.bag_seed, "validation"));
        for (std::size_t i : rng.sample_without_replacement(problems.size(), n_val)) val_set.insert(problems[i]);
    }
    std::vector<const ContrastivePair*> train_pairs, val_pairs;
    for (const auto& p : pairs) (val_set.count(p.problem_id) ? val_pairs : train_pairs).push_back(&p);
    auto train = detail::weighted_examples(train_pairs, table);
    const auto val = detail::weighted_examples(val_pairs, table);
    st.train_pairs = train.size();
    st.train_problems = problems.size() - val_set.size();
    st.validation_pairs = val.size();
    st.validation_problems = val_set.size();

    const auto H = static_cast<std::size_t>(head.hidden);
    const std::size_t batch = static_cast<std::size_t>(std::max(1, cfg.batch_size));
    const std::size_t steps_per_epoch = (train.size() + batch - 1) / batch;
    const double total_steps = static_cast<double>(steps_per_epoch) * std::max(1, cfg.epochs);
    Rng order_rng(derive_seed(cfg.bag_seed, "order"));
    Rng drop_rng(derive_seed(cfg.init_seed, "dropout"));
    const double keep = 1.0 - cfg.dropout;

    EnergyHead best = head;
    double best_val = val.empty() ? 0.0 : detail::full_loss(head, val);
    int since_best = 0;
    HeadGradient grad;
    std::vector<double> drop;
    std::size_t step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        order_rng.shuffle(train);
        for (std::size_t start = 0; start < train.size(); start += batch, ++step) {
            const std::size_t len = std::min(batch, train.size() - start);
            const std::span<const PairExample> mb(train.data() + start, len);
            drop.clear();
            if (cfg.dropout > 0.0) {
                drop.resize(2 * len * H);
                for (double& d : drop) d = drop_rng.uniform() < keep ? 1.0 / keep : 0.0;
            }
            batch_loss(head, mb, drop, &grad);
            const double lr =
                cfg.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total_steps));
            for (std::size_t i = 0; i < head.w1.size(); ++i) head.w1[i] -= lr * grad.w1[i];
            for (std::size_t h = 0; h < H; ++h) {
                head.b1[h] -= lr * grad.b1[h];
                head.w2[h] -= lr * grad.w2[h];
            }
            head.b2 -= lr * grad.b2;
            head.refresh();
        }
        st.epochs_run = epoch;
        if (!val.empty()) {
            const double v = detail::full_loss(head, val);
            if (v < best_val) {
                best_val = v;
                best = head;
                st.best_epoch = epoch;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                break;
            }
        }
    }
    if (!val.empty()) {
        head = std::move(best);
        st.best_validation_loss = best_val;
    } else {
        st.best_epoch = st.epochs_run;
    }
    st.final_train_loss = detail::full_loss(head, train);
    if (stats) *stats = st;
}

/// Trains one head: normalisation from every candidate of the pair problems,
/// seeded initialisation, then fit_head.
inline EnergyHead train_member(std::span<const ContrastivePair> pairs, const FeatureTable& table,
                               const FeaturizerConfig& fcfg, const MemberConfig& cfg, TrainStats* stats = nullptr) {
    if (pairs.empty()) throw DegenerateData("no contrastive pairs");
    EnergyHead head = init_head(cfg, fcfg.dim);
    std::vector<const SparseVec*> sample;
    std::unordered_set<std::string> seen;
    for (const auto& p : pairs) {
        if (!seen.insert(p.problem_id).second) continue;
        for (const auto& v : table.pool_features(p.problem_id)) sample.push_back(&v);
    }
    fit_normalization(head, sample);
    fit_head(head, pairs, table, cfg, stats);
    return head;
}

// ---------------------------------------------------------------------------
// Ensemble

struct Member {
    MemberConfig config;
    EnergyHead head;
};

struct EnsembleScorer {
    FeaturizerConfig featurizer;
    std::vector<Member> members;
    std::string config_hash;

    std::size_t K() const { return members.size(); }
};

struct EnsembleScore {
    std::vector<double> energies;
    double mu = 0.0;
    double sigma = 0.0;
    bool sigma_defined = false;
};

/// Mean and population standard deviation of member energies.
inline EnsembleScore summarize(std::vector<double> energies) {
    EnsembleScore s;
    const double k = static_cast<double>(energies.size());
    double sum = 0.0;
    for (double e : energies) sum += e;
    s.mu = energies.empty() ? 0.0 : sum / k;
    s.sigma = std::sqrt(population_variance(energies));
    s.sigma_defined = energies.size() >= 2;
    s.energies = std::move(energies);
    return s;
}

inline EnsembleScore ensemble_score(const EnsembleScorer& scorer, const SparseVec& x) {
    std::vector<double> e;
    e.reserve(scorer.members.size());
    for (const auto& m : scorer.members) e.push_back(head_energy(m.head, x));
    return summarize(std::move(e));
}

inline EnsembleScore ensemble_score(const EnsembleScorer& scorer, std::string_view x, std::string_view y) {
    return ensemble_score(scorer, featurize_sparse(x, y, scorer.featurizer));
}

inline double score_member(const EnergyHead& head, const FeaturizerConfig& fcfg, std::string_view x,
                           std::string_view y) {
    return head_energy(head, featurize_sparse(x, y, fcfg));
}

/// Problem ids of pools that yield at least one contrastive pair.
inline std::vector<std::string> usable_problems(std::span<const CandidatePool> pools, int cap) {
    std::vector<std::string> out;
    for (const auto& p : pools) {
        if (!sample_pairs(p, cap, 0).empty()) out.push_back(p.problem.id);
    }
    return out;
}

/// Bagged pair set of one member.
inline std::vector<ContrastivePair> member_pairs(std::span<const CandidatePool> pools, const MemberConfig& cfg,
                                                 double bag_fraction, int cap) {
    std::unordered_map<std::string, const CandidatePool*> by_id;
    for (const auto& p : pools) by_id.emplace(p.problem.id, &p);
    const auto usable = usable_problems(pools, cap);
    std::vector<ContrastivePair> pairs;
    for (const auto& id : bag_problems(usable, bag_fraction, cfg.bag_seed)) {
        auto ps = sample_pairs(*by_id.at(id), cap, derive_seed(cfg.bag_seed, "pairs"));
        pairs.insert(pairs.end(), ps.begin(), ps.end());
    }
    return pairs;
}

/// Trains every member on its own bag. Members share nothing mutable, so the
/// result does not depend on the worker count.
inline EnsembleScorer train_ensemble(std::span<const CandidatePool> pools, const FeaturizerConfig& fcfg,
                                     const std::vector<MemberConfig>& configs, const RunConfig& rc,
                                     std::vector<TrainStats>* stats = nullptr, const FeatureTable* features = nullptr) {
    if (configs.empty()) throw InvalidConfig("ensemble needs at least one member");
    if (usable_problems(pools, rc.max_pairs_per_problem).empty()) {
        throw DegenerateData("no contrastive pairs: no problem has both positive and negative candidates");
    }
    std::optional<FeatureTable> own;
    if (!features) {
        own.emplace(pools, fcfg, rc.workers);
        features = &*own;
    }
    EnsembleScorer scorer;
    scorer.featurizer = fcfg;
    scorer.config_hash = config_hash(rc);
    scorer.members.resize(configs.size());
    std::vector<TrainStats> st(configs.size());
    parallel_for(configs.size(), rc.workers, [&](std::size_t k) {
        const auto pairs = member_pairs(pools, configs[k], rc.bag_fraction, rc.max_pairs_per_problem);
        scorer.members[k].config = configs[k];
        scorer.members[k].head = train_member(pairs, *features, fcfg, configs[k], &st[k]);
    });
    if (stats) *stats = std::move(st);
    return scorer;
}

/// Fraction of pairs the head orders correctly (strictly lower positive energy).
inline double pair_accuracy(const EnergyHead& head, std::span<const ContrastivePair> pairs, const FeatureTable& table) {
    if (pairs.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::size_t ok = 0;
    for (const auto& p : pairs) {
        ok += head_energy(head, table.get(p.problem_id, p.positive_id)) <
              head_energy(head, table.get(p.problem_id, p.negative_id));
    }
    return static_cast<double>(ok) / static_cast<double>(pairs.size());
}

inline double mean_pair_loss(const EnergyHead& head, std::span<const ContrastivePair> pairs, const FeatureTable& table) {
    std::vector<const ContrastivePair*> ptrs;
    for (const auto& p : pairs) ptrs.push_back(&p);
    const auto ex = detail::weighted_examples(ptrs, table);
    return detail::full_loss(head, ex);
}

// ---------------------------------------------------------------------------
// Checkpoint: 8-byte magic, u32 format version, u64 metadata length, JSON
// metadata, then per member the little-endian doubles shift, scale, w1, b1,
// w2, b2.

inline constexpr char kCheckpointMagic[8] = {'E', 'B', 'R', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointFormat = 1;

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::string& s) : s_(s) {}

    template <class T>
    T get() {
        need(sizeof(T));
        unsigned char b[sizeof(T)];
        std::memcpy(b, s_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
        pos_ += sizeof(T);
        T v;
        std::memcpy(&v, b, sizeof(T));
        return v;
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string out = s_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    void doubles(std::vector<double>& v, std::size_t n) {
        v.resize(n);
        for (auto& x : v) x = get<double>();
    }

    bool done() const { return pos_ == s_.size(); }

private:
    void need(std::size_t n) const {
        if (s_.size() - pos_ < n) throw IOFailure("truncated checkpoint");
    }
    const std::string& s_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline std::string serialize_scorer(const EnsembleScorer& s) {
    Json meta;
    meta["artifact_version"] = kArtifactVersion;
    meta["config_hash"] = s.config_hash;
    meta["featurizer"] = to_json(s.featurizer);
    Json members = Json::array();
    for (const auto& m : s.members) {
        members.push_back({{"config", to_json(m.config)}, {"columns", m.head.columns()}});
    }
    meta["members"] = std::move(members);
    const std::string m = meta.dump();

    std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
    detail::put_le(out, kCheckpointFormat);
    detail::put_le(out, static_cast<std::uint64_t>(m.size()));
    out += m;
    for (const auto& mem : s.members) {
        const auto& h = mem.head;
        for (const auto* arr : {&h.shift, &h.scale, &h.w1, &h.b1, &h.w2}) {
            for (double x : *arr) detail::put_le(out, x);
        }
        detail::put_le(out, h.b2);
    }
    return out;
}

inline EnsembleScorer deserialize_scorer(const std::string& bytes) {
    detail::Reader r(bytes);
    if (r.bytes(sizeof kCheckpointMagic) != std::string(kCheckpointMagic, sizeof kCheckpointMagic)) {
        throw IOFailure("not a scorer checkpoint");
    }
    if (r.get<std::uint32_t>() != kCheckpointFormat) throw IOFailure("unsupported checkpoint format");
    const auto len = r.get<std::uint64_t>();
    Json meta;
    try {
        meta = Json::parse(r.bytes(static_cast<std::size_t>(len)));
    } catch (const Json::parse_error& e) {
        throw IOFailure(std::string("corrupt checkpoint metadata: ") + e.what());
    }
    EnsembleScorer s;
    s.featurizer = featurizer_config_from_json(meta.at("featurizer"));
    s.config_hash = meta.value("config_hash", "");
    for (const auto& mj : meta.at("members")) {
        Member m;
        m.config = member_config_from_json(mj.at("config"));
        auto& h = m.head;
        h.hidden = m.config.hidden_dim;
        bind_mask(h, m.config.mask, s.featurizer.dim);
        if (h.columns() != mj.at("columns").get<std::size_t>()) throw IOFailure("checkpoint mask mismatch");
        s.members.push_back(std::move(m));
    }
    for (auto& m : s.members) {
        auto& h = m.head;
        const std::size_t cols = h.columns();
        const auto H = static_cast<std::size_t>(h.hidden);
        r.doubles(h.shift, cols);
        r.doubles(h.scale, cols);
        r.doubles(h.w1, cols * H);
        r.doubles(h.b1, H);
        r.doubles(h.w2, H);
        h.b2 = r.get<double>();
        h.refresh();
    }
    if (!r.done()) throw IOFailure("trailing bytes in checkpoint");
    return s;
}

inline void save_scorer(const std::filesystem::path& path, const EnsembleScorer& s) {
    write_file(path, serialize_scorer(s));
}

inline EnsembleScorer load_scorer(const std::filesystem::path& path) { return deserialize_scorer(read_file(path)); }

} // namespace ebr
