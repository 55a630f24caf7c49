#include "crashsamp/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "crashsamp/rng.hpp"
#include "crashsamp/types.hpp"

namespace crashsamp {

void ForestParams::validate() const {
    if (n_trees == 0) throw ConfigError("n_trees must be at least 1");
    if (max_depth == 0 || max_depth > 30) throw ConfigError("max_depth must be in [1, 30]");
    if (mtry == 0 || mtry > kNumFeatures) throw ConfigError("mtry must be in [1, 3]");
    if (min_node_size == 0) throw ConfigError("min_node_size must be at least 1");
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw ConfigError("holdout_fraction must be in (0, 1)");
}

double RegressionTree::predict(const FeatureRow& x) const {
    std::size_t i = 0;
    while (nodes_[i].feature >= 0) {
        const Node& n = nodes_[i];
        i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes_[i].value;
}

double Forest::predict(const FeatureRow& x) const {
    double s = 0.0;
    for (const RegressionTree& t : trees_) s += t.predict(x);
    return trees_.empty() ? 0.0 : s / static_cast<double>(trees_.size());
}

namespace {

// Adds each leaf rectangle to a (n_oeoff + 1) x (n_decel + 1) difference array.
void mark_rect(const RegressionTree& tree, std::size_t node, std::uint16_t m_rank, std::uint16_t o_lo, std::uint16_t o_hi,
               std::uint16_t d_lo, std::uint16_t d_hi, std::size_t stride, std::vector<double>& diff) {
    if (o_lo > o_hi || d_lo > d_hi) return;
    const RegressionTree::Node& n = tree.nodes()[node];
    if (n.feature < 0) {
        diff[o_lo * stride + d_lo] += n.value;
        diff[o_lo * stride + d_hi + 1] -= n.value;
        diff[(o_hi + 1) * stride + d_lo] -= n.value;
        diff[(o_hi + 1) * stride + d_hi + 1] += n.value;
        return;
    }
    const std::uint16_t t = n.threshold;
    switch (n.feature) {
        case 0:
            mark_rect(tree, n.left, m_rank, o_lo, std::min(o_hi, t), d_lo, d_hi, stride, diff);
            if (t < o_hi) mark_rect(tree, n.right, m_rank, std::max<std::uint16_t>(o_lo, t + 1), o_hi, d_lo, d_hi, stride, diff);
            break;
        case 1:
            mark_rect(tree, n.left, m_rank, o_lo, o_hi, d_lo, std::min(d_hi, t), stride, diff);
            if (t < d_hi) mark_rect(tree, n.right, m_rank, o_lo, o_hi, std::max<std::uint16_t>(d_lo, t + 1), d_hi, stride, diff);
            break;
        default:
            mark_rect(tree, m_rank <= t ? n.left : n.right, m_rank, o_lo, o_hi, d_lo, d_hi, stride, diff);
    }
}

}  // namespace

void Forest::predict_block(std::uint16_t n_oeoff, std::uint16_t n_decel, std::uint16_t m_rank, std::span<double> out) const {
    const std::size_t n = static_cast<std::size_t>(n_oeoff) * n_decel;
    if (out.size() != n) throw std::invalid_argument("predict_block: output size mismatch");
    std::fill(out.begin(), out.end(), 0.0);
    if (trees_.empty() || n == 0) return;
    const std::size_t stride = static_cast<std::size_t>(n_decel) + 1;
    std::vector<double> diff((static_cast<std::size_t>(n_oeoff) + 1) * stride, 0.0);
    for (const RegressionTree& t : trees_) {
        mark_rect(t, 0, m_rank, 0, static_cast<std::uint16_t>(n_oeoff - 1), 0, static_cast<std::uint16_t>(n_decel - 1), stride,
                  diff);
    }
    // 2-D prefix sums recover the per-cell totals.
    for (std::size_t o = 0; o < n_oeoff; ++o) {
        double run = 0.0;
        for (std::size_t d = 0; d < n_decel; ++d) {
            run += diff[o * stride + d];
            out[o * n_decel + d] = run + (o > 0 ? out[(o - 1) * n_decel + d] : 0.0);
        }
    }
    const double inv = static_cast<double>(trees_.size());
    for (double& v : out) v /= inv;
}

namespace {

struct Grower {
    std::span<const FeatureRow> x;
    std::span<const double> y;
    const ForestParams& params;
    Rng& rng;
    std::vector<RegressionTree::Node>& nodes;

    double mean(std::span<const std::size_t> idx) const {
        double s = 0.0;
        for (std::size_t i : idx) s += y[i];
        return s / static_cast<double>(idx.size());
    }

    std::uint32_t grow(std::vector<std::size_t>& idx, std::size_t depth) {
        const std::uint32_t id = static_cast<std::uint32_t>(nodes.size());
        nodes.push_back({});
        nodes[id].value = mean(idx);

        if (depth >= params.max_depth || idx.size() < params.min_node_size) return id;
        bool constant = true;
        for (std::size_t i : idx) {
            if (y[i] != y[idx[0]]) {
                constant = false;
                break;
            }
        }
        if (constant) return id;

        std::array<std::size_t, kNumFeatures> feats{0, 1, 2};
        const std::size_t mtry = std::clamp<std::size_t>(params.mtry, 1, kNumFeatures);
        for (std::size_t j = 0; j < mtry; ++j) {
            const std::size_t r = j + static_cast<std::size_t>(rng.below(kNumFeatures - j));
            std::swap(feats[j], feats[r]);
        }

        double total = 0.0;
        for (std::size_t i : idx) total += y[i];
        const double n = static_cast<double>(idx.size());
        const double base = total * total / n;

        double best_gain = 0.0;
        int best_feat = -1;
        std::uint16_t best_thr = 0;
        std::vector<double> sum;
        std::vector<std::size_t> cnt;
        for (std::size_t j = 0; j < mtry; ++j) {
            const std::size_t f = feats[j];
            std::uint16_t lo = std::numeric_limits<std::uint16_t>::max(), hi = 0;
            for (std::size_t i : idx) {
                lo = std::min(lo, x[i][f]);
                hi = std::max(hi, x[i][f]);
            }
            if (lo == hi) continue;
            sum.assign(static_cast<std::size_t>(hi - lo) + 1, 0.0);
            cnt.assign(sum.size(), 0);
            for (std::size_t i : idx) {
                sum[x[i][f] - lo] += y[i];
                ++cnt[x[i][f] - lo];
            }
            double sl = 0.0;
            std::size_t nl = 0;
            for (std::size_t b = 0; b + 1 < sum.size(); ++b) {
                sl += sum[b];
                nl += cnt[b];
                if (cnt[b] == 0 || nl == 0 || nl == idx.size()) continue;
                const double nr = n - static_cast<double>(nl);
                const double sr = total - sl;
                const double gain = sl * sl / static_cast<double>(nl) + sr * sr / nr - base;
                if (gain > best_gain * (1.0 + 1e-12) + 1e-12) {
                    best_gain = gain;
                    best_feat = static_cast<int>(f);
                    best_thr = static_cast<std::uint16_t>(lo + b);
                }
            }
        }
        if (best_feat < 0) return id;

        std::vector<std::size_t> left, right;
        left.reserve(idx.size());
        right.reserve(idx.size());
        for (std::size_t i : idx) (x[i][static_cast<std::size_t>(best_feat)] <= best_thr ? left : right).push_back(i);
        idx.clear();
        idx.shrink_to_fit();

        nodes[id].feature = static_cast<std::int16_t>(best_feat);
        nodes[id].threshold = best_thr;
        const std::uint32_t l = grow(left, depth + 1);
        const std::uint32_t r = grow(right, depth + 1);
        nodes[id].left = l;
        nodes[id].right = r;
        return id;
    }
};

}  // namespace

RegressionTree grow_tree(std::span<const FeatureRow> x, std::span<const double> y, std::span<const std::size_t> rows,
                         const ForestParams& params, std::uint64_t seed) {
    if (rows.empty()) throw std::invalid_argument("grow_tree: no rows");
    Rng rng(seed);
    std::vector<std::size_t> idx(rows.size());
    for (std::size_t& i : idx) i = rows[static_cast<std::size_t>(rng.below(rows.size()))];
    RegressionTree tree;
    Grower g{x, y, params, rng, tree.nodes()};
    g.grow(idx, 0);
    return tree;
}

Forest fit_forest_serial(std::span<const FeatureRow> x, std::span<const double> y, std::span<const std::size_t> rows,
                         const ForestParams& params, std::uint64_t seed) {
    Forest f;
    f.trees().resize(params.n_trees);
    for (std::size_t t = 0; t < params.n_trees; ++t) f.trees()[t] = grow_tree(x, y, rows, params, stream_seed(seed, t + 1));
    return f;
}

Forest fit_forest(std::span<const FeatureRow> x, std::span<const double> y, std::span<const std::size_t> rows,
                  const ForestParams& params, std::uint64_t seed) {
    Forest f;
    f.trees().resize(params.n_trees);
    const long n = static_cast<long>(params.n_trees);
#pragma omp parallel for schedule(dynamic, 1)
    for (long t = 0; t < n; ++t) {
        f.trees()[static_cast<std::size_t>(t)] =
            grow_tree(x, y, rows, params, stream_seed(seed, static_cast<std::uint64_t>(t) + 1));
    }
    return f;
}

double PredictorModel::predict(const FeatureRow& x) const {
    const double v = forest.predict(x);
    return kind == TaskKind::classification ? std::clamp(v, 0.0, 1.0) : v;
}

namespace {

template <class FitForest>
std::optional<PredictorModel> fit_impl(std::span<const FeatureRow> x, std::span<const double> y, TaskKind kind,
                                       const ForestParams& params, std::uint64_t seed, FitForest fit_forest_fn) {
    params.validate();
    if (x.size() != y.size()) throw std::invalid_argument("fit: feature and label counts differ");
    const std::size_t n = x.size();
    if (n < std::max<std::size_t>(params.min_records, 2)) return std::nullopt;
    if (kind == TaskKind::classification) {
        bool has0 = false, has1 = false;
        for (double v : y) (v >= 0.5 ? has1 : has0) = true;
        if (!(has0 && has1)) return std::nullopt;
    }

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(stream_seed(seed, 0));
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[static_cast<std::size_t>(rng.below(i + 1))]);
    std::size_t n_hold = static_cast<std::size_t>(std::llround(params.holdout_fraction * static_cast<double>(n)));
    n_hold = std::clamp<std::size_t>(n_hold, 1, n - 1);
    std::span<const std::size_t> hold(perm.data(), n_hold);
    std::span<const std::size_t> train(perm.data() + n_hold, n - n_hold);

    PredictorModel m;
    m.kind = kind;
    m.n_train = train.size();
    m.n_holdout = hold.size();
    m.forest = fit_forest_fn(x, y, train, params, seed);

    double sse = 0.0;
    for (std::size_t i : hold) {
        const double e = m.predict(x[i]) - y[i];
        sse += e * e;
    }
    m.sigma = std::sqrt(sse / static_cast<double>(hold.size()));

    if (kind == TaskKind::regression) {
        double mean = 0.0;
        for (std::size_t i : hold) mean += y[i];
        mean /= static_cast<double>(hold.size());
        double sst = 0.0;
        for (std::size_t i : hold) sst += (y[i] - mean) * (y[i] - mean);
        if (sst > 0.0) {
            m.holdout_metric = 1.0 - sse / sst;
        } else {
            m.holdout_metric = sse == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
        }
    } else {
        std::size_t ones_train = 0;
        for (std::size_t i : train) ones_train += y[i] >= 0.5 ? 1 : 0;
        const bool majority = 2 * ones_train >= train.size();
        std::size_t correct = 0, majority_hits = 0;
        for (std::size_t i : hold) {
            const bool label = y[i] >= 0.5;
            correct += (m.predict(x[i]) >= 0.5) == label ? 1 : 0;
            majority_hits += label == majority ? 1 : 0;
        }
        m.holdout_metric = (static_cast<double>(correct) - static_cast<double>(majority_hits)) /
                           static_cast<double>(hold.size());
    }
    return m;
}

}  // namespace

std::optional<PredictorModel> fit(std::span<const FeatureRow> x, std::span<const double> y, TaskKind kind,
                                  const ForestParams& params, std::uint64_t seed) {
    return fit_impl(x, y, kind, params, seed, fit_forest);
}

std::optional<PredictorModel> fit_serial(std::span<const FeatureRow> x, std::span<const double> y, TaskKind kind,
                                         const ForestParams& params, std::uint64_t seed) {
    return fit_impl(x, y, kind, params, seed, fit_forest_serial);
}

GateDecision gate(const std::optional<PredictorModel>& model) {
    if (!model) return GateDecision::fallback;
    return model->holdout_metric < 0.0 ? GateDecision::fallback : GateDecision::use_model;
}

}  // namespace crashsamp
