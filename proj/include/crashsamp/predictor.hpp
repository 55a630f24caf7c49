#pragma once

// Bagged regression trees over three binned features (OEOFF level index,
// deceleration level index, rank of the event's maximum impact speed).
// Classification uses the same squared-error trees on 0/1 labels, so leaf
// values are class proportions.
//
// fit() trains trees in parallel (one RNG stream per tree); fit_serial() is
// the reference. Both produce identical forests.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace crashsamp {

inline constexpr std::size_t kNumFeatures = 3;

using FeatureRow = std::array<std::uint16_t, kNumFeatures>;

enum class TaskKind { classification, regression };

struct ForestParams {
    std::size_t n_trees = 50;
    std::size_t max_depth = 6;
    std::size_t mtry = 2;
    std::size_t min_node_size = 5;
    double holdout_fraction = 0.2;
    std::size_t min_records = 20;

    /// Throws ConfigError.
    void validate() const;
};

class RegressionTree {
public:
    struct Node {
        std::int16_t feature = -1;     // -1 for a leaf
        std::uint16_t threshold = 0;   // go left iff x[feature] <= threshold
        std::uint32_t left = 0;
        std::uint32_t right = 0;
        double value = 0.0;
    };

    double predict(const FeatureRow& x) const;
    const std::vector<Node>& nodes() const { return nodes_; }
    std::vector<Node>& nodes() { return nodes_; }

private:
    std::vector<Node> nodes_;
};

class Forest {
public:
    double predict(const FeatureRow& x) const;
    /// Averages tree predictions over a dense (oeoff, decel) block for one
    /// value of the third feature; out has n_oeoff * n_decel entries.
    void predict_block(std::uint16_t n_oeoff, std::uint16_t n_decel, std::uint16_t m_rank, std::span<double> out) const;
    std::size_t size() const { return trees_.size(); }
    std::vector<RegressionTree>& trees() { return trees_; }
    const std::vector<RegressionTree>& trees() const { return trees_; }

private:
    std::vector<RegressionTree> trees_;
};

/// Grows one tree on a bootstrap resample drawn from `rows` using `seed`.
RegressionTree grow_tree(std::span<const FeatureRow> x, std::span<const double> y, std::span<const std::size_t> rows,
                         const ForestParams& params, std::uint64_t seed);

Forest fit_forest(std::span<const FeatureRow> x, std::span<const double> y, std::span<const std::size_t> rows,
                  const ForestParams& params, std::uint64_t seed);
Forest fit_forest_serial(std::span<const FeatureRow> x, std::span<const double> y, std::span<const std::size_t> rows,
                         const ForestParams& params, std::uint64_t seed);

struct PredictorModel {
    TaskKind kind = TaskKind::regression;
    Forest forest;
    /// Regression: hold-out R^2. Classification: hold-out accuracy minus
    /// the majority-class rate.
    double holdout_metric = 0.0;
    /// Hold-out RMSE (regression).
    double sigma = 0.0;
    std::size_t n_train = 0;
    std::size_t n_holdout = 0;

    double predict(const FeatureRow& x) const;
};

/// nullopt means insufficient data: fewer than min_records rows, or a single
/// class for classification.
std::optional<PredictorModel> fit(std::span<const FeatureRow> x, std::span<const double> y, TaskKind kind,
                                  const ForestParams& params, std::uint64_t seed);
std::optional<PredictorModel> fit_serial(std::span<const FeatureRow> x, std::span<const double> y, TaskKind kind,
                                         const ForestParams& params, std::uint64_t seed);

enum class GateDecision { use_model, fallback };

/// Regression falls back iff R^2 < 0; classification iff accuracy minus
/// majority rate < 0; insufficient data always falls back.
GateDecision gate(const std::optional<PredictorModel>& model);

}  // namespace crashsamp
