#pragma once

// One sampling experiment: deterministic initialization, then batches of
// multinomial draws until a stopping rule fires. Importance-sampling methods
// use a fixed priority vector; active sampling refits two forests (baseline
// crash probability and target outcome) as data accumulate and builds
// active-priority probabilities, falling back to density sampling when a model fails
// its hold-out gate.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "crashsamp/assr.hpp"
#include "crashsamp/estimators.hpp"
#include "crashsamp/ground_truth.hpp"
#include "crashsamp/kv_file.hpp"
#include "crashsamp/predictor.hpp"
#include "crashsamp/samplers.hpp"
#include "crashsamp/scenario_model.hpp"
#include "crashsamp/stopping.hpp"

namespace crashsamp {

enum class Method { density, severity, active };

const char* to_string(Method m);
Method parse_method(const std::string& s);

struct ExperimentConfig {
    Method method = Method::active;
    Target target = Target::speed_reduction;
    bool assr = true;
    bool stratified = false;
    std::size_t batch_size = 10;
    std::size_t repetitions = 200;
    std::vector<StoppingRule> stopping{{StopKind::budget, 6000.0}};
    std::uint64_t seed = 1;
    /// Unset: shrink case estimates for active sampling only.
    std::optional<bool> shrinkage;
    double floor = kDefaultFloor;
    /// Models are refit once the number of observed cells has grown by this
    /// fraction since the last fit.
    double refit_growth = 0.15;
    ForestParams forest;
    /// Spacing of the RMSE checkpoint grid (simulations).
    std::size_t checkpoint_step = 200;

    /// Throws ConfigError.
    void validate(const ScenarioGrid& grid) const;
    bool uses_shrinkage() const { return shrinkage.value_or(method == Method::active); }
    /// Largest budget among the stopping rules, if any.
    std::optional<std::size_t> budget() const;
    /// Compact label, e.g. "active:speed_reduction:assr:post:10".
    std::string label() const;
};

/// Reads the [experiment] section (missing keys keep their defaults).
ExperimentConfig load_experiment_config(const KvFile& kv);
void store_experiment_config(const ExperimentConfig& cfg, KvFile& kv);

/// Where experiment outcomes come from. Every call is one simulator
/// invocation for cost accounting.
class OutcomeSource {
public:
    virtual ~OutcomeSource() = default;
    virtual std::vector<SimOutcome> baseline(const std::vector<std::size_t>& cells) const = 0;
    virtual std::vector<SimOutcome> countermeasure(const std::vector<std::size_t>& cells) const = 0;
};

/// Looks outcomes up in a precomputed full-grid table.
class GroundTruthSource final : public OutcomeSource {
public:
    explicit GroundTruthSource(const GroundTruth& gt) : gt_(&gt) {}
    std::vector<SimOutcome> baseline(const std::vector<std::size_t>& cells) const override;
    std::vector<SimOutcome> countermeasure(const std::vector<std::size_t>& cells) const override;

private:
    const GroundTruth* gt_;
};

/// Runs the simulator; a batch fans out over OpenMP threads.
class SimulatorSource final : public OutcomeSource {
public:
    explicit SimulatorSource(const ScenarioGrid& grid) : grid_(&grid) {}
    std::vector<SimOutcome> baseline(const std::vector<std::size_t>& cells) const override;
    std::vector<SimOutcome> countermeasure(const std::vector<std::size_t>& cells) const override;

private:
    const ScenarioGrid* grid_;
};

struct TraceRow {
    std::size_t iteration = 0;
    std::size_t sims_used = 0;
    std::array<double, 3> value{};  // indexed by target_index
    std::array<double, 3> se{};
    SchemeKind scheme = SchemeKind::density;
    bool fallback = false;
};

struct EstimateTrace {
    std::vector<TraceRow> rows;  // sims_used strictly increasing
    std::string stop_reason;
};

/// Header: iteration,sims_used,speed_reduction,speed_reduction_se,crash_avoidance,crash_avoidance_se,
///         injury_risk_reduction,injury_risk_reduction_se,scheme,fallback
void write_trace_csv(std::ostream& out, const EstimateTrace& trace);

struct ExperimentResult {
    EstimateTrace trace;
    std::array<Estimate, 3> final_estimate;
    std::size_t sims_used = 0;
    std::size_t iterations = 0;
    std::size_t model_fits = 0;
    std::size_t fallback_iterations = 0;
    std::optional<KnowledgeMap> knowledge;       // kept when requested
    std::optional<SamplingScheme> last_scheme;   // kept when requested
};

/// Runs repetition `rep` (RNG stream derived from (seed, rep)).
ExperimentResult run_experiment(const ExperimentConfig& cfg, const ScenarioGrid& grid, const OutcomeSource& source,
                                std::size_t rep = 0, bool keep_artifacts = false);

}  // namespace crashsamp
