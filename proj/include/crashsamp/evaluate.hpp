#pragma once

// Repeated experiments scored against the full-grid ground truth.
//
// Each repetition's trace is read off a fixed checkpoint grid of simulation
// counts by carrying the last estimate forward. evaluate_rmse runs the
// repetitions under OpenMP; evaluate_rmse_serial is the reference. Results
// are reduced in repetition order, so both are bit-identical.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "crashsamp/experiment.hpp"

namespace crashsamp {

/// step, 2 step, ... up to max_sims, with max_sims appended if it is not a
/// multiple of step.
std::vector<std::size_t> checkpoint_grid(std::size_t step, std::size_t max_sims);

/// Estimate of the last row with sims_used <= sims; NaN before the first row.
double value_at(const EstimateTrace& trace, Target target, std::size_t sims);

struct RmseCurve {
    Target target = Target::speed_reduction;
    double truth = 0.0;
    std::vector<std::size_t> sims;
    std::vector<double> rmse;
    std::vector<double> mean;  // mean estimate over repetitions
    std::vector<double> sd;    // sample SD over repetitions
    std::vector<std::size_t> reps;  // repetitions with an estimate at this checkpoint
};

struct Evaluation {
    std::string label;
    ExperimentConfig config;
    std::array<RmseCurve, 3> curves;  // indexed by target_index
    double mean_sims_used = 0.0;
    std::size_t fallback_iterations = 0;

    const RmseCurve& curve(Target t) const { return curves[target_index(t)]; }
};

Evaluation evaluate_rmse(const ExperimentConfig& cfg, const ScenarioGrid& grid, const GroundTruth& gt,
                         std::span<const std::size_t> checkpoints);
Evaluation evaluate_rmse_serial(const ExperimentConfig& cfg, const ScenarioGrid& grid, const GroundTruth& gt,
                                std::span<const std::size_t> checkpoints);

/// Header: label,target,sims,rmse,mean,sd,reps,truth
void write_rmse_csv(std::ostream& out, std::span<const Evaluation> evals);

struct RmseRow {
    std::string label;
    Target target;
    std::size_t sims;
    double rmse;
    double mean;
    double sd;
    std::size_t reps;
    double truth;
};
std::vector<RmseRow> read_rmse_csv(std::istream& in);

/// Comparison suites: methods, assr, strat-noassr, strat-assr, batch-size.
const std::vector<std::string>& suite_names();
/// Configurations of a suite; seed, repetitions, stopping rules, floor,
/// shrinkage and model settings come from `base`. Post-stratified runs use
/// batches of 10, stratified runs batches of n_events (1x, 3x, 10x in the
/// batch-size suite).
std::vector<ExperimentConfig> suite_configs(const std::string& suite, const ExperimentConfig& base,
                                            std::size_t n_events);

}  // namespace crashsamp
