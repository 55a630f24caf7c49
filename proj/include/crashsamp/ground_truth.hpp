#pragma once

// Full-grid enumeration of baseline and countermeasure outcomes.
//
// build_ground_truth is the OpenMP kernel; build_ground_truth_serial is the
// reference kept for tests and benchmarking. Both fill each cell
// independently and reduce per-event statistics in a fixed order, so their
// results are bit-identical.

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "crashsamp/crash_sim.hpp"
#include "crashsamp/scenario_model.hpp"

namespace crashsamp {

class GroundTruth {
public:
    std::size_t n_cells() const { return base_speed_.size(); }

    double base_speed(std::size_t flat) const { return base_speed_[flat]; }
    double cm_speed(std::size_t flat) const { return cm_speed_[flat]; }
    bool base_crash(std::size_t flat) const { return base_speed_[flat] > 0.0; }
    bool cm_crash(std::size_t flat) const { return cm_speed_[flat] > 0.0; }
    SimOutcome baseline(std::size_t flat) const { return {base_crash(flat), base_speed_[flat], 1}; }
    SimOutcome countermeasure(std::size_t flat) const { return {cm_crash(flat), cm_speed_[flat], 1}; }
    OutcomeTriple outcome(std::size_t flat) const { return make_outcome_triple(baseline(flat), countermeasure(flat), injury_); }
    double y(Target t, std::size_t flat) const { return outcome(flat).get(t); }

    /// mu_k: crash-conditional weighted mean of the target in event k
    /// (NaN for events without baseline crashes).
    double case_mean(Target t, std::size_t event) const { return case_mean_[target_index(t)][event]; }
    /// Same quantity computed with post-stratification weights; equals
    /// case_mean up to rounding.
    double post_stratified_case_mean(Target t, std::size_t event) const {
        return post_case_mean_[target_index(t)][event];
    }
    /// mu = average of mu_k over included events.
    double grand_mean(Target t) const { return grand_mean_[target_index(t)]; }
    double post_stratified_grand_mean(Target t) const { return post_grand_mean_[target_index(t)]; }

    bool included(std::size_t event) const { return included_[event] != 0; }
    std::size_t n_included() const;
    /// Baseline impact speed at the extreme cell of event k.
    double max_speed(std::size_t event) const { return max_speed_[event]; }
    const std::vector<double>& max_speeds() const { return max_speed_; }
    /// Crash-region probability sum_{i in k, base crash} w_i.
    double crash_mass(std::size_t event) const { return crash_mass_[event]; }
    double base_crash_fraction() const;
    const std::vector<std::string>& warnings() const { return warnings_; }

    std::size_t simulations() const { return 2 * n_cells(); }

private:
    friend GroundTruth finalize_ground_truth(const ScenarioGrid&, std::vector<double>, std::vector<double>);
    std::vector<double> base_speed_;
    std::vector<double> cm_speed_;
    InjuryRiskParams injury_;
    std::array<std::vector<double>, 3> case_mean_;
    std::array<std::vector<double>, 3> post_case_mean_;
    std::array<double, 3> grand_mean_{};
    std::array<double, 3> post_grand_mean_{};
    std::vector<char> included_;
    std::vector<double> max_speed_;
    std::vector<double> crash_mass_;
    std::vector<std::string> warnings_;
};

GroundTruth build_ground_truth(const ScenarioGrid& grid);
GroundTruth build_ground_truth_serial(const ScenarioGrid& grid);

/// Assembles statistics from already-enumerated per-cell speeds.
GroundTruth finalize_ground_truth(const ScenarioGrid& grid, std::vector<double> base_speed, std::vector<double> cm_speed);

/// Header:
/// event_id,oeoff,decel,w,base_speed,cm_speed,base_crash,cm_crash,speed_reduction,injury_risk_reduction,crash_avoided
/// Rows ordered by event, OEOFF, deceleration (ascending).
void write_ground_truth_csv(std::ostream& out, const ScenarioGrid& grid, const GroundTruth& gt);

}  // namespace crashsamp
