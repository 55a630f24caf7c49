#pragma once

// Discrete scenario space: prototype events x OEOFF levels x deceleration
// levels, with scenario probabilities from independent glance and
// deceleration marginals (identical across events).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crashsamp/crash_sim.hpp"
#include "crashsamp/kv_file.hpp"
#include "crashsamp/types.hpp"

namespace crashsamp {

struct GridConfig {
    std::size_t n_events = 44;
    std::vector<double> oeoff_levels;  // s, strictly increasing, >= 0
    std::vector<double> decel_levels;  // m/s^2, strictly increasing, > 0
    std::vector<double> glance_pmf;    // one entry per OEOFF level
    std::vector<double> decel_pmf;     // one entry per deceleration level
    std::uint64_t rng_seed = 20240611;

    void validate() const;
};

/// 44 events, OEOFF 0.0..6.6 s step 0.1 (67 levels), deceleration
/// 3.75..10.75 m/s^2 step 0.5 (15 levels), synthetic marginals.
GridConfig default_grid_config();

/// `mass_at_zero` on the 0 s level; the rest spread over the remaining
/// levels proportional to exp(-oeoff / tail_scale).
std::vector<double> default_glance_pmf(std::span<const double> oeoff_levels, double mass_at_zero = 0.854,
                                       double tail_scale = 1.2);

/// Discretized symmetric triangle peaked at the middle level.
std::vector<double> default_decel_pmf(std::size_t n_levels);

/// Grid + simulator settings, i.e. everything a config file describes.
struct ScenarioConfig {
    GridConfig grid = default_grid_config();
    SimParams sim;
};

ScenarioConfig load_scenario_config(const KvFile& kv);
ScenarioConfig load_scenario_config(const std::string& path);
void store_scenario_config(const ScenarioConfig& cfg, KvFile& kv);
void save_scenario_config(const ScenarioConfig& cfg, const std::string& path);

class ScenarioGrid {
public:
    std::size_t n_events() const { return events_.size(); }
    std::size_t n_oeoff() const { return config_.oeoff_levels.size(); }
    std::size_t n_decel() const { return config_.decel_levels.size(); }
    std::size_t cells_per_event() const { return n_oeoff() * n_decel(); }
    std::size_t n_cells() const { return n_events() * cells_per_event(); }

    /// Flat index, event-major then OEOFF then deceleration (all ascending).
    std::size_t index(const ScenarioCell& c) const {
        return (c.event_id * n_oeoff() + c.oeoff_idx) * n_decel() + c.decel_idx;
    }
    std::size_t index(std::size_t event, std::size_t oeoff_idx, std::size_t decel_idx) const {
        return (event * n_oeoff() + oeoff_idx) * n_decel() + decel_idx;
    }
    ScenarioCell cell(std::size_t flat) const {
        const std::size_t d = flat % n_decel();
        const std::size_t rest = flat / n_decel();
        return {rest / n_oeoff(), rest % n_oeoff(), d};
    }
    std::size_t event_of(std::size_t flat) const { return flat / cells_per_event(); }
    std::size_t local_index(std::size_t flat) const { return flat % cells_per_event(); }

    bool contains(const ScenarioCell& c) const {
        return c.event_id < n_events() && c.oeoff_idx < n_oeoff() && c.decel_idx < n_decel();
    }

    /// w_i; throws std::out_of_range for a cell outside the grid.
    double joint_weight(const ScenarioCell& c) const;
    /// w for a local (oeoff, decel) pair; same for every event.
    double weight(std::size_t oeoff_idx, std::size_t decel_idx) const {
        return weights_[oeoff_idx * n_decel() + decel_idx];
    }
    double weight_at(std::size_t flat) const { return weights_[local_index(flat)]; }
    std::span<const double> local_weights() const { return weights_; }

    double oeoff(std::size_t idx) const { return config_.oeoff_levels[idx]; }
    double decel(std::size_t idx) const { return config_.decel_levels[idx]; }

    const PrototypeEvent& event(std::size_t k) const { return events_.at(k); }
    std::span<const PrototypeEvent> events() const { return events_; }
    const GridConfig& config() const { return config_; }
    const SimParams& sim() const { return sim_; }

    /// Cell with maximum OEOFF and minimum deceleration of event k.
    ScenarioCell extreme_cell(std::size_t k) const { return {k, n_oeoff() - 1, 0}; }

private:
    friend ScenarioGrid build_grid(const GridConfig&, const SimParams&);
    GridConfig config_;
    SimParams sim_;
    std::vector<PrototypeEvent> events_;
    std::vector<double> weights_;  // cells_per_event entries
};

/// Builds the grid; prototype events are drawn deterministically from
/// `rng_seed` and redrawn until they crash at the extreme cell.
/// Throws ConfigError if an event needs more than 1,000 redraws.
ScenarioGrid build_grid(const GridConfig& config, const SimParams& sim = {});
inline ScenarioGrid build_grid(const ScenarioConfig& cfg) { return build_grid(cfg.grid, cfg.sim); }

}  // namespace crashsamp
