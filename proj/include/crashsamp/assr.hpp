#pragma once

// Adaptive sample space reduction: per-event deductions over the monotone
// (OEOFF, deceleration) lattice.
//
//   rule i   baseline no-crash at (o, d)  => no-crash for o' <= o, d' >= d
//   rule ii  baseline no-crash            => countermeasure no-crash
//   rule iii countermeasure avoided       => avoided for o' <= o, d' >= d
//   rule iv  baseline crash at speed m_k  => speed m_k for o' >= o, d' <= d
//
// Deduced regions are stored both as a dense per-cell state and as minimal
// antichains of generating points.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "crashsamp/crash_sim.hpp"
#include "crashsamp/scenario_model.hpp"

namespace crashsamp {

enum class BaseState : std::uint8_t { unknown, noncrash, crash };
enum class CmState : std::uint8_t { unknown, avoided, crash };
enum class Source : std::uint8_t { none, simulated, inferred };

struct CellKnowledge {
    BaseState base = BaseState::unknown;
    Source base_src = Source::none;
    CmState cm = CmState::unknown;
    Source cm_src = Source::none;
    double base_speed = 0.0;
    double cm_speed = 0.0;

    bool fully_known() const { return base != BaseState::unknown && cm != CmState::unknown; }
};

/// Set of lattice points generating a monotone region, kept as a minimal
/// antichain sorted by OEOFF index.
class Antichain {
public:
    enum class Orientation {
        down_left,  // (o, d) covers o' <= o, d' >= d
        up_right,   // (o, d) covers o' >= o, d' <= d
    };
    struct Point {
        std::size_t o;
        std::size_t d;
        bool operator==(const Point&) const = default;
    };

    explicit Antichain(Orientation orientation = Orientation::down_left) : orientation_(orientation) {}

    bool covers(std::size_t o, std::size_t d) const;
    /// Adds a generator; returns false if it was already covered.
    bool insert(std::size_t o, std::size_t d);
    const std::vector<Point>& points() const { return points_; }

private:
    Orientation orientation_;
    std::vector<Point> points_;  // o strictly increasing, d strictly increasing
};

struct CmDecision {
    bool run = true;
    std::optional<SimOutcome> known;  // set when run == false
};

struct SimulationCost {
    bool run_baseline = false;
    bool run_cm = false;
};

class KnowledgeMap {
public:
    /// With `inference == false` only simulated outcomes are recorded and
    /// the samplable set never shrinks (ASSR off).
    KnowledgeMap(const ScenarioGrid& grid, bool inference);

    bool inference() const { return inference_; }
    const CellKnowledge& at(std::size_t flat) const { return cells_[flat]; }

    std::optional<double> max_speed(std::size_t event) const;

    /// Records a simulated baseline outcome and returns newly deduced cells.
    /// Throws MonotonicityViolation on contradiction.
    std::vector<std::size_t> record_baseline(std::size_t flat, const SimOutcome& outcome);
    std::vector<std::size_t> record_countermeasure(std::size_t flat, const SimOutcome& outcome);

    /// Requires a known baseline outcome.
    CmDecision needs_countermeasure(std::size_t flat) const;
    SimulationCost simulation_cost(std::size_t flat) const;

    bool samplable(std::size_t flat) const { return samplable_[flat] != 0; }
    std::size_t samplable_count() const { return n_samplable_; }
    std::size_t samplable_count(std::size_t event) const { return samplable_per_event_[event]; }
    /// Bumped whenever the samplable set changes.
    std::uint64_t version() const { return version_; }

    /// Removes a cell from the samplable set (certainty stratum).
    void make_certain(std::size_t flat);

    const Antichain& noncrash_frontier(std::size_t event) const { return noncrash_[event]; }
    const Antichain& max_speed_frontier(std::size_t event) const { return max_speed_[event]; }
    const Antichain& avoided_frontier(std::size_t event) const { return avoided_[event]; }

    /// Header: event_id,oeoff_idx,decel_idx,base_state,base_source,cm_state,cm_source,samplable
    void write_csv(std::ostream& out) const;

private:
    void remove_samplable(std::size_t flat);

    const ScenarioGrid* grid_;
    bool inference_;
    std::vector<CellKnowledge> cells_;
    std::vector<char> samplable_;
    std::vector<std::size_t> samplable_per_event_;
    std::size_t n_samplable_ = 0;
    std::uint64_t version_ = 0;
    std::vector<std::optional<double>> max_speed_known_;
    std::vector<Antichain> noncrash_;
    std::vector<Antichain> max_speed_;
    std::vector<Antichain> avoided_;
};

}  // namespace crashsamp
