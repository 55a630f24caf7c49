#pragma once

// Synthetic counterfactual rear-end simulator.
//
// Kinematics are integrated on a fixed 5 ms grid with piecewise-constant
// accelerations; each step is advanced in closed form (including a vehicle
// coming to rest mid-step) and the contact instant is located inside the
// step. Driver braking starts `oeoff` seconds after the looming anchor
// (closing speed / gap >= 0.2 1/s) and ramps at a fixed jerk to the cell's
// maximum deceleration. FV deceleration is non-decreasing in time, which is
// what makes impact speed monotone in OEOFF and deceleration.

#include <cstddef>

#include "crashsamp/types.hpp"

namespace crashsamp {

struct InjuryRiskParams {
    double beta0 = -6.0;
    double beta1 = 0.1;  // per km/h of delta-v
};

struct SimParams {
    double dt = 0.005;              // s
    double anchor_inv_ttc = 0.2;    // 1/s, glance anchor on looming
    double driver_jerk = 20.0;      // m/s^3
    bool aeb_enabled = true;
    double aeb_ttc = 0.8;           // s, trigger threshold
    double aeb_decel = 10.0;        // m/s^2, authority
    double aeb_jerk = 20.0;         // m/s^3
    double max_time = 120.0;        // s, integration cap
    InjuryRiskParams injury;
};

struct SimOutcome {
    bool crashed = false;
    double impact_speed = 0.0;  // km/h, relative speed at contact; 0 if no crash
    unsigned sim_invocations = 0;
};

/// Outcomes compared between baseline and countermeasure for one cell.
struct OutcomeTriple {
    double impact_speed_reduction = 0.0;  // km/h
    double injury_risk_reduction = 0.0;
    double crash_avoided = 0.0;           // 1 iff baseline crash and countermeasure no-crash

    double get(Target t) const {
        switch (t) {
            case Target::speed_reduction: return impact_speed_reduction;
            case Target::crash_avoidance: return crash_avoided;
            case Target::injury_risk_reduction: return injury_risk_reduction;
        }
        return 0.0;
    }
};

SimOutcome simulate_baseline(const PrototypeEvent& event, double oeoff, double decel, const SimParams& params = {});

/// Baseline plus AEB. With `aeb_enabled == false` this equals the baseline.
SimOutcome simulate_countermeasure(const PrototypeEvent& event, double oeoff, double decel,
                                   const SimParams& params = {});

/// MAIS2+-style logistic risk on delta-v = impact_speed / 2. Exactly 0 for no crash.
double injury_risk(double impact_speed, const InjuryRiskParams& params = {});

OutcomeTriple make_outcome_triple(const SimOutcome& baseline, const SimOutcome& countermeasure,
                                  const InjuryRiskParams& params = {});

}  // namespace crashsamp
