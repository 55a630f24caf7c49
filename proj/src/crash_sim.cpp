#include "crashsamp/crash_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace crashsamp {

namespace {

constexpr double kMsToKmh = 3.6;

struct Body {
    double x = 0.0;
    double v = 0.0;
};

// Closed-form state after `tau` seconds at constant deceleration `decel`,
// holding at rest once stopped.
Body advance(const Body& b, double decel, double tau) {
    if (b.v <= 0.0) return {b.x, 0.0};
    if (decel <= 0.0) return {b.x + b.v * tau, b.v};
    const double t_stop = b.v / decel;
    if (t_stop <= tau) return {b.x + b.v * b.v / (2.0 * decel), 0.0};
    return {b.x + b.v * tau - 0.5 * decel * tau * tau, b.v - decel * tau};
}

// Deceleration of a jerk-limited ramp that starts at `start_step`,
// evaluated at the midpoint of step `step`.
double ramp(long step, long start_step, double jerk, double dt, double cap) {
    if (start_step < 0 || step < start_step) return 0.0;
    return std::min(cap, jerk * dt * (static_cast<double>(step - start_step) + 0.5));
}

SimOutcome run(const PrototypeEvent& ev, double oeoff, double decel, const SimParams& p, bool with_aeb) {
    if (!(ev.fv_speed0 > 0.0) || !(ev.lv_speed0 >= 0.0) || !(ev.gap0 > 0.0) || !(ev.lv_decel > 0.0))
        throw ConfigError("prototype event " + std::to_string(ev.id) + ": invalid kinematics");
    if (!(oeoff >= 0.0) || !(decel > 0.0)) throw ConfigError("invalid oeoff or deceleration");
    if (!(p.dt > 0.0)) throw ConfigError("sim dt must be positive");
    Body lv{ev.gap0, ev.lv_speed0};
    Body fv{0.0, ev.fv_speed0};
    const long oeoff_steps = std::lround(oeoff / p.dt);
    const long max_steps = static_cast<long>(std::ceil(p.max_time / p.dt));

    long onset = -1;
    long aeb_start = -1;
    for (long k = 0; k < max_steps; ++k) {
        const double gap = lv.x - fv.x;
        const double closing = fv.v - lv.v;
        if (!std::isfinite(gap) || !std::isfinite(closing)) throw SimulationFault("non-finite kinematics");

        if (onset < 0 && closing > 0.0 && closing >= p.anchor_inv_ttc * gap) onset = k + oeoff_steps;
        if (with_aeb && aeb_start < 0 && closing > 0.0 && gap <= p.aeb_ttc * closing) aeb_start = k;

        double a_f = ramp(k, onset, p.driver_jerk, p.dt, decel);
        if (with_aeb) a_f = std::max(a_f, ramp(k, aeb_start, p.aeb_jerk, p.dt, p.aeb_decel));
        const double a_l = lv.v > 0.0 ? ev.lv_decel : 0.0;

        if (fv.v <= 0.0) return {false, 0.0, 1};
        // FV deceleration never decreases, so once it matches the LV's and
        // the gap is opening, contact is impossible.
        if (closing <= 0.0 && a_f >= a_l) return {false, 0.0, 1};

        const Body lv1 = advance(lv, a_l, p.dt);
        const Body fv1 = advance(fv, a_f, p.dt);
        if (lv1.x - fv1.x <= 0.0) {
            double lo = 0.0;
            double hi = p.dt;
            for (int it = 0; it < 80; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (advance(lv, a_l, mid).x - advance(fv, a_f, mid).x > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            const double rel = advance(fv, a_f, hi).v - advance(lv, a_l, hi).v;
            if (!std::isfinite(rel)) throw SimulationFault("non-finite impact speed");
            const double speed = std::max(rel, 0.0) * kMsToKmh;
            // A touch at zero relative speed is not a collision.
            if (speed <= 0.0) return {false, 0.0, 1};
            return {true, speed, 1};
        }
        lv = lv1;
        fv = fv1;
    }
    throw SimulationFault("simulation exceeded max_time without resolution");
}

}  // namespace

SimOutcome simulate_baseline(const PrototypeEvent& event, double oeoff, double decel, const SimParams& params) {
    return run(event, oeoff, decel, params, false);
}

SimOutcome simulate_countermeasure(const PrototypeEvent& event, double oeoff, double decel,
                                   const SimParams& params) {
    return run(event, oeoff, decel, params, params.aeb_enabled);
}

double injury_risk(double impact_speed, const InjuryRiskParams& params) {
    if (impact_speed <= 0.0) return 0.0;
    const double delta_v = impact_speed / 2.0;
    return 1.0 / (1.0 + std::exp(-(params.beta0 + params.beta1 * delta_v)));
}

OutcomeTriple make_outcome_triple(const SimOutcome& baseline, const SimOutcome& countermeasure,
                                  const InjuryRiskParams& params) {
    OutcomeTriple t;
    t.impact_speed_reduction = baseline.impact_speed - countermeasure.impact_speed;
    t.injury_risk_reduction = injury_risk(baseline.impact_speed, params) - injury_risk(countermeasure.impact_speed, params);
    t.crash_avoided = (baseline.crashed && !countermeasure.crashed) ? 1.0 : 0.0;
    return t;
}

}  // namespace crashsamp
