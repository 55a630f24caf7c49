#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace crashsamp {

/// Invalid configuration (exit code 1 at the CLI).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Simulator produced non-finite kinematics or ran past its time cap.
struct SimulationFault : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An observed outcome contradicts an earlier monotonicity deduction.
struct MonotonicityViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One (prototype event, OEOFF level, deceleration level) triple.
struct ScenarioCell {
    std::size_t event_id = 0;
    std::size_t oeoff_idx = 0;
    std::size_t decel_idx = 0;

    auto operator<=>(const ScenarioCell&) const = default;
};

/// Pre-crash kinematics of a prototype rear-end event. The lead vehicle (LV)
/// brakes from t = 0; the following vehicle (FV) is the striking vehicle.
struct PrototypeEvent {
    std::size_t id = 0;
    double fv_speed0 = 0.0;  // m/s
    double lv_speed0 = 0.0;  // m/s
    double gap0 = 0.0;       // m
    double lv_decel = 0.0;   // m/s^2, magnitude
};

enum class Target { speed_reduction = 0, crash_avoidance = 1, injury_risk_reduction = 2 };

inline constexpr std::array<Target, 3> kAllTargets{
    Target::speed_reduction, Target::crash_avoidance, Target::injury_risk_reduction};

inline constexpr std::size_t target_index(Target t) { return static_cast<std::size_t>(t); }

inline constexpr bool is_binary(Target t) { return t == Target::crash_avoidance; }

inline std::string_view to_string(Target t) {
    switch (t) {
        case Target::speed_reduction: return "speed_reduction";
        case Target::crash_avoidance: return "crash_avoidance";
        case Target::injury_risk_reduction: return "injury_risk_reduction";
    }
    return "?";
}

inline Target parse_target(std::string_view s) {
    for (Target t : kAllTargets) {
        if (to_string(t) == s) return t;
    }
    throw ConfigError("unknown target '" + std::string(s) + "'");
}

}  // namespace crashsamp
