#pragma once

// Stopping rules, evaluated at iteration boundaries; the first rule that
// triggers wins.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace crashsamp {

enum class StopKind { absolute_se, rope, cv, budget, max_iterations };

std::string_view to_string(StopKind k);

struct StoppingRule {
    StopKind kind = StopKind::budget;
    /// SE threshold, ROPE half-width, CV percent, simulation budget or
    /// iteration count; must be positive.
    double threshold = 0.0;

    bool operator==(const StoppingRule&) const = default;
};

struct StopDecision {
    bool stop = false;
    std::optional<StopKind> reason;
};

bool rule_triggered(const StoppingRule& rule, double value, double se, std::size_t sims_used, std::size_t iteration);

StopDecision should_stop(std::span<const StoppingRule> rules, double value, double se, std::size_t sims_used,
                         std::size_t iteration);

/// "kind:threshold", e.g. "absolute_se:0.025" or "budget:6000".
StoppingRule parse_stopping_rule(std::string_view text);
std::string format_stopping_rule(const StoppingRule& rule);

}  // namespace crashsamp
