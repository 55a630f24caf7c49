#include "crashsamp/stopping.hpp"

#include <cmath>

#include "crashsamp/kv_file.hpp"
#include "crashsamp/types.hpp"

namespace crashsamp {

namespace {

constexpr double kZ95 = 1.96;

}  // namespace

std::string_view to_string(StopKind k) {
    switch (k) {
        case StopKind::absolute_se: return "absolute_se";
        case StopKind::rope: return "rope";
        case StopKind::cv: return "cv";
        case StopKind::budget: return "budget";
        case StopKind::max_iterations: return "max_iterations";
    }
    return "?";
}

bool rule_triggered(const StoppingRule& rule, double value, double se, std::size_t sims_used, std::size_t iteration) {
    switch (rule.kind) {
        case StopKind::absolute_se: return se < rule.threshold;
        case StopKind::rope: return kZ95 * se < rule.threshold;
        case StopKind::cv: return value != 0.0 && se < rule.threshold / 100.0 * std::fabs(value);
        case StopKind::budget: return static_cast<double>(sims_used) >= rule.threshold;
        case StopKind::max_iterations: return static_cast<double>(iteration) >= rule.threshold;
    }
    return false;
}

StopDecision should_stop(std::span<const StoppingRule> rules, double value, double se, std::size_t sims_used,
                         std::size_t iteration) {
    for (const StoppingRule& r : rules) {
        if (rule_triggered(r, value, se, sims_used, iteration)) return {true, r.kind};
    }
    return {};
}

StoppingRule parse_stopping_rule(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) throw ConfigError("stopping rule '" + std::string(text) + "' needs kind:threshold");
    const std::string_view kind = text.substr(0, colon);
    StoppingRule r;
    bool found = false;
    for (StopKind k : {StopKind::absolute_se, StopKind::rope, StopKind::cv, StopKind::budget, StopKind::max_iterations}) {
        if (to_string(k) == kind) {
            r.kind = k;
            found = true;
        }
    }
    if (!found) throw ConfigError("unknown stopping rule '" + std::string(kind) + "'");
    r.threshold = parse_double(std::string(text.substr(colon + 1)));
    if (!(r.threshold > 0.0) || !std::isfinite(r.threshold)) {
        throw ConfigError("stopping threshold must be positive: '" + std::string(text) + "'");
    }
    return r;
}

std::string format_stopping_rule(const StoppingRule& rule) {
    return std::string(to_string(rule.kind)) + ":" + format_double(rule.threshold);
}

}  // namespace crashsamp
