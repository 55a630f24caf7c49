#include "crashsamp/assr.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <string>

namespace crashsamp {

// ---- Antichain -----------------------------------------------------------

bool Antichain::covers(std::size_t o, std::size_t d) const {
    if (orientation_ == Orientation::down_left) {
        // Need q.o >= o and q.d <= d; the first q with q.o >= o has the smallest d.
        auto it = std::lower_bound(points_.begin(), points_.end(), o, [](const Point& p, std::size_t v) { return p.o < v; });
        return it != points_.end() && it->d <= d;
    }
    // Need q.o <= o and q.d >= d; the last q with q.o <= o has the largest d.
    auto it = std::upper_bound(points_.begin(), points_.end(), o, [](std::size_t v, const Point& p) { return v < p.o; });
    if (it == points_.begin()) return false;
    --it;
    return it->d >= d;
}

bool Antichain::insert(std::size_t o, std::size_t d) {
    if (covers(o, d)) return false;
    const Antichain::Orientation orient = orientation_;
    std::erase_if(points_, [&](const Point& q) {
        return orient == Orientation::down_left ? (q.o <= o && q.d >= d) : (q.o >= o && q.d <= d);
    });
    auto it = std::lower_bound(points_.begin(), points_.end(), o, [](const Point& p, std::size_t v) { return p.o < v; });
    points_.insert(it, Point{o, d});
    return true;
}

// ---- KnowledgeMap --------------------------------------------------------

namespace {

[[noreturn]] void violation(const ScenarioGrid& grid, std::size_t flat, const std::string& what) {
    const ScenarioCell c = grid.cell(flat);
    throw MonotonicityViolation(what + " at event " + std::to_string(c.event_id) + ", oeoff_idx " +
                                std::to_string(c.oeoff_idx) + ", decel_idx " + std::to_string(c.decel_idx));
}

const char* name(BaseState s) {
    switch (s) {
        case BaseState::unknown: return "unknown";
        case BaseState::noncrash: return "noncrash";
        case BaseState::crash: return "crash";
    }
    return "?";
}

const char* name(CmState s) {
    switch (s) {
        case CmState::unknown: return "unknown";
        case CmState::avoided: return "avoided";
        case CmState::crash: return "crash";
    }
    return "?";
}

const char* name(Source s) {
    switch (s) {
        case Source::none: return "none";
        case Source::simulated: return "simulated";
        case Source::inferred: return "inferred";
    }
    return "?";
}

}  // namespace

KnowledgeMap::KnowledgeMap(const ScenarioGrid& grid, bool inference)
    : grid_(&grid),
      inference_(inference),
      cells_(grid.n_cells()),
      samplable_(grid.n_cells(), 1),
      samplable_per_event_(grid.n_events(), grid.cells_per_event()),
      n_samplable_(grid.n_cells()),
      max_speed_known_(grid.n_events()),
      noncrash_(grid.n_events(), Antichain(Antichain::Orientation::down_left)),
      max_speed_(grid.n_events(), Antichain(Antichain::Orientation::up_right)),
      avoided_(grid.n_events(), Antichain(Antichain::Orientation::down_left)) {}

std::optional<double> KnowledgeMap::max_speed(std::size_t event) const { return max_speed_known_.at(event); }

void KnowledgeMap::remove_samplable(std::size_t flat) {
    if (!samplable_[flat]) return;
    samplable_[flat] = 0;
    --n_samplable_;
    --samplable_per_event_[grid_->event_of(flat)];
    ++version_;
}

void KnowledgeMap::make_certain(std::size_t flat) { remove_samplable(flat); }

std::vector<std::size_t> KnowledgeMap::record_baseline(std::size_t flat, const SimOutcome& outcome) {
    const ScenarioGrid& g = *grid_;
    CellKnowledge& self = cells_.at(flat);
    if (self.base != BaseState::unknown) {
        const bool same = (self.base == BaseState::crash) == outcome.crashed &&
                          (!outcome.crashed || self.base_speed == outcome.impact_speed);
        if (!same) violation(g, flat, "baseline outcome contradicts recorded knowledge");
    }
    self.base = outcome.crashed ? BaseState::crash : BaseState::noncrash;
    self.base_speed = outcome.crashed ? outcome.impact_speed : 0.0;
    self.base_src = Source::simulated;

    const ScenarioCell c = g.cell(flat);
    if (c.oeoff_idx == g.n_oeoff() - 1 && c.decel_idx == 0 && outcome.crashed) {
        max_speed_known_[c.event_id] = outcome.impact_speed;
    }

    std::vector<std::size_t> deduced;
    if (!inference_) return deduced;

    if (!outcome.crashed) {
        // rules i and ii
        if (!noncrash_[c.event_id].insert(c.oeoff_idx, c.decel_idx)) {
            if (self.cm == CmState::unknown) {
                self.cm = CmState::avoided;
                self.cm_src = Source::inferred;
            }
            return deduced;
        }
        for (std::size_t o = 0; o <= c.oeoff_idx; ++o) {
            for (std::size_t d = c.decel_idx; d < g.n_decel(); ++d) {
                const std::size_t i = g.index(c.event_id, o, d);
                CellKnowledge& k = cells_[i];
                if (k.base == BaseState::crash) violation(g, i, "rule i: crash inside a no-crash region");
                if (k.cm == CmState::crash) violation(g, i, "rule ii: countermeasure crash without baseline crash");
                bool changed = false;
                if (k.base == BaseState::unknown) {
                    k.base = BaseState::noncrash;
                    k.base_src = Source::inferred;
                    changed = true;
                }
                if (k.cm == CmState::unknown) {
                    k.cm = CmState::avoided;
                    k.cm_speed = 0.0;
                    k.cm_src = Source::inferred;
                    changed = true;
                }
                if (changed && i != flat) deduced.push_back(i);
                remove_samplable(i);
            }
        }
        return deduced;
    }

    const auto& m = max_speed_known_[c.event_id];
    if (m && outcome.impact_speed == *m) {
        // rule iv
        if (!max_speed_[c.event_id].insert(c.oeoff_idx, c.decel_idx)) return deduced;
        for (std::size_t o = c.oeoff_idx; o < g.n_oeoff(); ++o) {
            for (std::size_t d = 0; d <= c.decel_idx; ++d) {
                const std::size_t i = g.index(c.event_id, o, d);
                CellKnowledge& k = cells_[i];
                if (k.base == BaseState::noncrash) violation(g, i, "rule iv: no-crash inside a maximum-speed region");
                if (k.base == BaseState::crash && k.base_speed != *m) {
                    violation(g, i, "rule iv: speed differs inside a maximum-speed region");
                }
                if (k.base == BaseState::unknown) {
                    k.base = BaseState::crash;
                    k.base_speed = *m;
                    k.base_src = Source::inferred;
                    deduced.push_back(i);
                }
            }
        }
    }
    return deduced;
}

std::vector<std::size_t> KnowledgeMap::record_countermeasure(std::size_t flat, const SimOutcome& outcome) {
    const ScenarioGrid& g = *grid_;
    CellKnowledge& self = cells_.at(flat);
    if (self.cm != CmState::unknown) {
        const bool same = (self.cm == CmState::crash) == outcome.crashed &&
                          (!outcome.crashed || self.cm_speed == outcome.impact_speed);
        if (!same) violation(g, flat, "countermeasure outcome contradicts recorded knowledge");
    }
    if (outcome.crashed && self.base == BaseState::noncrash) {
        violation(g, flat, "rule ii: countermeasure crash without baseline crash");
    }
    self.cm = outcome.crashed ? CmState::crash : CmState::avoided;
    self.cm_speed = outcome.crashed ? outcome.impact_speed : 0.0;
    self.cm_src = Source::simulated;

    std::vector<std::size_t> deduced;
    if (!inference_ || outcome.crashed) return deduced;

    // rule iii
    const ScenarioCell c = g.cell(flat);
    if (!avoided_[c.event_id].insert(c.oeoff_idx, c.decel_idx)) return deduced;
    for (std::size_t o = 0; o <= c.oeoff_idx; ++o) {
        for (std::size_t d = c.decel_idx; d < g.n_decel(); ++d) {
            const std::size_t i = g.index(c.event_id, o, d);
            CellKnowledge& k = cells_[i];
            if (k.cm == CmState::crash) violation(g, i, "rule iii: countermeasure crash inside an avoided region");
            if (k.cm == CmState::unknown) {
                k.cm = CmState::avoided;
                k.cm_speed = 0.0;
                k.cm_src = Source::inferred;
                deduced.push_back(i);
            }
        }
    }
    return deduced;
}

CmDecision KnowledgeMap::needs_countermeasure(std::size_t flat) const {
    const CellKnowledge& k = cells_.at(flat);
    if (k.base == BaseState::unknown) throw std::logic_error("needs_countermeasure: baseline outcome unknown");
    if (k.cm != CmState::unknown) {
        return {false, SimOutcome{k.cm == CmState::crash, k.cm_speed, 0}};
    }
    if (inference_ && k.base == BaseState::noncrash) return {false, SimOutcome{false, 0.0, 0}};
    return {true, std::nullopt};
}

SimulationCost KnowledgeMap::simulation_cost(std::size_t flat) const {
    const CellKnowledge& k = cells_.at(flat);
    SimulationCost cost;
    cost.run_baseline = k.base == BaseState::unknown;
    if (k.cm == CmState::unknown) {
        // With an unknown baseline under inference, the countermeasure run is
        // still pending: it is skipped if the baseline turns out no-crash.
        cost.run_cm = !inference_ || k.base != BaseState::noncrash;
    }
    return cost;
}

void KnowledgeMap::write_csv(std::ostream& out) const {
    out << "event_id,oeoff_idx,decel_idx,base_state,base_source,cm_state,cm_source,samplable\n";
    for (std::size_t i = 0; i < cells_.size(); ++i) {
        const ScenarioCell c = grid_->cell(i);
        const CellKnowledge& k = cells_[i];
        out << c.event_id << ',' << c.oeoff_idx << ',' << c.decel_idx << ',' << name(k.base) << ',' << name(k.base_src)
            << ',' << name(k.cm) << ',' << name(k.cm_src) << ',' << (samplable_[i] ? 1 : 0) << '\n';
    }
}

}  // namespace crashsamp
