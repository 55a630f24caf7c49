#include "crashsamp/ground_truth.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "crashsamp/kv_file.hpp"

namespace crashsamp {

namespace {

void simulate_cell(const ScenarioGrid& grid, std::size_t flat, std::vector<double>& base, std::vector<double>& cm) {
    const ScenarioCell c = grid.cell(flat);
    const PrototypeEvent& ev = grid.event(c.event_id);
    const double oeoff = grid.oeoff(c.oeoff_idx);
    const double decel = grid.decel(c.decel_idx);
    base[flat] = simulate_baseline(ev, oeoff, decel, grid.sim()).impact_speed;
    cm[flat] = simulate_countermeasure(ev, oeoff, decel, grid.sim()).impact_speed;
}

}  // namespace

std::size_t GroundTruth::n_included() const {
    std::size_t n = 0;
    for (char c : included_) n += c ? 1 : 0;
    return n;
}

double GroundTruth::base_crash_fraction() const {
    std::size_t n = 0;
    for (double s : base_speed_) n += s > 0.0 ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(base_speed_.size());
}

GroundTruth build_ground_truth_serial(const ScenarioGrid& grid) {
    const std::size_t n = grid.n_cells();
    std::vector<double> base(n), cm(n);
    for (std::size_t i = 0; i < n; ++i) simulate_cell(grid, i, base, cm);
    return finalize_ground_truth(grid, std::move(base), std::move(cm));
}

GroundTruth build_ground_truth(const ScenarioGrid& grid) {
    const long n = static_cast<long>(grid.n_cells());
    std::vector<double> base(grid.n_cells()), cm(grid.n_cells());
    bool failed = false;
    std::string message;
#pragma omp parallel for schedule(dynamic, 64)
    for (long i = 0; i < n; ++i) {
        try {
            simulate_cell(grid, static_cast<std::size_t>(i), base, cm);
        } catch (const std::exception& e) {
#pragma omp critical(ground_truth_error)
            {
                failed = true;
                message = e.what();
            }
        }
    }
    if (failed) throw SimulationFault(message);
    return finalize_ground_truth(grid, std::move(base), std::move(cm));
}

GroundTruth finalize_ground_truth(const ScenarioGrid& grid, std::vector<double> base_speed, std::vector<double> cm_speed) {
    GroundTruth gt;
    gt.base_speed_ = std::move(base_speed);
    gt.cm_speed_ = std::move(cm_speed);
    gt.injury_ = grid.sim().injury;

    const std::size_t K = grid.n_events();
    const std::size_t per = grid.cells_per_event();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    gt.included_.assign(K, 0);
    gt.max_speed_.assign(K, 0.0);
    gt.crash_mass_.assign(K, 0.0);
    for (auto& v : gt.case_mean_) v.assign(K, nan);
    for (auto& v : gt.post_case_mean_) v.assign(K, nan);

    for (std::size_t k = 0; k < K; ++k) {
        gt.max_speed_[k] = gt.base_speed_[grid.index(grid.extreme_cell(k))];
        double mass = 0.0;
        std::array<double, 3> num{};
        for (std::size_t j = 0; j < per; ++j) {
            const std::size_t i = k * per + j;
            if (!gt.base_crash(i)) continue;
            const double w = grid.weight_at(i);
            mass += w;
            const OutcomeTriple y = gt.outcome(i);
            for (Target t : kAllTargets) num[target_index(t)] += w * y.get(t);
        }
        gt.crash_mass_[k] = mass;
        if (mass <= 0.0) {
            gt.warnings_.push_back("event " + std::to_string(k) + " has no baseline crashes; excluded from the grand mean");
            continue;
        }
        gt.included_[k] = 1;
        for (Target t : kAllTargets) gt.case_mean_[target_index(t)][k] = num[target_index(t)] / mass;

        // Post-stratified form: each crash cell weighted by w_i / (crash mass of its case).
        const double inv_mass = 1.0 / mass;
        std::array<double, 3> post{};
        for (std::size_t j = 0; j < per; ++j) {
            const std::size_t i = k * per + j;
            if (!gt.base_crash(i)) continue;
            const double v = grid.weight_at(i) * inv_mass;
            const OutcomeTriple y = gt.outcome(i);
            for (Target t : kAllTargets) post[target_index(t)] += v * y.get(t);
        }
        for (Target t : kAllTargets) gt.post_case_mean_[target_index(t)][k] = post[target_index(t)];
    }

    const double n_inc = static_cast<double>(gt.n_included());
    for (Target t : kAllTargets) {
        double s = 0.0;
        double sp = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            if (!gt.included_[k]) continue;
            s += gt.case_mean_[target_index(t)][k];
            sp += gt.post_case_mean_[target_index(t)][k];
        }
        gt.grand_mean_[target_index(t)] = n_inc > 0 ? s / n_inc : nan;
        gt.post_grand_mean_[target_index(t)] = n_inc > 0 ? sp / n_inc : nan;
    }
    return gt;
}

void write_ground_truth_csv(std::ostream& out, const ScenarioGrid& grid, const GroundTruth& gt) {
    out << "event_id,oeoff,decel,w,base_speed,cm_speed,base_crash,cm_crash,speed_reduction,injury_risk_reduction,"
           "crash_avoided\n";
    for (std::size_t i = 0; i < grid.n_cells(); ++i) {
        const ScenarioCell c = grid.cell(i);
        const OutcomeTriple y = gt.outcome(i);
        out << c.event_id << ',' << format_double(grid.oeoff(c.oeoff_idx)) << ',' << format_double(grid.decel(c.decel_idx))
            << ',' << format_double(grid.weight_at(i)) << ',' << format_double(gt.base_speed(i)) << ','
            << format_double(gt.cm_speed(i)) << ',' << (gt.base_crash(i) ? 1 : 0) << ',' << (gt.cm_crash(i) ? 1 : 0) << ','
            << format_double(y.impact_speed_reduction) << ',' << format_double(y.injury_risk_reduction) << ','
            << static_cast<int>(y.crash_avoided) << '\n';
    }
}

}  // namespace crashsamp
