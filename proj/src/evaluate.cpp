#include "crashsamp/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace crashsamp {

std::vector<std::size_t> checkpoint_grid(std::size_t step, std::size_t max_sims) {
    if (step == 0) throw ConfigError("checkpoint step must be at least 1");
    std::vector<std::size_t> out;
    for (std::size_t s = step; s <= max_sims; s += step) out.push_back(s);
    if (out.empty() || out.back() != max_sims) out.push_back(max_sims);
    return out;
}

double value_at(const EstimateTrace& trace, Target target, std::size_t sims) {
    auto it = std::upper_bound(trace.rows.begin(), trace.rows.end(), sims,
                               [](std::size_t s, const TraceRow& r) { return s < r.sims_used; });
    if (it == trace.rows.begin()) return std::numeric_limits<double>::quiet_NaN();
    return std::prev(it)->value[target_index(target)];
}

namespace {

struct RepResult {
    std::vector<double> values;  // 3 x n_checkpoints
    std::size_t sims = 0;
    std::size_t fallback = 0;
};

RepResult run_rep(const ExperimentConfig& cfg, const ScenarioGrid& grid, const OutcomeSource& src,
                  std::span<const std::size_t> cps, std::size_t rep) {
    const ExperimentResult r = run_experiment(cfg, grid, src, rep);
    RepResult out;
    out.values.resize(3 * cps.size());
    for (Target t : kAllTargets) {
        for (std::size_t j = 0; j < cps.size(); ++j) out.values[target_index(t) * cps.size() + j] = value_at(r.trace, t, cps[j]);
    }
    out.sims = r.sims_used;
    out.fallback = r.fallback_iterations;
    return out;
}

Evaluation reduce(const ExperimentConfig& cfg, const GroundTruth& gt, std::span<const std::size_t> cps,
                  const std::vector<RepResult>& reps) {
    Evaluation ev;
    ev.label = cfg.label();
    ev.config = cfg;
    const std::size_t n = cps.size();
    double sims = 0.0;
    for (const RepResult& r : reps) {
        sims += static_cast<double>(r.sims);
        ev.fallback_iterations += r.fallback;
    }
    ev.mean_sims_used = reps.empty() ? 0.0 : sims / static_cast<double>(reps.size());
    for (Target t : kAllTargets) {
        RmseCurve& c = ev.curves[target_index(t)];
        c.target = t;
        c.truth = gt.grand_mean(t);
        c.sims.assign(cps.begin(), cps.end());
        c.rmse.assign(n, 0.0);
        c.mean.assign(n, 0.0);
        c.sd.assign(n, 0.0);
        c.reps.assign(n, 0);
        for (std::size_t j = 0; j < n; ++j) {
            double se2 = 0.0, sum = 0.0;
            std::size_t m = 0;
            for (const RepResult& r : reps) {
                const double v = r.values[target_index(t) * n + j];
                if (std::isnan(v)) continue;
                se2 += (v - c.truth) * (v - c.truth);
                sum += v;
                ++m;
            }
            const double nan = std::numeric_limits<double>::quiet_NaN();
            c.reps[j] = m;
            if (m == 0) {
                c.rmse[j] = c.mean[j] = c.sd[j] = nan;
                continue;
            }
            c.rmse[j] = std::sqrt(se2 / static_cast<double>(m));
            c.mean[j] = sum / static_cast<double>(m);
            double ss = 0.0;
            for (const RepResult& r : reps) {
                const double v = r.values[target_index(t) * n + j];
                if (!std::isnan(v)) ss += (v - c.mean[j]) * (v - c.mean[j]);
            }
            c.sd[j] = m > 1 ? std::sqrt(ss / static_cast<double>(m - 1)) : 0.0;
        }
    }
    return ev;
}

}  // namespace

Evaluation evaluate_rmse_serial(const ExperimentConfig& cfg, const ScenarioGrid& grid, const GroundTruth& gt,
                                std::span<const std::size_t> checkpoints) {
    cfg.validate(grid);
    const GroundTruthSource src(gt);
    std::vector<RepResult> reps(cfg.repetitions);
    for (std::size_t r = 0; r < cfg.repetitions; ++r) reps[r] = run_rep(cfg, grid, src, checkpoints, r);
    return reduce(cfg, gt, checkpoints, reps);
}

Evaluation evaluate_rmse(const ExperimentConfig& cfg, const ScenarioGrid& grid, const GroundTruth& gt,
                         std::span<const std::size_t> checkpoints) {
    cfg.validate(grid);
    const GroundTruthSource src(gt);
    std::vector<RepResult> reps(cfg.repetitions);
    const long n = static_cast<long>(cfg.repetitions);
    bool failed = false;
    std::string message;
    bool config_error = false;
#pragma omp parallel for schedule(dynamic, 1)
    for (long r = 0; r < n; ++r) {
        try {
            reps[static_cast<std::size_t>(r)] = run_rep(cfg, grid, src, checkpoints, static_cast<std::size_t>(r));
        } catch (const std::exception& e) {
#pragma omp critical(evaluate_error)
            {
                if (!failed) {
                    failed = true;
                    message = e.what();
                    config_error = dynamic_cast<const ConfigError*>(&e) != nullptr;
                }
            }
        }
    }
    if (failed) {
        if (config_error) throw ConfigError(message);
        throw SimulationFault(message);
    }
    return reduce(cfg, gt, checkpoints, reps);
}

void write_rmse_csv(std::ostream& out, std::span<const Evaluation> evals) {
    out << "label,target,sims,rmse,mean,sd,reps,truth\n";
    for (const Evaluation& ev : evals) {
        for (const RmseCurve& c : ev.curves) {
            for (std::size_t j = 0; j < c.sims.size(); ++j) {
                out << ev.label << ',' << to_string(c.target) << ',' << c.sims[j] << ',' << format_double(c.rmse[j]) << ','
                    << format_double(c.mean[j]) << ',' << format_double(c.sd[j]) << ',' << c.reps[j] << ','
                    << format_double(c.truth) << '\n';
            }
        }
    }
}

std::vector<RmseRow> read_rmse_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "label,target,sims,rmse,mean,sd,reps,truth") {
        throw ConfigError("not an RMSE CSV (unexpected header)");
    }
    std::vector<RmseRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        if (f.size() != 8) throw ConfigError("RMSE CSV line " + std::to_string(lineno) + ": expected 8 fields");
        try {
            rows.push_back({f[0], parse_target(f[1]), static_cast<std::size_t>(std::stoull(f[2])), parse_double(f[3]),
                            parse_double(f[4]), parse_double(f[5]), static_cast<std::size_t>(std::stoull(f[6])),
                            parse_double(f[7])});
        } catch (const std::logic_error&) {
            throw ConfigError("RMSE CSV line " + std::to_string(lineno) + ": malformed number");
        }
    }
    return rows;
}

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"methods", "assr", "strat-noassr", "strat-assr", "batch-size"};
    return names;
}

namespace {

ExperimentConfig variant(const ExperimentConfig& base, Method m, Target t, bool assr, bool strat, std::size_t nt) {
    ExperimentConfig c = base;
    c.method = m;
    c.target = t;
    c.assr = assr;
    c.stratified = strat;
    c.batch_size = nt;
    return c;
}

}  // namespace

std::vector<ExperimentConfig> suite_configs(const std::string& suite, const ExperimentConfig& base,
                                            std::size_t n_events) {
    constexpr std::size_t post_nt = 10;
    const std::size_t strat_nt = n_events;
    std::vector<ExperimentConfig> out;
    if (suite == "methods") {
        out.push_back(variant(base, Method::density, Target::speed_reduction, false, false, post_nt));
        out.push_back(variant(base, Method::severity, Target::speed_reduction, false, false, post_nt));
        for (Target t : kAllTargets) out.push_back(variant(base, Method::active, t, false, false, post_nt));
    } else if (suite == "assr") {
        for (Target t : kAllTargets) {
            out.push_back(variant(base, Method::active, t, true, false, post_nt));
            out.push_back(variant(base, Method::active, t, false, false, post_nt));
        }
    } else if (suite == "strat-noassr" || suite == "strat-assr") {
        const bool assr = suite == "strat-assr";
        out.push_back(variant(base, Method::severity, Target::speed_reduction, assr, false, post_nt));
        out.push_back(variant(base, Method::severity, Target::speed_reduction, assr, true, strat_nt));
        for (Target t : kAllTargets) {
            out.push_back(variant(base, Method::active, t, assr, false, post_nt));
            out.push_back(variant(base, Method::active, t, assr, true, strat_nt));
        }
    } else if (suite == "batch-size") {
        for (std::size_t nt : {n_events, 3 * n_events, 10 * n_events}) {
            for (Target t : kAllTargets) out.push_back(variant(base, Method::active, t, true, true, nt));
        }
    } else {
        throw ConfigError("unknown suite '" + suite + "'");
    }
    return out;
}

}  // namespace crashsamp
