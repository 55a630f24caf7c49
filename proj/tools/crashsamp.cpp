// crashsamp: ground truth, single experiments, RMSE evaluation, comparison
// suites and plots from the command line.
//
// Exit codes: 0 ok, 1 configuration or usage error, 2 runtime fault.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crashsamp/evaluate.hpp"
#include "crashsamp/experiment.hpp"
#include "crashsamp/ground_truth.hpp"
#include "crashsamp/kv_file.hpp"
#include "crashsamp/scenario_model.hpp"
#include "crashsamp/stopping.hpp"
#include "crashsamp/svg_plot.hpp"

using namespace crashsamp;
namespace fs = std::filesystem;

namespace {

struct ExperimentFlags {
    std::string method, target;
    std::optional<bool> assr, stratified, shrinkage;
    std::optional<std::size_t> batch_size, repetitions, n_trees, max_depth, mtry, min_node_size, checkpoint_step;
    std::optional<std::uint64_t> seed;
    std::optional<double> floor, refit_growth, budget;
    std::vector<std::string> stop;

    CLI::App* attach(CLI::App* app, bool seed_required) {
        app->add_option("--method", method, "density | severity | active");
        app->add_option("--target", target, "speed_reduction | crash_avoidance | injury_risk_reduction");
        app->add_flag("--assr,!--no-assr", assr, "adaptive sample space reduction");
        app->add_flag("--stratified,!--post-stratified", stratified, "stratify draws by event");
        app->add_flag("--shrinkage,!--no-shrinkage", shrinkage, "shrink case estimates (default: active sampling only)");
        app->add_option("--batch-size", batch_size, "draws per iteration");
        app->add_option("--repetitions", repetitions);
        auto* s = app->add_option("--seed", seed, "base seed");
        if (seed_required) s->required();
        app->add_option("--stop", stop, "stopping rule kind:threshold (absolute_se, rope, cv, budget, max_iterations)");
        app->add_option("--budget", budget, "shorthand for --stop budget:N");
        app->add_option("--floor", floor, "uniform floor mixing weight");
        app->add_option("--refit-growth", refit_growth);
        app->add_option("--n-trees", n_trees);
        app->add_option("--max-depth", max_depth);
        app->add_option("--mtry", mtry);
        app->add_option("--min-node-size", min_node_size);
        app->add_option("--checkpoint-step", checkpoint_step, "RMSE grid spacing in simulations");
        return app;
    }

    void apply(ExperimentConfig& cfg) const {
        if (!method.empty()) cfg.method = parse_method(method);
        if (!target.empty()) cfg.target = parse_target(target);
        if (assr) cfg.assr = *assr;
        if (stratified) cfg.stratified = *stratified;
        if (shrinkage) cfg.shrinkage = *shrinkage;
        if (batch_size) cfg.batch_size = *batch_size;
        if (repetitions) cfg.repetitions = *repetitions;
        if (seed) cfg.seed = *seed;
        if (floor) cfg.floor = *floor;
        if (refit_growth) cfg.refit_growth = *refit_growth;
        if (n_trees) cfg.forest.n_trees = *n_trees;
        if (max_depth) cfg.forest.max_depth = *max_depth;
        if (mtry) cfg.forest.mtry = *mtry;
        if (min_node_size) cfg.forest.min_node_size = *min_node_size;
        if (checkpoint_step) cfg.checkpoint_step = *checkpoint_step;
        if (!stop.empty() || budget) {
            cfg.stopping.clear();
            for (const auto& s : stop) cfg.stopping.push_back(parse_stopping_rule(s));
            if (budget) cfg.stopping.push_back({StopKind::budget, *budget});
        }
    }
};

struct Loaded {
    ScenarioConfig scenario;
    ExperimentConfig experiment;
    bool has_stopping = false;
};

Loaded load_config(const std::string& path) {
    Loaded out;
    if (path.empty()) return out;
    KvFile kv = KvFile::load(path);
    out.scenario = load_scenario_config(kv);
    out.experiment = load_experiment_config(kv);
    out.has_stopping = kv.has("experiment", "stopping");
    return out;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    return f;
}

// Runs `body` with either the named file or stdout ("-" or empty).
template <class F>
void with_output(const std::string& path, F&& body) {
    if (path.empty() || path == "-") {
        body(std::cout);
        return;
    }
    auto f = open_out(path);
    body(f);
    if (!f) throw std::runtime_error("write failed: " + path);
}

GroundTruth timed_ground_truth(const ScenarioGrid& grid, bool quiet) {
    auto t0 = std::chrono::steady_clock::now();
    GroundTruth gt = build_ground_truth(grid);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!quiet) {
        std::fprintf(stderr, "ground truth: %zu cells, %zu simulations, %.2f s\n", grid.n_cells(), gt.simulations(),
                     secs);
        for (const auto& w : gt.warnings()) std::fprintf(stderr, "warning: %s\n", w.c_str());
    }
    return gt;
}

void print_summary(const Evaluation& ev) {
    std::fprintf(stderr, "%s: mean sims %.0f, fallback iterations %zu\n", ev.label.c_str(), ev.mean_sims_used,
                 ev.fallback_iterations);
    for (Target t : kAllTargets) {
        const auto& c = ev.curve(t);
        if (c.sims.empty()) continue;
        std::fprintf(stderr, "  %-22s truth %-10.6g rmse@%zu %.4g\n", std::string(to_string(t)).c_str(), c.truth,
                     c.sims.back(), c.rmse.back());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Counterfactual crash-scenario sampling experiments"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    bool quiet = false;
    app.add_option("--config", config_path, "key-value config file ([grid], [sim], [experiment])")
        ->check(CLI::ExistingFile);
    app.add_flag("-q,--quiet", quiet, "no progress output");

    // ground-truth
    auto* gt_cmd = app.add_subcommand("ground-truth", "enumerate every cell and write the outcome table");
    std::string gt_out;
    bool gt_serial = false;
    gt_cmd->add_option("--out", gt_out, "CSV path")->required();
    gt_cmd->add_flag("--serial", gt_serial, "use the single-threaded reference");

    // run
    auto* run_cmd = app.add_subcommand("run", "one experiment, trace CSV");
    ExperimentFlags run_flags;
    run_flags.attach(run_cmd, true);
    std::string run_out, run_knowledge, run_scheme, run_estimates;
    std::size_t run_rep = 0;
    bool run_simulate = false;
    run_cmd->add_option("--out", run_out, "trace CSV (default stdout)");
    run_cmd->add_option("--rep", run_rep, "repetition index (selects the RNG stream)");
    run_cmd->add_flag("--simulate", run_simulate, "call the simulator instead of the ground-truth table");
    run_cmd->add_option("--knowledge-out", run_knowledge, "final knowledge map CSV");
    run_cmd->add_option("--scheme-out", run_scheme, "last sampling scheme CSV");
    run_cmd->add_option("--estimates-out", run_estimates, "final estimates CSV");

    // evaluate
    auto* ev_cmd = app.add_subcommand("evaluate", "repeated experiments, RMSE CSV");
    ExperimentFlags ev_flags;
    ev_flags.attach(ev_cmd, true);
    std::string ev_out, ev_plot;
    bool ev_serial = false;
    ev_cmd->add_option("--out", ev_out, "RMSE CSV (default stdout)");
    ev_cmd->add_option("--plot", ev_plot, "also write an SVG chart");
    ev_cmd->add_flag("--serial", ev_serial, "run repetitions on one thread");

    // compare
    auto* cmp_cmd = app.add_subcommand("compare", "comparison suites, one RMSE CSV and SVG per suite");
    ExperimentFlags cmp_flags;
    cmp_flags.attach(cmp_cmd, false);
    std::vector<std::string> suites;
    std::string cmp_dir = ".";
    cmp_cmd->add_option("--suite", suites, "methods | assr | strat-noassr | strat-assr | batch-size | all")
        ->required();
    cmp_cmd->add_option("--out-dir", cmp_dir, "output directory");

    // plot
    auto* plot_cmd = app.add_subcommand("plot", "RMSE CSV to SVG");
    std::string plot_in, plot_out, plot_title;
    bool plot_linear = false;
    plot_cmd->add_option("--in", plot_in, "RMSE CSV")->required()->check(CLI::ExistingFile);
    plot_cmd->add_option("--out", plot_out, "SVG path")->required();
    plot_cmd->add_option("--title", plot_title);
    plot_cmd->add_flag("--linear", plot_linear, "linear RMSE axis");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (plot_cmd->parsed()) {
            std::ifstream in(plot_in);
            auto rows = read_rmse_csv(in);
            PlotOptions opt;
            opt.title = plot_title;
            opt.log_y = !plot_linear;
            with_output(plot_out, [&](std::ostream& o) { write_rmse_svg(o, rows, opt); });
            return 0;
        }

        Loaded cfg = load_config(config_path);
        ScenarioGrid grid = build_grid(cfg.scenario);

        if (gt_cmd->parsed()) {
            GroundTruth gt = gt_serial ? build_ground_truth_serial(grid) : timed_ground_truth(grid, quiet);
            with_output(gt_out, [&](std::ostream& o) { write_ground_truth_csv(o, grid, gt); });
            if (!quiet) {
                for (Target t : kAllTargets)
                    std::fprintf(stderr, "%-22s %.6g\n", std::string(to_string(t)).c_str(), gt.grand_mean(t));
            }
            return 0;
        }

        if (run_cmd->parsed()) {
            ExperimentConfig ec = cfg.experiment;
            run_flags.apply(ec);
            ec.validate(grid);
            std::unique_ptr<OutcomeSource> source;
            std::optional<GroundTruth> gt;
            if (run_simulate) {
                source = std::make_unique<SimulatorSource>(grid);
            } else {
                gt = timed_ground_truth(grid, quiet);
                source = std::make_unique<GroundTruthSource>(*gt);
            }
            bool artifacts = !run_knowledge.empty() || !run_scheme.empty();
            ExperimentResult res = run_experiment(ec, grid, *source, run_rep, artifacts);
            with_output(run_out, [&](std::ostream& o) { write_trace_csv(o, res.trace); });
            if (!run_knowledge.empty() && res.knowledge)
                with_output(run_knowledge, [&](std::ostream& o) { res.knowledge->write_csv(o); });
            if (!run_scheme.empty() && res.last_scheme)
                with_output(run_scheme, [&](std::ostream& o) { write_scheme_csv(o, grid, *res.last_scheme); });
            if (!run_estimates.empty()) {
                std::vector<EstimateRow> rows;
                for (Target t : kAllTargets) {
                    const auto& e = res.final_estimate[target_index(t)];
                    rows.push_back({t, e.value, e.se, res.sims_used, res.iterations});
                }
                with_output(run_estimates, [&](std::ostream& o) { write_estimates_csv(o, rows); });
            }
            if (!quiet)
                std::fprintf(stderr, "%s: %zu sims, %zu iterations, %zu fits, stop: %s\n", ec.label().c_str(),
                             res.sims_used, res.iterations, res.model_fits, res.trace.stop_reason.c_str());
            return 0;
        }

        if (ev_cmd->parsed()) {
            ExperimentConfig ec = cfg.experiment;
            ev_flags.apply(ec);
            ec.validate(grid);
            auto budget = ec.budget();
            if (!budget) throw ConfigError("evaluate needs a budget rule");
            GroundTruth gt = timed_ground_truth(grid, quiet);
            auto cps = checkpoint_grid(ec.checkpoint_step, *budget);
            Evaluation ev = ev_serial ? evaluate_rmse_serial(ec, grid, gt, cps) : evaluate_rmse(ec, grid, gt, cps);
            std::vector<Evaluation> evs{ev};
            with_output(ev_out, [&](std::ostream& o) { write_rmse_csv(o, evs); });
            if (!ev_plot.empty()) {
                std::stringstream ss;
                write_rmse_csv(ss, evs);
                auto rows = read_rmse_csv(ss);
                with_output(ev_plot, [&](std::ostream& o) { write_rmse_svg(o, rows, {ev.label}); });
            }
            if (!quiet) print_summary(ev);
            return 0;
        }

        if (cmp_cmd->parsed()) {
            ExperimentConfig base = cfg.experiment;
            // suites run to 20% of the full outcome table unless told otherwise
            if (!cfg.has_stopping)
                base.stopping = {{StopKind::budget, std::floor(0.2 * 2.0 * double(grid.n_cells()))}};
            cmp_flags.apply(base);
            if (suites.size() == 1 && suites[0] == "all") suites = suite_names();
            for (const auto& s : suites) {
                bool known = false;
                for (const auto& n : suite_names()) known = known || n == s;
                if (!known) throw ConfigError("unknown suite '" + s + "'");
            }
            auto budget = base.budget();
            if (!budget) throw ConfigError("compare needs a budget rule");
            fs::create_directories(cmp_dir);
            GroundTruth gt = timed_ground_truth(grid, quiet);
            auto cps = checkpoint_grid(base.checkpoint_step, *budget);
            for (const auto& s : suites) {
                std::vector<Evaluation> evs;
                for (auto& c : suite_configs(s, base, grid.n_events())) {
                    c.validate(grid);
                    evs.push_back(evaluate_rmse(c, grid, gt, cps));
                    if (!quiet) print_summary(evs.back());
                }
                std::string stem = (fs::path(cmp_dir) / s).string();
                with_output(stem + ".csv", [&](std::ostream& o) { write_rmse_csv(o, evs); });
                std::stringstream ss;
                write_rmse_csv(ss, evs);
                auto rows = read_rmse_csv(ss);
                with_output(stem + ".svg", [&](std::ostream& o) { write_rmse_svg(o, rows, {s}); });
            }
            return 0;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
