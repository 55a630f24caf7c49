// Serial reference vs OpenMP kernel timings: ground-truth enumeration,
// forest fitting and repeated-experiment evaluation.
//
//   bench_kernels [--reps N] [--rounds R]

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>

#include "crashsamp/evaluate.hpp"
#include "crashsamp/ground_truth.hpp"
#include "crashsamp/predictor.hpp"
#include "crashsamp/rng.hpp"

using namespace crashsamp;

namespace {

template <class F>
double best_of(int rounds, F&& f) {
    double best = 1e300;
    for (int r = 0; r < rounds; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void report(const char* name, double serial, double parallel, bool same) {
    std::printf("%-16s serial %8.3f s  parallel %8.3f s  speedup %5.2fx  %s\n", name, serial, parallel,
                serial / parallel, same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kernel benchmark"};
    int rounds = 3;
    std::size_t reps = 8;
    app.add_option("--rounds", rounds, "timing rounds (best kept)");
    app.add_option("--reps", reps, "repetitions for the evaluate kernel");
    CLI11_PARSE(app, argc, argv);

    std::printf("threads: %d\n", omp_get_max_threads());
    ScenarioGrid grid = build_grid(ScenarioConfig{});

    GroundTruth gs, gp;
    double ts = best_of(rounds, [&] { gs = build_ground_truth_serial(grid); });
    double tp = best_of(rounds, [&] { gp = build_ground_truth(grid); });
    bool same = true;
    for (std::size_t i = 0; i < grid.n_cells(); ++i)
        same = same && gs.base_speed(i) == gp.base_speed(i) && gs.cm_speed(i) == gp.cm_speed(i);
    report("ground_truth", ts, tp, same);

    // forest on a 3000-row random subset of the outcome table
    std::vector<FeatureRow> x;
    std::vector<double> y;
    Rng rng(stream_seed(42, 0));
    for (int i = 0; i < 3000; ++i) {
        std::size_t flat = rng.below(grid.n_cells());
        auto c = grid.cell(flat);
        x.push_back({std::uint16_t(c.oeoff_idx), std::uint16_t(c.decel_idx), std::uint16_t(c.event_id)});
        y.push_back(gp.base_speed(flat));
    }
    ForestParams fp;
    fp.n_trees = 200;
    std::optional<PredictorModel> ms, mp;
    ts = best_of(rounds, [&] { ms = fit_serial(x, y, TaskKind::regression, fp, 9); });
    tp = best_of(rounds, [&] { mp = fit(x, y, TaskKind::regression, fp, 9); });
    same = ms && mp && ms->holdout_metric == mp->holdout_metric && ms->sigma == mp->sigma;
    report("forest_fit", ts, tp, same);

    ExperimentConfig cfg;
    cfg.repetitions = reps;
    cfg.stopping = {{StopKind::budget, 3000.0}};
    auto cps = checkpoint_grid(cfg.checkpoint_step, 3000);
    Evaluation es, ep;
    ts = best_of(1, [&] { es = evaluate_rmse_serial(cfg, grid, gp, cps); });
    tp = best_of(1, [&] { ep = evaluate_rmse(cfg, grid, gp, cps); });
    same = true;
    for (Target t : kAllTargets) same = same && es.curve(t).rmse == ep.curve(t).rmse;
    report("evaluate_rmse", ts, tp, same);
    return 0;
}
