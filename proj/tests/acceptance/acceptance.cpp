// Acceptance checks 1-13. One PASS/FAIL line per criterion; exit status is
// the number of failed criteria (capped at 125).

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "crashsamp/assr.hpp"
#include "crashsamp/estimators.hpp"
#include "crashsamp/evaluate.hpp"
#include "crashsamp/experiment.hpp"
#include "crashsamp/ground_truth.hpp"
#include "crashsamp/rng.hpp"
#include "crashsamp/samplers.hpp"
#include "crashsamp/stopping.hpp"
#include "toy.hpp"

using namespace crashsamp;
using json = nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

struct Outcome {
    bool pass = false;
    std::string detail;
    json data = json::object();
};

struct Context {
    ScenarioGrid grid;
    GroundTruth gt;
    double gt_seconds = 0.0;
    std::size_t reps = 200;
    std::uint64_t seed = 20240611;
    std::size_t budget = 6000;
    std::size_t step = 500;
    std::string cli;
    std::map<std::string, Evaluation> cache;
    double suite_seconds = 0.0;

    const Evaluation& eval(const ExperimentConfig& cfg, std::size_t max_sims) {
        const std::string key = cfg.label() + "@" + std::to_string(max_sims);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        const auto t0 = Clock::now();
        const auto cps = checkpoint_grid(step, max_sims);
        Evaluation e = evaluate_rmse(cfg, grid, gt, cps);
        const double s = seconds_since(t0);
        suite_seconds += s;
        std::cerr << "  evaluated " << key << " in " << fmt(s, 3) << " s\n";
        return cache.emplace(key, std::move(e)).first->second;
    }

    ExperimentConfig base() const {
        ExperimentConfig b;
        b.seed = seed;
        b.repetitions = reps;
        b.stopping = {{StopKind::budget, static_cast<double>(budget)}};
        return b;
    }

    ExperimentConfig pick(const std::string& suite, Method m, Target t, bool assr, bool stratified,
                          std::size_t batch) const {
        for (const ExperimentConfig& c : suite_configs(suite, base(), grid.n_events())) {
            if (c.method == m && (m != Method::active || c.target == t) && c.assr == assr && c.stratified == stratified &&
                c.batch_size == batch)
                return c;
        }
        throw std::logic_error("configuration missing from suite " + suite);
    }
};

double rmse_at(const RmseCurve& c, std::size_t sims) {
    for (std::size_t j = 0; j < c.sims.size(); ++j)
        if (c.sims[j] == sims) return c.rmse[j];
    return std::nan("");
}

// ---- 1 -----------------------------------------------------------------------

Outcome grid_fidelity(Context& ctx) {
    const ScenarioGrid& g = ctx.grid;
    double worst = 0.0;
    for (std::size_t k = 0; k < g.n_events(); ++k) {
        double s = 0.0;
        for (std::size_t o = 0; o < g.n_oeoff(); ++o)
            for (std::size_t d = 0; d < g.n_decel(); ++d) s += g.weight_at(g.index({k, o, d}));
        worst = std::max(worst, std::fabs(s - 1.0));
    }
    double zero_mass = 0.0;
    for (std::size_t d = 0; d < g.n_decel(); ++d) zero_mass += g.weight(0, d);
    Outcome r;
    r.pass = g.n_events() == 44 && g.n_oeoff() == 67 && g.n_decel() == 15 && g.n_cells() == 44220 &&
             ctx.gt.simulations() == 88440 && worst <= 1e-9 && std::fabs(zero_mass - 0.854) < 1e-12 &&
             ctx.gt_seconds < 120.0;
    r.detail = std::to_string(g.n_events()) + "x" + std::to_string(g.n_oeoff()) + "x" + std::to_string(g.n_decel()) +
               " = " + std::to_string(g.n_cells()) + " cells, " + std::to_string(ctx.gt.simulations()) +
               " outcomes, max |sum w - 1| = " + fmt(worst, 3) + ", OEOFF=0 mass " + fmt(zero_mass, 6) +
               ", ground truth " + fmt(ctx.gt_seconds, 3) + " s";
    r.data = {{"cells", g.n_cells()}, {"outcomes", ctx.gt.simulations()}, {"max_weight_error", worst},
              {"oeoff0_mass", zero_mass}, {"ground_truth_seconds", ctx.gt_seconds}};
    return r;
}

// ---- 2 -----------------------------------------------------------------------

// Feeds every cell of the grid to a knowledge map in the given order and
// compares every inference with the enumerated outcome.
struct SoundnessCount {
    std::size_t inferred_base = 0, inferred_cm = 0, skipped_cm = 0, violations = 0;
};

void soundness_pass(const ScenarioGrid& g, const GroundTruth& gt, const std::vector<std::size_t>& order,
                    SoundnessCount& n) {
    KnowledgeMap km(g, true);
    const auto cm_matches = [&](std::size_t i, bool crash, double speed) {
        return crash == gt.cm_crash(i) && (!crash || std::fabs(speed - gt.cm_speed(i)) <= 1e-9);
    };
    try {
        for (std::size_t f : order) {
            if (km.at(f).base == BaseState::unknown) km.record_baseline(f, gt.baseline(f));
            if (km.at(f).cm != CmState::unknown) continue;
            const CmDecision d = km.needs_countermeasure(f);
            if (d.run) {
                km.record_countermeasure(f, gt.countermeasure(f));
            } else {
                ++n.skipped_cm;
                if (!d.known || !cm_matches(f, d.known->crashed, d.known->impact_speed)) ++n.violations;
            }
        }
    } catch (const MonotonicityViolation&) {
        ++n.violations;
        return;
    }
    for (std::size_t i = 0; i < g.n_cells(); ++i) {
        const CellKnowledge& k = km.at(i);
        if (k.base_src == Source::inferred) {
            ++n.inferred_base;
            const bool crash = k.base == BaseState::crash;
            if (crash != gt.base_crash(i) || (crash && std::fabs(k.base_speed - gt.base_speed(i)) > 1e-9))
                ++n.violations;
        }
        if (k.cm_src == Source::inferred) {
            ++n.inferred_cm;
            if (!cm_matches(i, k.cm == CmState::crash, k.cm_speed)) ++n.violations;
        }
    }
}

Outcome assr_soundness(Context& ctx) {
    const ScenarioGrid& g = ctx.grid;
    SoundnessCount n;
    std::vector<std::size_t> order(g.n_cells());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    // extreme cells first, as after deterministic initialization
    std::vector<std::size_t> init;
    for (const ScenarioCell& c : init_deterministic(g)) init.push_back(g.index(c));
    for (std::uint64_t s = 0; s < 4; ++s) {
        Rng rng(stream_seed(ctx.seed, 1000 + s));
        for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
        std::vector<std::size_t> o = order;
        if (s % 2 == 1) {
            o = init;
            o.insert(o.end(), order.begin(), order.end());
        }
        soundness_pass(g, ctx.gt, o, n);
    }
    std::vector<std::size_t> sweep(g.n_cells());
    for (std::size_t i = 0; i < sweep.size(); ++i) sweep[i] = sweep.size() - 1 - i;
    soundness_pass(g, ctx.gt, sweep, n);

    Outcome r;
    r.pass = n.violations == 0 && n.inferred_base > 0 && n.inferred_cm > 0;
    r.detail = "5 full-grid orders: " + std::to_string(n.inferred_base) + " baseline and " +
               std::to_string(n.inferred_cm) + " countermeasure inferences, " + std::to_string(n.skipped_cm) +
               " skipped countermeasure runs, " + std::to_string(n.violations) + " violations";
    r.data = {{"inferred_baseline", n.inferred_base}, {"inferred_countermeasure", n.inferred_cm},
              {"skipped_countermeasure", n.skipped_cm}, {"violations", n.violations}};
    return r;
}

// ---- 3 -----------------------------------------------------------------------

Outcome monotonicity(Context& ctx) {
    const ScenarioGrid& g = ctx.grid;
    std::size_t bad = 0, pairs = 0;
    for (std::size_t k = 0; k < g.n_events(); ++k) {
        for (std::size_t o = 0; o < g.n_oeoff(); ++o) {
            for (std::size_t d = 0; d < g.n_decel(); ++d) {
                const double v = ctx.gt.base_speed(g.index({k, o, d}));
                if (o + 1 < g.n_oeoff()) {
                    ++pairs;
                    if (ctx.gt.base_speed(g.index({k, o + 1, d})) < v) ++bad;
                }
                if (d + 1 < g.n_decel()) {
                    ++pairs;
                    if (ctx.gt.base_speed(g.index({k, o, d + 1})) > v) ++bad;
                }
            }
        }
    }
    Outcome r;
    r.pass = bad == 0;
    r.detail = std::to_string(pairs) + " adjacent pairs, " + std::to_string(bad) + " violations";
    r.data = {{"pairs", pairs}, {"violations", bad}};
    return r;
}

// ---- 4 -----------------------------------------------------------------------

Outcome toy_estimator(Context&) {
    ScenarioGrid g = toy::grid_2x3x2();
    GroundTruth gt = build_ground_truth(g);
    KnowledgeMap km(g, false);
    const SamplingScheme s = density_scheme(g, km);
    std::vector<double> pi(g.n_cells(), 0.0);
    for (std::size_t j = 0; j < s.cells.size(); ++j) pi[s.cells[j]] = s.pi[j];

    double worst_total = 0.0, worst_bias = 0.0;
    std::size_t checked = 0;
    json rows = json::array();
    for (Target t : kAllTargets) {
        const auto pop = toy::units(g, gt, t);
        for (std::size_t n = 1; n <= 3; ++n) {
            for (std::size_t k = 0; k < g.n_events(); ++k) {
                const toy::EnumerationResult e = toy::enumerate_case(pop, pi, k, n);
                worst_total = std::max(worst_total, e.total_error());
                double bias = std::fabs(e.expected_ratio - e.true_ratio);
                if (e.true_ratio != 0.0) {
                    bias /= std::fabs(e.true_ratio);
                    worst_bias = std::max(worst_bias, bias);
                    ++checked;
                } else {
                    // zero truth: require the ratio to be exact
                    if (bias > 1e-12) worst_bias = std::max(worst_bias, 1.0);
                }
                rows.push_back({{"target", std::string(to_string(t))}, {"n", n}, {"event", k},
                                {"total_error", e.total_error()}, {"true_ratio", e.true_ratio},
                                {"expected_ratio", e.expected_ratio}});
            }
        }
    }
    Outcome r;
    r.pass = worst_total <= 1e-12 && worst_bias < 0.05 && checked > 0;
    r.detail = "2-event 3x2 grid, density pi, sizes 1-3: max total error " + fmt(worst_total, 3) +
               ", max relative ratio bias " + fmt(worst_bias, 3);
    r.data = {{"max_total_error", worst_total}, {"max_ratio_bias", worst_bias}, {"cases", rows}};
    return r;
}

// ---- 5 -----------------------------------------------------------------------

Outcome convergence(Context& ctx) {
    const std::size_t budget = static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(ctx.gt.simulations())));
    ExperimentConfig c = ctx.pick("methods", Method::density, Target::speed_reduction, false, false, 10);
    c.stopping = {{StopKind::budget, static_cast<double>(budget)}};
    const std::size_t quarter = budget / 4;
    const auto cps = std::vector<std::size_t>{quarter, 2 * quarter, 3 * quarter, budget};
    const auto t0 = Clock::now();
    Evaluation e = evaluate_rmse(c, ctx.grid, ctx.gt, cps);
    ctx.suite_seconds += seconds_since(t0);

    Outcome r;
    r.pass = true;
    r.data["budget"] = budget;
    for (Target t : kAllTargets) {
        const RmseCurve& cv = e.curve(t);
        const std::size_t last = cv.sims.size() - 1;
        const double se_mean = cv.sd[last] / std::sqrt(static_cast<double>(cv.reps[last]));
        const double z = (cv.mean[last] - cv.truth) / se_mean;
        bool decreasing = true;
        for (std::size_t j = 1; j < cv.rmse.size(); ++j) decreasing = decreasing && cv.rmse[j] < cv.rmse[j - 1];
        const bool ok = std::fabs(z) <= 2.0 && decreasing;
        r.pass = r.pass && ok;
        r.detail += std::string(r.detail.empty() ? "" : "; ") + std::string(to_string(t)) + " z=" + fmt(z, 3) +
                    " rmse " + fmt(cv.rmse[0], 3) + ">" + fmt(cv.rmse[1], 3) + ">" + fmt(cv.rmse[2], 3) + ">" +
                    fmt(cv.rmse[3], 3) + (ok ? "" : " [fail]");
        r.data[std::string(to_string(t))] = {{"mean", cv.mean[last]}, {"truth", cv.truth}, {"z", z},
                                             {"rmse", cv.rmse}, {"sims", cv.sims}};
    }
    return r;
}

// ---- 6 -----------------------------------------------------------------------

Outcome assr_benefit(Context& ctx) {
    Outcome r;
    r.pass = false;
    for (Target t : kAllTargets) {
        const Evaluation& on = ctx.eval(ctx.pick("assr", Method::active, t, true, false, 10), ctx.budget);
        const Evaluation& off = ctx.eval(ctx.pick("assr", Method::active, t, false, false, 10), ctx.budget);
        const double a = rmse_at(on.curve(t), ctx.budget), b = rmse_at(off.curve(t), ctx.budget);
        const double reduction = 1.0 - a / b;
        r.pass = r.pass || reduction >= 0.20;
        r.detail += std::string(r.detail.empty() ? "" : "; ") + std::string(to_string(t)) + " " + fmt(b, 3) + " -> " +
                    fmt(a, 3) + " (" + fmt(100.0 * reduction, 3) + "%)";
        r.data[std::string(to_string(t))] = {{"rmse_assr", a}, {"rmse_noassr", b}, {"reduction", reduction}};
    }
    r.detail += "; suite time " + fmt(ctx.suite_seconds, 4) + " s";
    r.pass = r.pass && ctx.suite_seconds < 1800.0;
    return r;
}

// ---- 7 -----------------------------------------------------------------------

Outcome stratification(Context& ctx) {
    const Evaluation& post = ctx.eval(ctx.pick("strat-noassr", Method::severity, {}, false, false, 10), ctx.budget);
    const Evaluation& strat =
        ctx.eval(ctx.pick("strat-noassr", Method::severity, {}, false, true, ctx.grid.n_events()), ctx.budget);
    Outcome r;
    r.pass = true;
    for (Target t : kAllTargets) {
        const RmseCurve& p = post.curve(t);
        const RmseCurve& s = strat.curve(t);
        std::size_t checked = 0, worse = 0;
        json pts = json::array();
        for (std::size_t j = 0; j < p.sims.size(); ++j) {
            if (p.sims[j] < 2000) continue;
            ++checked;
            if (!(s.rmse[j] <= p.rmse[j])) ++worse;
            pts.push_back({{"sims", p.sims[j]}, {"post", p.rmse[j]}, {"strat", s.rmse[j]}});
        }
        r.pass = r.pass && worse == 0 && checked > 0;
        r.detail += std::string(r.detail.empty() ? "" : "; ") + std::string(to_string(t)) + " strat worse at " +
                    std::to_string(worse) + "/" + std::to_string(checked) + " (final " + fmt(p.rmse.back(), 3) +
                    " vs " + fmt(s.rmse.back(), 3) + ")";
        r.data[std::string(to_string(t))] = pts;
    }
    return r;
}

// ---- 8 -----------------------------------------------------------------------

Outcome method_ordering(Context& ctx) {
    const Evaluation& dens = ctx.eval(ctx.pick("methods", Method::density, {}, false, false, 10), ctx.budget);
    Outcome r;
    r.pass = true;
    for (Target t : kAllTargets) {
        const Evaluation& act = ctx.eval(ctx.pick("methods", Method::active, t, false, false, 10), ctx.budget);
        const double a = act.curve(t).rmse.back(), d = dens.curve(t).rmse.back();
        r.pass = r.pass && a <= d;
        r.detail += std::string(r.detail.empty() ? "" : "; ") + std::string(to_string(t)) + " active " + fmt(a, 3) +
                    " vs density " + fmt(d, 3);
        r.data[std::string(to_string(t))] = {{"active", a}, {"density", d}};
    }
    return r;
}

// ---- 9 -----------------------------------------------------------------------

Outcome batch_trend(Context& ctx) {
    const std::size_t K = ctx.grid.n_events();
    Outcome r;
    r.pass = true;
    for (Target t : kAllTargets) {
        const RmseCurve& small = ctx.eval(ctx.pick("batch-size", Method::active, t, true, true, K), ctx.budget).curve(t);
        const RmseCurve& large =
            ctx.eval(ctx.pick("batch-size", Method::active, t, true, true, 10 * K), ctx.budget).curve(t);
        std::size_t checked = 0, worse = 0;
        json pts = json::array();
        for (std::size_t j = 0; j < small.sims.size(); ++j) {
            if (small.sims[j] < 2000) continue;
            ++checked;
            if (!(small.rmse[j] <= large.rmse[j])) ++worse;
            pts.push_back({{"sims", small.sims[j]}, {"batch_1x", small.rmse[j]}, {"batch_10x", large.rmse[j]}});
        }
        r.pass = r.pass && worse == 0 && checked > 0;
        r.detail += std::string(r.detail.empty() ? "" : "; ") + std::string(to_string(t)) + " " +
                    std::to_string(K) + " worse at " + std::to_string(worse) + "/" + std::to_string(checked) +
                    " (final " + fmt(small.rmse.back(), 3) + " vs " + fmt(large.rmse.back(), 3) + ")";
        r.data[std::string(to_string(t))] = pts;
    }
    return r;
}

// ---- 10 ----------------------------------------------------------------------

Outcome shrinkage_algebra(Context& ctx) {
    Rng rng(stream_seed(ctx.seed, 77));
    std::size_t bad = 0, trials = 0;
    for (int it = 0; it < 20000; ++it) {
        const double su = std::pow(10.0, 4.0 * rng.uniform() - 2.0);
        const double sk = std::pow(10.0, 4.0 * rng.uniform() - 2.0);
        const std::size_t n = rng.below(1000);
        const double rho = shrinkage_weight(su, sk, n);
        ++trials;
        if (!(rho >= 0.0 && rho <= 1.0)) ++bad;
        if (n == 0 && rho != 0.0) ++bad;
        if (n > 0 && std::fabs(rho - su / (su + sk / static_cast<double>(n))) > 1e-12) ++bad;
    }
    // limit n_k -> large
    const double big = shrinkage_weight(1.0, 1.0, std::size_t{1} << 40);
    if (std::fabs(big - 1.0) > 1e-9) ++bad;

    // shrink(): n_k = 0 -> grand mean; huge n_k -> raw; values between raw and mean
    for (int it = 0; it < 200; ++it) {
        std::vector<CaseEstimate> cases(8);
        for (std::size_t k = 0; k < cases.size(); ++k) {
            CaseEstimate& c = cases[k];
            c.defined = true;
            c.value = 10.0 * rng.uniform();
            c.within_var = 1.0 + rng.uniform();
            c.n_crash = 1 + rng.below(50);
        }
        cases[0].n_crash = 0;
        cases[0].defined = false;
        cases[1].n_crash = std::size_t{1} << 50;
        const auto s = shrink(cases);
        ++trials;
        if (!s) {
            ++bad;
            continue;
        }
        if (std::fabs(s->values[0] - s->grand_mean) > 1e-9) ++bad;
        if (std::fabs(s->values[1] - cases[1].value) > 1e-9) ++bad;
        for (std::size_t k = 1; k < cases.size(); ++k) {
            const double lo = std::min(cases[k].value, s->grand_mean), hi = std::max(cases[k].value, s->grand_mean);
            if (s->values[k] < lo - 1e-12 || s->values[k] > hi + 1e-12) ++bad;
            if (s->rho[k] < 0.0 || s->rho[k] > 1.0) ++bad;
        }
    }
    Outcome r;
    r.pass = bad == 0;
    r.detail = std::to_string(trials) + " randomized checks, " + std::to_string(bad) + " failures";
    r.data = {{"trials", trials}, {"failures", bad}};
    return r;
}

// ---- 11 ----------------------------------------------------------------------

ScenarioGrid three_cells() {
    GridConfig c;
    c.n_events = 1;
    c.oeoff_levels = {0.0, 1.0, 2.0};
    c.decel_levels = {3.75};
    c.glance_pmf = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    c.decel_pmf = {1.0};
    return build_grid(c);
}

Outcome active_scheme_check(Context& ctx) {
    std::size_t bad = 0;
    std::vector<std::string> notes;
    const ScenarioGrid& g = ctx.grid;
    KnowledgeMap km(g, true);
    Rng rng(stream_seed(ctx.seed, 11));
    std::vector<double> p(g.n_cells()), y(g.n_cells()), mu(g.n_events());
    for (std::size_t i = 0; i < g.n_cells(); ++i) {
        p[i] = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
        y[i] = 30.0 * rng.uniform();
    }
    for (double& m : mu) m = 15.0 * rng.uniform();
    double worst_norm = 0.0;
    for (bool stratified : {false, true}) {
        ActiveInputs in{Target::speed_reduction, p, y, 1.5, mu};
        const auto s = active_scheme(in, g, km, stratified, kDefaultFloor);
        const auto s0 = active_scheme(in, g, km, stratified, 0.0);
        if (!s || !s0) {
            ++bad;
            continue;
        }
        const std::size_t scopes = stratified ? g.n_events() : 1;
        for (std::size_t q = 0; q < scopes; ++q) {
            const std::size_t b = stratified ? s->case_begin[q] : 0, e = stratified ? s->case_begin[q + 1] : s->size();
            double sum = 0.0;
            for (std::size_t j = b; j < e; ++j) {
                sum += s->pi[j];
                const double floor_pi = kDefaultFloor / static_cast<double>(e - b);
                if (s->pi[j] < floor_pi * (1.0 - 1e-12)) ++bad;
                if (p[s->cells[j]] == 0.0 && s0->pi[j] != 0.0) ++bad;
            }
            worst_norm = std::max(worst_norm, std::fabs(sum - 1.0));
        }
    }
    if (worst_norm > 1e-9) ++bad;

    // hand-computed 3-cell fixtures
    const ScenarioGrid t3 = three_cells();
    KnowledgeMap k3(t3, true);
    {
        std::vector<double> pp{1.0, 1.0, 0.0}, yy{1.0, 3.0, 5.0}, mm{0.0};
        ActiveInputs in{Target::speed_reduction, pp, yy, 0.0, mm};
        const auto s = active_scheme(in, t3, k3, false, 0.0);
        if (!s || std::fabs(s->pi[1] / s->pi[0] - 3.0) > 1e-12 || s->pi[2] != 0.0) ++bad;
        ActiveInputs sig{Target::speed_reduction, pp, yy, 2.0, mm};
        const auto q = active_scheme(sig, t3, k3, false, 0.0);
        if (!q || std::fabs(q->pi[1] / q->pi[0] - std::sqrt(13.0 / 5.0)) > 1e-12) ++bad;
    }
    {
        std::vector<double> pp{0.25, 1.0, 0.5}, yy{4.0, 2.0, 1.0}, mm{1.0};
        ActiveInputs in{Target::speed_reduction, pp, yy, 1.0, mm};
        const auto s = active_scheme(in, t3, k3, true, 0.0);
        // c = w sqrt(p ((y - mu)^2 + sigma^2)) with equal w
        const double c0 = std::sqrt(0.25 * 10.0), c1 = std::sqrt(1.0 * 2.0), c2 = std::sqrt(0.5 * 1.0);
        if (!s || std::fabs(s->pi[0] / s->pi[1] - c0 / c1) > 1e-12 || std::fabs(s->pi[2] / s->pi[1] - c2 / c1) > 1e-12)
            ++bad;
    }
    Outcome r;
    r.pass = bad == 0;
    r.detail = "default grid max |sum pi - 1| = " + fmt(worst_norm, 3) + " (global and per stratum), " +
               std::to_string(bad) + " failed checks";
    r.data = {{"max_normalization_error", worst_norm}, {"failures", bad}};
    return r;
}

// ---- 12 ----------------------------------------------------------------------

Outcome stopping_rules(Context&) {
    const std::vector<StoppingRule> se_rule{{StopKind::absolute_se, 0.025}};
    const std::vector<double> trace{0.2, 0.1, 0.06, 0.04, 0.03, 0.025, 0.024, 0.02};
    std::size_t stop_at = trace.size();
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (should_stop(se_rule, 1.0, trace[i], 100 * i, i).stop) {
            stop_at = i;
            break;
        }
    }
    const std::vector<StoppingRule> cv_rule{{StopKind::cv, 5.0}};
    bool cv_zero_stopped = false;
    for (double se : {1.0, 1e-3, 1e-9, 0.0}) cv_zero_stopped = cv_zero_stopped || should_stop(cv_rule, 0.0, se, 0, 0).stop;
    const bool cv_nonzero = should_stop(cv_rule, 2.0, 0.05, 0, 0).stop;
    Outcome r;
    r.pass = stop_at == 6 && !cv_zero_stopped && cv_nonzero;
    r.detail = "absolute_se:0.025 stops at trace index " + std::to_string(stop_at) + " (SE " +
               (stop_at < trace.size() ? fmt(trace[stop_at], 3) : "none") + "); cv stops at value 0: " +
               (cv_zero_stopped ? "yes" : "no");
    r.data = {{"stop_index", stop_at}, {"cv_stops_at_zero", cv_zero_stopped}};
    return r;
}

// ---- 13 ----------------------------------------------------------------------

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism(Context& ctx) {
    ExperimentConfig c = ctx.pick("methods", Method::active, Target::speed_reduction, false, false, 10);
    c.repetitions = 8;
    c.stopping = {{StopKind::budget, 1500.0}};
    const auto cps = checkpoint_grid(250, 1500);
    std::string bytes[2];
    for (int i = 0; i < 2; ++i) {
        const Evaluation e = evaluate_rmse(c, ctx.grid, ctx.gt, cps);
        std::ostringstream os;
        write_rmse_csv(os, std::span<const Evaluation>(&e, 1));
        bytes[i] = os.str();
    }
    const Evaluation serial = evaluate_rmse_serial(c, ctx.grid, ctx.gt, cps);
    std::ostringstream os;
    write_rmse_csv(os, std::span<const Evaluation>(&serial, 1));
    bool same = bytes[0] == bytes[1] && bytes[0] == os.str() && !bytes[0].empty();
    std::string detail = "library: two parallel runs and one serial run " + std::string(same ? "identical" : "differ") +
                         " (" + std::to_string(bytes[0].size()) + " bytes)";

    if (!ctx.cli.empty()) {
        std::string out[2];
        for (int i = 0; i < 2; ++i) {
            const std::string path = "acceptance_evaluate_" + std::to_string(i) + ".csv";
            const std::string cmd = "\"" + ctx.cli +
                                    "\" -q evaluate --method active --target crash_avoidance --seed 7 "
                                    "--repetitions 6 --budget 1200 --out " +
                                    path;
            const int rc = std::system(cmd.c_str());
            out[i] = rc == 0 ? slurp(path) : std::string();
            std::remove(path.c_str());
        }
        const bool cli_same = !out[0].empty() && out[0] == out[1];
        same = same && cli_same;
        detail += "; CLI evaluate twice " + std::string(cli_same ? "byte-identical" : "differs or failed") + " (" +
                  std::to_string(out[0].size()) + " bytes)";
    }
    Outcome r;
    r.pass = same;
    r.detail = detail;
    return r;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    Context ctx{build_grid(ScenarioConfig{}), GroundTruth{}, 0.0};
    std::string report;
    std::vector<int> only;
    app.add_option("--reps", ctx.reps, "repetitions for the sampling comparisons")->check(CLI::PositiveNumber);
    app.add_option("--seed", ctx.seed, "base seed");
    app.add_option("--budget", ctx.budget, "simulation budget for criteria 6-9")->check(CLI::Range(2000, 88440));
    app.add_option("--step", ctx.step, "RMSE checkpoint spacing")->check(CLI::PositiveNumber);
    app.add_option("--cli", ctx.cli, "crashsamp executable for the CLI determinism check");
    app.add_option("--report", report, "write a JSON report");
    app.add_option("--only", only, "run only these criteria")->check(CLI::Range(1, 13));
    CLI11_PARSE(app, argc, argv);

    const auto t0 = Clock::now();
    ctx.gt = build_ground_truth(ctx.grid);
    ctx.gt_seconds = seconds_since(t0);

    using Check = Outcome (*)(Context&);
    const std::vector<std::pair<const char*, Check>> checks{
        {"grid fidelity", grid_fidelity},
        {"ASSR soundness", assr_soundness},
        {"simulator monotonicity", monotonicity},
        {"estimator correctness at toy scale", toy_estimator},
        {"density sampling convergence", convergence},
        {"ASSR benefit", assr_benefit},
        {"stratification benefit", stratification},
        {"method ordering", method_ordering},
        {"batch-size trend", batch_trend},
        {"shrinkage algebra", shrinkage_algebra},
        {"active sampling scheme", active_scheme_check},
        {"stopping rules", stopping_rules},
        {"determinism", determinism},
    };

    json doc = {{"reps", ctx.reps}, {"seed", ctx.seed}, {"budget", ctx.budget}, {"criteria", json::array()}};
    int failed = 0;
    for (std::size_t i = 0; i < checks.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        const auto t = Clock::now();
        Outcome o;
        try {
            o = checks[i].second(ctx);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        const double secs = seconds_since(t);
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << checks[i].first << ": " << o.detail << " ["
                  << fmt(secs, 3) << " s]" << std::endl;
        doc["criteria"].push_back(
            {{"id", id}, {"name", checks[i].first}, {"pass", o.pass}, {"detail", o.detail}, {"seconds", secs},
             {"data", o.data}});
    }
    std::cout << (failed ? "FAILED " : "ALL PASSED ") << failed << " criteria failed, total " << fmt(seconds_since(t0), 4)
              << " s" << std::endl;
    if (!report.empty()) {
        std::ofstream out(report);
        if (!out) {
            std::cerr << "cannot write " << report << "\n";
            return 125;
        }
        out << doc.dump(2) << "\n";
    }
    return std::min(failed, 125);
}
