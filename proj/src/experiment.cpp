#include "crashsamp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "crashsamp/rng.hpp"

namespace crashsamp {

const char* to_string(Method m) {
    switch (m) {
        case Method::density: return "density";
        case Method::severity: return "severity";
        case Method::active: return "active";
    }
    return "?";
}

Method parse_method(const std::string& s) {
    for (Method m : {Method::density, Method::severity, Method::active}) {
        if (s == to_string(m)) return m;
    }
    throw ConfigError("unknown method '" + s + "'");
}

void ExperimentConfig::validate(const ScenarioGrid& grid) const {
    if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
    if (stratified && batch_size % grid.n_events() != 0) {
        throw ConfigError("stratified sampling needs batch_size to be a multiple of " + std::to_string(grid.n_events()) +
                          " (got " + std::to_string(batch_size) + ")");
    }
    if (repetitions == 0) throw ConfigError("repetitions must be at least 1");
    bool bounded = false;
    for (const StoppingRule& r : stopping) {
        if (!(r.threshold > 0.0) || !std::isfinite(r.threshold)) throw ConfigError("stopping thresholds must be positive");
        bounded = bounded || r.kind == StopKind::budget || r.kind == StopKind::max_iterations;
    }
    if (!bounded) throw ConfigError("at least one budget or max_iterations stopping rule is required");
    if (!(floor > 0.0 && floor < 1.0)) throw ConfigError("floor must lie in (0, 1)");
    if (!(refit_growth >= 0.0) || !std::isfinite(refit_growth)) throw ConfigError("refit_growth must be non-negative");
    forest.validate();
    if (forest.min_records < 2) throw ConfigError("min_records must be at least 2");
    if (checkpoint_step == 0) throw ConfigError("checkpoint_step must be at least 1");
    if (grid.n_events() > 0xffff || grid.n_oeoff() > 0xffff || grid.n_decel() > 0xffff) {
        throw ConfigError("grid too large for the predictor's feature encoding");
    }
}

std::optional<std::size_t> ExperimentConfig::budget() const {
    std::optional<std::size_t> b;
    for (const StoppingRule& r : stopping) {
        if (r.kind != StopKind::budget) continue;
        const auto v = static_cast<std::size_t>(std::ceil(r.threshold));
        b = b ? std::max(*b, v) : v;
    }
    return b;
}

std::string ExperimentConfig::label() const {
    std::string s = to_string(method);
    if (method == Method::active) s += ":" + std::string(to_string(target));
    s += assr ? ":assr" : ":noassr";
    s += stratified ? ":strat" : ":post";
    s += ":" + std::to_string(batch_size);
    return s;
}

namespace {

const std::set<std::string> kExperimentKeys{
    "method", "target",  "assr",      "stratified",   "batch_size",    "repetitions", "stopping",
    "seed",   "shrinkage", "floor",   "refit_growth", "n_trees",       "max_depth",   "mtry",
    "min_node_size", "min_records", "holdout_fraction", "checkpoint_step"};

}  // namespace

ExperimentConfig load_experiment_config(const KvFile& kv) {
    ExperimentConfig c;
    const std::string s = "experiment";
    kv.require_known(s, kExperimentKeys);
    if (kv.has(s, "method")) c.method = parse_method(kv.raw(s, "method"));
    if (kv.has(s, "target")) c.target = parse_target(kv.raw(s, "target"));
    if (kv.has(s, "assr")) c.assr = kv.get_bool(s, "assr");
    if (kv.has(s, "stratified")) c.stratified = kv.get_bool(s, "stratified");
    if (kv.has(s, "batch_size")) c.batch_size = kv.get_uint(s, "batch_size");
    if (kv.has(s, "repetitions")) c.repetitions = kv.get_uint(s, "repetitions");
    if (kv.has(s, "stopping")) {
        c.stopping.clear();
        std::istringstream in(kv.raw(s, "stopping"));
        std::string tok;
        while (in >> tok) c.stopping.push_back(parse_stopping_rule(tok));
    }
    if (kv.has(s, "seed")) c.seed = kv.get_uint(s, "seed");
    if (kv.has(s, "shrinkage") && kv.raw(s, "shrinkage") != "auto") c.shrinkage = kv.get_bool(s, "shrinkage");
    if (kv.has(s, "floor")) c.floor = kv.get_double(s, "floor");
    if (kv.has(s, "refit_growth")) c.refit_growth = kv.get_double(s, "refit_growth");
    if (kv.has(s, "n_trees")) c.forest.n_trees = kv.get_uint(s, "n_trees");
    if (kv.has(s, "max_depth")) c.forest.max_depth = kv.get_uint(s, "max_depth");
    if (kv.has(s, "mtry")) c.forest.mtry = kv.get_uint(s, "mtry");
    if (kv.has(s, "min_node_size")) c.forest.min_node_size = kv.get_uint(s, "min_node_size");
    if (kv.has(s, "min_records")) c.forest.min_records = kv.get_uint(s, "min_records");
    if (kv.has(s, "holdout_fraction")) c.forest.holdout_fraction = kv.get_double(s, "holdout_fraction");
    if (kv.has(s, "checkpoint_step")) c.checkpoint_step = kv.get_uint(s, "checkpoint_step");
    return c;
}

void store_experiment_config(const ExperimentConfig& c, KvFile& kv) {
    const std::string s = "experiment";
    kv.set(s, "method", to_string(c.method));
    kv.set(s, "target", std::string(to_string(c.target)));
    kv.set_bool(s, "assr", c.assr);
    kv.set_bool(s, "stratified", c.stratified);
    kv.set_uint(s, "batch_size", c.batch_size);
    kv.set_uint(s, "repetitions", c.repetitions);
    std::string rules;
    for (const StoppingRule& r : c.stopping) rules += (rules.empty() ? "" : " ") + format_stopping_rule(r);
    kv.set(s, "stopping", rules);
    kv.set_uint(s, "seed", c.seed);
    if (c.shrinkage) {
        kv.set_bool(s, "shrinkage", *c.shrinkage);
    } else {
        kv.set(s, "shrinkage", "auto");
    }
    kv.set_double(s, "floor", c.floor);
    kv.set_double(s, "refit_growth", c.refit_growth);
    kv.set_uint(s, "n_trees", c.forest.n_trees);
    kv.set_uint(s, "max_depth", c.forest.max_depth);
    kv.set_uint(s, "mtry", c.forest.mtry);
    kv.set_uint(s, "min_node_size", c.forest.min_node_size);
    kv.set_uint(s, "min_records", c.forest.min_records);
    kv.set_double(s, "holdout_fraction", c.forest.holdout_fraction);
    kv.set_uint(s, "checkpoint_step", c.checkpoint_step);
}

// ---- outcome sources -------------------------------------------------------

std::vector<SimOutcome> GroundTruthSource::baseline(const std::vector<std::size_t>& cells) const {
    std::vector<SimOutcome> out;
    out.reserve(cells.size());
    for (std::size_t i : cells) out.push_back(gt_->baseline(i));
    return out;
}

std::vector<SimOutcome> GroundTruthSource::countermeasure(const std::vector<std::size_t>& cells) const {
    std::vector<SimOutcome> out;
    out.reserve(cells.size());
    for (std::size_t i : cells) out.push_back(gt_->countermeasure(i));
    return out;
}

namespace {

template <class Fn>
std::vector<SimOutcome> simulate_cells(const ScenarioGrid& grid, const std::vector<std::size_t>& cells, Fn fn) {
    std::vector<SimOutcome> out(cells.size());
    bool failed = false;
    std::string message;
    const long n = static_cast<long>(cells.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (long j = 0; j < n; ++j) {
        try {
            const ScenarioCell c = grid.cell(cells[static_cast<std::size_t>(j)]);
            out[static_cast<std::size_t>(j)] =
                fn(grid.event(c.event_id), grid.oeoff(c.oeoff_idx), grid.decel(c.decel_idx), grid.sim());
        } catch (const std::exception& e) {
#pragma omp critical(simulate_cells_error)
            {
                failed = true;
                message = e.what();
            }
        }
    }
    if (failed) throw SimulationFault(message);
    return out;
}

}  // namespace

std::vector<SimOutcome> SimulatorSource::baseline(const std::vector<std::size_t>& cells) const {
    return simulate_cells(*grid_, cells, simulate_baseline);
}

std::vector<SimOutcome> SimulatorSource::countermeasure(const std::vector<std::size_t>& cells) const {
    return simulate_cells(*grid_, cells, simulate_countermeasure);
}

// ---- trace -----------------------------------------------------------------

void write_trace_csv(std::ostream& out, const EstimateTrace& trace) {
    out << "iteration,sims_used";
    for (Target t : kAllTargets) out << ',' << to_string(t) << ',' << to_string(t) << "_se";
    out << ",scheme,fallback\n";
    for (const TraceRow& r : trace.rows) {
        out << r.iteration << ',' << r.sims_used;
        for (Target t : kAllTargets) {
            out << ',' << format_double(r.value[target_index(t)]) << ',' << format_double(r.se[target_index(t)]);
        }
        out << ',' << to_string(r.scheme) << ',' << (r.fallback ? 1 : 0) << '\n';
    }
}

// ---- experiment loop ---------------------------------------------------------

namespace {

class Runner {
public:
    Runner(const ExperimentConfig& cfg, const ScenarioGrid& grid, const OutcomeSource& source, std::size_t rep)
        : cfg_(cfg),
          grid_(grid),
          source_(source),
          km_(grid, cfg.assr),
          rep_seed_(stream_seed(cfg.seed, rep)),
          rng_(rep_seed_),
          draws_case_(grid.n_events(), 0),
          observed_(grid.n_cells(), 0) {
        for (auto& a : acc_) a.assign(grid.n_events(), CaseAccumulator{});
    }

    ExperimentResult run(bool keep_artifacts) {
        ExperimentResult res;
        initialize();
        const SchemeKind base_kind = cfg_.method == Method::severity ? SchemeKind::severity
                                     : cfg_.method == Method::density ? SchemeKind::density
                                                                       : SchemeKind::active;
        auto est = estimate();
        push_row(res.trace, 0, est, base_kind, false);
        std::size_t iteration = 0;
        const SamplingScheme* scheme = nullptr;
        while (true) {
            const StopDecision d = should_stop(cfg_.stopping, est[target_index(cfg_.target)].value,
                                               est[target_index(cfg_.target)].se, sims_, iteration);
            if (d.stop) {
                res.trace.stop_reason = std::string(to_string(*d.reason));
                break;
            }
            if (km_.samplable_count() == 0 || (last_batch_free_ && nothing_left_to_learn())) {
                res.trace.stop_reason = "exhausted";
                break;
            }
            ++iteration;
            bool fallback = false;
            scheme = &next_scheme(est, fallback);
            if (fallback) ++res.fallback_iterations;
            const std::vector<Draw> draws = draw_batch(*scheme, cfg_.batch_size, rng_);
            const std::size_t before = sims_;
            absorb(draws);
            last_batch_free_ = sims_ == before;
            est = estimate();
            push_row(res.trace, iteration, est, scheme->kind, fallback);
        }
        res.final_estimate = est;
        res.sims_used = sims_;
        res.iterations = iteration;
        res.model_fits = fits_;
        if (keep_artifacts) {
            if (scheme) res.last_scheme = *scheme;
            res.knowledge.emplace(std::move(km_));
        }
        return res;
    }

private:
    void initialize() {
        std::vector<std::size_t> init;
        for (const ScenarioCell& c : init_deterministic(grid_)) init.push_back(grid_.index(c));
        resolve(init);
        for (std::size_t f : init) {
            km_.make_certain(f);
            const std::size_t k = grid_.event_of(f);
            const OutcomeTriple y = outcome_of(f);
            const bool crash = km_.at(f).base == BaseState::crash;
            for (Target t : kAllTargets) acc_[target_index(t)][k].add_certainty(grid_.weight_at(f), crash, y.get(t));
            mark_observed(f);
        }
        if (cfg_.method == Method::severity || cfg_.method == Method::active) {
            std::vector<std::optional<double>> m(grid_.n_events());
            for (std::size_t k = 0; k < grid_.n_events(); ++k) m[k] = km_.max_speed(k);
            if (cfg_.method == Method::severity) priorities_ = severity_priorities(grid_, m);
            if (cfg_.method == Method::active) {
                build_ranks(m);
                builder_.emplace(grid_, cfg_.target, cfg_.stratified, cfg_.floor);
            }
        }
        if (cfg_.method == Method::density) priorities_ = density_priorities(grid_);
        density_ = density_priorities(grid_);
    }

    void build_ranks(const std::vector<std::optional<double>>& m) {
        std::vector<double> vals;
        for (const auto& v : m) {
            if (!v) throw InitializationRequired("maximum impact speed unknown after initialization");
            vals.push_back(*v);
        }
        std::vector<double> sorted = vals;
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        m_rank_.resize(vals.size());
        for (std::size_t k = 0; k < vals.size(); ++k) {
            m_rank_[k] = static_cast<std::uint16_t>(std::lower_bound(sorted.begin(), sorted.end(), vals[k]) - sorted.begin());
        }
    }

    // Baseline phase, then countermeasure phase; each phase is one parallel
    // fan-out, so deductions only take effect for later batches.
    void resolve(const std::vector<std::size_t>& cells) {
        std::vector<std::size_t> run;
        for (std::size_t f : cells) {
            if (km_.at(f).base == BaseState::unknown) run.push_back(f);
        }
        if (!run.empty()) {
            const std::vector<SimOutcome> out = source_.baseline(run);
            sims_ += run.size();
            for (std::size_t j = 0; j < run.size(); ++j) note_changes(run[j], km_.record_baseline(run[j], out[j]));
        }
        run.clear();
        for (std::size_t f : cells) {
            if (km_.needs_countermeasure(f).run) run.push_back(f);
        }
        if (!run.empty()) {
            const std::vector<SimOutcome> out = source_.countermeasure(run);
            sims_ += run.size();
            for (std::size_t j = 0; j < run.size(); ++j) note_changes(run[j], km_.record_countermeasure(run[j], out[j]));
        }
    }

    void note_changes(std::size_t f, const std::vector<std::size_t>& deduced) {
        if (!builder_) return;
        builder_->refresh_cell(f, km_);
        for (std::size_t i : deduced) builder_->refresh_cell(i, km_);
    }

    OutcomeTriple outcome_of(std::size_t f) const {
        const CellKnowledge& k = km_.at(f);
        if (k.base != BaseState::crash) return {};
        return make_outcome_triple(SimOutcome{true, k.base_speed, 0}, SimOutcome{k.cm == CmState::crash, k.cm_speed, 0},
                                   grid_.sim().injury);
    }

    void mark_observed(std::size_t f) {
        if (observed_[f]) return;
        observed_[f] = 1;
        observed_list_.push_back(f);
    }

    void absorb(const std::vector<Draw>& draws) {
        std::vector<std::size_t> unique;
        unique.reserve(draws.size());
        for (const Draw& d : draws) {
            if (std::find(unique.begin(), unique.end(), d.flat) == unique.end()) unique.push_back(d.flat);
        }
        resolve(unique);
        for (const Draw& d : draws) {
            const std::size_t k = grid_.event_of(d.flat);
            const OutcomeTriple y = outcome_of(d.flat);
            const bool crash = km_.at(d.flat).base == BaseState::crash;
            for (Target t : kAllTargets) acc_[target_index(t)][k].add_draw(grid_.weight_at(d.flat), d.pi, crash, y.get(t));
            ++draws_case_[k];
            ++draws_total_;
        }
        for (std::size_t f : unique) mark_observed(f);
    }

    std::array<Estimate, 3> estimate() const {
        std::vector<char> certain(grid_.n_events());
        for (std::size_t k = 0; k < grid_.n_events(); ++k) certain[k] = km_.samplable_count(k) == 0 ? 1 : 0;
        std::array<Estimate, 3> est;
        for (Target t : kAllTargets) {
            const auto& a = acc_[target_index(t)];
            est[target_index(t)] = cfg_.stratified ? stratified_combine(a, draws_case_, certain, cfg_.uses_shrinkage())
                                                   : post_stratified_combine(a, draws_total_, certain, cfg_.uses_shrinkage());
            est[target_index(t)].n_sims_used = sims_;
        }
        return est;
    }

    void push_row(EstimateTrace& trace, std::size_t iteration, const std::array<Estimate, 3>& est, SchemeKind kind,
                  bool fallback) const {
        TraceRow r;
        r.iteration = iteration;
        r.sims_used = sims_;
        for (std::size_t t = 0; t < 3; ++t) {
            r.value[t] = est[t].value;
            r.se[t] = est[t].se;
        }
        r.scheme = kind;
        r.fallback = fallback;
        if (!trace.rows.empty() && trace.rows.back().sims_used == sims_) {
            trace.rows.back() = r;
        } else {
            trace.rows.push_back(r);
        }
    }

    bool nothing_left_to_learn() const {
        for (std::size_t i = 0; i < grid_.n_cells(); ++i) {
            if (km_.samplable(i) && !km_.at(i).fully_known()) return false;
        }
        return true;
    }

    const SamplingScheme& fixed_scheme(const std::vector<double>& prio, SchemeKind kind) {
        if (!cached_ || cached_version_ != km_.version() || cached_->kind != kind) {
            cached_ = scheme_from_priorities(prio, grid_, km_, kind, cfg_.stratified, cfg_.floor);
            cached_version_ = km_.version();
        }
        return *cached_;
    }

    const SamplingScheme& next_scheme(const std::array<Estimate, 3>& est, bool& fallback) {
        fallback = false;
        if (cfg_.method == Method::density) return fixed_scheme(priorities_, SchemeKind::density);
        if (cfg_.method == Method::severity) return fixed_scheme(priorities_, SchemeKind::severity);

        maybe_refit();
        if (models_ok_) {
            std::vector<double> mu(grid_.n_events());
            const Estimate& e = est[target_index(cfg_.target)];
            for (std::size_t k = 0; k < mu.size(); ++k) mu[k] = e.per_case[k].mu;
            if (const SamplingScheme* s = builder_->build(mu, km_)) return *s;
        }
        fallback = true;
        return fixed_scheme(density_, SchemeKind::fallback);
    }

    FeatureRow features(std::size_t f) const {
        const ScenarioCell c = grid_.cell(f);
        return {static_cast<std::uint16_t>(c.oeoff_idx), static_cast<std::uint16_t>(c.decel_idx), m_rank_[c.event_id]};
    }

    void maybe_refit() {
        const std::size_t n = observed_list_.size();
        if (fits_ > 0 && static_cast<double>(n) < (1.0 + cfg_.refit_growth) * static_cast<double>(rows_at_fit_)) return;
        rows_at_fit_ = n;
        ++fits_;

        std::vector<FeatureRow> xp, xy;
        std::vector<double> yp, yy;
        xp.reserve(n);
        yp.reserve(n);
        for (std::size_t f : observed_list_) {
            const bool crash = km_.at(f).base == BaseState::crash;
            xp.push_back(features(f));
            yp.push_back(crash ? 1.0 : 0.0);
            if (crash) {
                xy.push_back(features(f));
                yy.push_back(outcome_of(f).get(cfg_.target));
            }
        }
        const TaskKind ykind = is_binary(cfg_.target) ? TaskKind::classification : TaskKind::regression;
        const auto pm = fit(xp, yp, TaskKind::classification, cfg_.forest, stream_seed(rep_seed_, 2 * fits_));
        const auto ym = fit(xy, yy, ykind, cfg_.forest, stream_seed(rep_seed_, 2 * fits_ + 1));
        models_ok_ = gate(pm) == GateDecision::use_model && gate(ym) == GateDecision::use_model;
        if (!models_ok_) return;

        const std::size_t per = grid_.cells_per_event();
        p_grid_.resize(grid_.n_cells());
        y_grid_.resize(grid_.n_cells());
        const auto no = static_cast<std::uint16_t>(grid_.n_oeoff());
        const auto nd = static_cast<std::uint16_t>(grid_.n_decel());
        for (std::size_t k = 0; k < grid_.n_events(); ++k) {
            std::span<double> pb(p_grid_.data() + k * per, per), yb(y_grid_.data() + k * per, per);
            pm->forest.predict_block(no, nd, m_rank_[k], pb);
            ym->forest.predict_block(no, nd, m_rank_[k], yb);
            for (double& v : pb) v = std::clamp(v, 0.0, 1.0);
            if (ykind == TaskKind::classification) {
                for (double& v : yb) v = std::clamp(v, 0.0, 1.0);
            }
        }
        sigma_ = ym->sigma;
        builder_->set_predictions(p_grid_, y_grid_, sigma_, km_);
    }

    const ExperimentConfig& cfg_;
    const ScenarioGrid& grid_;
    const OutcomeSource& source_;
    KnowledgeMap km_;
    std::uint64_t rep_seed_;
    Rng rng_;
    std::array<std::vector<CaseAccumulator>, 3> acc_;
    std::vector<std::size_t> draws_case_;
    std::size_t draws_total_ = 0;
    std::size_t sims_ = 0;
    bool last_batch_free_ = false;
    std::vector<char> observed_;
    std::vector<std::size_t> observed_list_;
    std::vector<std::uint16_t> m_rank_;
    std::vector<double> priorities_;
    std::vector<double> density_;
    std::optional<SamplingScheme> cached_;
    std::optional<ActiveSchemeBuilder> builder_;
    std::uint64_t cached_version_ = 0;

    std::size_t fits_ = 0;
    std::size_t rows_at_fit_ = 0;
    bool models_ok_ = false;
    std::vector<double> p_grid_, y_grid_;
    double sigma_ = 0.0;
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ScenarioGrid& grid, const OutcomeSource& source,
                                std::size_t rep, bool keep_artifacts) {
    cfg.validate(grid);
    Runner r(cfg, grid, source, rep);
    return r.run(keep_artifacts);
}

}  // namespace crashsamp
