#include "crashsamp/scenario_model.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "crashsamp/rng.hpp"

namespace crashsamp {

namespace {

constexpr double kPmfTolerance = 1e-12;

std::vector<double> arithmetic_levels(double first, double step, std::size_t n) {
    std::vector<double> v(n);
    // Rounded to 1e-9 so levels match their decimal spelling (0.3, not 0.30000000000000004).
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = std::round((first + step * static_cast<double>(i)) * 1e9) / 1e9;
    }
    return v;
}

void check_pmf(const std::vector<double>& pmf, std::size_t n, const char* name) {
    if (pmf.size() != n) {
        throw ConfigError(std::string(name) + " has " + std::to_string(pmf.size()) + " entries, expected " +
                          std::to_string(n));
    }
    double sum = 0.0;
    for (double p : pmf) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError(std::string(name) + " has a negative or non-finite entry");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kPmfTolerance) throw ConfigError(std::string(name) + " does not sum to 1");
}

void check_increasing(const std::vector<double>& v, const char* name) {
    if (v.empty()) throw ConfigError(std::string(name) + " is empty");
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (!(v[i] > v[i - 1])) throw ConfigError(std::string(name) + " must be strictly increasing");
    }
}

PrototypeEvent draw_event(std::size_t id, Rng& rng) {
    PrototypeEvent ev;
    ev.id = id;
    ev.fv_speed0 = rng.uniform(20.0, 33.0);
    ev.lv_speed0 = ev.fv_speed0;
    ev.gap0 = rng.uniform(15.0, 50.0);
    ev.lv_decel = rng.uniform(3.0, 8.0);
    return ev;
}

}  // namespace

void GridConfig::validate() const {
    if (n_events < 1) throw ConfigError("n_events must be >= 1");
    check_increasing(oeoff_levels, "oeoff_levels");
    check_increasing(decel_levels, "decel_levels");
    if (oeoff_levels.front() < 0.0) throw ConfigError("oeoff_levels must be non-negative");
    if (decel_levels.front() <= 0.0) throw ConfigError("decel_levels must be positive");
    check_pmf(glance_pmf, oeoff_levels.size(), "glance_pmf");
    check_pmf(decel_pmf, decel_levels.size(), "decel_pmf");
}

std::vector<double> default_glance_pmf(std::span<const double> oeoff_levels, double mass_at_zero, double tail_scale) {
    std::vector<double> pmf(oeoff_levels.size(), 0.0);
    if (pmf.empty()) return pmf;
    if (pmf.size() == 1) {
        pmf[0] = 1.0;
        return pmf;
    }
    double tail = 0.0;
    for (std::size_t i = 1; i < pmf.size(); ++i) {
        pmf[i] = std::exp(-oeoff_levels[i] / tail_scale);
        tail += pmf[i];
    }
    for (std::size_t i = 1; i < pmf.size(); ++i) pmf[i] *= (1.0 - mass_at_zero) / tail;
    pmf[0] = mass_at_zero;
    return pmf;
}

std::vector<double> default_decel_pmf(std::size_t n_levels) {
    std::vector<double> pmf(n_levels);
    const double mid = (static_cast<double>(n_levels) - 1.0) / 2.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n_levels; ++i) {
        pmf[i] = mid + 1.0 - std::abs(static_cast<double>(i) - mid);
        sum += pmf[i];
    }
    for (double& p : pmf) p /= sum;
    return pmf;
}

GridConfig default_grid_config() {
    GridConfig cfg;
    cfg.oeoff_levels = arithmetic_levels(0.0, 0.1, 67);
    cfg.decel_levels = arithmetic_levels(3.75, 0.5, 15);
    cfg.glance_pmf = default_glance_pmf(cfg.oeoff_levels);
    cfg.decel_pmf = default_decel_pmf(cfg.decel_levels.size());
    return cfg;
}

double ScenarioGrid::joint_weight(const ScenarioCell& c) const {
    if (!contains(c)) throw std::out_of_range("scenario cell outside grid");
    return weight(c.oeoff_idx, c.decel_idx);
}

ScenarioGrid build_grid(const GridConfig& config, const SimParams& sim) {
    config.validate();
    ScenarioGrid g;
    g.config_ = config;
    g.sim_ = sim;

    const std::size_t no = config.oeoff_levels.size();
    const std::size_t nd = config.decel_levels.size();
    g.weights_.resize(no * nd);
    for (std::size_t o = 0; o < no; ++o) {
        for (std::size_t d = 0; d < nd; ++d) g.weights_[o * nd + d] = config.glance_pmf[o] * config.decel_pmf[d];
    }

    Rng rng(stream_seed(config.rng_seed, 0));
    const double oeoff_max = config.oeoff_levels.back();
    const double decel_min = config.decel_levels.front();
    g.events_.reserve(config.n_events);
    for (std::size_t k = 0; k < config.n_events; ++k) {
        bool accepted = false;
        for (int attempt = 0; attempt < 1000 && !accepted; ++attempt) {
            PrototypeEvent ev = draw_event(k, rng);
            if (simulate_baseline(ev, oeoff_max, decel_min, sim).crashed) {
                g.events_.push_back(ev);
                accepted = true;
            }
        }
        if (!accepted) {
            throw ConfigError("prototype event " + std::to_string(k) +
                              " cannot crash at the extreme cell after 1000 attempts");
        }
    }
    return g;
}

// ---- config file -------------------------------------------------------

ScenarioConfig load_scenario_config(const KvFile& kv) {
    ScenarioConfig cfg;
    kv.require_known("grid", {"n_events", "oeoff_levels", "decel_levels", "glance_pmf", "decel_pmf", "rng_seed"});
    kv.require_known("sim", {"dt", "anchor_inv_ttc", "driver_jerk", "aeb_enabled", "aeb_ttc", "aeb_decel", "aeb_jerk",
                             "max_time", "injury_beta0", "injury_beta1"});
    GridConfig& g = cfg.grid;
    if (kv.has("grid", "n_events")) g.n_events = kv.get_uint("grid", "n_events");
    if (kv.has("grid", "rng_seed")) g.rng_seed = kv.get_uint("grid", "rng_seed");
    const bool new_oeoff = kv.has("grid", "oeoff_levels");
    const bool new_decel = kv.has("grid", "decel_levels");
    if (new_oeoff) g.oeoff_levels = kv.get_doubles("grid", "oeoff_levels");
    if (new_decel) g.decel_levels = kv.get_doubles("grid", "decel_levels");
    if (kv.has("grid", "glance_pmf")) {
        g.glance_pmf = kv.get_doubles("grid", "glance_pmf");
    } else if (new_oeoff) {
        g.glance_pmf = default_glance_pmf(g.oeoff_levels);
    }
    if (kv.has("grid", "decel_pmf")) {
        g.decel_pmf = kv.get_doubles("grid", "decel_pmf");
    } else if (new_decel) {
        g.decel_pmf = default_decel_pmf(g.decel_levels.size());
    }

    SimParams& s = cfg.sim;
    auto opt = [&](const char* key, double& dst) {
        if (kv.has("sim", key)) dst = kv.get_double("sim", key);
    };
    opt("dt", s.dt);
    opt("anchor_inv_ttc", s.anchor_inv_ttc);
    opt("driver_jerk", s.driver_jerk);
    if (kv.has("sim", "aeb_enabled")) s.aeb_enabled = kv.get_bool("sim", "aeb_enabled");
    opt("aeb_ttc", s.aeb_ttc);
    opt("aeb_decel", s.aeb_decel);
    opt("aeb_jerk", s.aeb_jerk);
    opt("max_time", s.max_time);
    opt("injury_beta0", s.injury.beta0);
    opt("injury_beta1", s.injury.beta1);
    if (!(s.dt > 0.0) || !(s.driver_jerk > 0.0) || !(s.aeb_jerk > 0.0) || !(s.max_time > 0.0)) {
        throw ConfigError("[sim] dt, jerks and max_time must be positive");
    }
    if (!(s.injury.beta1 > 0.0)) throw ConfigError("[sim] injury_beta1 must be positive");
    g.validate();
    return cfg;
}

ScenarioConfig load_scenario_config(const std::string& path) { return load_scenario_config(KvFile::load(path)); }

void store_scenario_config(const ScenarioConfig& cfg, KvFile& kv) {
    const GridConfig& g = cfg.grid;
    kv.set_uint("grid", "n_events", g.n_events);
    kv.set_uint("grid", "rng_seed", g.rng_seed);
    kv.set_doubles("grid", "oeoff_levels", g.oeoff_levels);
    kv.set_doubles("grid", "decel_levels", g.decel_levels);
    kv.set_doubles("grid", "glance_pmf", g.glance_pmf);
    kv.set_doubles("grid", "decel_pmf", g.decel_pmf);
    const SimParams& s = cfg.sim;
    kv.set_double("sim", "dt", s.dt);
    kv.set_double("sim", "anchor_inv_ttc", s.anchor_inv_ttc);
    kv.set_double("sim", "driver_jerk", s.driver_jerk);
    kv.set_bool("sim", "aeb_enabled", s.aeb_enabled);
    kv.set_double("sim", "aeb_ttc", s.aeb_ttc);
    kv.set_double("sim", "aeb_decel", s.aeb_decel);
    kv.set_double("sim", "aeb_jerk", s.aeb_jerk);
    kv.set_double("sim", "max_time", s.max_time);
    kv.set_double("sim", "injury_beta0", s.injury.beta0);
    kv.set_double("sim", "injury_beta1", s.injury.beta1);
}

void save_scenario_config(const ScenarioConfig& cfg, const std::string& path) {
    KvFile kv;
    store_scenario_config(cfg, kv);
    kv.save(path);
}

}  // namespace crashsamp
