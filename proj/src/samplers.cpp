#include "crashsamp/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "crashsamp/kv_file.hpp"

namespace crashsamp {

const char* to_string(SchemeKind k) {
    switch (k) {
        case SchemeKind::density: return "density";
        case SchemeKind::severity: return "severity";
        case SchemeKind::active: return "active";
        case SchemeKind::fallback: return "fallback";
    }
    return "?";
}

double SamplingScheme::probability(std::size_t flat) const {
    auto it = std::lower_bound(cells.begin(), cells.end(), flat);
    if (it == cells.end() || *it != flat) return 0.0;
    return pi[static_cast<std::size_t>(it - cells.begin())];
}

namespace {

// Samplable cells in ascending order plus per-event offsets.
void collect_samplable(SamplingScheme& s, const ScenarioGrid& grid, const KnowledgeMap& knowledge) {
    if (knowledge.samplable_count() == 0) throw SampleSpaceExhausted("no samplable cells left");
    s.cells.clear();
    s.cells.reserve(knowledge.samplable_count());
    s.case_begin.assign(grid.n_events() + 1, 0);
    for (std::size_t i = 0; i < grid.n_cells(); ++i) {
        if (knowledge.samplable(i)) s.cells.push_back(i);
    }
    for (std::size_t k = 0, j = 0; k < grid.n_events(); ++k) {
        s.case_begin[k] = j;
        while (j < s.cells.size() && grid.event_of(s.cells[j]) == k) ++j;
        s.case_begin[k + 1] = j;
    }
    s.pi.resize(s.cells.size());
    s.cdf.resize(s.cells.size());
}

// c is parallel to s.cells. Returns false if some scope sums to zero and
// zero_scope_uniform is off.
bool normalize(SamplingScheme& s, std::span<const double> c, double floor_eps, bool zero_scope_uniform) {
    auto fill = [&](std::size_t b, std::size_t e) -> bool {
        if (b == e) return true;
        double total = 0.0;
        for (std::size_t j = b; j < e; ++j) total += c[j];
        const double n = static_cast<double>(e - b);
        if (total <= 0.0) {
            if (!zero_scope_uniform) return false;
            for (std::size_t j = b; j < e; ++j) s.pi[j] = 1.0 / n;
        } else {
            const double a = (1.0 - floor_eps) / total;
            const double f = floor_eps / n;
            for (std::size_t j = b; j < e; ++j) s.pi[j] = a * c[j] + f;
        }
        double acc = 0.0;
        for (std::size_t j = b; j < e; ++j) {
            acc += s.pi[j];
            s.cdf[j] = acc;
        }
        return true;
    };
    if (s.stratified) {
        for (std::size_t k = 0; k + 1 < s.case_begin.size(); ++k) {
            if (!fill(s.case_begin[k], s.case_begin[k + 1])) return false;
        }
        return true;
    }
    return fill(0, s.cells.size());
}

}  // namespace

std::optional<SamplingScheme> scheme_from_priorities(std::span<const double> priority, const ScenarioGrid& grid,
                                                     const KnowledgeMap& knowledge, SchemeKind kind, bool stratified,
                                                     double floor_eps, bool zero_scope_uniform) {
    if (priority.size() != grid.n_cells()) throw std::invalid_argument("priority vector size does not match grid");
    SamplingScheme s;
    s.kind = kind;
    s.stratified = stratified;
    collect_samplable(s, grid, knowledge);
    std::vector<double> c(s.cells.size());
    for (std::size_t j = 0; j < c.size(); ++j) {
        c[j] = priority[s.cells[j]];
        if (!(c[j] >= 0.0) || !std::isfinite(c[j])) throw std::invalid_argument("sampling priority must be finite and non-negative");
    }
    if (!normalize(s, c, floor_eps, zero_scope_uniform)) return std::nullopt;
    return s;
}

std::vector<double> density_priorities(const ScenarioGrid& grid) {
    std::vector<double> c(grid.n_cells());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = grid.weight_at(i);
    return c;
}

namespace {

// Affine map of [lo, hi] onto [0.1, 1]; a degenerate range maps to 1.
double unit_factor(double v, double lo, double hi) {
    if (hi <= lo) return 1.0;
    return 0.1 + 0.9 * (v - lo) / (hi - lo);
}

}  // namespace

std::vector<double> severity_priorities(const ScenarioGrid& grid, std::span<const std::optional<double>> max_speeds) {
    if (max_speeds.size() != grid.n_events()) throw InitializationRequired("maximum speeds missing for some events");
    double m_lo = 0.0, m_hi = 0.0;
    for (std::size_t k = 0; k < max_speeds.size(); ++k) {
        if (!max_speeds[k]) throw InitializationRequired("maximum speed unknown for event " + std::to_string(k));
        const double m = *max_speeds[k];
        if (k == 0 || m < m_lo) m_lo = m;
        if (k == 0 || m > m_hi) m_hi = m;
    }
    const double o_lo = grid.oeoff(0), o_hi = grid.oeoff(grid.n_oeoff() - 1);
    const double d_lo = grid.decel(0), d_hi = grid.decel(grid.n_decel() - 1);

    std::vector<double> c(grid.n_cells());
    for (std::size_t i = 0; i < c.size(); ++i) {
        const ScenarioCell cell = grid.cell(i);
        const double fo = unit_factor(grid.oeoff(cell.oeoff_idx), o_lo, o_hi);
        const double fd = unit_factor(d_hi - grid.decel(cell.decel_idx), 0.0, d_hi - d_lo);
        const double fm = unit_factor(*max_speeds[cell.event_id], m_lo, m_hi);
        c[i] = grid.weight_at(i) * fo * fd * fm;
    }
    return c;
}

SamplingScheme density_scheme(const ScenarioGrid& grid, const KnowledgeMap& knowledge, bool stratified,
                              double floor_eps) {
    return *scheme_from_priorities(density_priorities(grid), grid, knowledge, SchemeKind::density, stratified, floor_eps);
}

SamplingScheme severity_scheme(const ScenarioGrid& grid, std::span<const std::optional<double>> max_speeds,
                               const KnowledgeMap& knowledge, bool stratified, double floor_eps) {
    return *scheme_from_priorities(severity_priorities(grid, max_speeds), grid, knowledge, SchemeKind::severity,
                                   stratified, floor_eps);
}

std::vector<ScenarioCell> init_deterministic(const ScenarioGrid& grid) {
    std::vector<ScenarioCell> out;
    out.reserve(grid.n_events());
    for (std::size_t k = 0; k < grid.n_events(); ++k) out.push_back(grid.extreme_cell(k));
    return out;
}

double active_priority(double p_hat, double w, double y_hat, double mu_hat, double sigma) {
    const double dy = y_hat - mu_hat;
    return std::sqrt(std::max(0.0, p_hat) * w * w * (dy * dy + sigma * sigma));
}

std::optional<SamplingScheme> active_scheme(const ActiveInputs& in, const ScenarioGrid& grid,
                                            const KnowledgeMap& knowledge, bool stratified, double floor_eps) {
    if (in.mu_hat.size() != grid.n_events()) throw std::invalid_argument("active_scheme: mu_hat size does not match grid");
    ActiveSchemeBuilder b(grid, in.target, stratified, floor_eps);
    b.set_predictions(in.p_hat, in.y_hat, in.sigma, knowledge);
    const SamplingScheme* s = b.build(in.mu_hat, knowledge);
    if (!s) return std::nullopt;
    return *s;
}

ActiveSchemeBuilder::ActiveSchemeBuilder(const ScenarioGrid& grid, Target target, bool stratified, double floor_eps)
    : grid_(&grid), target_(target), stratified_(stratified), floor_(floor_eps) {
    scheme_.kind = SchemeKind::active;
    scheme_.stratified = stratified;
}

void ActiveSchemeBuilder::set_predictions(std::span<const double> p_hat, std::span<const double> y_hat, double sigma,
                                          const KnowledgeMap& knowledge) {
    const std::size_t n = grid_->n_cells();
    if (p_hat.size() != n || y_hat.size() != n) throw std::invalid_argument("active scheme: prediction sizes do not match grid");
    p_hat_.assign(p_hat.begin(), p_hat.end());
    y_hat_.assign(y_hat.begin(), y_hat.end());
    sigma_ = sigma;
    pw2_.resize(n);
    pw_.resize(n);
    y_.resize(n);
    s2_.resize(n);
    for (std::size_t i = 0; i < n; ++i) set_cell(i, knowledge);
    case_mass_.assign(grid_->n_events(), -1.0);
}

void ActiveSchemeBuilder::set_cell(std::size_t i, const KnowledgeMap& knowledge) {
    const CellKnowledge& k = knowledge.at(i);
    const double w = grid_->weight_at(i);
    double p = std::clamp(p_hat_[i], 0.0, 1.0);
    double y = y_hat_[i];
    double s2 = sigma_ * sigma_;
    if (is_binary(target_)) {
        const double yc = std::clamp(y, 0.0, 1.0);
        s2 = yc * (1.0 - yc);
    }
    if (k.base == BaseState::noncrash) {
        p = 0.0;
    } else if (k.base == BaseState::crash) {
        p = 1.0;
        if (k.cm != CmState::unknown) {
            y = make_outcome_triple(SimOutcome{true, k.base_speed, 0}, SimOutcome{k.cm == CmState::crash, k.cm_speed, 0},
                                    grid_->sim().injury)
                    .get(target_);
            s2 = 0.0;
        }
    }
    pw_[i] = p * w;
    pw2_[i] = p * w * w;
    y_[i] = y;
    s2_[i] = s2;
}

void ActiveSchemeBuilder::refresh_cell(std::size_t flat, const KnowledgeMap& knowledge) {
    if (p_hat_.empty()) return;
    set_cell(flat, knowledge);
    case_mass_[grid_->event_of(flat)] = -1.0;
}

const SamplingScheme* ActiveSchemeBuilder::build(std::span<const double> mu_hat, const KnowledgeMap& knowledge) {
    if (p_hat_.empty()) throw std::logic_error("active scheme: predictions not set");
    if (mu_hat.size() != grid_->n_events()) throw std::invalid_argument("active scheme: mu_hat size does not match grid");
    const std::size_t per = grid_->cells_per_event();
    if (!stratified_) {
        for (std::size_t k = 0; k < grid_->n_events(); ++k) {
            if (case_mass_[k] >= 0.0) continue;
            double m = 0.0;
            for (std::size_t j = k * per; j < (k + 1) * per; ++j) m += pw_[j];
            case_mass_[k] = m;
        }
    }
    if (scheme_version_ != knowledge.version() || scheme_.cells.empty()) {
        collect_samplable(scheme_, *grid_, knowledge);
        scheme_version_ = knowledge.version();
    }
    c_.resize(scheme_.cells.size());
    bool any = false;
    for (std::size_t k = 0; k < grid_->n_events(); ++k) {
        const double u = stratified_ ? 1.0 : (case_mass_[k] > 0.0 ? 1.0 / case_mass_[k] : 0.0);
        const double mu = mu_hat[k];
        for (std::size_t j = scheme_.case_begin[k]; j < scheme_.case_begin[k + 1]; ++j) {
            const std::size_t i = scheme_.cells[j];
            const double dy = y_[i] - mu;
            const double c = u * std::sqrt(pw2_[i] * (dy * dy + s2_[i]));
            c_[j] = c;
            any = any || c > 0.0;
        }
    }
    if (!any) return nullptr;
    normalize(scheme_, c_, floor_, true);
    return &scheme_;
}

namespace {

void draw_from(const SamplingScheme& s, std::size_t b, std::size_t e, std::size_t count, Rng& rng,
               std::vector<Draw>& out) {
    if (b == e || count == 0) return;
    const auto first = s.cdf.begin() + static_cast<std::ptrdiff_t>(b);
    const auto last = s.cdf.begin() + static_cast<std::ptrdiff_t>(e);
    const double total = s.cdf[e - 1];
    for (std::size_t r = 0; r < count; ++r) {
        const double u = rng.uniform() * total;
        std::size_t j = b + static_cast<std::size_t>(std::upper_bound(first, last, u) - first);
        if (j >= e) j = e - 1;
        out.push_back({s.cells[j], s.pi[j]});
    }
}

}  // namespace

std::vector<Draw> draw_batch(const SamplingScheme& scheme, std::size_t n_t, Rng& rng) {
    if (n_t == 0) throw ConfigError("batch size must be at least 1");
    if (scheme.cells.empty()) throw SampleSpaceExhausted("no samplable cells left");
    std::vector<Draw> out;
    out.reserve(n_t);
    if (!scheme.stratified) {
        draw_from(scheme, 0, scheme.cells.size(), n_t, rng, out);
        return out;
    }
    const std::size_t K = scheme.case_begin.size() - 1;
    if (n_t % K != 0) {
        throw ConfigError("stratified batch size " + std::to_string(n_t) + " is not a multiple of " + std::to_string(K));
    }
    for (std::size_t k = 0; k < K; ++k) draw_from(scheme, scheme.case_begin[k], scheme.case_begin[k + 1], n_t / K, rng, out);
    return out;
}

void write_scheme_csv(std::ostream& out, const ScenarioGrid& grid, const SamplingScheme& scheme) {
    out << "event_id,oeoff_idx,decel_idx,pi,kind\n";
    for (std::size_t j = 0; j < scheme.cells.size(); ++j) {
        const ScenarioCell c = grid.cell(scheme.cells[j]);
        out << c.event_id << ',' << c.oeoff_idx << ',' << c.decel_idx << ',' << format_double(scheme.pi[j]) << ','
            << to_string(scheme.kind) << '\n';
    }
}

}  // namespace crashsamp
