#pragma once

// Selection probabilities over the samplable set and multinomial batch draws.
//
// Every scheme is built from non-negative priorities c_i, normalized over the
// samplable cells (globally, or within each case when stratified) and mixed
// with a uniform floor:  pi_i = (1 - eps) c_i / sum c + eps / |S|.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "crashsamp/assr.hpp"
#include "crashsamp/rng.hpp"
#include "crashsamp/scenario_model.hpp"

namespace crashsamp {

/// No samplable cell is left (globally, or in every case when stratified).
struct SampleSpaceExhausted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A scheme needs per-event maximum impact speeds that are not known yet.
struct InitializationRequired : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class SchemeKind { density, severity, active, fallback };

const char* to_string(SchemeKind k);

inline constexpr double kDefaultFloor = 0.01;

struct SamplingScheme {
    SchemeKind kind = SchemeKind::density;
    bool stratified = false;
    std::vector<std::size_t> cells;        // samplable flat indices, ascending
    std::vector<double> pi;                // parallel to cells
    std::vector<std::size_t> case_begin;   // n_events + 1 offsets into cells
    std::vector<double> cdf;               // running sum of pi within each scope

    std::size_t size() const { return cells.size(); }
    /// Probability of `flat`, 0 if not samplable.
    double probability(std::size_t flat) const;
};

/// Normalizes `priority` (one entry per grid cell) over the samplable set.
/// Returns nullopt if every samplable priority in some scope is zero, unless
/// `zero_scope_uniform` is set, in which case such a scope falls back to
/// uniform. Throws SampleSpaceExhausted if nothing is samplable.
std::optional<SamplingScheme> scheme_from_priorities(std::span<const double> priority, const ScenarioGrid& grid,
                                                     const KnowledgeMap& knowledge, SchemeKind kind, bool stratified,
                                                     double floor_eps = kDefaultFloor, bool zero_scope_uniform = true);

/// c_i = w_i.
std::vector<double> density_priorities(const ScenarioGrid& grid);
/// c_i = w_i f_o f_d f_m, each factor mapped affinely onto [0.1, 1]; the
/// deceleration factor uses d_max - d_i. Throws InitializationRequired if a
/// maximum speed is missing.
std::vector<double> severity_priorities(const ScenarioGrid& grid, std::span<const std::optional<double>> max_speeds);

SamplingScheme density_scheme(const ScenarioGrid& grid, const KnowledgeMap& knowledge, bool stratified = false,
                              double floor_eps = kDefaultFloor);
SamplingScheme severity_scheme(const ScenarioGrid& grid, std::span<const std::optional<double>> max_speeds,
                               const KnowledgeMap& knowledge, bool stratified = false, double floor_eps = kDefaultFloor);

/// One cell per event at maximum OEOFF and minimum deceleration.
std::vector<ScenarioCell> init_deterministic(const ScenarioGrid& grid);

/// Active priority: c = sqrt(p w^2 ((y - mu)^2 + sigma^2)).
double active_priority(double p_hat, double w, double y_hat, double mu_hat, double sigma);

struct ActiveInputs {
    Target target = Target::speed_reduction;
    std::span<const double> p_hat;   // per grid cell, baseline crash probability
    std::span<const double> y_hat;   // per grid cell, predicted target value
    double sigma = 0.0;              // hold-out RMSE; unused for binary targets
    std::span<const double> mu_hat;  // per event
};

/// Known cells override predictions (p = 0/1, y = observed, sigma = 0).
/// Non-stratified schemes scale each case by u_k = 1 / sum_{j in k} p_j w_j.
/// Returns nullopt when all priorities are zero (caller falls back to density).
std::optional<SamplingScheme> active_scheme(const ActiveInputs& in, const ScenarioGrid& grid,
                                            const KnowledgeMap& knowledge, bool stratified,
                                            double floor_eps = kDefaultFloor);

/// Incremental form of active_scheme for the sampling loop: the per-cell
/// terms p w^2, y and sigma^2 are kept between iterations and only cells
/// whose knowledge changed are refreshed.
class ActiveSchemeBuilder {
public:
    ActiveSchemeBuilder(const ScenarioGrid& grid, Target target, bool stratified, double floor_eps = kDefaultFloor);

    void set_predictions(std::span<const double> p_hat, std::span<const double> y_hat, double sigma,
                         const KnowledgeMap& knowledge);
    void refresh_cell(std::size_t flat, const KnowledgeMap& knowledge);
    /// nullptr when every samplable priority is zero. The scheme stays valid
    /// until the next call.
    const SamplingScheme* build(std::span<const double> mu_hat, const KnowledgeMap& knowledge);

private:
    void set_cell(std::size_t flat, const KnowledgeMap& knowledge);

    const ScenarioGrid* grid_;
    Target target_;
    bool stratified_;
    double floor_;
    double sigma_ = 0.0;
    std::vector<double> p_hat_, y_hat_;
    std::vector<double> pw2_, y_, s2_, pw_;
    std::vector<double> case_mass_;
    std::vector<double> c_;
    SamplingScheme scheme_;
    std::uint64_t scheme_version_ = ~std::uint64_t{0};
};

struct Draw {
    std::size_t flat;
    double pi;
};

/// n_t multinomial draws. Stratified: n_t / K draws from each case that still
/// has samplable cells; throws ConfigError if n_t is not a multiple of K.
std::vector<Draw> draw_batch(const SamplingScheme& scheme, std::size_t n_t, Rng& rng);

/// Header: event_id,oeoff_idx,decel_idx,pi,kind
void write_scheme_csv(std::ostream& out, const ScenarioGrid& grid, const SamplingScheme& scheme);

}  // namespace crashsamp
