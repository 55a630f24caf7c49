#pragma once

// Inverse-probability-weighted estimation of crash-conditional case means.
//
// For case k with draws j (multinomial, selection probability pi_j recorded
// at draw time) and certainty cells c:
//
//   T_y = sum_c w_c y_c 1{crash_c} + (1/n) sum_j w_j y_j 1{crash_j} / pi_j
//   T_1 = same with y = 1
//   mu_k = T_y / T_1
//
// Standard errors come from the with-replacement (Hansen-Hurwitz) variance of
// the linearized ratio; certainty terms carry no variance. `n` is the number
// of draws of the design that produced the sample: the per-case count under
// stratification, the pooled count under post-stratification.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crashsamp/types.hpp"

namespace crashsamp {

enum class Provenance { simulated, inferred, certainty };

struct SampleRecord {
    ScenarioCell cell;
    double pi = 1.0;  // selection probability at draw time (ignored for certainty)
    double w = 0.0;
    bool base_crash = false;
    double y = 0.0;
    Provenance provenance = Provenance::simulated;
};

/// Running sums for one case and one target; adding a draw is O(1).
class CaseAccumulator {
public:
    void add_certainty(double w, bool base_crash, double y);
    void add_draw(double w, double pi, bool base_crash, double y);

    std::size_t n_crash() const { return n_crash_; }
    double certainty_y() const { return cert_y_; }
    double certainty_1() const { return cert_1_; }
    double sum_a() const { return s1_; }
    double sum_ay() const { return sy_; }

    friend struct CaseEstimate case_ratio_estimate(const CaseAccumulator& acc, std::size_t n_draws, bool fully_certain);

private:
    std::size_t n_crash_ = 0;
    double cert_y_ = 0.0;
    double cert_1_ = 0.0;
    double s1_ = 0.0;    // sum a_j,       a_j = w_j 1{crash} / pi_j
    double sy_ = 0.0;    // sum a_j y_j
    double syy_ = 0.0;   // sum a_j y_j^2
    double q11_ = 0.0;   // sum a_j^2
    double q1y_ = 0.0;   // sum a_j^2 y_j
    double qyy_ = 0.0;   // sum a_j^2 y_j^2
};

struct CaseEstimate {
    double value = 0.0;
    double se = 0.0;
    std::size_t n_crash = 0;    // sampled baseline crashes (n_k)
    double within_var = 0.0;    // IPW-weighted variance of y among sampled crashes
    double total_y = 0.0;
    double total_1 = 0.0;
    bool defined = false;       // total_1 > 0
    bool exact = false;         // no sampling uncertainty left in this case
};

/// `fully_certain` marks a case whose every cell is in the certainty stratum.
CaseEstimate case_ratio_estimate(const CaseAccumulator& acc, std::size_t n_draws, bool fully_certain = false);
CaseEstimate case_ratio_estimate(std::span<const SampleRecord> records, std::size_t n_draws, bool fully_certain = false);

struct Totals {
    double total_y = 0.0;
    double total_1 = 0.0;
};
/// Hansen-Hurwitz totals only (unbiased for the population totals).
Totals hansen_hurwitz_totals(std::span<const SampleRecord> records, std::size_t n_draws);

struct ShrinkResult {
    std::vector<double> values;  // shrunk case estimates
    std::vector<double> rho;
    double grand_mean = 0.0;
    double between_var = 0.0;    // sigma_u^2
    std::size_t n_available = 0;
};

/// rho_k = s_u^2 / (s_u^2 + s_k^2 / n_k); rho_k = 0 when n_k = 0, rho_k = 1
/// for exact cases. Returns nullopt when no case has a sampled crash
/// (grand mean undefined).
std::optional<ShrinkResult> shrink(std::span<const CaseEstimate> cases);

/// Shrinkage weight for given variances; exposed for property tests.
double shrinkage_weight(double between_var, double within_var, std::size_t n_k);

struct CaseSummary {
    double mu = 0.0;
    std::size_t n = 0;
    double se = 0.0;
};

struct Estimate {
    double value = 0.0;
    double se = 0.0;
    std::size_t n_sims_used = 0;
    std::vector<CaseSummary> per_case;
    bool shrunk = false;
};

/// Equal-weight average of case estimates; SE = (1/K) sqrt(sum SE_k^2).
Estimate combine_cases(std::span<const CaseEstimate> cases, bool shrinkage);

/// Per-case independent samples (n_k draws each).
Estimate stratified_combine(std::span<const CaseAccumulator> cases, std::span<const std::size_t> n_draws_per_case,
                            std::span<const char> fully_certain, bool shrinkage);

/// One pooled sample of n_total draws split by case after the fact.
Estimate post_stratified_combine(std::span<const CaseAccumulator> cases, std::size_t n_total,
                                 std::span<const char> fully_certain, bool shrinkage);

/// CSV row set for estimates. Header: target,value,se,n_sims,iteration
struct EstimateRow {
    Target target;
    double value;
    double se;
    std::size_t n_sims;
    std::size_t iteration;
};
void write_estimates_csv(std::ostream& out, std::span<const EstimateRow> rows);

}  // namespace crashsamp
