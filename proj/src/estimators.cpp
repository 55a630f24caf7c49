#include "crashsamp/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "crashsamp/kv_file.hpp"

namespace crashsamp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void CaseAccumulator::add_certainty(double w, bool base_crash, double y) {
    if (!base_crash) return;
    cert_y_ += w * y;
    cert_1_ += w;
}

void CaseAccumulator::add_draw(double w, double pi, bool base_crash, double y) {
    if (!base_crash) return;  // contributes a_j = 0; still counted in n by the caller
    const double a = w / pi;
    ++n_crash_;
    s1_ += a;
    sy_ += a * y;
    syy_ += a * y * y;
    q11_ += a * a;
    q1y_ += a * a * y;
    qyy_ += a * a * y * y;
}

CaseEstimate case_ratio_estimate(const CaseAccumulator& acc, std::size_t n_draws, bool fully_certain) {
    CaseEstimate e;
    e.n_crash = acc.n_crash_;
    const double n = static_cast<double>(n_draws);
    e.total_y = acc.cert_y_ + (n_draws ? acc.sy_ / n : 0.0);
    e.total_1 = acc.cert_1_ + (n_draws ? acc.s1_ / n : 0.0);
    e.defined = e.total_1 > 0.0;
    e.exact = fully_certain;
    if (!e.defined) {
        e.se = fully_certain ? 0.0 : kInf;
        return e;
    }
    e.value = e.total_y / e.total_1;

    if (acc.n_crash_ > 0 && acc.s1_ > 0.0) {
        const double mean = acc.sy_ / acc.s1_;
        e.within_var = std::max(0.0, acc.syy_ / acc.s1_ - mean * mean);
    }

    if (fully_certain) {
        e.se = 0.0;
    } else if (n_draws < 2) {
        e.se = kInf;
    } else {
        // d_j = a_j (y_j - mu); HH variance of the mean of d over n draws.
        const double mu = e.value;
        const double sum_d = acc.sy_ - mu * acc.s1_;
        const double sum_d2 = std::max(0.0, acc.qyy_ - 2.0 * mu * acc.q1y_ + mu * mu * acc.q11_);
        const double ss = std::max(0.0, sum_d2 - sum_d * sum_d / n);
        e.se = std::sqrt(ss / (n * (n - 1.0))) / e.total_1;
    }
    return e;
}

namespace {

CaseAccumulator accumulate(std::span<const SampleRecord> records) {
    CaseAccumulator acc;
    for (const SampleRecord& r : records) {
        if (r.provenance == Provenance::certainty) {
            acc.add_certainty(r.w, r.base_crash, r.y);
        } else {
            acc.add_draw(r.w, r.pi, r.base_crash, r.y);
        }
    }
    return acc;
}

}  // namespace

CaseEstimate case_ratio_estimate(std::span<const SampleRecord> records, std::size_t n_draws, bool fully_certain) {
    return case_ratio_estimate(accumulate(records), n_draws, fully_certain);
}

Totals hansen_hurwitz_totals(std::span<const SampleRecord> records, std::size_t n_draws) {
    const CaseAccumulator acc = accumulate(records);
    const double n = static_cast<double>(n_draws);
    return {acc.certainty_y() + (n_draws ? acc.sum_ay() / n : 0.0), acc.certainty_1() + (n_draws ? acc.sum_a() / n : 0.0)};
}

double shrinkage_weight(double between_var, double within_var, std::size_t n_k) {
    if (n_k == 0) return 0.0;
    const double noise = within_var / static_cast<double>(n_k);
    if (noise <= 0.0) return 1.0;
    if (between_var <= 0.0) return 0.0;
    return between_var / (between_var + noise);
}

std::optional<ShrinkResult> shrink(std::span<const CaseEstimate> cases) {
    ShrinkResult r;
    double sum = 0.0;
    double pooled_within = 0.0;
    std::size_t n_within = 0;
    for (const CaseEstimate& c : cases) {
        if (!c.defined || (c.n_crash == 0 && !c.exact)) continue;
        sum += c.value;
        ++r.n_available;
        if (c.n_crash >= 2) {
            pooled_within += c.within_var;
            ++n_within;
        }
    }
    if (r.n_available == 0) return std::nullopt;
    r.grand_mean = sum / static_cast<double>(r.n_available);
    if (r.n_available >= 2) {
        double ss = 0.0;
        for (const CaseEstimate& c : cases) {
            if (!c.defined || (c.n_crash == 0 && !c.exact)) continue;
            ss += (c.value - r.grand_mean) * (c.value - r.grand_mean);
        }
        r.between_var = ss / static_cast<double>(r.n_available - 1);
    }
    const double fallback_within = n_within ? pooled_within / static_cast<double>(n_within) : 0.0;

    r.values.resize(cases.size());
    r.rho.resize(cases.size());
    for (std::size_t k = 0; k < cases.size(); ++k) {
        const CaseEstimate& c = cases[k];
        double rho = 0.0;
        if (c.exact && c.defined) {
            rho = 1.0;
        } else if (c.defined && c.n_crash > 0) {
            const double within = c.n_crash >= 2 ? c.within_var : fallback_within;
            rho = shrinkage_weight(r.between_var, within, c.n_crash);
        }
        r.rho[k] = rho;
        r.values[k] = rho * (c.defined ? c.value : 0.0) + (1.0 - rho) * r.grand_mean;
    }
    return r;
}

Estimate combine_cases(std::span<const CaseEstimate> cases, bool shrinkage) {
    Estimate est;
    est.per_case.resize(cases.size());
    const std::size_t K = cases.size();
    if (K == 0) return est;

    const std::optional<ShrinkResult> sr = shrink(cases);
    const bool apply = shrinkage && sr.has_value();
    est.shrunk = apply;
    const double between_sd = (sr && sr->n_available >= 2) ? std::sqrt(sr->between_var) : kInf;

    // Cases without a usable estimate fall back to the grand mean of the others.
    double fallback = 0.0;
    if (sr) {
        fallback = sr->grand_mean;
    } else {
        double s = 0.0;
        std::size_t m = 0;
        for (const CaseEstimate& c : cases) {
            if (c.defined) {
                s += c.value;
                ++m;
            }
        }
        fallback = m ? s / static_cast<double>(m) : std::numeric_limits<double>::quiet_NaN();
    }

    double sum = 0.0;
    double var = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        const CaseEstimate& c = cases[k];
        double mu = c.defined ? c.value : fallback;
        if (apply) mu = sr->values[k];
        double se = c.se;
        if (!c.exact && (c.n_crash == 0 || !c.defined)) se = between_sd;
        est.per_case[k] = {mu, c.n_crash, se};
        sum += mu;
        var += se * se;
    }
    est.value = sum / static_cast<double>(K);
    est.se = std::sqrt(var) / static_cast<double>(K);
    return est;
}

Estimate stratified_combine(std::span<const CaseAccumulator> cases, std::span<const std::size_t> n_draws_per_case,
                            std::span<const char> fully_certain, bool shrinkage) {
    std::vector<CaseEstimate> ests(cases.size());
    for (std::size_t k = 0; k < cases.size(); ++k) {
        ests[k] = case_ratio_estimate(cases[k], n_draws_per_case[k], !fully_certain.empty() && fully_certain[k]);
    }
    return combine_cases(ests, shrinkage);
}

Estimate post_stratified_combine(std::span<const CaseAccumulator> cases, std::size_t n_total,
                                 std::span<const char> fully_certain, bool shrinkage) {
    std::vector<CaseEstimate> ests(cases.size());
    for (std::size_t k = 0; k < cases.size(); ++k) {
        ests[k] = case_ratio_estimate(cases[k], n_total, !fully_certain.empty() && fully_certain[k]);
    }
    return combine_cases(ests, shrinkage);
}

void write_estimates_csv(std::ostream& out, std::span<const EstimateRow> rows) {
    out << "target,value,se,n_sims,iteration\n";
    for (const EstimateRow& r : rows) {
        out << to_string(r.target) << ',' << format_double(r.value) << ',' << format_double(r.se) << ',' << r.n_sims << ','
            << r.iteration << '\n';
    }
}

}  // namespace crashsamp
