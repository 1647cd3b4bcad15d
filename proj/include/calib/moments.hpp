#pragma once

// Moments of the calibrated sample mean, the expected sample variance, and
// equal-tail probability regions of the mixture laws.

#include <array>
#include <cmath>
#include <unordered_map>

#include "calib/errors.hpp"
#include "calib/mixtures.hpp"
#include "calib/model.hpp"
#include "calib/quadrature.hpp"

namespace calib {

struct MomentSummary {
    double mean;      ///< closed form β0 + β1μZ
    double variance;  ///< closed form κ2σZ²/n + σ0² + σ1²μZ²
    double skewness;  ///< γ = μ3/μ2^{3/2}
    double kurtosis;  ///< κ = μ4/μ2², not excess
    double quadrature_mean;
    double quadrature_variance;
};

/// Moments of Ȳ. Mean and variance come from the closed forms; γ and κ from
/// central moments obtained by integrating the mixture density.
inline MomentSummary mean_moments(const MixtureParams& p, const QuadSpec& q = {}) {
    const DerivedParams d = derive_params(p);
    MomentSummary out{d.muY, d.varYbar, 0.0, 3.0, d.muY, d.varYbar};
    if (p.known) return out;  // a single Gaussian

    const MeanMixture law(p, q);
    const double m = d.muY, s = std::sqrt(d.varYbar);
    const quad::Tolerance tol{q.abs_tol * 1e-2, std::max(q.rel_tol, 1e-9), q.max_intervals};
    // ∫ (u - m)^r f(u) du over each half-line. The five integrals share most
    // of their nodes, so density values are memoised.
    std::unordered_map<double, double> cache;
    auto density = [&](double u) {
        auto [it, fresh] = cache.try_emplace(u, 0.0);
        if (fresh) it->second = law.pdf(u);
        return it->second;
    };
    std::array<double, 5> mom{};
    for (int r = 0; r <= 4; ++r) {
        auto f = [&](double u) { return std::pow(u - m, r) * density(u); };
        mom[r] = quad::checked(quad::integrate_lower(f, m, s, tol), "mean_moments did not converge") +
                 quad::checked(quad::integrate_upper(f, m, s, tol), "mean_moments did not converge");
    }
    const double mass = mom[0];
    const double mu1 = mom[1] / mass;  // offset of the mean from m
    const double e2 = mom[2] / mass, e3 = mom[3] / mass, e4 = mom[4] / mass;
    const double c2 = e2 - mu1 * mu1;
    const double c3 = e3 - 3 * mu1 * e2 + 2 * mu1 * mu1 * mu1;
    const double c4 = e4 - 4 * mu1 * e3 + 6 * mu1 * mu1 * e2 - 3 * mu1 * mu1 * mu1 * mu1;
    out.quadrature_mean = m + mu1;
    out.quadrature_variance = c2;
    out.skewness = c3 / std::pow(c2, 1.5);
    out.kurtosis = c4 / (c2 * c2);
    return out;
}

struct SampleVarianceExpectation {
    double expected;  ///< E(S_Y²)
    double bias;      ///< E(S_Y²) - Var(Y)
    double var_y;     ///< Var(Y) per observation
};

inline SampleVarianceExpectation expected_sample_variance(const MixtureParams& p) {
    const DerivedParams d = derive_params(p);
    const double e = d.kappa2 * p.sigmaZ * p.sigmaZ;
    return {e, -d.shared, d.varY};
}

struct ProbRegion {
    double lower;
    double upper;
    double coverage;  ///< requested
    double achieved;  ///< re-integrated probability of [lower, upper]
};

/// Equal-tail region [Q(α/2), Q(1 - α/2)] for α = 1 - coverage.
inline ProbRegion probability_region(const MixtureDistribution& dist, double coverage,
                                     double check_tol = 1e-6) {
    detail::require(coverage > 0 && coverage < 1, "probability_region: coverage must lie in (0,1)");
    const double alpha = 1 - coverage;
    const double lo = dist.quantile(0.5 * alpha);
    const double hi = dist.quantile(1 - 0.5 * alpha);
    const double achieved = dist.probability(lo, hi);
    if (!(std::abs(achieved - coverage) < check_tol))
        throw accuracy_error("probability_region: achieved probability misses the target");
    return {lo, hi, coverage, achieved};
}

inline double interval_coverage(const MixtureDistribution& dist, double lower, double upper) {
    return dist.probability(lower, upper);
}

}  // namespace calib
