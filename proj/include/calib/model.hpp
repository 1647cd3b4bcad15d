#pragma once

// Calibration line fitting and the closed-form moment algebra of calibrated
// measurements Y = b0 + b1·Z, where (b0, b1) are the fitted intercept and
// slope and Z are fresh instrument readings.

#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "calib/errors.hpp"

namespace calib {

struct CalibrationPair {
    double x;  ///< instrument reading
    double u;  ///< reference measurement
};

/// Least-squares fit of u on centred x.
struct CalibrationFit {
    double beta0_hat;   ///< intercept on the centred scale (= mean of u)
    double beta1_hat;   ///< slope, u units per x unit
    double sigmaU_hat;  ///< residual standard deviation, SSE/(n0-2)
    double sigma0;      ///< std-dev of beta0_hat = sigmaU_hat/√n0
    double sigma1;      ///< std-dev of beta1_hat = sigmaU_hat/√sxx
    double sxx;
    std::size_t n0;
    double xbar;  ///< subtract from new readings before projecting

    /// Projects a raw reading onto the measurement scale.
    double project(double reading) const { return beta0_hat + beta1_hat * (reading - xbar); }
};

inline CalibrationFit fit_calibration(std::span<const CalibrationPair> data) {
    const std::size_t n0 = data.size();
    if (n0 < 3) throw invalid_argument("fit_calibration: at least 3 pairs are required");
    double xbar = 0, ubar = 0;
    for (const auto& p : data) {
        if (!std::isfinite(p.x) || !std::isfinite(p.u))
            throw invalid_argument("fit_calibration: non-finite entry");
        xbar += p.x;
        ubar += p.u;
    }
    xbar /= n0;
    ubar /= n0;
    double sxx = 0, sxu = 0, suu = 0;
    for (const auto& p : data) {
        const double dx = p.x - xbar, du = p.u - ubar;
        sxx += dx * dx;
        sxu += dx * du;
        suu += du * du;
    }
    if (!(sxx > 0)) throw invalid_argument("fit_calibration: degenerate design (all x equal)");
    const double b1 = sxu / sxx;
    // residuals summed directly; suu - b1*sxu cancels badly for near-exact fits
    double sse = 0;
    for (const auto& p : data) {
        const double r = p.u - ubar - b1 * (p.x - xbar);
        sse += r * r;
    }
    const double s = std::sqrt(sse / static_cast<double>(n0 - 2));
    return {ubar, b1, s, s / std::sqrt(double(n0)), s / std::sqrt(sxx), sxx, n0, xbar};
}

/// Parameter bundle Ω = {n, β0, σ0, μZ, σZ, β1, σ1}.
///
/// The known-coefficients reference case (σ0 = σ1 = 0, κ2 = β1²) is a
/// separate mode, built with `known_coefficients()`; in the default mode
/// σ1 must be positive so that λ = β1²/σ1² stays finite.
struct MixtureParams {
    double n = 2;
    double beta0 = 0;
    double sigma0 = 0;
    double muZ = 0;
    double sigmaZ = 1;
    double beta1 = 1;
    double sigma1 = 1;
    bool known = false;

    static MixtureParams known_coefficients(double n, double beta0, double muZ, double sigmaZ,
                                            double beta1) {
        MixtureParams p{n, beta0, 0.0, muZ, sigmaZ, beta1, 0.0, true};
        p.validate();
        return p;
    }

    void validate() const {
        detail::require(std::isfinite(n) && n >= 2, "MixtureParams: n must be at least 2");
        detail::require(std::isfinite(beta0) && std::isfinite(beta1) && std::isfinite(muZ),
                        "MixtureParams: non-finite location parameter");
        detail::require(std::isfinite(sigmaZ) && sigmaZ > 0, "MixtureParams: sigmaZ must be positive");
        if (known) {
            detail::require(sigma0 == 0 && sigma1 == 0,
                            "MixtureParams: known-coefficients mode has no calibration error");
            return;
        }
        detail::require(std::isfinite(sigma0) && sigma0 >= 0, "MixtureParams: sigma0 must be >= 0");
        detail::require(std::isfinite(sigma1) && sigma1 > 0,
                        "MixtureParams: sigma1 must be positive (use known_coefficients())");
    }

    /// κ2 = E(β̂1²).
    double kappa2() const { return sigma1 * sigma1 + beta1 * beta1; }
};

/// Ω with (σ0, σ1) taken from a calibration fit and (β0, β1) from its point estimates.
inline MixtureParams params_from_fit(const CalibrationFit& fit, double n, double muZ,
                                     double sigmaZ) {
    MixtureParams p{n, fit.beta0_hat, fit.sigma0, muZ, sigmaZ, fit.beta1_hat, fit.sigma1, false};
    p.validate();
    return p;
}

struct DerivedParams {
    double kappa2;
    std::optional<double> lambda;  ///< β1²/σ1²; absent with known coefficients
    double nu;
    std::optional<double> delta;  ///< (μY-μY0)²/(σ1²σZ²); only with a null value
    double muY;
    double varY;     ///< per observation
    double varYbar;  ///< of the sample mean
    double shared;   ///< σ0² + σ1²μZ², the part of Var(Ȳ) that does not shrink with n
};

inline DerivedParams derive_params(const MixtureParams& p, std::optional<double> muY0 = {}) {
    p.validate();
    const double k2 = p.known ? p.beta1 * p.beta1 : p.kappa2();
    const double shared = p.sigma0 * p.sigma0 + p.sigma1 * p.sigma1 * p.muZ * p.muZ;
    const double vz = p.sigmaZ * p.sigmaZ;
    DerivedParams d{};
    d.kappa2 = k2;
    d.nu = p.n - 1;
    d.muY = p.beta0 + p.beta1 * p.muZ;
    d.varY = k2 * vz + shared;
    d.varYbar = k2 * vz / p.n + shared;
    d.shared = shared;
    if (!p.known) {
        d.lambda = (p.beta1 * p.beta1) / (p.sigma1 * p.sigma1);
        if (muY0) {
            const double diff = d.muY - *muY0;
            d.delta = diff * diff / (p.sigma1 * p.sigma1 * vz);
        }
    }
    return d;
}

/// Ξ = κ2·Σ + σ0²·11′ + σ1²·μZμZ′ as three weights.
struct CovarianceStructure {
    double diag_weight;
    double ones_weight;
    double mean_outer_weight;

    static CovarianceStructure of(const MixtureParams& p) {
        p.validate();
        if (p.known) return {p.beta1 * p.beta1, 0.0, 0.0};
        return {p.kappa2(), p.sigma0 * p.sigma0, p.sigma1 * p.sigma1};
    }

    Eigen::MatrixXd materialize(const Eigen::VectorXd& muZ, const Eigen::MatrixXd& sigma) const {
        Eigen::MatrixXd xi = diag_weight * sigma;
        xi.array() += ones_weight;
        xi.noalias() += mean_outer_weight * muZ * muZ.transpose();
        return xi;
    }
};

/// Unconditional mean vector and covariance of Y = β̂0·1 + β̂1·Z for a
/// general E(Z) = muZ, V(Z) = sigma.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> unconditional_mean_cov(
    const Eigen::VectorXd& muZ, const Eigen::MatrixXd& sigma, const MixtureParams& p) {
    if (sigma.rows() != sigma.cols() || sigma.rows() != muZ.size())
        throw invalid_argument("unconditional_mean_cov: dimension mismatch");
    if (!sigma.isApprox(sigma.transpose(), 1e-12))
        throw invalid_argument("unconditional_mean_cov: Sigma must be symmetric");
    Eigen::VectorXd mean = Eigen::VectorXd::Constant(muZ.size(), p.beta0) + p.beta1 * muZ;
    Eigen::MatrixXd cov = CovarianceStructure::of(p).materialize(muZ, sigma);
    // exact symmetry regardless of rounding in the outer product
    cov = 0.5 * (cov + cov.transpose()).eval();
    return {std::move(mean), std::move(cov)};
}

struct Correlations {
    std::optional<double> conditional;  ///< given a realised slope
    double unconditional;
};

/// Equicorrelation of calibrated measurements sharing one calibration.
inline Correlations correlation_params(const MixtureParams& p,
                                       std::optional<double> beta1_hat = {}) {
    const DerivedParams d = derive_params(p);
    const double s0 = p.sigma0 * p.sigma0, vz = p.sigmaZ * p.sigmaZ;
    Correlations c{};
    c.unconditional = d.shared / d.varY;
    if (beta1_hat) {
        const double denom = (*beta1_hat) * (*beta1_hat) * vz + s0;
        detail::require(denom > 0, "correlation_params: zero conditional variance");
        c.conditional = s0 / denom;
    }
    return c;
}

}  // namespace calib
