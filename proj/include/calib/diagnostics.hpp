#pragma once

// Residual diagnostics for a single sample, and a Monte Carlo harness showing
// that each one takes the same value on calibrated data Y = β̂0 + β̂1 Z as on
// the raw readings Z.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "calib/errors.hpp"
#include "calib/model.hpp"
#include "calib/simulate.hpp"
#include "calib/special.hpp"

namespace calib::diag {

struct ResidualSet {
    std::vector<double> residuals;    ///< Rᵢ = yᵢ - ȳ
    double sample_sd;                 ///< S_Y with divisor n - 1
    std::vector<double> studentized;  ///< Rᵢ/(S_Y √(1 - 1/n))
    std::vector<double> r_student;    ///< Rᵢ/(S₋ᵢ √(1 - 1/n)); ±inf when S₋ᵢ = 0
};

namespace detail {

inline double mean(std::span<const double> y) {
    return std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
}

inline void require_nonconstant(std::span<const double> y, const char* what) {
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    if (*lo == *hi) throw invalid_argument(std::string(what) + ": sample is constant");
}

}  // namespace detail

inline ResidualSet residual_diagnostics(std::span<const double> y) {
    calib::detail::require(y.size() >= 3, "residual_diagnostics: at least 3 values are required");
    detail::require_nonconstant(y, "residual_diagnostics");
    const double n = static_cast<double>(y.size());
    const double ybar = detail::mean(y);
    ResidualSet out;
    out.residuals.reserve(y.size());
    double ss = 0;
    for (double v : y) {
        out.residuals.push_back(v - ybar);
        ss += (v - ybar) * (v - ybar);
    }
    out.sample_sd = std::sqrt(ss / (n - 1));
    const double shrink = std::sqrt(1 - 1 / n);
    for (double r : out.residuals) {
        out.studentized.push_back(r / (out.sample_sd * shrink));
        // leave-one-out sum of squares: (n-1)S² - nR²/(n-1)
        const double ss_i = std::max(0.0, ss - n * r * r / (n - 1));
        const double s_i = std::sqrt(ss_i / (n - 2));
        out.r_student.push_back(r / (s_i * shrink));
    }
    return out;
}

enum class DifferenceKind {
    first,     ///< Σ_{i=2..n} (Rᵢ - Rᵢ₋₁)²
    circular,  ///< first differences plus the wrap-around term (R₁ - Rₙ)²
};

/// U = R'BR / R'R for the successive-difference quadratic form B.
inline double von_neumann_ratio(std::span<const double> r, DifferenceKind kind = DifferenceKind::first) {
    calib::detail::require(r.size() >= 2, "von_neumann_ratio: at least 2 residuals are required");
    double num = 0, den = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        den += r[i] * r[i];
        if (i > 0) num += (r[i] - r[i - 1]) * (r[i] - r[i - 1]);
    }
    if (kind == DifferenceKind::circular) num += (r.front() - r.back()) * (r.front() - r.back());
    if (!(den > 0)) throw invalid_argument("von_neumann_ratio: residual vector is zero");
    return num / den;
}

/// Unit-norm weights from approximate expected normal order statistics,
/// mᵢ = Φ⁻¹((i - 3/8)/(n + 1/4)). They sum to zero and are antisymmetric.
inline std::vector<double> blom_weights(std::size_t n) {
    calib::detail::require(n >= 2, "blom_weights: n must be >= 2");
    std::vector<double> w(n);
    const double nn = static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = special::normal_quantile((static_cast<double>(i + 1) - 0.375) / (nn + 0.25));
    // enforce exact antisymmetry so that Σw = 0 holds to rounding
    for (std::size_t i = 0; i < n / 2; ++i) {
        const double a = 0.5 * (w[n - 1 - i] - w[i]);
        w[i] = -a;
        w[n - 1 - i] = a;
    }
    if (n % 2) w[n / 2] = 0;
    double norm = 0;
    for (double v : w) norm += v * v;
    for (double& v : w) v /= std::sqrt(norm);
    return w;
}

/// W = (Σ wᵢ y₍ᵢ₎)² / ((n-1) S²) with the order statistics from a stable sort.
inline double shapiro_type_W(std::span<const double> y, std::span<const double> w) {
    calib::detail::require(y.size() >= 2 && w.size() == y.size(),
                           "shapiro_type_W: weights must match the sample size");
    double wsum = 0, wabs = 0;
    for (double v : w) {
        wsum += v;
        wabs += std::abs(v);
    }
    calib::detail::require(wabs > 0, "shapiro_type_W: weights are all zero");
    calib::detail::require(std::abs(wsum) <= 1e-12 * wabs, "shapiro_type_W: weights must sum to zero");
    detail::require_nonconstant(y, "shapiro_type_W");
    std::vector<double> sorted(y.begin(), y.end());
    std::stable_sort(sorted.begin(), sorted.end());
    const double ybar = detail::mean(y);
    double lin = 0, ss = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        lin += w[i] * sorted[i];
        ss += (sorted[i] - ybar) * (sorted[i] - ybar);
    }
    return lin * lin / ss;
}

inline double shapiro_type_W(std::span<const double> y) { return shapiro_type_W(y, blom_weights(y.size())); }

struct MomentRatios {
    double b1;  ///< m3²/m2³
    double b2;  ///< m4/m2²
};

/// Moment ratios with central moments mₖ = (1/n) Σ (yᵢ - ȳ)^k.
inline MomentRatios moment_ratios(std::span<const double> y) {
    calib::detail::require(y.size() >= 3, "moment_ratios: at least 3 values are required");
    detail::require_nonconstant(y, "moment_ratios");
    const double ybar = detail::mean(y);
    double m2 = 0, m3 = 0, m4 = 0;
    for (double v : y) {
        const double d = v - ybar, d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    const double n = static_cast<double>(y.size());
    m2 /= n;
    m3 /= n;
    m4 /= n;
    return {m3 * m3 / (m2 * m2 * m2), m4 / (m2 * m2)};
}

struct DiagnosticReport {
    double von_neumann_ratio;
    double shapiro_type_W;
    double b1, b2;
    std::vector<double> studentized;
    std::vector<double> r_student;
};

inline DiagnosticReport diagnose(std::span<const double> y) {
    const ResidualSet rs = residual_diagnostics(y);
    const MomentRatios mr = moment_ratios(y);
    return {von_neumann_ratio(rs.residuals), shapiro_type_W(y), mr.b1, mr.b2, rs.studentized,
            rs.r_student};
}

using mc::relative_deviation;

struct BlindnessReport {
    std::uint64_t replications;
    std::size_t n;
    // largest relative deviation between the statistic on Y and on Z
    double max_dev_U, max_dev_W, max_dev_b1, max_dev_b2, max_dev_studentized, max_dev_r_student;
    // two-sample KS of the statistic under calibration vs plain iid Gaussian data
    mc::KsResult ks_U, ks_W, ks_b1, ks_b2;
    std::uint64_t negative_slope_draws;  ///< replications with β̂1 < 0

    double max_deviation() const {
        return std::max({max_dev_U, max_dev_W, max_dev_b1, max_dev_b2, max_dev_studentized,
                         max_dev_r_student});
    }
    bool identities_hold(double tol = 1e-10) const { return max_deviation() < tol; }
    bool blind() const { return ks_U.within() && ks_W.within() && ks_b1.within() && ks_b2.within(); }
};

/// For every replication, computes each diagnostic on Y and on the Z it was
/// projected from and records the worst mismatch (studentized values carry
/// the sign of β̂1). A second set of samples of size n drawn iid from
/// N(0, 1) gives the plain Gaussian reference distribution for the KS
/// comparison; it uses its own substream.
inline BlindnessReport blindness_suite(const MixtureParams& p, const mc::McConfig& cfg) {
    const std::size_t n = mc::sample_size(p);
    calib::detail::require(n >= 4, "blindness_suite: n must be >= 4");
    struct Acc {
        double dU = 0, dW = 0, db1 = 0, db2 = 0, dt = 0, dr = 0;
        std::uint64_t negative = 0;
        std::vector<double> U, W, b1, b2;
        void merge(const Acc& o) {
            dU = std::max(dU, o.dU);
            dW = std::max(dW, o.dW);
            db1 = std::max(db1, o.db1);
            db2 = std::max(db2, o.db2);
            dt = std::max(dt, o.dt);
            dr = std::max(dr, o.dr);
            negative += o.negative;
            for (auto [dst, src] : {std::pair{&U, &o.U}, {&W, &o.W}, {&b1, &o.b1}, {&b2, &o.b2}})
                dst->insert(dst->end(), src->begin(), src->end());
        }
    };
    const std::vector<double> w = blom_weights(n);
    auto calibrated = mc::run_replications<Acc>(cfg, [&](std::uint64_t, mc::Stream& s, Acc& a) {
        const mc::Coefficients c = mc::draw_coefficients(p, cfg, s);
        std::vector<double> z(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = s.normal(p.muZ, p.sigmaZ);
            y[i] = c.b0 + c.b1 * z[i];
        }
        if (c.b1 < 0) ++a.negative;
        const ResidualSet ry = residual_diagnostics(y), rz = residual_diagnostics(z);
        const double uy = von_neumann_ratio(ry.residuals), uz = von_neumann_ratio(rz.residuals);
        const double wy = shapiro_type_W(y, w), wz = shapiro_type_W(z, w);
        const MomentRatios my = moment_ratios(y), mz = moment_ratios(z);
        a.dU = std::max(a.dU, relative_deviation(uy, uz));
        a.dW = std::max(a.dW, relative_deviation(wy, wz));
        a.db1 = std::max(a.db1, relative_deviation(my.b1, mz.b1));
        a.db2 = std::max(a.db2, relative_deviation(my.b2, mz.b2));
        const double sign = c.b1 < 0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            a.dt = std::max(a.dt, relative_deviation(ry.studentized[i], sign * rz.studentized[i]));
            a.dr = std::max(a.dr, relative_deviation(ry.r_student[i], sign * rz.r_student[i]));
        }
        a.U.push_back(uy);
        a.W.push_back(wy);
        a.b1.push_back(my.b1);
        a.b2.push_back(my.b2);
    });
    auto plain = mc::run_replications<Acc>(
        cfg,
        [&](std::uint64_t, mc::Stream& s, Acc& a) {
            std::vector<double> z(n);
            for (auto& v : z) v = s.normal();
            const MomentRatios m = moment_ratios(z);
            a.U.push_back(von_neumann_ratio(residual_diagnostics(z).residuals));
            a.W.push_back(shapiro_type_W(z, w));
            a.b1.push_back(m.b1);
            a.b2.push_back(m.b2);
        },
        1);
    auto ks = [](std::vector<double>& a, std::vector<double>& b) {
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        return mc::ks_two_sample(a, b);
    };
    return {cfg.replications,
            n,
            calibrated.dU,
            calibrated.dW,
            calibrated.db1,
            calibrated.db2,
            calibrated.dt,
            calibrated.dr,
            ks(calibrated.U, plain.U),
            ks(calibrated.W, plain.W),
            ks(calibrated.b1, plain.b1),
            ks(calibrated.b2, plain.b2),
            calibrated.negative};
}

}  // namespace calib::diag
