#pragma once

// Special functions used by the mixture kernels. Everything here is
// reentrant: no global state (std::lgamma writes signgam on glibc, so it is
// avoided in favour of a local Lanczos sum).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "calib/errors.hpp"

namespace calib::special {

inline constexpr double inv_sqrt_2pi = 0.398942280401432677939946059934;

/// log Γ(x) for x > 0 (Lanczos, g = 607/128, ~1e-15 relative).
inline double log_gamma(double x) {
    static constexpr double cof[14] = {
        57.1562356658629235,     -59.5979603554754912,    14.1360979747417471,
        -0.491913816097620199,   .339946499848118887e-4,  .465236289270485756e-4,
        -.983744753048795646e-4, .158088703224912494e-3,  -.210264441724104883e-3,
        .217439618115212643e-3,  -.164318106536763890e-3, .844182239838527433e-4,
        -.261908384015814087e-4, .368991826595316234e-5};
    if (!(x > 0.0)) return std::numeric_limits<double>::infinity();
    double y = x;
    double tmp = x + 5.24218750000000000;
    tmp = (x + 0.5) * std::log(tmp) - tmp;
    double ser = 0.999999999999997092;
    for (double c : cof) ser += c / ++y;
    return tmp + std::log(2.5066282746310005 * ser / x);
}

inline double log_beta(double a, double b) {
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

inline double normal_pdf(double z) { return inv_sqrt_2pi * std::exp(-0.5 * z * z); }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Upper tail 1 - Φ(z) without cancellation.
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

/// Φ⁻¹(p): Acklam's rational approximation polished by one Halley step.
inline double normal_quantile(double p) {
    calib::detail::require(p > 0.0 && p < 1.0, "normal_quantile: p must lie in (0,1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double plow = 0.02425;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p <= 1 - plow) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        double q = std::sqrt(-2 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    // e = Φ(x) - p, formed on the side of the distribution where it is accurate
    double e = (p < 0.5) ? normal_cdf(x) - p : (1 - p) - normal_sf(x);
    double u = e * std::sqrt(2 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1 + 0.5 * x * u);
}

namespace detail {

inline constexpr int max_special_iter = 100000;

inline double gamma_p_series(double a, double x, double log_prefix) {
    double ap = a, del = 1.0 / a, sum = del;
    for (int i = 0; i < max_special_iter; ++i) {
        ap += 1;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * 1e-17) return sum * std::exp(log_prefix);
    }
    throw accuracy_error("gamma_p: series did not converge");
}

inline double gamma_q_fraction(double a, double x, double log_prefix) {
    constexpr double tiny = 1e-300;
    double b = x + 1 - a, c = 1 / tiny, d = 1 / b, h = d;
    for (int i = 1; i < max_special_iter; ++i) {
        double an = -i * (i - a);
        b += 2;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1) < 1e-16) return std::exp(log_prefix) * h;
    }
    throw accuracy_error("gamma_q: continued fraction did not converge");
}

// Continued fraction for the incomplete beta (modified Lentz).
inline double beta_fraction(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    double qab = a + b, qap = a + 1, qam = a - 1;
    double c = 1, d = 1 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1 / d;
    double h = d;
    for (int m = 1; m < max_special_iter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1) < 1e-16) return h;
    }
    throw accuracy_error("beta_inc: continued fraction did not converge");
}

}  // namespace detail

/// Regularized lower incomplete gamma P(a, x).
inline double gamma_p(double a, double x) {
    calib::detail::require(a > 0, "gamma_p: a must be positive");
    if (x <= 0) return 0.0;
    if (std::isinf(x)) return 1.0;
    double log_prefix = a * std::log(x) - x - log_gamma(a);
    if (x < a + 1) return std::min(1.0, detail::gamma_p_series(a, x, log_prefix));
    return std::max(0.0, 1.0 - detail::gamma_q_fraction(a, x, log_prefix));
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
inline double gamma_q(double a, double x) {
    calib::detail::require(a > 0, "gamma_q: a must be positive");
    if (x <= 0) return 1.0;
    if (std::isinf(x)) return 0.0;
    double log_prefix = a * std::log(x) - x - log_gamma(a);
    if (x < a + 1) return std::max(0.0, 1.0 - detail::gamma_p_series(a, x, log_prefix));
    return std::min(1.0, detail::gamma_q_fraction(a, x, log_prefix));
}

/// Regularized incomplete beta I_x(a, b).
inline double beta_inc(double a, double b, double x) {
    calib::detail::require(a > 0 && b > 0, "beta_inc: shape parameters must be positive");
    if (x <= 0) return 0.0;
    if (x >= 1) return 1.0;
    double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
    if (x < (a + 1) / (a + b + 2))
        return std::exp(log_front) * detail::beta_fraction(a, b, x) / a;
    return 1.0 - std::exp(log_front) * detail::beta_fraction(b, a, 1 - x) / b;
}

inline double chi2_pdf(double x, double k) {
    if (x < 0) return 0.0;
    if (x == 0) return k < 2 ? std::numeric_limits<double>::infinity() : (k == 2 ? 0.5 : 0.0);
    double h = 0.5 * k;
    return std::exp((h - 1) * std::log(x) - 0.5 * x - h * std::numbers::ln2 - log_gamma(h));
}

inline double chi2_cdf(double x, double k) { return gamma_p(0.5 * k, 0.5 * x); }

/// Central F(d1, d2) density.
inline double f_pdf(double x, double d1, double d2) {
    if (x < 0) return 0.0;
    if (x == 0) return d1 < 2 ? std::numeric_limits<double>::infinity() : (d1 == 2 ? 1.0 : 0.0);
    double z = d1 * x / d2;
    return std::exp(std::log(d1 / d2) + (0.5 * d1 - 1) * std::log(z) -
                    0.5 * (d1 + d2) * std::log1p(z) - log_beta(0.5 * d1, 0.5 * d2));
}

inline double f_cdf(double x, double d1, double d2) {
    if (x <= 0) return 0.0;
    return beta_inc(0.5 * d1, 0.5 * d2, d1 * x / (d1 * x + d2));
}

/// Student t density with ν degrees of freedom.
inline double t_pdf(double x, double nu) {
    return std::exp(log_gamma(0.5 * (nu + 1)) - log_gamma(0.5 * nu) -
                    0.5 * std::log(nu * std::numbers::pi) -
                    0.5 * (nu + 1) * std::log1p(x * x / nu));
}

}  // namespace calib::special
