#pragma once

// Mixture laws of calibrated summary statistics.
//
//   MeanMixture      sample mean Ȳ, Gaussian mixed over the slope estimate
//   VarianceMixture  νS²/(σ1²σZ²), a χ²_ν scaled by a χ²_1(λ) mixing variable
//   TsqMixture       t0², a noncentral F(1, ν, δ/t) mixed over t ~ χ²_1(λ)
//   SignedTMixture   t0, a noncentral t(ν, δ0/s) mixed over s ~ |N(λ0, 1)|
//
// The kernels are Poisson-type series summed outward from their largest
// term, with geometric tail bounds. Where a series would need an
// impractical number of terms (huge noncentrality far in the tail), the
// d1 = 1 kernels switch to a one-dimensional integral over the chi variate.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string_view>
#include <vector>

#include "calib/errors.hpp"
#include "calib/model.hpp"
#include "calib/quadrature.hpp"
#include "calib/special.hpp"

namespace calib {

/// Accuracy knobs shared by every mixture evaluator.
struct QuadSpec {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    /// half-width of the Gaussian mixing window, in mixing standard deviations
    double mixing_range_sigmas = 10.0;
    /// mass of the χ² mixing law allowed beyond the upper end of its window
    double mixing_tail = 1e-12;
    int series_terms_outer = 15;   ///< minimum terms, noncentral t² series
    int series_terms_inner = 30;   ///< minimum terms, noncentral χ² series
    int series_terms_signed = 20;  ///< minimum terms, noncentral t series
    long max_series_terms = 200000;
    int max_intervals = 4000;

    void validate() const {
        detail::require(abs_tol > 0 && rel_tol > 0, "QuadSpec: tolerances must be positive");
        detail::require(mixing_range_sigmas >= 4, "QuadSpec: mixing window below 4 sigmas");
        detail::require(mixing_tail > 0 && mixing_tail < 1e-3, "QuadSpec: mixing_tail out of range");
        detail::require(series_terms_outer >= 1 && series_terms_inner >= 1 && series_terms_signed >= 1,
                        "QuadSpec: series term counts must be positive");
        detail::require(max_series_terms >= 100 && max_intervals >= 10,
                        "QuadSpec: caps are too small");
    }

    quad::Tolerance tolerance() const { return {abs_tol, rel_tol, max_intervals}; }
};

namespace kernels {

struct SeriesControl {
    int min_terms = 1;
    double rel_tol = 1e-16;
    long max_terms = 200000;
};

namespace detail {

inline constexpr double inf = std::numeric_limits<double>::infinity();

// log of a Poisson(mu) probability mass at j
inline double log_poisson(double mu, double j) {
    return -mu + j * std::log(mu) - special::log_gamma(j + 1);
}

// log Σ t_j over j ∈ {j0, j0 ± step, ...}, j ≥ 0, for a positive log-concave
// sequence given log t_{j0} and the forward ratio r(j) = t_{j+step}/t_j.
// Once the ratio drops below one the remaining terms are bounded by a
// geometric series; summation stops when that bound is below rel_tol·sum
// and at least min_terms terms have been added.
template <class Ratio>
double log_sum_outward(double log_t0, long j0, int step, Ratio r, const SeriesControl& c) {
    double sum = 1.0;
    long n = 1;
    double t = 1.0;
    for (long j = j0; j - step >= 0; j -= step) {
        const double rb = 1.0 / r(j - step);
        if (!std::isfinite(rb)) throw accuracy_error("series: backward ratio overflow");
        if (rb < 1.0 && t * rb / (1.0 - rb) <= c.rel_tol * sum) break;
        t *= rb;
        sum += t;
        if (++n > c.max_terms) throw accuracy_error("series: term cap reached before tail bound");
        if (t == 0.0) break;
    }
    t = 1.0;
    for (long j = j0;; j += step) {
        const double rf = r(j);
        if (rf < 1.0 && n >= c.min_terms && t * rf / (1.0 - rf) <= c.rel_tol * sum) break;
        t *= rf;
        sum += t;
        if (++n > c.max_terms) throw accuracy_error("series: term cap reached before tail bound");
        if (t == 0.0 && n >= c.min_terms) break;
    }
    return log_t0 + std::log(sum);
}

// W = √(χ²_ν/ν): distribution function and density
inline double chi_scaled_cdf(double w, double nu) {
    return w <= 0 ? 0.0 : special::gamma_p(0.5 * nu, 0.5 * nu * w * w);
}

inline double chi_scaled_pdf(double w, double nu) {
    if (w <= 0) return 0.0;
    const double h = 0.5 * nu;
    return std::exp(std::log(nu * w) + (h - 1) * std::log(h * w * w) - h * w * w -
                    special::log_gamma(h));
}

inline constexpr quad::Tolerance fallback_cdf_tol{1e-15, 1e-12, 2000};
inline constexpr quad::Tolerance fallback_pdf_tol{1e-300, 1e-12, 2000};

// noncentral t density as ∫ φ(u·w - d)·w·g(w) dw, written in y = u·w - d
inline double nct_pdf_integral(double u, double nu, double d) {
    if (u == 0) {
        const double ew = std::sqrt(2 / nu) * std::exp(special::log_gamma(0.5 * (nu + 1)) -
                                                       special::log_gamma(0.5 * nu));
        return special::normal_pdf(d) * ew;
    }
    const double au = std::abs(u);
    double lo = -12, hi = 12;
    if (u > 0)
        lo = std::max(lo, -d);
    else
        hi = std::min(hi, -d);
    if (!(lo < hi)) return 0.0;
    auto f = [&](double y) {
        const double w = (y + d) / u;
        if (!(w > 0)) return 0.0;
        return special::normal_pdf(y) * w * chi_scaled_pdf(w, nu) / au;
    };
    const double y1 = u - d, sy = 4 * au / std::sqrt(2 * nu);
    return quad::checked(quad::integrate_split(f, lo, hi, {y1 - sy, y1, y1 + sy}, fallback_pdf_tol),
                         "noncentral t density integral did not converge");
}

// P[F(1, ν, nc) ≤ u] = P[|Z + d| ≤ r·W], integrated by parts against the chi cdf
inline double ncf1_cdf_integral(double u, double nu, double nc) {
    const double r = std::sqrt(u), d = std::sqrt(nc), sy = 4 * r / std::sqrt(2 * nu);
    auto upper = [&](double y) { return special::normal_pdf(y) * chi_scaled_cdf((y + d) / r, nu); };
    auto lower = [&](double y) { return special::normal_pdf(y) * chi_scaled_cdf(-(y + d) / r, nu); };
    double miss = 0;
    const double lo = std::max(-12.0, -d);
    if (lo < 12)
        miss += quad::checked(
            quad::integrate_split(upper, lo, 12, {r - d - sy, r - d, r - d + sy}, fallback_cdf_tol),
            "noncentral F cdf integral did not converge");
    if (-d > -12)
        miss += quad::checked(quad::integrate_split(lower, -12, std::min(-d, 12.0),
                                                    {-r - d - sy, -r - d, -r - d + sy},
                                                    fallback_cdf_tol),
                              "noncentral F cdf integral did not converge");
    return std::clamp(1.0 - miss, 0.0, 1.0);
}

// Beyond this many terms around the peak, d1 = 1 kernels use the integrals above.
inline constexpr double series_peak_limit = 5000;

}  // namespace detail

/// Noncentral χ²_1(λ) density at w. Zero for w < 0, infinite at w = 0.
inline double nc_chisq1_pdf(double w, double lambda, const SeriesControl& c = {30}) {
    calib::detail::require(std::isfinite(lambda) && lambda >= 0,
                           "nc_chisq1_pdf: lambda must be finite and >= 0");
    if (w < 0) return 0.0;
    if (w == 0) return detail::inf;
    if (std::isinf(w)) return 0.0;
    if (lambda == 0) return special::chi2_pdf(w, 1);
    const double lw = std::log(w), q = lambda * w;
    auto log_term = [&](double j) {
        return detail::log_poisson(0.5 * lambda, j) + (j - 0.5) * lw - 0.5 * w -
               (j + 0.5) * std::numbers::ln2 - special::log_gamma(j + 0.5);
    };
    auto ratio = [q](long j) { return q / (4.0 * (j + 1) * (j + 0.5)); };
    const long j0 = std::max(0L, std::lround(0.5 * (std::sqrt(0.25 + q) - 1.5)));
    return std::exp(detail::log_sum_outward(log_term(double(j0)), j0, 1, ratio, c));
}

/// Noncentral t density, ν degrees of freedom, noncentrality d.
inline double nct_pdf(double u, double nu, double d, const SeriesControl& c = {20}) {
    if (d < 0) return nct_pdf(-u, nu, -d, c);
    if (d == 0) return special::t_pdf(u, nu);
    if (std::isinf(u) || std::isinf(d)) return 0.0;
    // Bound from splitting ∫ φ(uw - d)·w·g(w) dw at w = d/(2u), with a
    // Chernoff bound on the χ²_ν upper tail; below it the density is negligible.
    double log_bound;
    if (u <= 0) {
        log_bound = std::log(special::inv_sqrt_2pi) - 0.5 * d * d;
    } else {
        const double k = d * d / (4 * u * u);
        const double chern = k > 1 ? -0.5 * nu * (k - 1 - std::log(k)) : 0.0;
        log_bound = std::log(0.8) + std::max(0.5 * chern, -d * d / 8);
    }
    if (log_bound < -69) return 0.0;

    const double x = std::numbers::sqrt2 * u * d / std::sqrt(nu + u * u);
    if (x * x > 2 * detail::series_peak_limit) return detail::nct_pdf_integral(u, nu, d);
    const double log_pre = 0.5 * nu * std::log(nu) - 0.5 * d * d - 0.5 * std::log(std::numbers::pi) -
                           special::log_gamma(0.5 * nu) - 0.5 * (nu + 1) * std::log(nu + u * u);
    if (x == 0) return std::exp(log_pre + special::log_gamma(0.5 * (nu + 1)));

    const double ax = std::abs(x), x2 = x * x;
    auto log_term = [&](double j) {
        return special::log_gamma(0.5 * (nu + j + 1)) - special::log_gamma(j + 1) + j * std::log(ax);
    };
    auto ratio = [&](long j) { return 0.5 * (nu + j + 1) * x2 / ((j + 1.0) * (j + 2.0)); };
    const double jstar = 0.25 * x2 + std::sqrt(x2 * x2 / 16 + 0.5 * (nu + 1) * x2);
    const long je = 2 * std::lround(0.5 * jstar);
    const long jo = std::max(1L, je - 1);
    SeriesControl half = c;
    half.min_terms = (c.min_terms + 1) / 2;
    const double le = detail::log_sum_outward(log_term(double(je)), je, 2, ratio, half);
    const double lo = detail::log_sum_outward(log_term(double(jo)), jo, 2, ratio, half);
    const double even = std::exp(log_pre + le), odd = std::exp(log_pre + lo);
    if (x > 0) return even + odd;
    // opposite signs: the alternating sum cancels, so a small difference
    // carries the rounding noise of `even`; integrate directly instead
    const double diff = even - odd;
    if (diff > 1e-4 * even) return diff;
    return detail::nct_pdf_integral(u, nu, d);
}

namespace detail {

// Rough log upper bound on the noncentral F density or cdf when the
// Poisson weight sits far beyond the mass that x^j leaves.
inline double ncf_log_envelope(double mu, double x, double d1, double b) {
    return -mu * (1 - x) + b * std::log(mu * x + 0.5 * d1 + b + 1) + 2;
}

}  // namespace detail

/// Noncentral F(d1, d2, nc) density.
inline double ncf_pdf(double u, double d1, double d2, double nc, const SeriesControl& c = {15}) {
    calib::detail::require(d1 > 0 && d2 > 0 && nc >= 0, "ncf_pdf: invalid parameters");
    if (u < 0 || std::isinf(u) || std::isinf(nc)) return 0.0;
    if (nc == 0) return special::f_pdf(u, d1, d2);
    if (u == 0) return d1 < 2 ? detail::inf : (d1 == 2 ? std::exp(-0.5 * nc) : 0.0);
    const double z = d1 * u / d2, mu = 0.5 * nc, b = 0.5 * d2;
    const double x = z / (1 + z);
    const double env = detail::ncf_log_envelope(mu, x, d1, b) +
                       std::max(0.0, (0.5 * d1 - 1) * (std::log(z) - std::log1p(z))) +
                       std::log(d1 / d2);
    if (env < -150) return 0.0;
    if (d1 == 1 && mu * x > detail::series_peak_limit) {
        const double r = std::sqrt(u), d = std::sqrt(nc);
        return (nct_pdf(r, d2, d) + nct_pdf(-r, d2, d)) / (2 * r);
    }
    const double lz = std::log(z), l1z = std::log1p(z);
    auto log_term = [&](double j) {
        const double a = 0.5 * d1 + j;
        return detail::log_poisson(mu, j) + std::log(d1 / d2) + (a - 1) * lz - (a + b) * l1z -
               special::log_beta(a, b);
    };
    auto ratio = [&](long j) {
        const double a = 0.5 * d1 + j;
        return mu / (j + 1.0) * x * (a + b) / a;
    };
    const double pb = 0.5 * d1 + 1 - mu * x, pc = 0.5 * d1 - mu * x * (0.5 * d1 + b);
    const double disc = pb * pb - 4 * pc;
    const long j0 = disc > 0 ? std::max(0L, std::lround(0.5 * (-pb + std::sqrt(disc)))) : 0L;
    return std::exp(detail::log_sum_outward(log_term(double(j0)), j0, 1, ratio, c));
}

/// Noncentral F(d1, d2, nc) distribution function. `c.rel_tol` acts as an
/// absolute tolerance here (the value is at most one).
inline double ncf_cdf(double u, double d1, double d2, double nc, const SeriesControl& c = {15}) {
    calib::detail::require(d1 > 0 && d2 > 0 && nc >= 0, "ncf_cdf: invalid parameters");
    if (u <= 0 || std::isinf(nc)) return 0.0;
    if (std::isinf(u)) return 1.0;
    if (nc == 0) return special::f_cdf(u, d1, d2);
    const double z = d1 * u / d2, mu = 0.5 * nc, b = 0.5 * d2;
    const double x = z / (1 + z), lx = std::log(z) - std::log1p(z), l1x = -std::log1p(z);
    if (detail::ncf_log_envelope(mu, x, d1, b) < -150) return 0.0;
    if (d1 == 1 && mu * x > detail::series_peak_limit) return detail::ncf1_cdf_integral(u, d2, nc);

    const double tol = std::max(c.rel_tol, 1e-17);
    const long j0 = static_cast<long>(std::floor(mu));
    const double a0 = 0.5 * d1 + j0;
    const double i0 = special::beta_inc(a0, b, x);
    // log of T(a) = x^a (1-x)^b / (a B(a, b)), the step I(a) - I(a+1)
    const double lt0 = a0 * lx + b * l1x - std::log(a0) - special::log_beta(a0, b);
    const double lp0 = detail::log_poisson(mu, double(j0));
    double sum = std::exp(lp0) * i0;
    long n = 1;

    double lp = lp0, lt = lt0, inc = i0, a = a0;
    for (long j = j0;; ++j) {
        inc = std::max(0.0, inc - std::exp(lt));
        lt += lx + std::log((a + b) / (a + 1));
        lp += std::log(mu / (j + 1.0));
        a += 1;
        const double term = std::exp(lp) * inc;
        sum += term;
        if (++n > c.max_terms) throw accuracy_error("ncf_cdf: term cap reached before tail bound");
        const double r = mu / (j + 2.0);
        if (r < 1 && n >= c.min_terms && term * r / (1 - r) <= tol) break;
        if (term == 0 && (j + 1) > mu && n >= c.min_terms) break;
    }
    lp = lp0, lt = lt0, inc = i0, a = a0;
    for (long j = j0; j >= 1; --j) {
        lt += std::log(a / (a - 1 + b)) - lx;  // T(a-1) from T(a)
        a -= 1;
        inc = std::min(1.0, inc + std::exp(lt));
        lp += std::log(j / mu);
        const double term = std::exp(lp) * inc;
        sum += term;
        if (++n > c.max_terms) throw accuracy_error("ncf_cdf: term cap reached before tail bound");
        const double r = (j - 1.0) / mu;
        if (r < 1 && std::exp(lp) * r / (1 - r) <= tol) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

}  // namespace kernels

/// Common interface of the four mixture laws.
class MixtureDistribution {
public:
    explicit MixtureDistribution(const QuadSpec& q) : q_(q) { q_.validate(); }
    virtual ~MixtureDistribution() = default;

    virtual double pdf(double u) const = 0;
    virtual double cdf(double u) const = 0;
    virtual std::string_view name() const = 0;
    /// -inf, or 0 for laws on the positive half-line
    virtual double support_lower() const { return -std::numeric_limits<double>::infinity(); }

    /// Rough centre and width, used only to seed brackets and integration maps.
    virtual double location() const = 0;
    virtual double spread() const = 0;

    /// P[lo < U ≤ hi].
    virtual double probability(double lo, double hi) const {
        detail::require(lo < hi, "probability: lower bound must be below upper bound");
        return std::clamp(cdf(hi) - cdf(lo), 0.0, 1.0);
    }

    /// Inverse cdf by bracket expansion and bisection.
    virtual double quantile(double p) const {
        detail::require(p > 0 && p < 1, "quantile: p must lie in (0,1)");
        const double floor = support_lower();
        const double lo = std::max(floor, location() - spread());
        const double hi = std::max(lo + spread(), location() + spread());
        return quad::invert_increasing([this](double u) { return cdf(u); }, p, lo, hi,
                                       1e-8 * std::max(1.0, spread()), floor);
    }

    /// ∫ pdf over the support; should be one.
    virtual double total_mass() const {
        const quad::Tolerance tol = outer_tolerance();
        if (std::isfinite(support_lower())) {
            // u = v² removes the integrable u^{-1/2} singularity at the origin
            const double base = support_lower();
            auto g = [&](double v) { return 2 * v * pdf(base + v * v); };
            return quad::checked(
                quad::integrate_upper(g, 0.0, std::sqrt(std::abs(location()) + spread()), tol),
                "total_mass did not converge");
        }
        auto f = [&](double u) { return pdf(u); };
        const double m = location(), s = spread();
        return quad::checked(quad::integrate_lower(f, m, s, tol), "total_mass did not converge") +
               quad::checked(quad::integrate_upper(f, m, s, tol), "total_mass did not converge");
    }

    const QuadSpec& quad_spec() const { return q_; }

protected:
    quad::Tolerance inner_tolerance() const { return q_.tolerance(); }
    // densities reach far below abs_tol in the tails, so their mixing
    // integrals are held to the relative tolerance almost everywhere
    quad::Tolerance density_tolerance() const {
        quad::Tolerance t = q_.tolerance();
        t.abs_tol *= 1e-10;
        return t;
    }
    // one level up, where each integrand evaluation is itself a quadrature
    quad::Tolerance outer_tolerance() const {
        return {std::max(q_.abs_tol, 1e-9), std::max(q_.rel_tol, 1e-9), q_.max_intervals};
    }
    kernels::SeriesControl series(int min_terms) const {
        return {min_terms, 1e-16, q_.max_series_terms};
    }

    QuadSpec q_;
};

/// Sample mean of n calibrated measurements: a Gaussian in u with mean
/// β0 + tμZ and variance t²σZ²/n + σ0², mixed over the slope t ~ N(β1, σ1²).
class MeanMixture final : public MixtureDistribution {
public:
    MeanMixture(const MixtureParams& p, const QuadSpec& q = {}) : MixtureDistribution(q), p_(p) {
        p_.validate();
        if (p_.known)
            detail::require(p_.beta1 != 0, "MeanMixture: zero slope leaves no variability");
        const DerivedParams d = derive_params(p_);
        mean_ = d.muY;
        sd_ = std::sqrt(d.varYbar);
    }

    std::string_view name() const override { return "mean"; }
    double location() const override { return mean_; }
    double spread() const override { return sd_; }
    const MixtureParams& params() const { return p_; }

    double pdf(double u) const override {
        if (p_.known) return special::normal_pdf((u - mean_) / sd_) / sd_;
        auto inner = [&](double t) {
            const double s = inner_sd(t);
            if (s == 0) return 0.0;  // limit of a collapsing Gaussian away from its centre
            return special::normal_pdf((u - p_.beta0 - t * p_.muZ) / s) / s;
        };
        return mix(inner, u, density_tolerance());
    }

    double cdf(double u) const override {
        if (p_.known) return special::normal_cdf((u - mean_) / sd_);
        auto inner = [&](double t) {
            const double s = inner_sd(t), e = u - p_.beta0 - t * p_.muZ;
            if (s == 0) return e >= 0 ? 1.0 : 0.0;
            return special::normal_cdf(e / s);
        };
        return std::clamp(mix(inner, u, inner_tolerance()), 0.0, 1.0);
    }

private:
    double inner_sd(double t) const {
        return std::sqrt(t * t * p_.sigmaZ * p_.sigmaZ / p_.n + p_.sigma0 * p_.sigma0);
    }

    // ∫ inner(β1 + σ1 z) φ(z) dz over |z| ≤ K, with panel breaks where the
    // inner variance vanishes and where the inner Gaussian is centred on u
    template <class Inner>
    double mix(Inner& inner, double u, const quad::Tolerance& tol) const {
        const double k = q_.mixing_range_sigmas;
        auto f = [&](double z) { return special::normal_pdf(z) * inner(p_.beta1 + p_.sigma1 * z); };
        std::vector<double> breaks{-p_.beta1 / p_.sigma1};
        if (p_.muZ != 0) breaks.push_back(((u - p_.beta0) / p_.muZ - p_.beta1) / p_.sigma1);
        return quad::checked(quad::integrate_split(f, -k, k, breaks, tol),
                             "mean mixture quadrature did not converge");
    }

    MixtureParams p_;
    double mean_, sd_;
};

namespace detail {

// Panel breaks at centre·2^k from centre/16 up to `limit`. Kernels whose mass
// sits near `centre` but decays only polynomially above it (the chi variate
// can be small) need panels on every scale, or a wide last panel misses it.
inline std::vector<double> geometric_breaks(double centre, double limit) {
    std::vector<double> out;
    if (!(centre > 0) || !std::isfinite(centre)) return out;
    for (double p = centre / 16; p < limit && out.size() < 200; p *= 2) out.push_back(p);
    return out;
}

// Mixing over t ~ χ²_1(λ), written in s = √t so that the t^{-1/2} singularity
// of the mixing density becomes the bounded weight 2s·f(s²).
class ChiSquareMixing {
public:
    ChiSquareMixing(double lambda, const QuadSpec& q)
        : lambda_(lambda),
          upper_(std::sqrt(lambda) + special::normal_quantile(1 - q.mixing_tail)),
          series_{q.series_terms_inner, 1e-16, q.max_series_terms} {}

    double weight(double s) const {
        return s > 0 ? 2 * s * kernels::nc_chisq1_pdf(s * s, lambda_, series_) : 0.0;
    }
    double upper() const { return upper_; }
    double root_lambda() const { return std::sqrt(lambda_); }

private:
    double lambda_, upper_;
    kernels::SeriesControl series_;
};

}  // namespace detail

/// Law of u = νS²/(σ1²σZ²): given the mixing variable w ~ χ²_1(λ), u/w ~ χ²_ν.
class VarianceMixture final : public MixtureDistribution {
public:
    VarianceMixture(double nu, double lambda, const QuadSpec& q = {})
        : MixtureDistribution(q), nu_(nu), lambda_(lambda), mixing_(lambda, q_) {
        detail::require(std::isfinite(nu) && nu >= 1, "VarianceMixture: nu must be >= 1");
        detail::require(std::isfinite(lambda) && lambda >= 0, "VarianceMixture: lambda must be >= 0");
    }

    std::string_view name() const override { return "variance"; }
    double support_lower() const override { return 0.0; }
    double location() const override { return mean(); }
    double spread() const override {
        const double ew = 1 + lambda_, ew2 = 2 + 4 * lambda_ + ew * ew;
        return std::sqrt(ew2 * (nu_ * nu_ + 2 * nu_) - ew * ew * nu_ * nu_);
    }
    double mean() const { return nu_ * (1 + lambda_); }
    double nu() const { return nu_; }
    double lambda() const { return lambda_; }

    double pdf(double u) const override {
        if (u <= 0) return 0.0;
        auto f = [&](double s) {
            const double s2 = s * s;
            return mixing_.weight(s) * special::chi2_pdf(u / s2, nu_) / s2;
        };
        return mix(f, u, density_tolerance());
    }

    double cdf(double u) const override {
        if (u <= 0) return 0.0;
        if (std::isinf(u)) return 1.0;
        auto f = [&](double s) { return mixing_.weight(s) * special::chi2_cdf(u / (s * s), nu_); };
        return std::clamp(mix(f, u, inner_tolerance()), 0.0, 1.0);
    }

private:
    template <class F>
    double mix(F& f, double u, const quad::Tolerance& tol) const {
        std::vector<double> breaks = detail::geometric_breaks(std::sqrt(u / nu_), mixing_.upper());
        breaks.push_back(mixing_.root_lambda());
        return quad::checked(
            quad::integrate_split(f, 0.0, mixing_.upper(), std::move(breaks), tol),
            "variance mixture quadrature did not converge");
    }

    double nu_, lambda_;
    detail::ChiSquareMixing mixing_;
};

/// Law of t0²: F(1, ν, δ/t) mixed over t ~ χ²_1(λ). At δ = 0 this is exactly
/// the central F(1, ν) whatever λ.
class TsqMixture final : public MixtureDistribution {
public:
    TsqMixture(double nu, double delta, double lambda, const QuadSpec& q = {})
        : MixtureDistribution(q), nu_(nu), delta_(delta), lambda_(lambda), mixing_(lambda, q_) {
        detail::require(std::isfinite(nu) && nu >= 1, "TsqMixture: nu must be >= 1");
        detail::require(std::isfinite(delta) && delta >= 0, "TsqMixture: delta must be >= 0");
        detail::require(std::isfinite(lambda) && lambda >= 0, "TsqMixture: lambda must be >= 0");
    }

    std::string_view name() const override { return "tsq"; }
    double support_lower() const override { return 0.0; }
    // t0² has no finite mean when δ > 0 (the slope can sit near zero), so
    // these are scale hints only
    double location() const override { return 1 + delta_ / (1 + lambda_); }
    double spread() const override { return 2 * location(); }
    double nu() const { return nu_; }
    double delta() const { return delta_; }
    double lambda() const { return lambda_; }

    double pdf(double u) const override {
        if (u < 0) return 0.0;
        if (delta_ == 0) return special::f_pdf(u, 1, nu_);
        if (u == 0) return std::numeric_limits<double>::infinity();
        const auto sc = series(q_.series_terms_outer);
        auto f = [&](double s) {
            if (s <= 0) return 0.0;
            return mixing_.weight(s) * kernels::ncf_pdf(u, 1, nu_, delta_ / (s * s), sc);
        };
        return mix(f, u, density_tolerance());
    }

    double cdf(double u) const override {
        if (u <= 0) return 0.0;
        if (std::isinf(u)) return 1.0;
        if (delta_ == 0) return special::f_cdf(u, 1, nu_);
        auto sc = series(q_.series_terms_outer);
        sc.rel_tol = 1e-16;
        auto f = [&](double s) {
            if (s <= 0) return 0.0;
            return mixing_.weight(s) * kernels::ncf_cdf(u, 1, nu_, delta_ / (s * s), sc);
        };
        return std::clamp(mix(f, u, inner_tolerance()), 0.0, 1.0);
    }

private:
    // the kernel is concentrated near s² ≈ δ/u once δ/s² is large
    template <class F>
    double mix(F& f, double u, const quad::Tolerance& tol) const {
        std::vector<double> breaks = detail::geometric_breaks(std::sqrt(delta_ / u), mixing_.upper());
        breaks.push_back(mixing_.root_lambda());
        return quad::checked(
            quad::integrate_split(f, 0.0, mixing_.upper(), std::move(breaks), tol),
            "t-squared mixture quadrature did not converge");
    }

    double nu_, delta_, lambda_;
    detail::ChiSquareMixing mixing_;
};

/// Law of the signed t0: noncentral t(ν, δ0/s) mixed over s ~ |N(λ0, 1)|.
/// The cdf and interval probabilities integrate the density itself, so this
/// route shares no mixing code with TsqMixture.
class SignedTMixture final : public MixtureDistribution {
public:
    SignedTMixture(double nu, double delta0, double lambda0, const QuadSpec& q = {})
        : MixtureDistribution(q), nu_(nu), delta0_(delta0), lambda0_(lambda0) {
        detail::require(std::isfinite(nu) && nu >= 1, "SignedTMixture: nu must be >= 1");
        detail::require(std::isfinite(delta0), "SignedTMixture: delta0 must be finite");
        detail::require(std::isfinite(lambda0) && lambda0 >= 0,
                        "SignedTMixture: lambda0 must be >= 0");
    }

    std::string_view name() const override { return "signed-t"; }
    double location() const override { return delta0_ / std::max(lambda0_, 1.0); }
    double spread() const override { return 1 + std::abs(location()); }
    double nu() const { return nu_; }
    double delta0() const { return delta0_; }
    double lambda0() const { return lambda0_; }

    double pdf(double u) const override {
        if (delta0_ == 0) return special::t_pdf(u, nu_);
        const double k = q_.mixing_range_sigmas;
        const double lo = std::max(0.0, lambda0_ - k), hi = lambda0_ + k;
        const auto sc = series(q_.series_terms_signed);
        auto f = [&](double s) {
            if (s <= 0) return 0.0;
            const double w = special::normal_pdf(s - lambda0_) + special::normal_pdf(s + lambda0_);
            return w * kernels::nct_pdf(u, nu_, delta0_ / s, sc);
        };
        std::vector<double> breaks;
        if (u * delta0_ > 0) breaks = detail::geometric_breaks(delta0_ / u, hi);
        breaks.push_back(lambda0_);
        return quad::checked(quad::integrate_split(f, lo, hi, breaks, density_tolerance()),
                             "signed t mixture quadrature did not converge");
    }

    double cdf(double u) const override {
        if (std::isinf(u)) return u > 0 ? 1.0 : 0.0;
        auto f = [&](double v) { return pdf(v); };
        const double m = location(), s = spread();
        const quad::Tolerance tol = outer_tolerance();
        if (u <= m)
            return std::clamp(quad::checked(quad::integrate_lower(f, u, s, tol),
                                            "signed t cdf did not converge"),
                              0.0, 1.0);
        return std::clamp(1.0 - quad::checked(quad::integrate_upper(f, u, s, tol),
                                              "signed t cdf did not converge"),
                          0.0, 1.0);
    }

    double probability(double lo, double hi) const override {
        detail::require(lo < hi, "probability: lower bound must be below upper bound");
        auto f = [&](double v) { return pdf(v); };
        if (std::isinf(lo) || std::isinf(hi)) return MixtureDistribution::probability(lo, hi);
        return std::clamp(
            quad::checked(quad::integrate_split(f, lo, hi, {0.0, location()}, outer_tolerance()),
                          "signed t interval probability did not converge"),
            0.0, 1.0);
    }

private:
    double nu_, delta0_, lambda0_;
};

enum class DistKind { mean, variance, tsq, signed_t };

inline std::string_view to_string(DistKind k) {
    switch (k) {
        case DistKind::mean: return "mean";
        case DistKind::variance: return "variance";
        case DistKind::tsq: return "tsq";
        case DistKind::signed_t: return "signed-t";
    }
    return "?";
}

/// One of the four laws with its parameters. For `signed_t`, `delta` and
/// `lambda` hold δ0 = √δ and λ0 = √λ.
struct DistSpec {
    DistKind kind = DistKind::mean;
    MixtureParams params{};
    double nu = 1;
    double delta = 0;
    double lambda = 0;

    static DistSpec mean(const MixtureParams& p) { return {DistKind::mean, p, p.n - 1, 0, 0}; }
    static DistSpec variance(double nu, double lambda) {
        return {DistKind::variance, {}, nu, 0, lambda};
    }
    static DistSpec tsq(double nu, double delta, double lambda) {
        return {DistKind::tsq, {}, nu, delta, lambda};
    }
    static DistSpec signed_t(double nu, double delta0, double lambda0) {
        return {DistKind::signed_t, {}, nu, delta0, lambda0};
    }

    std::unique_ptr<MixtureDistribution> make(const QuadSpec& q = {}) const {
        switch (kind) {
            case DistKind::mean: return std::make_unique<MeanMixture>(params, q);
            case DistKind::variance: return std::make_unique<VarianceMixture>(nu, lambda, q);
            case DistKind::tsq: return std::make_unique<TsqMixture>(nu, delta, lambda, q);
            case DistKind::signed_t: return std::make_unique<SignedTMixture>(nu, delta, lambda, q);
        }
        throw invalid_argument("DistSpec: unknown kind");
    }
};

inline MeanMixture mean_mixture(const MixtureParams& p, const QuadSpec& q = {}) { return {p, q}; }
inline VarianceMixture variance_mixture(double nu, double lambda, const QuadSpec& q = {}) {
    return {nu, lambda, q};
}
inline TsqMixture tsq_mixture(double nu, double delta, double lambda, const QuadSpec& q = {}) {
    return {nu, delta, lambda, q};
}
inline SignedTMixture signed_t_mixture(double nu, double delta0, double lambda0,
                                       const QuadSpec& q = {}) {
    return {nu, delta0, lambda0, q};
}

}  // namespace calib
