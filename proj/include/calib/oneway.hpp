#pragma once

// One-way layouts under calibration: the sums-of-squares decomposition and F
// test, scale-free tests of equal variances, the per-group variance bias, and
// the condition under which calibrated groups stay homoscedastic.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "calib/errors.hpp"
#include "calib/mixtures.hpp"
#include "calib/model.hpp"
#include "calib/quadrature.hpp"
#include "calib/simulate.hpp"
#include "calib/special.hpp"

namespace calib::oneway {

/// Model side of a one-way experiment on the raw reading scale.
struct OneWayDesign {
    std::vector<std::size_t> sizes;  ///< nᵢ
    std::vector<double> means;       ///< μᵢ
    std::vector<double> sds;         ///< ωᵢ

    std::size_t k() const { return sizes.size(); }
    std::size_t total() const {
        std::size_t n = 0;
        for (auto s : sizes) n += s;
        return n;
    }
    void validate() const {
        detail::require(sizes.size() >= 2, "OneWayDesign: at least 2 groups are required");
        detail::require(means.size() == sizes.size() && sds.size() == sizes.size(),
                        "OneWayDesign: sizes, means and sds must have equal length");
        for (std::size_t i = 0; i < k(); ++i) {
            detail::require(sizes[i] >= 2, "OneWayDesign: every group needs at least 2 observations");
            detail::require(std::isfinite(means[i]), "OneWayDesign: means must be finite");
            detail::require(sds[i] > 0 && std::isfinite(sds[i]), "OneWayDesign: sds must be positive");
        }
    }
    bool homoscedastic(double rel_tol = 1e-12) const {
        const auto [lo, hi] = std::minmax_element(sds.begin(), sds.end());
        return *hi - *lo <= rel_tol * *hi;
    }
};

struct AnovaDecomposition {
    double ss0;  ///< n ȳ²
    double ss1;  ///< Σ nᵢ (ȳᵢ - ȳ)², between groups
    double ss2;  ///< Σ Σ (y_ij - ȳᵢ)², within groups
    double total;  ///< y'y
    std::size_t k, n;
    double f_statistic;  ///< (n - k) ss1 / ((k - 1) ss2)
    std::vector<double> group_means;
    std::vector<double> group_variances;  ///< Sᵢ² with divisor nᵢ - 1
};

/// Decomposition of observations listed group by group with the given sizes.
inline AnovaDecomposition decompose(std::span<const double> y, std::span<const std::size_t> sizes) {
    detail::require(sizes.size() >= 2, "decompose: at least 2 groups are required");
    std::size_t n = 0;
    for (auto s : sizes) {
        detail::require(s >= 2, "decompose: every group needs at least 2 observations");
        n += s;
    }
    detail::require(n == y.size(), "decompose: group sizes do not match the data");
    const std::size_t k = sizes.size();
    detail::require(n > k, "decompose: no within-group degrees of freedom");

    double grand = 0, yy = 0;
    for (double v : y) {
        grand += v;
        yy += v * v;
    }
    grand /= static_cast<double>(n);
    AnovaDecomposition out{static_cast<double>(n) * grand * grand, 0, 0, yy, k, n, 0, {}, {}};
    std::size_t at = 0;
    for (auto s : sizes) {
        const auto g = y.subspan(at, s);
        at += s;
        double m = 0;
        for (double v : g) m += v;
        m /= static_cast<double>(s);
        double w = 0;
        for (double v : g) w += (v - m) * (v - m);
        out.ss1 += static_cast<double>(s) * (m - grand) * (m - grand);
        out.ss2 += w;
        out.group_means.push_back(m);
        out.group_variances.push_back(w / static_cast<double>(s - 1));
    }
    if (!(out.ss2 > 0)) throw invalid_argument("decompose: within-group variation is zero, F is undefined");
    out.f_statistic = static_cast<double>(n - k) * out.ss1 / (static_cast<double>(k - 1) * out.ss2);
    return out;
}

inline AnovaDecomposition decompose(const std::vector<std::vector<double>>& groups) {
    std::vector<double> flat;
    std::vector<std::size_t> sizes;
    for (const auto& g : groups) {
        flat.insert(flat.end(), g.begin(), g.end());
        sizes.push_back(g.size());
    }
    return decompose(flat, sizes);
}

/// Upper α point of the central F(d1, d2).
inline double f_critical(double d1, double d2, double alpha) {
    detail::require(alpha > 0 && alpha < 1, "f_critical: alpha must lie in (0,1)");
    return quad::invert_increasing([&](double u) { return special::f_cdf(u, d1, d2); }, 1 - alpha, 0.0,
                                   10.0, 1e-12, 0.0);
}

struct FPower {
    double lambda;  ///< Σ nᵢ(μᵢ - μ̄)²/ω² with μ̄ = Σ nᵢμᵢ/n
    double df1, df2;
    double critical;
    double power;  ///< P[F > critical]
};

/// Level-α power of the one-way F test. The calibrated F equals the F of the
/// raw readings, so this is also its power on calibrated data.
inline FPower f_power(const OneWayDesign& d, double alpha) {
    d.validate();
    if (!d.homoscedastic()) throw invalid_argument("f_power: group sds must be equal");
    const double n = static_cast<double>(d.total());
    double mbar = 0;
    for (std::size_t i = 0; i < d.k(); ++i) mbar += static_cast<double>(d.sizes[i]) * d.means[i];
    mbar /= n;
    double lambda = 0;
    for (std::size_t i = 0; i < d.k(); ++i)
        lambda += static_cast<double>(d.sizes[i]) * (d.means[i] - mbar) * (d.means[i] - mbar);
    lambda /= d.sds[0] * d.sds[0];
    const double df1 = static_cast<double>(d.k() - 1), df2 = n - static_cast<double>(d.k());
    const double c = f_critical(df1, df2, alpha);
    const double keep = kernels::ncf_cdf(c, df1, df2, lambda, {15, 1e-12, 200000});
    return {lambda, df1, df2, c, 1 - keep};
}

struct VarianceTests {
    double bartlett_stat;  ///< corrected Bartlett statistic M/C
    double cochran_stat;   ///< max Sᵢ² / Σ Sᵢ²
    double hartley_fmax;   ///< max Sᵢ² / min Sᵢ²
};

/// Tests of equal variances from per-group variances and sizes. Bartlett's
/// M = ν ln S_p² - Σ νᵢ ln Sᵢ² is divided by
/// C = 1 + (Σ 1/νᵢ - 1/ν)/(3(k - 1)), νᵢ = nᵢ - 1, ν = Σ νᵢ.
inline VarianceTests variance_tests(std::span<const double> s2, std::span<const std::size_t> sizes) {
    detail::require(s2.size() >= 2 && s2.size() == sizes.size(),
                    "variance_tests: need matching variances and sizes for at least 2 groups");
    const double k = static_cast<double>(s2.size());
    double nu = 0, pooled = 0, inv = 0, logsum = 0, sum = 0;
    for (std::size_t i = 0; i < s2.size(); ++i) {
        detail::require(sizes[i] >= 2, "variance_tests: group sizes must be >= 2");
        if (!(s2[i] > 0) || !std::isfinite(s2[i]))
            throw invalid_argument("variance_tests: variances must be positive");
        const double v = static_cast<double>(sizes[i] - 1);
        nu += v;
        pooled += v * s2[i];
        inv += 1 / v;
        logsum += v * std::log(s2[i]);
        sum += s2[i];
    }
    pooled /= nu;
    const double m = nu * std::log(pooled) - logsum;
    const double c = 1 + (inv - 1 / nu) / (3 * (k - 1));
    const auto [lo, hi] = std::minmax_element(s2.begin(), s2.end());
    return {std::max(0.0, m) / c, *hi / sum, *hi / *lo};
}

struct GroupBias {
    double expected_s2;  ///< E(Sᵢ²) = κ2 ωᵢ²
    double var_y;        ///< Var(Y_ij) = κ2 ωᵢ² + σ0² + σ1² μᵢ²
    double bias;         ///< E(Sᵢ²) - Var(Y_ij)
};

/// Per-group bias of Sᵢ² for Var(Y_ij). Known coefficients give κ2 = β1² and
/// no bias.
inline std::vector<GroupBias> group_variance_bias(const OneWayDesign& d, const MixtureParams& p) {
    d.validate();
    p.validate();
    const double k2 = p.known ? p.beta1 * p.beta1 : p.kappa2();
    const double s0 = p.known ? 0 : p.sigma0, s1 = p.known ? 0 : p.sigma1;
    std::vector<GroupBias> out;
    for (std::size_t i = 0; i < d.k(); ++i) {
        const double e = k2 * d.sds[i] * d.sds[i];
        const double shared = s0 * s0 + s1 * s1 * d.means[i] * d.means[i];
        out.push_back({e, e + shared, -shared});
    }
    return out;
}

struct HomoscedasticityCheck {
    double c;  ///< σ1²/κ2
    /// (i, j, ωᵢ² - ωⱼ², c(μⱼ² - μᵢ²), holds) for every pair i < j
    struct Pair {
        std::size_t i, j;
        double lhs, rhs;
        bool holds;
    };
    std::vector<Pair> pairs;
    bool holds;
};

/// Calibrated groups share one unconditional variance iff
/// ωᵢ² - ωⱼ² = c(μⱼ² - μᵢ²) for all pairs.
inline HomoscedasticityCheck homoscedasticity_condition(const OneWayDesign& d, const MixtureParams& p,
                                                        double tol = 1e-9) {
    d.validate();
    p.validate();
    const double c = p.known ? 0.0 : p.sigma1 * p.sigma1 / p.kappa2();
    HomoscedasticityCheck out{c, {}, true};
    for (std::size_t i = 0; i < d.k(); ++i)
        for (std::size_t j = i + 1; j < d.k(); ++j) {
            const double lhs = d.sds[i] * d.sds[i] - d.sds[j] * d.sds[j];
            const double rhs = c * (d.means[j] * d.means[j] - d.means[i] * d.means[i]);
            const bool ok = std::abs(lhs - rhs) <= tol * std::max({1.0, std::abs(lhs), std::abs(rhs)});
            out.pairs.push_back({i, j, lhs, rhs, ok});
            out.holds = out.holds && ok;
        }
    return out;
}

struct OneWayMcReport {
    std::uint64_t replications;
    double max_f_deviation;          ///< worst relative |F(Y) - F(Z)|
    std::vector<double> f_sample;    ///< sorted F(Y)
    std::optional<FPower> f_law;     ///< noncentral F parameters (equal sds only)
    std::optional<mc::KsResult> ks_f;  ///< F(Y) against the noncentral F cdf
    double rejection_rate;           ///< share of F(Y) above the level-α critical value
    // variance tests on calibrated data vs on plain normal-theory data
    mc::KsResult ks_bartlett, ks_cochran, ks_hartley;
    std::vector<mc::McSummary> mean_s2;  ///< per group E(Sᵢ²)
    std::vector<mc::McSummary> var_y;    ///< per group Var(Y_i1)
};

/// Calibrated one-way data: every replication shares one (β̂0, β̂1) draw
/// across all groups, with raw readings Z_ij ~ N(μᵢ, ωᵢ²). The plain
/// reference draws fresh Z data on its own substream and does not calibrate.
inline OneWayMcReport mc_oneway(const OneWayDesign& d, const MixtureParams& p, const mc::McConfig& cfg,
                                double alpha = 0.05, std::size_t ks_points = 400) {
    d.validate();
    p.validate();
    const std::size_t k = d.k(), n = d.total();
    struct Acc {
        double dev = 0;
        std::vector<double> f, bart, coch, hart;
        std::vector<mc::MomentAccumulator> s2, y1;
        void merge(const Acc& o) {
            dev = std::max(dev, o.dev);
            for (auto [dst, src] : {std::pair{&f, &o.f}, {&bart, &o.bart}, {&coch, &o.coch}, {&hart, &o.hart}})
                dst->insert(dst->end(), src->begin(), src->end());
            if (s2.empty()) {
                s2 = o.s2;
                y1 = o.y1;
            } else {
                for (std::size_t i = 0; i < o.s2.size(); ++i) {
                    s2[i].merge(o.s2[i]);
                    y1[i].merge(o.y1[i]);
                }
            }
        }
    };
    auto draw_z = [&](mc::Stream& s) {
        std::vector<double> z;
        z.reserve(n);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < d.sizes[i]; ++j) z.push_back(s.normal(d.means[i], d.sds[i]));
        return z;
    };
    auto record_tests = [&](const AnovaDecomposition& a, Acc& acc) {
        const VarianceTests vt = variance_tests(a.group_variances, d.sizes);
        acc.bart.push_back(vt.bartlett_stat);
        acc.coch.push_back(vt.cochran_stat);
        acc.hart.push_back(vt.hartley_fmax);
    };
    auto cal = mc::run_replications<Acc>(cfg, [&](std::uint64_t, mc::Stream& s, Acc& acc) {
        if (acc.s2.empty()) {
            acc.s2.resize(k);
            acc.y1.resize(k);
        }
        const mc::Coefficients c = mc::draw_coefficients(p, cfg, s);
        const std::vector<double> z = draw_z(s);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = c.b0 + c.b1 * z[i];
        const AnovaDecomposition ay = decompose(y, d.sizes), az = decompose(z, d.sizes);
        acc.dev = std::max(acc.dev, mc::relative_deviation(ay.f_statistic, az.f_statistic));
        acc.f.push_back(ay.f_statistic);
        record_tests(ay, acc);
        std::size_t at = 0;
        for (std::size_t i = 0; i < k; ++i) {
            acc.s2[i].add(ay.group_variances[i]);
            acc.y1[i].add(y[at]);
            at += d.sizes[i];
        }
    });
    auto plain = mc::run_replications<Acc>(
        cfg, [&](std::uint64_t, mc::Stream& s, Acc& acc) { record_tests(decompose(draw_z(s), d.sizes), acc); },
        1);

    OneWayMcReport rep;
    rep.replications = cfg.replications;
    rep.max_f_deviation = cal.dev;
    std::sort(cal.f.begin(), cal.f.end());
    rep.f_sample = cal.f;
    const double df1 = static_cast<double>(k - 1), df2 = static_cast<double>(n - k);
    const double crit = f_critical(df1, df2, alpha);
    const auto above = cal.f.end() - std::upper_bound(cal.f.begin(), cal.f.end(), crit);
    rep.rejection_rate = static_cast<double>(above) / static_cast<double>(cal.f.size());
    if (d.homoscedastic()) {
        rep.f_law = f_power(d, alpha);
        const double lam = rep.f_law->lambda;
        rep.ks_f = mc::ks_test_bracketed(
            cal.f, [&](double u) { return kernels::ncf_cdf(u, df1, df2, lam, {15, 1e-12, 200000}); },
            ks_points);
    }
    auto ks = [](std::vector<double>& a, std::vector<double>& b) {
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        return mc::ks_two_sample(a, b);
    };
    rep.ks_bartlett = ks(cal.bart, plain.bart);
    rep.ks_cochran = ks(cal.coch, plain.coch);
    rep.ks_hartley = ks(cal.hart, plain.hart);
    for (std::size_t i = 0; i < k; ++i) {
        rep.mean_s2.push_back({"mean_s2", cal.s2[i].mean(), cal.s2[i].mean_std_error(), cfg.replications});
        rep.var_y.push_back({"var_y", cal.y1[i].variance(), cal.y1[i].variance_std_error(), cfg.replications});
    }
    return rep;
}

}  // namespace calib::oneway
