#pragma once

// Seeded Monte Carlo for calibrated measurements.
//
// Random numbers come from Philox4x32-10, a counter-based generator: the
// 64-bit seed is the key and the counter holds (draw block, substream,
// replication). Replication r therefore always sees the same stream no matter
// which worker runs it or in what order. Normals use Box-Muller on 53-bit
// uniforms, so every normal consumes exactly two uniforms.
//
// Replications are processed in fixed-size blocks; each block fills its own
// accumulator and blocks are merged in index order, so results depend on the
// seed and the configuration but never on the number of worker threads.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <string_view>
#include <thread>
#include <vector>

#include "calib/errors.hpp"
#include "calib/model.hpp"

namespace calib::mc {

inline constexpr std::string_view rng_id = "philox4x32-10+box-muller/v1";

class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Block generate(Block ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += 0x9E3779B9u;
                key[1] += 0xBB67AE85u;
            }
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
                   static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
                   static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }
};

/// One replication's random stream.
class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t replication, std::uint32_t substream = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          ctr_{0u, substream, static_cast<std::uint32_t>(replication),
               static_cast<std::uint32_t>(replication >> 32)} {}

    std::uint32_t next_u32() {
        if (pos_ == 4) {
            buf_ = Philox4x32::generate(ctr_, key_);
            ++ctr_[0];
            if (ctr_[0] == 0) throw invalid_argument("Stream: draw counter exhausted");
            pos_ = 0;
        }
        return buf_[pos_++];
    }

    /// Uniform on the open interval (0, 1) with 53 random bits.
    double uniform() {
        const std::uint64_t hi = next_u32(), lo = next_u32();
        const std::uint64_t bits = ((hi << 32) | lo) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1p-53;
    }

    double normal() {
        if (spare_) {
            const double z = *spare_;
            spare_.reset();
            return z;
        }
        const double u1 = uniform(), u2 = uniform();
        const double r = std::sqrt(-2 * std::log(u1)), a = 2 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        return r * std::cos(a);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

private:
    Philox4x32::Key key_;
    Philox4x32::Block ctr_;
    Philox4x32::Block buf_{};
    int pos_ = 4;
    std::optional<double> spare_;
};

enum class SamplingMode {
    coefficient_level,  ///< draw (β̂0, β̂1) directly from their normal laws
    full_calibration,   ///< simulate a calibration data set and fit it
};

struct CalibrationDesign {
    std::vector<double> x;  ///< instrument settings of the calibration run
    double sigmaU = 1;      ///< error sd of the reference measurements
};

struct McConfig {
    std::uint64_t replications = 10000;
    std::uint64_t seed = 20240611;
    SamplingMode mode = SamplingMode::coefficient_level;
    std::optional<CalibrationDesign> design;  ///< required for full_calibration
    unsigned workers = 0;                     ///< 0: hardware concurrency
    std::uint64_t block_size = 4096;

    void validate() const {
        detail::require(replications >= 1, "McConfig: replications must be >= 1");
        detail::require(block_size >= 1, "McConfig: block_size must be >= 1");
        if (mode == SamplingMode::full_calibration) {
            detail::require(design.has_value(), "McConfig: full_calibration needs a design");
            detail::require(design->x.size() >= 3, "McConfig: design needs at least 3 points");
            detail::require(design->sigmaU > 0, "McConfig: design sigmaU must be positive");
        }
    }
};

/// Ω whose (σ0, σ1) are those implied by a calibration design.
inline MixtureParams params_for_design(MixtureParams p, const CalibrationDesign& d) {
    double xbar = 0;
    for (double x : d.x) xbar += x;
    xbar /= static_cast<double>(d.x.size());
    double sxx = 0;
    for (double x : d.x) sxx += (x - xbar) * (x - xbar);
    detail::require(sxx > 0, "params_for_design: degenerate design");
    p.known = false;
    p.sigma0 = d.sigmaU / std::sqrt(static_cast<double>(d.x.size()));
    p.sigma1 = d.sigmaU / std::sqrt(sxx);
    p.validate();
    return p;
}

struct Coefficients {
    double b0, b1;
};

/// Calibration draw for one replication. In full-calibration mode the true
/// line is (β0, β1) on the centred design and (σ0, σ1) of `p` are not used.
inline Coefficients draw_coefficients(const MixtureParams& p, const McConfig& cfg, Stream& s) {
    if (p.known) return {p.beta0, p.beta1};
    if (cfg.mode == SamplingMode::coefficient_level)
        return {s.normal(p.beta0, p.sigma0), s.normal(p.beta1, p.sigma1)};
    const CalibrationDesign& d = *cfg.design;
    double xbar = 0;
    for (double x : d.x) xbar += x;
    xbar /= static_cast<double>(d.x.size());
    std::vector<CalibrationPair> data;
    data.reserve(d.x.size());
    for (double x : d.x) data.push_back({x, p.beta0 + p.beta1 * (x - xbar) + s.normal(0, d.sigmaU)});
    const CalibrationFit f = fit_calibration(data);
    return {f.beta0_hat, f.beta1_hat};
}

inline std::size_t sample_size(const MixtureParams& p) {
    detail::require(p.n == std::floor(p.n) && p.n >= 2 && p.n < 1e9,
                    "simulation needs an integer sample size n");
    return static_cast<std::size_t>(p.n);
}

/// n calibrated values Y_i = β̂0 + β̂1 Z_i sharing one calibration draw.
inline std::vector<double> draw_calibrated_sample(const MixtureParams& p, const McConfig& cfg,
                                                  Stream& s) {
    const std::size_t n = sample_size(p);
    const Coefficients c = draw_coefficients(p, cfg, s);
    std::vector<double> y(n);
    for (auto& v : y) v = c.b0 + c.b1 * s.normal(p.muZ, p.sigmaZ);
    return y;
}

/// Streaming central moments up to order four, mergeable (Pébay's update).
class MomentAccumulator {
public:
    void add(double x) {
        const double n1 = static_cast<double>(n_);
        ++n_;
        const double n = static_cast<double>(n_);
        const double delta = x - mean_, dn = delta / n, dn2 = dn * dn, t = delta * dn * n1;
        mean_ += dn;
        m4_ += t * dn2 * (n * n - 3 * n + 3) + 6 * dn2 * m2_ - 4 * dn * m3_;
        m3_ += t * dn * (n - 2) - 3 * dn * m2_;
        m2_ += t;
    }

    void merge(const MomentAccumulator& o) {
        if (o.n_ == 0) return;
        if (n_ == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_), n = na + nb;
        const double d = o.mean_ - mean_, d2 = d * d, d3 = d2 * d, d4 = d2 * d2;
        const double m2 = m2_ + o.m2_ + d2 * na * nb / n;
        const double m3 = m3_ + o.m3_ + d3 * na * nb * (na - nb) / (n * n) +
                          3 * d * (na * o.m2_ - nb * m2_) / n;
        const double m4 = m4_ + o.m4_ + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
                          6 * d2 * (na * na * o.m2_ + nb * nb * m2_) / (n * n) +
                          4 * d * (na * o.m3_ - nb * m3_) / n;
        mean_ += d * nb / n;
        m2_ = m2;
        m3_ = m3;
        m4_ = m4;
        n_ += o.n_;
    }

    std::uint64_t count() const { return n_; }
    double mean() const { return mean_; }
    /// unbiased sample variance
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double mean_std_error() const { return std::sqrt(variance() / static_cast<double>(n_)); }
    /// large-sample standard error of variance(): √((μ4 - σ⁴)/N)
    double variance_std_error() const {
        const double n = static_cast<double>(n_);
        const double mu4 = m4_ / n, s2 = m2_ / n;
        return std::sqrt(std::max(0.0, mu4 - s2 * s2) / n);
    }
    double skewness() const {
        const double n = static_cast<double>(n_);
        return std::sqrt(n) * m3_ / std::pow(m2_, 1.5);
    }
    double kurtosis() const {
        const double n = static_cast<double>(n_);
        return n * m4_ / (m2_ * m2_);
    }

private:
    std::uint64_t n_ = 0;
    double mean_ = 0, m2_ = 0, m3_ = 0, m4_ = 0;
};

/// Mergeable accumulator for Cov(X, Y).
class CovarianceAccumulator {
public:
    void add(double x, double y) {
        ++n_;
        const double n = static_cast<double>(n_);
        const double dx = x - mx_;
        mx_ += dx / n;
        my_ += (y - my_) / n;
        cxy_ += dx * (y - my_);
        sx_.add(x);
        sy_.add(y);
    }
    void merge(const CovarianceAccumulator& o) {
        if (o.n_ == 0) return;
        if (n_ == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_), n = na + nb;
        cxy_ += o.cxy_ + (o.mx_ - mx_) * (o.my_ - my_) * na * nb / n;
        mx_ += (o.mx_ - mx_) * nb / n;
        my_ += (o.my_ - my_) * nb / n;
        n_ += o.n_;
        sx_.merge(o.sx_);
        sy_.merge(o.sy_);
    }
    double correlation() const {
        return cxy_ / static_cast<double>(n_ - 1) / std::sqrt(sx_.variance() * sy_.variance());
    }
    /// large-sample standard error of the correlation, (1 - ρ²)/√N
    double correlation_std_error() const {
        const double r = correlation();
        return (1 - r * r) / std::sqrt(static_cast<double>(n_));
    }

private:
    std::uint64_t n_ = 0;
    double mx_ = 0, my_ = 0, cxy_ = 0;
    MomentAccumulator sx_, sy_;
};

/// Runs body(replication, stream, accumulator) for every replication and
/// merges per-block accumulators in block order. Acc needs merge(const Acc&).
template <class Acc, class Body>
Acc run_replications(const McConfig& cfg, Body&& body, std::uint32_t substream = 0) {
    cfg.validate();
    const std::uint64_t blocks = (cfg.replications + cfg.block_size - 1) / cfg.block_size;
    std::vector<Acc> partial(blocks);
    std::atomic<std::uint64_t> next{0};
    auto work = [&] {
        for (std::uint64_t b; (b = next.fetch_add(1)) < blocks;) {
            const std::uint64_t lo = b * cfg.block_size;
            const std::uint64_t hi = std::min(cfg.replications, lo + cfg.block_size);
            for (std::uint64_t r = lo; r < hi; ++r) {
                Stream s(cfg.seed, r, substream);
                body(r, s, partial[b]);
            }
        }
    };
    unsigned workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, blocks));
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        std::exception_ptr failure;
        std::atomic<bool> failed{false};
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                try {
                    work();
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                    next = blocks;
                }
            });
        pool.clear();
        if (failure) std::rethrow_exception(failure);
    }
    Acc total{};
    for (const Acc& a : partial) total.merge(a);
    return total;
}

/// Appends values in replication order; used to collect raw samples.
struct SampleCollector {
    std::vector<double> values;
    void merge(const SampleCollector& o) { values.insert(values.end(), o.values.begin(), o.values.end()); }
};

struct McSummary {
    std::string_view name;
    double estimate;
    double std_error;
    std::uint64_t replications;
    /// |estimate - target| within k standard errors
    bool agrees(double target, double k = 3) const { return std::abs(estimate - target) <= k * std_error; }
};

struct InconsistencyPoint {
    double n;
    McSummary var_ybar;
    double theoretical;  ///< κ2σZ²/n + σ0² + σ1²μZ²
};

/// Empirical Var(Ȳ_n) across replications for each n. The sample mean of
/// the raw readings is drawn directly as Z̄ ~ N(μZ, σZ²/n), its exact law,
/// so large n costs no more than small n.
inline std::vector<InconsistencyPoint> mc_inconsistency_curve(const MixtureParams& p,
                                                              const std::vector<double>& n_grid,
                                                              const McConfig& cfg) {
    detail::require(!n_grid.empty() && std::is_sorted(n_grid.begin(), n_grid.end()),
                    "mc_inconsistency_curve: n_grid must be nonempty and ascending");
    std::vector<InconsistencyPoint> out;
    std::uint32_t sub = 0;
    for (double n : n_grid) {
        MixtureParams pn = p;
        pn.n = n;
        const DerivedParams d = derive_params(pn);
        const double zsd = p.sigmaZ / std::sqrt(n);
        auto acc = run_replications<MomentAccumulator>(
            cfg,
            [&](std::uint64_t, Stream& s, MomentAccumulator& a) {
                const Coefficients c = draw_coefficients(pn, cfg, s);
                a.add(c.b0 + c.b1 * s.normal(p.muZ, zsd));
            },
            sub++);
        out.push_back({n, {"var_ybar", acc.variance(), acc.variance_std_error(), acc.count()}, d.varYbar});
    }
    return out;
}

enum class Statistic {
    mean,             ///< Ȳ
    scaled_variance,  ///< νS²/(σ1²σZ²)
    tsq,              ///< t0² = n(Ȳ - μY0)²/S²
    signed_t,         ///< t0 = √n(Ȳ - μY0)/S
};

inline std::string_view to_string(Statistic s) {
    switch (s) {
        case Statistic::mean: return "mean";
        case Statistic::scaled_variance: return "scaled-variance";
        case Statistic::tsq: return "tsq";
        case Statistic::signed_t: return "signed-t";
    }
    return "?";
}

/// Sorted Monte Carlo sample of one statistic.
///
/// For t0 and t0², the null value is placed at a fixed offset from the
/// replication's conditional centre: μY0 = β̂0 + β̂1μZ - sign·σ1σZ√(δ/n),
/// where δ = (μY - muY0)²/(σ1²σZ²). With that null the statistic follows the
/// t² mixture with parameters (ν, δ, λ) exactly; a null fixed in absolute
/// terms would add the intercept and μZ noise to the numerator.
inline std::vector<double> mc_statistic_distribution(const MixtureParams& p, Statistic stat,
                                                     const McConfig& cfg,
                                                     std::optional<double> muY0 = {}) {
    const bool needs_null = stat == Statistic::tsq || stat == Statistic::signed_t;
    detail::require(!needs_null || muY0.has_value(), "mc_statistic_distribution: null value required");
    detail::require(!p.known || stat == Statistic::mean,
                    "mc_statistic_distribution: mixture statistics need calibration error");
    const DerivedParams d = derive_params(p, muY0);
    const double n = p.n;
    double offset = 0;
    if (needs_null) {
        const double sign = d.muY >= *muY0 ? 1.0 : -1.0;
        offset = sign * p.sigma1 * p.sigmaZ * std::sqrt(*d.delta / n);
    }
    auto acc = run_replications<SampleCollector>(cfg, [&](std::uint64_t, Stream& s, SampleCollector& c) {
        const std::size_t m = sample_size(p);
        const Coefficients k = draw_coefficients(p, cfg, s);
        MomentAccumulator z;
        for (std::size_t i = 0; i < m; ++i) z.add(s.normal(p.muZ, p.sigmaZ));
        const double ybar = k.b0 + k.b1 * z.mean();
        const double s2 = k.b1 * k.b1 * z.variance();
        switch (stat) {
            case Statistic::mean: c.values.push_back(ybar); break;
            case Statistic::scaled_variance:
                c.values.push_back((n - 1) * s2 / (p.sigma1 * p.sigma1 * p.sigmaZ * p.sigmaZ));
                break;
            case Statistic::tsq:
            case Statistic::signed_t: {
                const double null = k.b0 + k.b1 * p.muZ - offset;
                const double t = std::sqrt(n) * (ybar - null) / std::sqrt(s2);
                c.values.push_back(stat == Statistic::tsq ? t * t : t);
                break;
            }
        }
    });
    std::sort(acc.values.begin(), acc.values.end());
    return std::move(acc.values);
}

/// Tracked functionals of calibrated samples: E(Ȳ), Var(Ȳ), E(S²),
/// Var(Y_1), and Corr(Y_1, Y_2).
struct SampleFunctionals {
    McSummary mean_ybar, var_ybar, mean_s2, var_y, corr_y12;
};

inline SampleFunctionals mc_sample_functionals(const MixtureParams& p, const McConfig& cfg) {
    struct Acc {
        MomentAccumulator ybar, s2, y1;
        CovarianceAccumulator y12;
        void merge(const Acc& o) {
            ybar.merge(o.ybar);
            s2.merge(o.s2);
            y1.merge(o.y1);
            y12.merge(o.y12);
        }
    };
    auto a = run_replications<Acc>(cfg, [&](std::uint64_t, Stream& s, Acc& acc) {
        const std::vector<double> y = draw_calibrated_sample(p, cfg, s);
        MomentAccumulator m;
        for (double v : y) m.add(v);
        acc.ybar.add(m.mean());
        acc.s2.add(m.variance());
        acc.y1.add(y[0]);
        acc.y12.add(y[0], y[1]);
    });
    const auto r = cfg.replications;
    return {{"mean_ybar", a.ybar.mean(), a.ybar.mean_std_error(), r},
            {"var_ybar", a.ybar.variance(), a.ybar.variance_std_error(), r},
            {"mean_s2", a.s2.mean(), a.s2.mean_std_error(), r},
            {"var_y", a.y1.variance(), a.y1.variance_std_error(), r},
            {"corr_y12", a.y12.correlation(), a.y12.correlation_std_error(), r}};
}

/// |a - b| / max(1, |a|, |b|); two infinities of the same sign agree.
inline double relative_deviation(double a, double b) {
    if (a == b) return 0.0;
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

/// Kolmogorov-Smirnov band at α = 0.01 for one sample of size n.
inline double ks_band(std::size_t n) { return 1.63 / std::sqrt(static_cast<double>(n)); }
inline double ks_band(std::size_t n, std::size_t m) {
    const double a = static_cast<double>(n), b = static_cast<double>(m);
    return 1.63 * std::sqrt((a + b) / (a * b));
}

struct KsResult {
    double lower;  ///< a distance the true statistic is at least
    double upper;  ///< a distance the true statistic is at most
    double band;
    bool within() const { return upper < band; }
};

/// Exact one-sample KS distance of a sorted sample from `cdf`.
inline KsResult ks_test(const std::vector<double>& sorted, const std::function<double(double)>& cdf) {
    detail::require(!sorted.empty(), "ks_test: empty sample");
    const double n = static_cast<double>(sorted.size());
    double dmax = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = cdf(sorted[i]);
        dmax = std::max({dmax, (i + 1) / n - f, f - i / n});
    }
    return {dmax, dmax, ks_band(sorted.size())};
}

/// One-sample KS distance bracketed from the cdf on a grid of about `points`
/// sample order statistics. Between grid nodes the cdf is only known to lie
/// between its node values, which bounds the distance from both sides.
inline KsResult ks_test_bracketed(const std::vector<double>& sorted,
                                  const std::function<double(double)>& cdf, std::size_t points) {
    detail::require(!sorted.empty() && points >= 2, "ks_test_bracketed: bad arguments");
    const std::size_t n = sorted.size();
    if (points >= n) return ks_test(sorted, cdf);
    const double nn = static_cast<double>(n);
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < points; ++k) idx.push_back(k * (n - 1) / (points - 1));
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    std::vector<double> f(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) f[k] = cdf(sorted[idx[k]]);
    double lower = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const double i = static_cast<double>(idx[k]);
        lower = std::max({lower, (i + 1) / nn - f[k], f[k] - i / nn});
    }
    // the nodes include the first and last order statistics, so every sample
    // point lies in some node interval
    double upper = lower;
    for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
        // sample points idx[k]..idx[k+1] have cdf values in [f[k], f[k+1]]
        const double ilo = static_cast<double>(idx[k]), ihi = static_cast<double>(idx[k + 1]);
        upper = std::max({upper, (ihi + 1) / nn - f[k], f[k + 1] - ilo / nn});
    }
    return {lower, upper, ks_band(n)};
}

/// Two-sample KS distance between sorted samples.
inline KsResult ks_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
    detail::require(!a.empty() && !b.empty(), "ks_two_sample: empty sample");
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    return {d, d, ks_band(a.size(), b.size())};
}

}  // namespace calib::mc
