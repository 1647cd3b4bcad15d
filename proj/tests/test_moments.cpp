#include <catch_amalgamated.hpp>

#include <array>
#include <vector>

#include "calib/moments.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using calib::MixtureParams;

namespace {

// Polynomials in a standard normal z, coefficient i multiplying z^i.
using Poly = std::vector<double>;

Poly mul(const Poly& a, const Poly& b) {
    Poly out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

double expect(const Poly& p) {
    double e = 0, m = 1;  // E z^i = (i-1)!! for even i
    for (std::size_t i = 0; i < p.size(); i += 2) {
        e += p[i] * m;
        m *= static_cast<double>(i + 1);
    }
    return e;
}

// Central moments of Ȳ - μ = σ1μZ z + √v(z) ε, v(z) = (β1 + σ1 z)²σZ²/n + σ0²,
// with z, ε independent standard normals: every moment is a polynomial
// expectation in z.
std::array<double, 5> exact_central_moments(const MixtureParams& p) {
    const Poly a{0.0, p.sigma1 * p.muZ};
    const Poly t{p.beta1, p.sigma1};
    Poly v = mul(t, t);
    for (double& c : v) c *= p.sigmaZ * p.sigmaZ / p.n;
    v[0] += p.sigma0 * p.sigma0;
    const Poly a2 = mul(a, a), a3 = mul(a2, a), a4 = mul(a3, a);
    std::array<double, 5> m{};
    m[2] = expect(a2) + expect(v);
    m[3] = expect(a3) + 3 * expect(mul(a, v));
    m[4] = expect(a4) + 6 * expect(mul(a2, v)) + 3 * expect(mul(v, v));
    return m;
}

struct Row {
    double n, b0, s0, mz, sz, b1, s1;
    double mean, var, gamma, kappa;
};

// four-decimal moment table; the skewness of the sigmaZ = 2 row is 0.3227
const std::vector<Row> table{
    {10, 1, 1, 1, 1, 1, 1, 2, 2.2, 0.1839, 3.2851},      {20, 1, 1, 1, 1, 1, 1, 2, 2.1, 0.0986, 3.1463},
    {20, .5, 1, 1, 1, 1, 1, 1.5, 2.1, 0.0986, 3.1463},   {20, 2, 1, 1, 1, 1, 1, 3, 2.1, 0.0986, 3.1463},
    {20, 1, .5, 1, 1, 1, 1, 2, 1.35, 0.1913, 3.3539},    {20, 1, 2, 1, 1, 1, 1, 2, 5.1, 0.0260, 3.0248},
    {20, 1, 1, .5, 1, 1, 1, 1.5, 1.35, 0.0956, 3.1070},  {20, 1, 1, 2, 1, 1, 1, 3, 5.1, 0.0521, 3.0940},
    {20, 1, 1, 1, .5, 1, 1, 2, 2.025, 0.0260, 3.0373},   {20, 1, 1, 1, 2, 1, 1, 2, 2.4, 0.3227, 3.5417},
    {20, 1, 1, 1, 1, .5, 1, 1.5, 2.0625, 0.0506, 3.1463}, {20, 1, 1, 1, 1, 2, 1, 3, 2.25, 0.1778, 3.1452},
    {20, 1, 1, 1, 1, 1, .5, 2, 1.3125, 0.0499, 3.0267},  {20, 1, 1, 1, 1, 1, 2, 2, 5.25, 0.0998, 3.3614},
    {10, 1, .5, 1, 2, 1, 2, 2, 6.25, 0.6144, 5.5559}};

}  // namespace

TEST_CASE("moments of the mean law match the polynomial expansion") {
    for (const Row& r : table) {
        const MixtureParams p{r.n, r.b0, r.s0, r.mz, r.sz, r.b1, r.s1, false};
        const auto m = calib::mean_moments(p);
        const auto c = exact_central_moments(p);
        INFO("row n=" << r.n << " b0=" << r.b0 << " s0=" << r.s0 << " mz=" << r.mz << " sz=" << r.sz
                      << " b1=" << r.b1 << " s1=" << r.s1);
        CHECK_THAT(m.mean, WithinAbs(r.mean, 1e-12));
        CHECK_THAT(m.variance, WithinAbs(r.var, 1e-12));
        CHECK_THAT(m.variance, WithinRel(c[2], 1e-12));
        CHECK_THAT(m.quadrature_mean, WithinAbs(r.mean, 1e-8));
        CHECK_THAT(m.quadrature_variance, WithinRel(r.var, 1e-8));
        CHECK_THAT(m.skewness, WithinAbs(c[3] / std::pow(c[2], 1.5), 1e-7));
        CHECK_THAT(m.kurtosis, WithinAbs(c[4] / (c[2] * c[2]), 1e-7));
        CHECK_THAT(m.skewness, WithinAbs(r.gamma, 1e-4));
        CHECK_THAT(m.kurtosis, WithinAbs(r.kappa, 1e-4));
    }
}

TEST_CASE("octane mean law is symmetric with kurtosis 3.855") {
    const MixtureParams p{11, 87.2818, 0.1846, 0, 1, 1.8546, 0.5837, false};
    const auto m = calib::mean_moments(p);
    CHECK(std::abs(m.skewness) < 1e-6);
    CHECK_THAT(m.kurtosis, WithinAbs(3.855, 5e-4));
}

TEST_CASE("known coefficients give Gaussian moment ratios") {
    const auto m = calib::mean_moments(MixtureParams::known_coefficients(10, 1, 1, 1, 2));
    CHECK(m.skewness == 0);
    CHECK(m.kurtosis == 3);
    CHECK_THAT(m.variance, WithinAbs(0.4, 1e-15));
}

TEST_CASE("expected sample variance and its bias") {
    const MixtureParams octane{11, 87.2818, 0.1846, 0, 1, 1.8546, 0.5837, false};
    const auto e = calib::expected_sample_variance(octane);
    CHECK_THAT(e.expected, WithinAbs(3.780, 5e-4));
    CHECK_THAT(e.bias, WithinAbs(-0.1846 * 0.1846, 1e-14));
    const MixtureParams unit{10, 1, 1, 0, 1, 1, 1, false};
    const auto u = calib::expected_sample_variance(unit);
    CHECK(u.expected == 2.0);
    CHECK(u.var_y == 3.0);
    CHECK(u.bias == -1.0);
}

TEST_CASE("probability regions") {
    const MixtureParams octane{11, 87.2818, 0.1846, 0, 1, 1.8546, 0.5837, false};
    const calib::MeanMixture law(octane);
    const auto r = calib::probability_region(law, 0.95);
    CHECK_THAT(r.lower, WithinAbs(86.037, 0.001));
    CHECK_THAT(r.upper, WithinAbs(88.526, 0.001));
    CHECK_THAT(r.achieved, WithinAbs(0.95, 1e-8));
    // symmetric law, symmetric region
    CHECK_THAT(r.lower + r.upper, WithinAbs(2 * 87.2818, 1e-6));
    CHECK_THAT(calib::interval_coverage(law, 86.184, 88.376), WithinAbs(0.922, 0.001));
    CHECK_THROWS_AS(calib::probability_region(law, 1.0), calib::invalid_argument);
}
