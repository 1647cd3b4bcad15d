#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "calib/model.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using calib::CalibrationPair;
using calib::MixtureParams;

namespace {

const std::vector<CalibrationPair> octane{{99.8, 88.6}, {99.7, 86.4}, {99.6, 87.2}, {99.5, 88.4},
                                          {99.4, 87.2}, {99.3, 86.8}, {99.2, 86.1}, {99.1, 87.3},
                                          {99.0, 86.4}, {98.9, 86.6}, {98.8, 87.1}};

// Ordinary least squares through raw sums in long double, as an independent
// route to the centred fit.
struct Ols {
    long double b0, b1, s;
};
Ols raw_sums_fit(const std::vector<CalibrationPair>& d) {
    long double n = d.size(), sx = 0, su = 0, sxx = 0, sxu = 0, suu = 0;
    for (auto [x, u] : d) {
        sx += x;
        su += u;
        sxx += (long double)x * x;
        sxu += (long double)x * u;
        suu += (long double)u * u;
    }
    const long double b1 = (n * sxu - sx * su) / (n * sxx - sx * sx);
    const long double a = (su - b1 * sx) / n;  // uncentred intercept
    const long double sse = suu - a * su - b1 * sxu;
    return {a + b1 * sx / n, b1, std::sqrt(sse / (n - 2))};
}

}  // namespace

TEST_CASE("calibration fit matches an independent least-squares computation") {
    const auto f = calib::fit_calibration(octane);
    const Ols o = raw_sums_fit(octane);
    CHECK_THAT(f.beta0_hat, WithinAbs(double(o.b0), 1e-10));
    CHECK_THAT(f.beta1_hat, WithinAbs(double(o.b1), 1e-9));
    CHECK_THAT(f.sigmaU_hat, WithinAbs(double(o.s), 1e-8));
    // hand values: ū = 87.1, Sxx = 1.1, Sxu = 1.24
    CHECK_THAT(f.beta0_hat, WithinAbs(87.1, 1e-12));
    CHECK_THAT(f.beta1_hat, WithinAbs(1.24 / 1.1, 1e-12));
    CHECK_THAT(f.sigmaU_hat, WithinAbs(0.7395, 1e-4));
    CHECK_THAT(f.sigma0, WithinAbs(f.sigmaU_hat / std::sqrt(11.0), 1e-14));
    CHECK_THAT(f.sigma1, WithinAbs(f.sigmaU_hat / std::sqrt(1.1), 1e-12));
    CHECK(f.n0 == 11);
    CHECK_THAT(f.project(99.3), WithinAbs(87.1, 1e-12));
}

TEST_CASE("calibration fit rejects degenerate inputs") {
    CHECK_THROWS_AS(calib::fit_calibration(std::vector<CalibrationPair>{{1, 2}, {2, 3}}), calib::invalid_argument);
    CHECK_THROWS_AS(calib::fit_calibration(std::vector<CalibrationPair>{{1, 2}, {1, 3}, {1, 4}}),
                    calib::invalid_argument);
}

TEST_CASE("parameter validation") {
    MixtureParams p;
    CHECK_NOTHROW(p.validate());
    p.sigma1 = 0;
    CHECK_THROWS_AS(p.validate(), calib::invalid_argument);
    p = {};
    p.n = 1;
    CHECK_THROWS_AS(p.validate(), calib::invalid_argument);
    p = {};
    p.sigmaZ = -1;
    CHECK_THROWS_AS(p.validate(), calib::invalid_argument);
    const auto k = MixtureParams::known_coefficients(5, 1, 2, 1, 3);
    CHECK(k.known);
    CHECK(k.sigma0 == 0);
}

TEST_CASE("derived parameters at unit values") {
    const MixtureParams p{10, 1, 1, 1, 1, 1, 1, false};
    const auto d = calib::derive_params(p, 0.0);
    CHECK(d.kappa2 == 2.0);
    CHECK(*d.lambda == 1.0);
    CHECK(d.nu == 9.0);
    CHECK(*d.delta == 4.0);
    CHECK(d.muY == 2.0);
    CHECK_THAT(d.varYbar, WithinAbs(2.2, 1e-15));
    CHECK_THAT(d.varY, WithinAbs(4.0, 1e-15));
    CHECK(d.shared == 2.0);
    const auto known = calib::derive_params(MixtureParams::known_coefficients(10, 1, 1, 1, 2));
    CHECK_FALSE(known.lambda.has_value());
    CHECK(known.varYbar == 0.4);
}

TEST_CASE("unconditional covariance has the three-part structure") {
    const MixtureParams p{3, 0.5, 0.7, 0, 1, 1.3, 0.4, false};
    Eigen::VectorXd mu(3);
    mu << 1.0, -2.0, 0.5;
    Eigen::MatrixXd s(3, 3);
    s << 2, 0.3, 0, 0.3, 1, -0.2, 0, -0.2, 1.5;
    const auto [mean, cov] = calib::unconditional_mean_cov(mu, s, p);
    const double k2 = 1.3 * 1.3 + 0.16;
    for (int i = 0; i < 3; ++i) {
        CHECK_THAT(mean(i), WithinAbs(0.5 + 1.3 * mu(i), 1e-15));
        for (int j = 0; j < 3; ++j)
            CHECK_THAT(cov(i, j), WithinAbs(k2 * s(i, j) + 0.49 + 0.16 * mu(i) * mu(j), 1e-14));
    }
    CHECK(cov.isApprox(cov.transpose(), 0.0));
    Eigen::MatrixXd bad = s;
    bad(0, 1) = 5;
    CHECK_THROWS_AS(calib::unconditional_mean_cov(mu, bad, p), calib::invalid_argument);
    CHECK_THROWS_AS(calib::unconditional_mean_cov(Eigen::VectorXd::Zero(2), s, p), calib::invalid_argument);
}

TEST_CASE("equicorrelation of calibrated measurements") {
    const MixtureParams unit{10, 1, 1, 0, 1, 1, 1, false};
    CHECK_THAT(calib::correlation_params(unit).unconditional, WithinAbs(1.0 / 3, 1e-15));
    const auto c = calib::correlation_params(unit, 2.0);
    CHECK_THAT(*c.conditional, WithinAbs(1.0 / 5, 1e-15));
    const auto known = calib::correlation_params(MixtureParams::known_coefficients(10, 1, 0, 1, 1));
    CHECK(known.unconditional == 0.0);
}
