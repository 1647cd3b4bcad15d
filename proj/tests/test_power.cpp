#include <catch_amalgamated.hpp>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/non_central_f.hpp>

#include "calib/power.hpp"

using Catch::Matchers::WithinAbs;
namespace bm = boost::math;

namespace {

// P[t0² ≤ c] as E_X[ncF(1, ν, δ/X²) cdf at c], X ~ N(√λ, 1), by composite
// Simpson over X with Boost's noncentral F.
double oracle_nonrejection(double nu, double delta, double lambda, double c) {
    const double m = std::sqrt(lambda);
    const int steps = 4000;
    const double a = m - 12, b = m + 12, h = (b - a) / steps;
    auto f = [&](double x) {
        const double phi = std::exp(-0.5 * (x - m) * (x - m)) / std::sqrt(2 * M_PI);
        if (x == 0) return 0.0;
        const double nc = delta / (x * x);
        if (nc > 2e4) return 0.0;  // cdf at c is far below 1e-300 here
        return phi * bm::cdf(bm::non_central_f(1, nu, nc), c);
    };
    double s = f(a) + f(b);
    for (int i = 1; i < steps; ++i) s += (i % 2 ? 4 : 2) * f(a + i * h);
    return s * h / 3;
}

}  // namespace

TEST_CASE("critical value of t-squared") {
    CHECK_THAT(calib::tsq_critical(10, 0.05), WithinAbs(bm::quantile(bm::fisher_f(1, 10), 0.95), 1e-10));
    CHECK_THAT(calib::tsq_critical(10, 0.05), WithinAbs(4.9646, 1e-4));
    CHECK_THAT(calib::tsq_critical(3, 0.01), WithinAbs(bm::quantile(bm::fisher_f(1, 3), 0.99), 1e-9));
    CHECK_THROWS_AS(calib::tsq_critical(10, 0), calib::invalid_argument);
}

TEST_CASE("operating characteristics against an independent mixing oracle") {
    for (double delta : {1.0, 4.0, 9.0, 2.9351})
        for (double lambda : {1.0, 4.0, 10.0953}) {
            const auto cell = calib::operating_characteristics(10, delta, lambda, 0.05);
            INFO("delta=" << delta << " lambda=" << lambda);
            CHECK_THAT(cell.nonrejection_prob,
                       WithinAbs(oracle_nonrejection(10, delta, lambda, cell.critical), 1e-7));
            CHECK(cell.rejection_prob == 1 - cell.nonrejection_prob);
        }
}

TEST_CASE("printed nonrejection grid") {
    const std::vector<double> deltas{0, 1, 4, 9}, lambdas{1, 4, 9};
    const double printed[4][3] = {{.950, .950, .950}, {.691, .863, .928}, {.485, .742, .876}, {.329, .608, .799}};
    const auto grid = calib::power_table(10, deltas, lambdas, 0.05, {}, true);
    REQUIRE(grid.size() == 12);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            const auto& c = grid[3 * i + j];
            CHECK(c.delta == deltas[i]);
            CHECK(c.lambda == lambdas[j]);
            CHECK_THAT(c.nonrejection_prob, WithinAbs(printed[i][j], 0.005));
            CHECK_THAT(*c.nonrejection_signed, WithinAbs(c.nonrejection_prob, 1e-6));
        }
    for (std::size_t j = 0; j < 3; ++j) CHECK_THAT(grid[j].nonrejection_prob, WithinAbs(0.95, 1e-10));
}

TEST_CASE("octane operating characteristic is about ninety percent") {
    const auto cell = calib::operating_characteristics(10, 2.9351, 10.0953, 0.05, {}, true);
    CHECK_THAT(cell.nonrejection_prob, WithinAbs(0.90, 0.005));
    CHECK_THAT(*cell.nonrejection_signed, WithinAbs(cell.nonrejection_prob, 1e-6));
}

TEST_CASE("stochastic ordering probes") {
    using calib::OrderingFamily;
    const auto v = calib::ordering_probe(OrderingFamily::variance_in_lambda, 10, 0, {1, 4, 9}, {5, 20, 80});
    CHECK(v.holds());
    CHECK(v.strict());
    const auto d = calib::ordering_probe(OrderingFamily::tsq_in_delta, 10, 4, {0, 1, 4, 9}, {4.9646});
    CHECK(d.holds());
    CHECK(d.strict());
    const auto l = calib::ordering_probe(OrderingFamily::tsq_in_lambda, 10, 4, {1, 4, 9}, {4.9646});
    CHECK(l.holds());
    CHECK(l.strict());
    // at δ = 0 the cdf does not depend on λ at all
    const auto flat = calib::ordering_probe(OrderingFamily::tsq_in_lambda, 10, 0, {1, 4, 9}, {4.9646});
    CHECK(flat.holds());
    CHECK_FALSE(flat.strict());
    CHECK_THROWS_AS(calib::ordering_probe(OrderingFamily::tsq_in_delta, 10, 4, {4, 1}, {1}), calib::invalid_argument);
}
