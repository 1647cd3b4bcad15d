#include <catch_amalgamated.hpp>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/non_central_f.hpp>

#include "calib/oneway.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
namespace ow = calib::oneway;
namespace bm = boost::math;

TEST_CASE("sum-of-squares decomposition by hand") {
    const auto a = ow::decompose({{1, 2, 3}, {4, 5, 6}});
    CHECK(a.k == 2);
    CHECK(a.n == 6);
    CHECK_THAT(a.ss0, WithinAbs(73.5, 1e-12));
    CHECK_THAT(a.ss1, WithinAbs(13.5, 1e-12));
    CHECK_THAT(a.ss2, WithinAbs(4.0, 1e-12));
    CHECK_THAT(a.total, WithinAbs(a.ss0 + a.ss1 + a.ss2, 1e-12));
    CHECK_THAT(a.f_statistic, WithinAbs(13.5, 1e-12));
    CHECK(a.group_means == std::vector<double>{2, 5});
    CHECK(a.group_variances == std::vector<double>{1, 1});
    CHECK_THROWS_AS(ow::decompose({{1, 1}, {2, 2}}), calib::invalid_argument);
    CHECK_THROWS_AS(ow::decompose({{1, 2, 3}}), calib::invalid_argument);
    const std::vector<double> y{1, 2, 3};
    const std::vector<std::size_t> sizes{2, 2};
    CHECK_THROWS_AS(ow::decompose(y, sizes), calib::invalid_argument);
}

TEST_CASE("F statistic is unchanged by a shared affine map") {
    const std::vector<std::vector<double>> z{{0.3, 1.1, -0.4}, {2.2, 1.9, 2.8, 3.0}, {0.0, -0.7}};
    auto y = z;
    for (auto& g : y)
        for (double& v : g) v = 87.1 - 1.127 * v;
    CHECK_THAT(ow::decompose(y).f_statistic, WithinRel(ow::decompose(z).f_statistic, 1e-12));
}

TEST_CASE("F power against Boost") {
    const ow::OneWayDesign d{{5, 5, 5}, {0, 1, 2}, {1, 1, 1}};
    const auto p = ow::f_power(d, 0.05);
    CHECK_THAT(p.lambda, WithinAbs(10.0, 1e-12));
    CHECK(p.df1 == 2);
    CHECK(p.df2 == 12);
    CHECK_THAT(p.critical, WithinAbs(bm::quantile(bm::fisher_f(2, 12), 0.95), 1e-9));
    CHECK_THAT(p.power, WithinAbs(bm::cdf(bm::complement(bm::non_central_f(2, 12, 10), p.critical)), 1e-10));
    // unequal sizes weight the grand mean
    const ow::OneWayDesign u{{2, 6}, {0, 4}, {2, 2}};
    CHECK_THAT(ow::f_power(u, 0.05).lambda, WithinAbs((2 * 9.0 + 6 * 1.0) / 4, 1e-12));
    const ow::OneWayDesign hetero{{5, 5}, {0, 1}, {1, 2}};
    CHECK_THROWS_AS(ow::f_power(hetero, 0.05), calib::invalid_argument);
}

TEST_CASE("tests of equal variances") {
    const std::vector<std::size_t> sizes{5, 5};
    // groups (1..5) and (1,3,5,7,9); only the variance ratio matters
    const auto t = ow::variance_tests(std::vector<double>{2.5, 10}, sizes);
    CHECK_THAT(t.bartlett_stat, WithinAbs(1.586798587123269, 1e-12));
    CHECK_THAT(t.cochran_stat, WithinAbs(0.8, 1e-15));
    CHECK_THAT(t.hartley_fmax, WithinAbs(4.0, 1e-15));
    CHECK_THAT(ow::variance_tests(std::vector<double>{1, 4}, sizes).bartlett_stat, WithinAbs(1.5868, 1e-4));
    CHECK(ow::variance_tests(std::vector<double>{3, 3}, sizes).bartlett_stat == 0.0);
    CHECK_THROWS_AS(ow::variance_tests(std::vector<double>{0, 1}, sizes), calib::invalid_argument);
}

TEST_CASE("group variance bias") {
    const calib::MixtureParams unit{10, 1, 1, 1, 1, 1, 1, false};
    const ow::OneWayDesign d{{4, 4}, {0, 2}, {1, 3}};
    const auto b = ow::group_variance_bias(d, unit);
    CHECK(b[0].expected_s2 == 2.0);
    CHECK(b[0].var_y == 3.0);
    CHECK(b[0].bias == -1.0);
    CHECK(b[1].expected_s2 == 18.0);
    CHECK(b[1].var_y == 23.0);
    CHECK(b[1].bias == -5.0);
    const auto known = ow::group_variance_bias(d, calib::MixtureParams::known_coefficients(10, 1, 0, 1, 2));
    CHECK(known[1].bias == 0.0);
    CHECK(known[1].expected_s2 == 36.0);
}

TEST_CASE("homoscedasticity condition") {
    const calib::MixtureParams unit{10, 1, 1, 1, 1, 1, 1, false};
    // c = 1/2, so ω0² - ω1² must equal (μ1² - μ0²)/2 = 2
    const ow::OneWayDesign ok{{4, 4}, {0, 2}, {std::sqrt(3.0), 1}};
    const auto h = ow::homoscedasticity_condition(ok, unit);
    CHECK(h.c == 0.5);
    CHECK(h.holds);
    // and then the calibrated groups share one unconditional variance
    const auto b = ow::group_variance_bias(ok, unit);
    CHECK_THAT(b[0].var_y, WithinAbs(b[1].var_y, 1e-12));
    const ow::OneWayDesign equal{{4, 4}, {0, 2}, {1, 1}};
    CHECK_FALSE(ow::homoscedasticity_condition(equal, unit).holds);
    // without calibration error equal raw sds suffice
    CHECK(ow::homoscedasticity_condition(equal, calib::MixtureParams::known_coefficients(10, 1, 0, 1, 1)).holds);
    const ow::OneWayDesign same_mean{{4, 4}, {1, 1}, {1, 1}};
    CHECK(ow::homoscedasticity_condition(same_mean, unit).holds);
}

TEST_CASE("calibrated one-way data in simulation") {
    const calib::MixtureParams unit{10, 1, 1, 1, 1, 1, 1, false};
    const ow::OneWayDesign d{{5, 5, 5}, {0, 0.5, 1}, {1, 1, 1}};
    calib::mc::McConfig cfg;
    cfg.replications = 10000;
    cfg.workers = 0;
    const auto rep = ow::mc_oneway(d, unit, cfg);
    CHECK(rep.max_f_deviation < 1e-10);
    REQUIRE(rep.ks_f.has_value());
    CHECK(rep.ks_f->within());
    const double se = std::sqrt(rep.f_law->power * (1 - rep.f_law->power) / 10000);
    CHECK_THAT(rep.rejection_rate, WithinAbs(rep.f_law->power, 3 * se));
    CHECK(rep.ks_bartlett.within());
    CHECK(rep.ks_cochran.within());
    CHECK(rep.ks_hartley.within());
    const auto bias = ow::group_variance_bias(d, unit);
    for (std::size_t i = 0; i < d.k(); ++i) {
        CHECK(rep.mean_s2[i].agrees(bias[i].expected_s2));
        CHECK(rep.var_y[i].agrees(bias[i].var_y));
    }
}
