#include <catch_amalgamated.hpp>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/distributions/non_central_f.hpp>
#include <boost/math/distributions/non_central_t.hpp>
#include <boost/math/distributions/normal.hpp>

#include "calib/mixtures.hpp"
#include "calib/quadrature.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
namespace bm = boost::math;
namespace k = calib::kernels;
using calib::MixtureParams;

TEST_CASE("noncentral chi-squared(1) density kernel") {
    for (double lambda : {0.0, 0.3, 4.0, 10.0953, 90.0, 900.0}) {
        const bm::non_central_chi_squared law(1.0, lambda);
        for (double w : {1e-4, 0.2, 1.0, 5.0, 30.0, 1200.0}) {
            const double ref = bm::pdf(law, w);
            if (ref < 1e-280) continue;
            CHECK_THAT(k::nc_chisq1_pdf(w, lambda), WithinRel(ref, 1e-10));
        }
    }
}

TEST_CASE("noncentral t density kernel") {
    for (double nu : {1.0, 4.0, 10.0, 60.0})
        for (double d : {-3.0, 0.0, 0.7, 2.5})
            for (double u : {-4.0, -0.5, 0.0, 0.8, 3.0, 20.0}) {
                const double ref = bm::pdf(bm::non_central_t(nu, d), u);
                if (ref < 1e-200) continue;
                CHECK_THAT(k::nct_pdf(u, nu, d), WithinRel(ref, 1e-9));
            }
    // Boost loses a factor of two at large noncentrality, so these come from
    // 50-digit quadrature of the defining integral
    struct Cell {
        double u, nu, d, ref;
    };
    for (const Cell c : {Cell{0.8, 4, 12, 9.8583126498750444e-26}, Cell{0.8, 10, 12, 2.3692810527800724e-27},
                         Cell{3, 60, 12, 2.1737789315991079e-17}, Cell{3, 10, -3, 3.9762979453483497e-7},
                         Cell{20, 10, -3, 2.4283963768324405e-15}, Cell{-4, 10, 2.5, 3.5960196730394506e-7},
                         Cell{-4, 60, 2.5, 2.3690453345304118e-9}, Cell{-0.5, 4, -3, 0.019223586660570561}})
        CHECK_THAT(k::nct_pdf(c.u, c.nu, c.d), WithinRel(c.ref, 1e-9));
    // far tails below the negligible-mass cutoff
    CHECK(k::nct_pdf(-4, 4, 12) < 1e-37);
    CHECK(k::nct_pdf(20, 60, -3) < 1e-37);
}

TEST_CASE("noncentral F kernels") {
    for (double d1 : {1.0, 3.0})
        for (double d2 : {4.0, 10.0, 45.0})
            for (double nc : {0.0, 0.5, 2.9351, 40.0, 600.0})
                for (double u : {0.05, 1.0, 4.9646, 25.0, 400.0}) {
                    const bm::non_central_f law(d1, d2, nc);
                    CHECK_THAT(k::ncf_cdf(u, d1, d2, nc), WithinAbs(bm::cdf(law, u), 1e-11));
                    const double ref = bm::pdf(law, u);
                    if (ref > 1e-60) CHECK_THAT(k::ncf_pdf(u, d1, d2, nc), WithinRel(ref, 1e-9));
                }
}

TEST_CASE("known coefficients reduce the mean law to a Gaussian") {
    const auto p = MixtureParams::known_coefficients(10, 1, 2, 1.5, -0.8);
    const calib::MeanMixture law(p);
    const bm::normal ref(1 - 0.8 * 2, std::abs(0.8) * 1.5 / std::sqrt(10.0));
    for (double u : {-1.0, -0.6, 0.0, 0.3})
        CHECK_THAT(law.cdf(u), WithinAbs(bm::cdf(ref, u), 1e-14));
}

TEST_CASE("central reductions at delta = 0") {
    const calib::TsqMixture tsq(10, 0, 4);
    const bm::fisher_f f(1, 10);
    for (double u : {0.1, 1.0, 4.9646, 30.0}) {
        CHECK_THAT(tsq.cdf(u), WithinAbs(bm::cdf(f, u), 1e-14));
        CHECK_THAT(tsq.pdf(u), WithinRel(bm::pdf(f, u), 1e-12));
    }
}

namespace {

// cdf by the conditional-cdf route vs the integral of the mixed density
void check_cdf_against_pdf(const calib::MixtureDistribution& law, double u) {
    auto f = [&](double v) { return law.pdf(v); };
    double integral;
    if (std::isfinite(law.support_lower())) {
        auto g = [&](double s) { return 2 * s * law.pdf(s * s); };
        integral = calib::quad::integrate(g, 0.0, std::sqrt(u), {1e-12, 1e-11, 4000}).value;
    } else {
        integral = calib::quad::integrate_lower(f, u, law.spread(), {1e-12, 1e-11, 4000}).value;
    }
    CHECK_THAT(law.cdf(u), WithinAbs(integral, 2e-8));
}

}  // namespace

TEST_CASE("cdf and pdf routes agree") {
    const MixtureParams unit{10, 1, 1, 1, 1, 1, 1, false};
    const MixtureParams octane{11, 87.2818, 0.1846, 0, 1, 1.8546, 0.5837, false};
    for (double u : {-1.0, 1.5, 2.0, 4.5}) check_cdf_against_pdf(calib::MeanMixture(unit), u);
    for (double u : {86.0, 87.2818, 88.6}) check_cdf_against_pdf(calib::MeanMixture(octane), u);
    for (double u : {1.0, 10.8, 110.0, 336.5}) check_cdf_against_pdf(calib::VarianceMixture(10, 10.0953), u);
    for (double u : {0.5, 4.9646, 40.0}) check_cdf_against_pdf(calib::TsqMixture(10, 2.9351, 10.0953), u);
    for (double u : {-2.0, 0.0, 1.0, 3.0}) check_cdf_against_pdf(calib::SignedTMixture(10, 1.5, 2.0), u);
}

TEST_CASE("signed t and t-squared laws describe the same statistic") {
    for (double delta : {1.0, 4.0, 9.0})
        for (double lambda : {1.0, 9.0}) {
            const calib::TsqMixture tsq(10, delta, lambda);
            const calib::SignedTMixture st(10, std::sqrt(delta), std::sqrt(lambda));
            for (double r : {0.5, std::sqrt(4.9646), 4.0})
                CHECK_THAT(st.probability(-r, r), WithinAbs(tsq.cdf(r * r), 1e-7));
        }
    // a negative shift mirrors the law
    const calib::SignedTMixture pos(8, 1.2, 1.5), neg(8, -1.2, 1.5);
    CHECK_THAT(pos.pdf(0.7), WithinRel(neg.pdf(-0.7), 1e-10));
}

TEST_CASE("every density integrates to one") {
    const MixtureParams unit{10, 1, 1, 1, 1, 1, 1, false};
    const MixtureParams octane{11, 87.2818, 0.1846, 0, 1, 1.8546, 0.5837, false};
    CHECK_THAT(calib::MeanMixture(unit).total_mass(), WithinAbs(1.0, 1e-8));
    CHECK_THAT(calib::MeanMixture(octane).total_mass(), WithinAbs(1.0, 1e-8));
    CHECK_THAT(calib::VarianceMixture(10, 10.0953).total_mass(), WithinAbs(1.0, 1e-8));
    CHECK_THAT(calib::VarianceMixture(3, 0).total_mass(), WithinAbs(1.0, 1e-8));
    CHECK_THAT(calib::TsqMixture(10, 2.9351, 10.0953).total_mass(), WithinAbs(1.0, 1e-8));
    CHECK_THAT(calib::TsqMixture(4, 9, 1).total_mass(), WithinAbs(1.0, 1e-8));
    CHECK_THAT(calib::SignedTMixture(10, 1.7132, 3.1773).total_mass(), WithinAbs(1.0, 1e-8));
}

TEST_CASE("variance law has mean nu(1 + lambda)") {
    const calib::VarianceMixture law(10, 4);
    auto g = [&](double s) { return 2 * s * s * s * law.pdf(s * s); };
    const double m = calib::quad::integrate_upper(g, 0.0, 10.0, {1e-9, 1e-10, 4000}).value;
    CHECK_THAT(m, WithinRel(50.0, 1e-7));
    CHECK(law.mean() == 50.0);
}

TEST_CASE("quantiles invert the cdf") {
    const calib::VarianceMixture law(10, 10.0953);
    for (double p : {0.025, 0.5, 0.975}) CHECK_THAT(law.cdf(law.quantile(p)), WithinAbs(p, 1e-7));
    CHECK_THROWS_AS(law.quantile(1.0), calib::invalid_argument);
}

TEST_CASE("factories and argument checks") {
    const auto d = calib::DistSpec::tsq(10, 1, 4).make();
    CHECK(d->name() == "tsq");
    CHECK(calib::DistSpec::signed_t(10, 1, 2).make()->name() == "signed-t");
    CHECK_THROWS_AS(calib::VarianceMixture(0.5, 1), calib::invalid_argument);
    CHECK_THROWS_AS(calib::TsqMixture(10, -1, 1), calib::invalid_argument);
    CHECK_THROWS_AS(calib::SignedTMixture(10, 1, -1), calib::invalid_argument);
    calib::QuadSpec bad;
    bad.abs_tol = 0;
    CHECK_THROWS_AS(calib::VarianceMixture(10, 1, bad), calib::invalid_argument);
}
