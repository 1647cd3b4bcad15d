#pragma once

// Critical values and operating characteristics of the calibrated t² test,
// plus pointwise cdf ordering probes across mixture parameters.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "calib/errors.hpp"
#include "calib/mixtures.hpp"
#include "calib/quadrature.hpp"
#include "calib/special.hpp"

namespace calib {

/// (1 - α) quantile of the central F(1, ν), i.e. of t²(ν) under the null.
inline double tsq_critical(double nu, double alpha) {
    detail::require(alpha > 0 && alpha < 1, "tsq_critical: alpha must lie in (0,1)");
    detail::require(std::isfinite(nu) && nu >= 1, "tsq_critical: nu must be >= 1");
    return quad::invert_increasing([nu](double u) { return special::f_cdf(u, 1, nu); }, 1 - alpha,
                                   0.0, 10.0, 1e-13, 0.0);
}

struct PowerCell {
    double nu, delta, lambda, alpha;
    double critical;
    double nonrejection_prob;  ///< P[t0² ≤ critical]
    double rejection_prob;     ///< 1 - nonrejection_prob
    /// P[-√c ≤ t0 ≤ √c] from the signed-t law, when requested
    std::optional<double> nonrejection_signed;
};

inline PowerCell operating_characteristics(double nu, double delta, double lambda, double alpha,
                                           const QuadSpec& q = {}, bool cross_check = false) {
    const double c = tsq_critical(nu, alpha);
    const double keep = TsqMixture(nu, delta, lambda, q).cdf(c);
    PowerCell cell{nu, delta, lambda, alpha, c, keep, 1 - keep, std::nullopt};
    if (cross_check) {
        const double r = std::sqrt(c);
        cell.nonrejection_signed =
            SignedTMixture(nu, std::sqrt(delta), std::sqrt(lambda), q).probability(-r, r);
    }
    return cell;
}

/// Rows follow `deltas`, columns follow `lambdas`.
inline std::vector<PowerCell> power_table(double nu, const std::vector<double>& deltas,
                                          const std::vector<double>& lambdas, double alpha,
                                          const QuadSpec& q = {}, bool cross_check = false) {
    detail::require(!deltas.empty() && !lambdas.empty(), "power_table: empty grid");
    std::vector<PowerCell> out;
    out.reserve(deltas.size() * lambdas.size());
    for (double d : deltas)
        for (double l : lambdas) out.push_back(operating_characteristics(nu, d, l, alpha, q, cross_check));
    return out;
}

enum class OrderingFamily {
    variance_in_lambda,  ///< variance-mixture cdf, nonincreasing in λ
    tsq_in_delta,        ///< t² cdf, nonincreasing in δ at fixed λ
    tsq_in_lambda,       ///< t² cdf, nondecreasing in λ at fixed δ
};

inline std::string_view to_string(OrderingFamily f) {
    switch (f) {
        case OrderingFamily::variance_in_lambda: return "variance-in-lambda";
        case OrderingFamily::tsq_in_delta: return "tsq-in-delta";
        case OrderingFamily::tsq_in_lambda: return "tsq-in-lambda";
    }
    return "?";
}

struct OrderingReport {
    OrderingFamily family;
    bool increasing;  ///< expected direction of the cdf along the grid
    std::vector<double> grid;
    std::vector<double> u_grid;
    std::vector<std::vector<double>> cdf;  ///< cdf[i][k] at u_grid[i], grid[k]
    double max_violation;  ///< largest step against the expected direction (0 if none)
    double min_gap;        ///< smallest step in the expected direction
    bool holds(double tol = 1e-9) const { return max_violation <= tol; }
    bool strict(double tol = 1e-9) const { return min_gap > tol; }
};

/// Evaluates the family's cdf over `grid` at each point of `u_grid`.
/// `fixed` is λ for tsq_in_delta and δ for tsq_in_lambda (unused otherwise).
inline OrderingReport ordering_probe(OrderingFamily family, double nu, double fixed,
                                     const std::vector<double>& grid,
                                     const std::vector<double>& u_grid, const QuadSpec& q = {}) {
    detail::require(grid.size() >= 2 && !u_grid.empty(), "ordering_probe: grids too small");
    detail::require(std::is_sorted(grid.begin(), grid.end()), "ordering_probe: grid must be sorted");
    OrderingReport rep{family, family == OrderingFamily::tsq_in_lambda, grid, u_grid, {}, 0.0,
                       std::numeric_limits<double>::infinity()};
    for (double u : u_grid) {
        std::vector<double> row;
        for (double g : grid) {
            switch (family) {
                case OrderingFamily::variance_in_lambda:
                    row.push_back(VarianceMixture(nu, g, q).cdf(u));
                    break;
                case OrderingFamily::tsq_in_delta:
                    row.push_back(TsqMixture(nu, g, fixed, q).cdf(u));
                    break;
                case OrderingFamily::tsq_in_lambda:
                    row.push_back(TsqMixture(nu, fixed, g, q).cdf(u));
                    break;
            }
        }
        for (std::size_t k = 0; k + 1 < row.size(); ++k) {
            const double step = rep.increasing ? row[k + 1] - row[k] : row[k] - row[k + 1];
            rep.max_violation = std::max(rep.max_violation, -step);
            rep.min_gap = std::min(rep.min_gap, step);
        }
        rep.cdf.push_back(std::move(row));
    }
    return rep;
}

}  // namespace calib
