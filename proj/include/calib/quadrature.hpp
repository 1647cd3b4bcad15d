#pragma once

// Globally adaptive Gauss-Kronrod (7/15) quadrature on finite intervals, plus
// maps for half-infinite ranges and a bracketing bisection solver.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "calib/errors.hpp"

namespace calib::quad {

struct Tolerance {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    int max_intervals = 4000;
};

struct Result {
    double value = 0.0;
    double error = 0.0;
    int intervals = 0;
    bool converged = false;
};

namespace detail {

inline constexpr std::array<double, 8> kronrod_x = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kronrod_w = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> gauss_w = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gk15(F& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const double fc = f(c);
    double k = fc * kronrod_w[7];
    double g = fc * gauss_w[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = h * kronrod_x[j];
        const double fs = f(c - dx) + f(c + dx);
        k += kronrod_w[j] * fs;
        if (j % 2 == 1) g += gauss_w[j / 2] * fs;
    }
    return {a, b, k * h, std::abs((k - g) * h)};
}

}  // namespace detail

/// ∫_a^b f. The error estimate is |K15 - G7| summed over panels, which is
/// conservative for smooth integrands.
template <class F>
Result integrate(F&& f, double a, double b, const Tolerance& tol = {}) {
    if (a == b) return {0.0, 0.0, 0, true};
    if (b < a) {
        Result r = integrate(f, b, a, tol);
        r.value = -r.value;
        return r;
    }
    std::priority_queue<detail::Panel> heap;
    detail::Panel first = detail::gk15(f, a, b);
    double total = first.value, err = first.error;
    heap.push(first);
    int n = 1;
    while (err > std::max(tol.abs_tol, tol.rel_tol * std::abs(total))) {
        if (n >= tol.max_intervals) return {total, err, n, false};
        detail::Panel worst = heap.top();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) return {total, err, n, false};
        heap.pop();
        detail::Panel left = detail::gk15(f, worst.a, mid);
        detail::Panel right = detail::gk15(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++n;
    }
    // re-sum to shed accumulated update rounding
    double v = 0, e = 0;
    while (!heap.empty()) {
        v += heap.top().value;
        e += heap.top().error;
        heap.pop();
    }
    return {v, e, n, true};
}

/// ∫_a^b f with extra panel boundaries at the given interior points. Points
/// outside (a, b) are ignored; the absolute tolerance is shared among pieces.
template <class F>
Result integrate_split(F&& f, double a, double b, std::vector<double> points,
                       const Tolerance& tol = {}) {
    std::erase_if(points, [&](double p) { return !(p > a && p < b); });
    points.push_back(a);
    points.push_back(b);
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    Tolerance piece = tol;
    piece.abs_tol = tol.abs_tol / static_cast<double>(points.size() - 1);
    Result out{0.0, 0.0, 0, true};
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        const Result r = integrate(f, points[i], points[i + 1], piece);
        out.value += r.value;
        out.error += r.error;
        out.intervals += r.intervals;
        out.converged = out.converged && r.converged;
    }
    return out;
}

/// ∫_a^∞ f via x = a + scale·s/(1-s).
template <class F>
Result integrate_upper(F&& f, double a, double scale, const Tolerance& tol = {}) {
    auto g = [&](double s) {
        const double om = 1.0 - s;
        const double v = f(a + scale * s / om);
        return v == 0.0 ? 0.0 : v * scale / (om * om);
    };
    return integrate(g, 0.0, 1.0, tol);
}

/// ∫_{-∞}^b f.
template <class F>
Result integrate_lower(F&& f, double b, double scale, const Tolerance& tol = {}) {
    auto g = [&](double x) { return f(-x); };
    return integrate_upper(g, -b, scale, tol);
}

/// Value of an integral, throwing accuracy_error when the tolerance was missed.
inline double checked(const Result& r, const char* what) {
    if (!r.converged || !std::isfinite(r.value)) throw accuracy_error(what);
    return r.value;
}

/// Bisection for a nondecreasing g on [lo, hi] with g(lo) ≤ target ≤ g(hi).
template <class G>
double bisect(G&& g, double target, double lo, double hi, double x_tol) {
    double glo = g(lo), ghi = g(hi);
    if (!(glo <= target && target <= ghi))
        throw accuracy_error("bisect: target is not bracketed");
    for (int i = 0; i < 400 && hi - lo > x_tol; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi)) break;
        if (g(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Expands [lo, hi] geometrically until g(lo) ≤ target ≤ g(hi), then bisects.
/// `floor` bounds lo from below (e.g. 0 for positive support).
template <class G>
double invert_increasing(G&& g, double target, double lo, double hi, double x_tol,
                         double floor = -std::numeric_limits<double>::infinity()) {
    for (int i = 0; i < 200 && g(lo) > target; ++i) {
        const double w = hi - lo;
        hi = lo;
        lo = std::max(floor, lo - 2 * w);
        if (lo == floor && g(lo) > target)
            throw accuracy_error("invert_increasing: lower bracket not found");
    }
    for (int i = 0; i < 200 && g(hi) < target; ++i) {
        const double w = hi - lo;
        lo = hi;
        hi = hi + 2 * w;
    }
    return bisect(g, target, lo, hi, x_tol);
}

}  // namespace calib::quad
