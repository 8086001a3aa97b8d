#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace memsim::quad {

inline constexpr double kDefaultRelTol = 1e-9;

/// Adaptive 15-point Gauss-Kronrod over [a, b] to the given relative
/// tolerance. Returns 0 for an empty interval.
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = kDefaultRelTol, double* error = nullptr) {
    if (!(b > a)) {
        if (error) *error = 0.0;
        return 0.0;
    }
    // Integrate over u in [0, 1] with q = a + (b - a) u.
    const double width = b - a;
    double err = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        [&](double u) { return f(a + width * u); }, 0.0, 1.0, 18, rel_tol, &err);
    if (error) *error = err * width;
    return value * width;
}

/// Same as integrate() but splits [a, b] at the given interior points first,
/// so that kinks and jumps never sit inside a panel.
template <class F>
double integrate_split(F&& f, double a, double b, std::span<const double> splits,
                       double rel_tol = kDefaultRelTol) {
    if (!(b > a)) return 0.0;
    const double guard = 1e-9 * (b - a);
    std::vector<double> edges{a};
    for (double s : splits) {
        if (s > a + guard && s < b - guard) edges.push_back(s);
    }
    edges.push_back(b);
    std::sort(edges.begin(), edges.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) total += integrate(f, edges[i], edges[i + 1], rel_tol);
    return total;
}

}  // namespace memsim::quad
