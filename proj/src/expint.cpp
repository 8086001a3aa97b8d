#include "memsim/analytic.hpp"
#include "memsim/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace memsim {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// gamma + ln|x| + sum_{n>=1} x^n / (n n!)
double ei_series(double x) {
    double term = 1.0;  // x^n / n!
    double sum = 0.0;
    for (int n = 1; n < 500; ++n) {
        term *= x / n;
        const double contribution = term / n;
        sum += contribution;
        if (std::abs(contribution) <= 0.25 * kEps * std::abs(sum)) break;
    }
    return std::numbers::egamma + std::log(std::abs(x)) + sum;
}

// e^x / x * sum_n n! / x^n, stopped at the smallest term.
double ei_asymptotic(double x) {
    double term = 1.0;
    double sum = 1.0;
    for (int n = 1; n < 200; ++n) {
        const double next = term * n / x;
        if (std::abs(next) >= std::abs(term)) break;
        term = next;
        sum += term;
        if (std::abs(term) <= 0.25 * kEps * std::abs(sum)) break;
    }
    return std::exp(x) / x * sum;
}

// E1(z) for z > 1 by the modified Lentz continued fraction.
double e1_continued_fraction(double z) {
    constexpr double tiny = 1e-300;
    double b = z + 1.0;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 1000; ++i) {
        const double an = -static_cast<double>(i) * i;
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        const double delta = c * d;
        h *= delta;
        if (std::abs(delta - 1.0) <= kEps) break;
    }
    return h * std::exp(-z);
}

}  // namespace

double expint_ei(double x) {
    if (x == 0.0) throw DomainError("Ei(x) is singular at x = 0");
    if (std::isnan(x)) return x;
    if (x > 40.0) return ei_asymptotic(x);
    if (x >= -1.0) return ei_series(x);
    if (x < -745.0) return -0.0;
    return -e1_continued_fraction(-x);
}

}  // namespace memsim
