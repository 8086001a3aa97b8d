#include "memsim/analytic.hpp"
#include "memsim/errors.hpp"
#include "memsim/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace memsim {

Density1D Density1D::smooth(std::function<double(double)> f, double lo, double hi) {
    if (!(hi > lo)) throw ContractViolation("density support must have positive width");
    Density1D d;
    d.smooth_ = std::move(f);
    d.lo_ = lo;
    d.hi_ = hi;
    return d;
}

Density1D Density1D::uniform(double lo, double hi, double mass) {
    const double height = mass / (hi - lo);
    return smooth([height](double) { return height; }, lo, hi);
}

Density1D Density1D::delta(double location, double weight) {
    Density1D d;
    d.atoms_.push_back({location, weight});
    return d;
}

double Density1D::operator()(double q) const {
    if (!smooth_ || q < lo_ || q > hi_) return 0.0;
    return smooth_(q);
}

std::pair<double, double> Density1D::extent() const {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    if (smooth_) {
        lo = lo_;
        hi = hi_;
    }
    for (const auto& a : atoms_) {
        lo = std::min(lo, a.location);
        hi = std::max(hi, a.location);
    }
    return {lo, hi};
}

double Density1D::smooth_mass(double rel_tol) const {
    if (!smooth_) return 0.0;
    return quad::integrate_split(smooth_, lo_, hi_, breaks_, rel_tol);
}

double Density1D::mass(double rel_tol) const {
    double total = smooth_mass(rel_tol);
    for (const auto& a : atoms_) total += a.weight;
    return total;
}

double Density1D::mass_between(double a, double b, double rel_tol) const {
    double total = 0.0;
    if (smooth_) {
        const double lo = std::max(a, lo_);
        const double hi = std::min(b, hi_);
        if (hi > lo) total += quad::integrate_split(smooth_, lo, hi, breaks_, rel_tol);
    }
    for (const auto& atom : atoms_) {
        if (atom.location >= a && atom.location < b) total += atom.weight;
    }
    return total;
}

Density1D& Density1D::add_atom(Atom atom) {
    atoms_.push_back(atom);
    return *this;
}

Density1D& Density1D::add_break(double q) {
    breaks_.push_back(q);
    return *this;
}

Density1D Density1D::plus(const Density1D& other) const {
    Density1D out;
    if (smooth_ && other.smooth_) {
        out = smooth([a = *this, b = other](double q) { return a(q) + b(q); },
                     std::min(lo_, other.lo_), std::max(hi_, other.hi_));
        out.breaks_ = breaks_;
        out.breaks_.insert(out.breaks_.end(), other.breaks_.begin(), other.breaks_.end());
        for (double x : {lo_, hi_, other.lo_, other.hi_}) out.breaks_.push_back(x);
    } else if (smooth_) {
        out = smooth(smooth_, lo_, hi_);
        out.breaks_ = breaks_;
    } else if (other.smooth_) {
        out = smooth(other.smooth_, other.lo_, other.hi_);
        out.breaks_ = other.breaks_;
    }
    for (const auto& a : atoms_) out.atoms_.push_back(a);
    for (const auto& a : other.atoms_) out.atoms_.push_back(a);
    return out;
}

}  // namespace memsim
