#include "memsim/analytic.hpp"
#include "memsim/errors.hpp"
#include "memsim/quadrature.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

namespace memsim {

namespace {

// Ei(x e^{-s}) with the x e^{-s} -> 0 underflow handled through the
// logarithmic leading term.
double ei_decayed(double x, double s) {
    const double y = x * std::exp(-s);
    if (y > 1e-280) return expint_ei(y);
    return std::numbers::egamma + std::log(x) - s;
}

// Hazard of the up-rate exp(V_M/V)/tau along V_M(s) = vm0 e^{-s/(CR)} on [0, t].
double decaying_voltage_hazard(double vm0, double v_scale, double tau, double cr, double t) {
    if (!(vm0 > 0.0) || std::isinf(tau) || t <= 0.0) return 0.0;
    const double x = vm0 / v_scale;
    return (cr / tau) * (expint_ei(x) - ei_decayed(x, t / cr));
}

void require_time(double t, const char* what) {
    if (!(t >= 0.0)) throw ContractViolation(std::string(what) + ": time must be non-negative");
}

// Roots of `fn` on [a, b] found by scanning `pieces` equal panels for sign
// changes and polishing each with TOMS 748.
template <class F>
std::vector<double> sign_changes(F&& fn, double a, double b, int pieces) {
    std::vector<double> roots;
    double x_prev = a;
    double f_prev = fn(a);
    if (f_prev == 0.0) roots.push_back(a);
    for (int j = 1; j <= pieces; ++j) {
        const double x = a + (b - a) * j / pieces;
        const double fx = fn(x);
        if (fx == 0.0) {
            roots.push_back(x);
        } else if (f_prev != 0.0 && (f_prev < 0.0) != (fx < 0.0)) {
            std::uintmax_t iters = 200;
            auto tol = boost::math::tools::eps_tolerance<double>(50);
            const auto bracket = boost::math::tools::toms748_solve(fn, x_prev, x, f_prev, fx, tol, iters);
            roots.push_back(0.5 * (bracket.first + bracket.second));
        }
        x_prev = x;
        f_prev = fx;
    }
    return roots;
}

std::string format_time(double t) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", t);
    return buf;
}

}  // namespace

void ConstantDriveParams::validate() const {
    if (!(capacitance > 0.0)) throw ContractViolation("C must be positive");
    if (!(r0 > 0.0) || !(r1 > 0.0)) throw ContractViolation("R0 and R1 must be positive");
    if (!(tau0 > 0.0)) throw ContractViolation("tau0 must be positive");
    if (!(v0 > 0.0)) throw ContractViolation("V0 must be positive");
}

ConstantDriveParams ConstantDriveParams::reference() {
    return {1e-6, 1e5, 1e4, 3e5, 0.02, 0.35, 0.0};
}

double rc_charge(const ConstantDriveParams& params, double resistance, double t) {
    require_time(t, "rc_charge");
    if (!(resistance > 0.0)) throw ContractViolation("rc_charge: resistance must be positive");
    const double decay = std::exp(-t / (params.capacitance * resistance));
    return params.q0 * decay + params.va * params.capacitance * (1.0 - decay);
}

RcFlow::RcFlow(double capacitance, double resistance, Waveform drive)
    : capacitance_(capacitance), resistance_(resistance), drive_(std::move(drive)) {
    if (!(capacitance_ > 0.0) || !(resistance_ > 0.0)) {
        throw ContractViolation("RC flow needs positive C and R");
    }
}

double RcFlow::forced(double t0, double t1) const {
    if (t0 == t1) return 0.0;
    const double k = rate();
    if (drive_.is_constant()) {
        return capacitance_ * drive_(0.0) * -std::expm1(-(t1 - t0) * k);
    }
    const double lo = std::min(t0, t1);
    const double hi = std::max(t0, t1);
    const auto splits = drive_.breakpoints(hi);
    const double r = resistance_;
    const double value = quad::integrate_split(
        [&](double tau) { return std::exp((tau - t1) * k) * drive_(tau) / r; }, lo, hi, splits, 1e-11);
    return t1 > t0 ? value : -value;
}

double RcFlow::map(double q, double t0, double t1) const {
    return q * std::exp(-(t1 - t0) * rate()) + forced(t0, t1);
}

double RcFlow::velocity(double q, double t) const {
    return (drive_(t) - q / capacitance_) / resistance_;
}

double rc_charge_wave(double q0, double capacitance, double resistance, const Waveform& drive, double t) {
    require_time(t, "rc_charge_wave");
    return RcFlow(capacitance, resistance, drive).map(q0, 0.0, t);
}

Density1D no_switch_density(const Density1D& f, double resistance, double capacitance,
                            const Waveform& drive, double t) {
    require_time(t, "no_switch_density");
    if (t == 0.0) return f;
    const RcFlow flow(capacitance, resistance, drive);
    const double stretch = std::exp(t * flow.rate());
    const double shift = flow.forced(0.0, t);
    Density1D out;
    if (f.has_smooth()) {
        out = Density1D::smooth(
            [f, stretch, shift](double q) { return stretch * f((q - shift) * stretch); },
            flow.map(f.lower(), 0.0, t), flow.map(f.upper(), 0.0, t));
    }
    for (const auto& a : f.atoms()) out.add_atom({flow.map(a.location, 0.0, t), a.weight});
    return out;
}

double p0_constant_voltage(const ConstantDriveParams& params, double t) {
    params.validate();
    require_time(t, "p0_constant_voltage");
    const double vm0 = params.va - params.q0 / params.capacitance;
    if (!(vm0 > 0.0)) {
        throw DomainError("p0_constant_voltage requires Va - q0/C > 0 (unidirectional regime)");
    }
    const double cr0 = params.capacitance * params.r0;
    return std::exp(-decaying_voltage_hazard(vm0, params.v0, params.tau0, cr0, t));
}

SwitchingTimeRoutes mean_switching_time_routes(const ConstantDriveParams& params, double t_star) {
    params.validate();
    if (!(t_star > 0.0)) throw ContractViolation("mean_switching_time: t_star must be positive");
    const double vm0 = params.va - params.q0 / params.capacitance;
    if (!(vm0 > 0.0)) throw DomainError("mean_switching_time requires Va - q0/C > 0");
    const double cr0 = params.capacitance * params.r0;
    auto hazard = [&](double s) { return decaying_voltage_hazard(vm0, params.v0, params.tau0, cr0, s); };
    const double p1_star = -std::expm1(-hazard(t_star));
    if (!(p1_star > 0.0)) throw DomainError("mean_switching_time: p1(t_star) = 0, no switching occurs");

    // dp1/dt = p0 * gamma(V_M(t)).
    const double log_tau = std::log(params.tau0);
    auto switching_density = [&](double s) {
        const double vm = vm0 * std::exp(-s / cr0);
        return std::exp(-hazard(s) + vm / params.v0 - log_tau);
    };
    auto p1 = [&](double s) { return -std::expm1(-hazard(s)); };

    const std::vector<double> splits{0.01 * cr0, 0.1 * cr0, cr0, 10.0 * cr0, 100.0 * cr0};
    const double first_moment = quad::integrate_split(
        [&](double s) { return s * switching_density(s); }, 0.0, t_star, splits, 1e-10);
    const double p1_integral = quad::integrate_split(p1, 0.0, t_star, splits, 1e-10);
    return {first_moment / p1_star, t_star - p1_integral / p1_star};
}

double mean_switching_time(const ConstantDriveParams& params, double t_star) {
    const auto routes = mean_switching_time_routes(params, t_star);
    const double scale = std::max(std::abs(routes.by_derivative), std::abs(routes.by_parts));
    if (std::abs(routes.by_derivative - routes.by_parts) > 1e-6 * scale) {
        throw Error("mean_switching_time: quadrature routes disagree (" +
                    format_time(routes.by_derivative) + " vs " + format_time(routes.by_parts) + ")");
    }
    return routes.by_derivative;
}

AsymptoticP0 p0_asymptotic(const ConstantDriveParams& params) {
    params.validate();
    const double x = (params.va - params.q0 / params.capacitance) / params.v0;
    if (!(x > 1.0)) throw DomainError("p0_asymptotic requires (Va - q0/C)/V0 > 1");
    const double ratio = params.capacitance * params.r0 / params.tau0;
    return {std::exp(-ratio * std::exp(x) / (x - 1.0)), x < 5.0};
}

double state0_hazard(const MemristorModel& model, double capacitance, const Waveform& drive,
                     double q_start, double t, bool force_quadrature) {
    require_time(t, "state0_hazard");
    if (t == 0.0) return 0.0;
    const double r0 = model.resistance(0);
    if (drive.is_constant() && !force_quadrature) {
        const double vm0 = drive(0.0) - q_start / capacitance;
        return decaying_voltage_hazard(vm0, model.v_up()[0], model.tau_up()[0], capacitance * r0, t);
    }
    const RcFlow flow(capacitance, r0, drive);
    const auto splits = drive.breakpoints(t);
    return quad::integrate_split(
        [&](double s) { return rate_up(model, 0, drive(s) - flow.map(q_start, 0.0, s) / capacitance); },
        0.0, t, splits, 1e-10);
}

namespace {

void check_unidirectional_regime(const Density1D& f, const Density1D& g, const RcFlow& flow0,
                                 const RcFlow& flow1, double t) {
    double upper = -std::numeric_limits<double>::infinity();
    for (const auto* d : {&f, &g}) {
        if (d->has_smooth() || !d->atoms().empty()) upper = std::max(upper, d->extent().second);
    }
    if (!std::isfinite(upper)) return;
    const double c = flow0.capacitance();
    const Waveform& drive = flow0.drive();
    auto excess = [&](double s) {
        const double reach = std::max(flow0.map(upper, 0.0, s), flow1.map(upper, 0.0, s));
        return reach - c * drive(s);
    };
    constexpr int samples = 512;
    std::vector<double> times;
    for (int j = 0; j <= samples; ++j) times.push_back(t * j / samples);
    for (double b : drive.breakpoints(t)) {
        times.push_back(b);
        times.push_back(std::nextafter(b, 0.0));
    }
    std::sort(times.begin(), times.end());
    double prev = 0.0;
    for (double s : times) {
        if (excess(s) > 0.0) {
            double lo = prev;
            double hi = s;
            if (excess(lo) > 0.0) hi = lo;
            for (int it = 0; it < 80 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
                const double mid = 0.5 * (lo + hi);
                (excess(mid) > 0.0 ? hi : lo) = mid;
            }
            throw DomainError("unidirectional regime violated (mass reaches q >= C V(t)) at t = " +
                              format_time(hi) + " s");
        }
        prev = s;
    }
}

}  // namespace

std::pair<Density1D, Density1D> unidirectional_densities(const Density1D& f, const Density1D& g,
                                                         const MemristorModel& model, double capacitance,
                                                         const Waveform& drive, double t) {
    if (model.num_states() != 2) throw ContractViolation("unidirectional_densities needs a binary device");
    require_time(t, "unidirectional_densities");
    const RcFlow flow0(capacitance, model.resistance(0), drive);
    const RcFlow flow1(capacitance, model.resistance(1), drive);
    check_unidirectional_regime(f, g, flow0, flow1, t);

    const double k1 = flow1.rate();
    auto hazard = [model, capacitance, drive](double q_start, double s) {
        return state0_hazard(model, capacitance, drive, q_start, s);
    };
    // Smooth state-0 density at time s.
    auto p0_at = [f, flow0, hazard](double q, double s) {
        const double stretch = std::exp(s * flow0.rate());
        const double origin = flow0.map(q, s, 0.0);
        const double fx = f(origin);
        if (fx == 0.0) return 0.0;
        return stretch * fx * std::exp(-hazard(origin, s));
    };

    Density1D p0;
    if (f.has_smooth()) {
        p0 = Density1D::smooth([p0_at, t](double q) { return p0_at(q, t); },
                               flow0.map(f.lower(), 0.0, t), flow0.map(f.upper(), 0.0, t));
    }
    for (const auto& a : f.atoms()) {
        p0.add_atom({flow0.map(a.location, 0.0, t), a.weight * std::exp(-hazard(a.location, t))});
    }

    Density1D p1 = no_switch_density(g, model.resistance(1), capacitance, drive, t);
    if (t == 0.0) return {p0, p1};

    // Range reached at time t by mass that leaves x at time 0 and switches at
    // some time in [0, t].
    auto switched_range = [&](double x) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        constexpr int samples = 64;
        for (int j = 0; j <= samples; ++j) {
            const double s = t * j / samples;
            const double y = flow1.map(flow0.map(x, 0.0, s), s, t);
            lo = std::min(lo, y);
            hi = std::max(hi, y);
        }
        return std::pair{lo, hi};
    };

    if (f.has_smooth()) {
        const auto [lo_a, hi_a] = switched_range(f.lower());
        const auto [lo_b, hi_b] = switched_range(f.upper());
        const double lo = std::min(lo_a, lo_b);
        const double hi = std::max(hi_a, hi_b);
        if (hi > lo) {
            const double f_lo = f.lower();
            const double f_hi = f.upper();
            auto source = [=](double q) {
                auto integrand = [&](double s) {
                    const double qs = flow1.map(q, t, s);
                    const double density = p0_at(qs, s);
                    if (density == 0.0) return 0.0;
                    return rate_up(model, 0, drive(s) - qs / capacitance) * std::exp((t - s) * k1) * density;
                };
                // The backward path from q leaves the transported support
                // where its state-0 origin crosses f_lo or f_hi.
                auto splits = drive.breakpoints(t);
                for (double edge : {f_lo, f_hi}) {
                    auto gap = [&](double s) { return flow0.map(flow1.map(q, t, s), s, 0.0) - edge; };
                    for (double r : sign_changes(gap, 0.0, t, 16)) splits.push_back(r);
                }
                return quad::integrate_split(integrand, 0.0, t, splits, 1e-11);
            };
            Density1D part = Density1D::smooth(source, lo, hi);
            for (double b : {lo_a, hi_a, lo_b, hi_b}) part.add_break(b);
            p1 = p1.plus(part);
        }
    }

    const double g0 = 1.0 / model.resistance(0);
    const double g1 = 1.0 / model.resistance(1);
    for (const auto& a : f.atoms()) {
        if (std::abs(g1 - g0) <= 1e-12 * std::max(g0, g1)) {
            // Both states share one characteristic: switched mass stays singular.
            p1.add_atom({flow0.map(a.location, 0.0, t), a.weight * -std::expm1(-hazard(a.location, t))});
            continue;
        }
        const auto [lo, hi] = switched_range(a.location);
        if (!(hi > lo)) continue;
        const double x0 = a.location;
        const double w = a.weight;
        // The switching time s* solves flow1(q; t -> s*) = flow0(x0; 0 -> s*).
        auto source = [=](double q) {
            auto gap = [&](double s) { return flow1.map(q, t, s) - flow0.map(x0, 0.0, s); };
            double total = 0.0;
            for (double root : sign_changes(gap, 0.0, t, 16)) {
                const double x = flow0.map(x0, 0.0, root);
                const double vm = drive(root) - x / capacitance;
                const double slope = std::abs(vm * (g1 - g0));
                if (slope > 0.0) {
                    total += rate_up(model, 0, vm) * std::exp((t - root) * k1) * w *
                             std::exp(-hazard(x0, root)) / slope;
                }
            }
            return total;
        };
        p1 = p1.plus(Density1D::smooth(source, lo, hi));
    }
    return {p0, p1};
}

}  // namespace memsim
