#pragma once

#include "memsim/device.hpp"
#include "memsim/waveform.hpp"

#include <functional>
#include <memory>
#include <utility>
#include <vector>

namespace memsim {

/// Exponential integral Ei(x) (principal value). Throws DomainError at x = 0.
double expint_ei(double x);

/// Series memristor-capacitor loop under a constant drive Va, with the memristor
/// starting in state 0 and the capacitor at charge q0. Base SI units.
struct ConstantDriveParams {
    double capacitance = 0.0;
    double r0 = 0.0;
    double r1 = 0.0;
    double tau0 = 0.0;
    double v0 = 0.0;
    double va = 0.0;
    double q0 = 0.0;

    /// Throws ContractViolation unless C, R0, R1, tau0, V0 > 0.
    void validate() const;

    /// C = 1 uF, R0 = 100 kOhm, R1 = 10 kOhm, Va = 0.35 V, V0 = 0.02 V,
    /// tau0 = 3e5 s, q0 = 0.
    static ConstantDriveParams reference();
};

/// Charge at time t of an RC loop with constant drive Va starting from q0.
double rc_charge(const ConstantDriveParams& params, double resistance, double t);

/// Charge at time t of an RC loop driven by an arbitrary waveform.
double rc_charge_wave(double q0, double capacitance, double resistance, const Waveform& drive, double t);

/// Deterministic charge flow of an RC loop: maps the charge at one time to
/// the charge at another along the solution of dq/dt = (V(t) - q/C)/R.
class RcFlow {
public:
    RcFlow(double capacitance, double resistance, Waveform drive);

    /// Zero-state response: charge at t1 when starting from 0 at t0.
    double forced(double t0, double t1) const;
    /// Charge at t1 given charge q at t0 (either direction in time).
    double map(double q, double t0, double t1) const;
    /// Drift (V(t) - q/C)/R.
    double velocity(double q, double t) const;

    double rate() const noexcept { return 1.0 / (capacitance_ * resistance_); }
    double capacitance() const noexcept { return capacitance_; }
    double resistance() const noexcept { return resistance_; }
    const Waveform& drive() const noexcept { return drive_; }

private:
    double capacitance_;
    double resistance_;
    Waveform drive_;
};

/// Probability density over capacitor charge carrying partial mass: a smooth
/// part on a bounded support plus any number of point masses. Point masses
/// are kept symbolic, never discretized.
class Density1D {
public:
    struct Atom {
        double location = 0.0;
        double weight = 0.0;
    };

    Density1D() = default;

    static Density1D smooth(std::function<double(double)> f, double lo, double hi);
    static Density1D uniform(double lo, double hi, double mass = 1.0);
    static Density1D delta(double location, double weight = 1.0);

    /// Smooth part at q (zero outside the support).
    double operator()(double q) const;

    bool has_smooth() const noexcept { return static_cast<bool>(smooth_); }
    double lower() const noexcept { return lo_; }
    double upper() const noexcept { return hi_; }
    const std::vector<Atom>& atoms() const noexcept { return atoms_; }

    /// Lowest and highest charge carrying mass (smooth support or atoms).
    std::pair<double, double> extent() const;

    double smooth_mass(double rel_tol = 1e-10) const;
    double mass(double rel_tol = 1e-10) const;
    /// Mass in [a, b): smooth part integrated, atoms counted when a <= x < b.
    double mass_between(double a, double b, double rel_tol = 1e-10) const;

    Density1D& add_atom(Atom atom);
    /// Marks an interior point where the smooth part may jump or kink.
    Density1D& add_break(double q);
    /// Combines this density with another: smooth parts are summed and
    /// atoms concatenated.
    Density1D plus(const Density1D& other) const;

private:
    std::function<double(double)> smooth_;
    double lo_ = 0.0;
    double hi_ = 0.0;
    std::vector<double> breaks_;  // interior points where the smooth part may jump
    std::vector<Atom> atoms_;
};

/// Transport of a density along RC characteristics with no switching.
Density1D no_switch_density(const Density1D& f, double resistance, double capacitance,
                            const Waveform& drive, double t);

/// Probability of still being in state 0 at time t under constant drive.
/// Requires Va - q0/C > 0.
double p0_constant_voltage(const ConstantDriveParams& params, double t);

/// Mean first-switching time over [0, t_star], evaluated by two independent
/// quadratures (derivative form and integration by parts).
struct SwitchingTimeRoutes {
    double by_derivative = 0.0;
    double by_parts = 0.0;
};
SwitchingTimeRoutes mean_switching_time_routes(const ConstantDriveParams& params, double t_star);

/// Mean switching time; throws Error if the two quadrature routes disagree by
/// more than 1e-6 relative.
double mean_switching_time(const ConstantDriveParams& params, double t_star = 1.0);

struct AsymptoticP0 {
    double probability = 0.0;
    /// Set when (Va - q0/C)/V0 < 5, where the large-argument form is rough.
    bool weak_asymptotics = false;
};

/// Large-argument approximation of p0 after the fast relaxation.
AsymptoticP0 p0_asymptotic(const ConstantDriveParams& params);

/// Hazard accumulated in state 0 by a particle that starts at charge `q_start`
/// at time 0 and follows the state-0 characteristic until time t. Closed form
/// for constant drive, adaptive quadrature otherwise.
double state0_hazard(const MemristorModel& model, double capacitance, const Waveform& drive,
                     double q_start, double t, bool force_quadrature = false);

/// State-0 and state-1 densities of a binary device in the regime where only
/// 0 -> 1 switching is possible (all mass below C V(s) on [0, t]).
/// Throws DomainError naming the first violation time otherwise.
std::pair<Density1D, Density1D> unidirectional_densities(const Density1D& f, const Density1D& g,
                                                         const MemristorModel& model, double capacitance,
                                                         const Waveform& drive, double t);

}  // namespace memsim
