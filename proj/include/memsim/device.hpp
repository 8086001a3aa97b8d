#pragma once

#include <cstddef>
#include <vector>

namespace memsim {

/// Rate together with a flag telling whether it hit the overflow ceiling.
struct Rate {
    double value = 0.0;
    bool clamped = false;
};

/// Discrete-state stochastic memristor.
///
/// States are indexed 0..G-1 with resistances R_i. Only adjacent transitions
/// exist: i -> i+1 is driven by positive device voltage and i+1 -> i by negative
/// voltage, each with rate exp(|V|/V_scale) / tau. A tau of +infinity disables
/// that transition entirely.
///
/// Immutable after construction.
class MemristorModel {
public:
    static constexpr double kDefaultRateCeiling = 1e30;

    /// Per-transition parameters. `tau_up[i]`, `v_up[i]` describe i -> i+1 and
    /// `tau_down[i]`, `v_down[i]` describe i+1 -> i.
    MemristorModel(std::vector<double> resistances,
                   std::vector<double> tau_up, std::vector<double> v_up,
                   std::vector<double> tau_down, std::vector<double> v_down,
                   double rate_ceiling = kDefaultRateCeiling);

    /// One (tau, V) pair per direction replicated across every transition.
    static MemristorModel uniform(std::vector<double> resistances,
                                  double tau_up, double v_up,
                                  double tau_down, double v_down,
                                  double rate_ceiling = kDefaultRateCeiling);

    /// Binary device with symmetric switching parameters.
    static MemristorModel binary(double r0, double r1, double tau, double v_scale);

    std::size_t num_states() const noexcept { return resistances_.size(); }
    double resistance(std::size_t i) const;
    const std::vector<double>& resistances() const noexcept { return resistances_; }
    const std::vector<double>& tau_up() const noexcept { return tau_up_; }
    const std::vector<double>& v_up() const noexcept { return v_up_; }
    const std::vector<double>& tau_down() const noexcept { return tau_down_; }
    const std::vector<double>& v_down() const noexcept { return v_down_; }
    double rate_ceiling() const noexcept { return rate_ceiling_; }

    friend bool operator==(const MemristorModel&, const MemristorModel&) = default;

private:
    std::vector<double> resistances_;
    std::vector<double> tau_up_;
    std::vector<double> v_up_;
    std::vector<double> tau_down_;
    std::vector<double> v_down_;
    double rate_ceiling_;
};

/// Rate of i -> i+1 at device voltage `v_m`; zero unless v_m > 0.
Rate rate_up_checked(const MemristorModel& model, std::size_t i, double v_m);
/// Rate of i -> i-1 at device voltage `v_m`; zero unless v_m < 0.
Rate rate_down_checked(const MemristorModel& model, std::size_t i, double v_m);

double rate_up(const MemristorModel& model, std::size_t i, double v_m);
double rate_down(const MemristorModel& model, std::size_t i, double v_m);

/// Sum of the rates out of state i; boundary states lack one direction.
double total_exit_rate(const MemristorModel& model, std::size_t i, double v_m);

}  // namespace memsim
