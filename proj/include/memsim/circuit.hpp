#pragma once

#include "memsim/device.hpp"
#include "memsim/waveform.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace memsim {

using NodeIndex = std::size_t;
inline constexpr NodeIndex kGround = 0;

struct VoltageSource {
    std::string name;
    NodeIndex pos = kGround;
    NodeIndex neg = kGround;
    Waveform waveform;
    friend bool operator==(const VoltageSource&, const VoltageSource&) = default;
};

struct Resistor {
    std::string name;
    NodeIndex a = kGround;
    NodeIndex b = kGround;
    double ohms = 0.0;
    friend bool operator==(const Resistor&, const Resistor&) = default;
};

struct Capacitor {
    std::string name;
    NodeIndex pos = kGround;
    NodeIndex neg = kGround;
    double farads = 0.0;
    std::optional<double> initial_charge;
    friend bool operator==(const Capacitor&, const Capacitor&) = default;
};

/// Device voltage is measured pos minus neg; positive voltage drives
/// up-transitions.
struct Memristor {
    std::string name;
    NodeIndex pos = kGround;
    NodeIndex neg = kGround;
    MemristorModel model;
    std::size_t initial_state = 0;
    friend bool operator==(const Memristor&, const Memristor&) = default;
};

/// Parsed component graph. Node 0 is ground ("0"); the remaining nodes are
/// sorted by name so that the numbering does not depend on line order.
struct Netlist {
    std::vector<std::string> nodes{"0"};
    std::vector<VoltageSource> sources;
    std::vector<Resistor> resistors;
    std::vector<Capacitor> capacitors;
    std::vector<Memristor> memristors;

    std::size_t node_count() const noexcept { return nodes.size(); }
    friend bool operator==(const Netlist&, const Netlist&) = default;
};

/// Memristor configuration and capacitor charges at a given time.
struct CircuitState {
    std::vector<std::size_t> memristor_states;
    std::vector<double> capacitor_charges;
    double time = 0.0;
    friend bool operator==(const CircuitState&, const CircuitState&) = default;
};

struct OperatingPoint {
    std::vector<double> node_voltages;       // indexed by NodeIndex, ground included
    std::vector<double> memristor_voltages;  // pos minus neg
    std::vector<double> charge_derivatives;  // current into each capacitor's pos terminal
};

Netlist parse_netlist(std::string_view text);
std::string serialize(const Netlist& netlist);

/// STATE= and IC= values of the netlist (defaults 0) at t = 0.
CircuitState initial_state(const Netlist& netlist);

/// Throws ContractViolation when `state` does not fit `netlist`.
void check_state(const Netlist& netlist, const CircuitState& state);

/// Replaces capacitors by sources of value q/C and memristors by their current
/// resistance, then solves the resistive network by modified nodal analysis.
OperatingPoint solve_operating_point(const Netlist& netlist, const CircuitState& state);

/// Canonical source -> memristor -> capacitor loop.
Netlist series_mc(const MemristorModel& model, double capacitance, const Waveform& drive);

/// Parameters of a series memristor-capacitor loop.
struct SeriesCircuit {
    MemristorModel model;
    double capacitance = 0.0;
    Waveform drive;

    /// Device voltage V(t) - q/C.
    double memristor_voltage(double q, double t) const { return drive(t) - q / capacitance; }
};

/// Recognizes the canonical series loop (as produced by series_mc).
std::optional<SeriesCircuit> as_series_circuit(const Netlist& netlist);

/// Operating-point solver that caches one factorization per memristor
/// configuration. Not thread-safe; use one instance per thread.
class NetworkSolver {
public:
    explicit NetworkSolver(const Netlist& netlist);

    /// Fills memristor voltages and capacitor currents for the configuration
    /// `states` at time `t` with charges `charges`.
    void evaluate(const std::vector<std::size_t>& states, const std::vector<double>& charges,
                  double t, std::vector<double>& memristor_voltages,
                  std::vector<double>& charge_derivatives);

    OperatingPoint solve(const CircuitState& state);

    const Netlist& netlist() const noexcept { return netlist_; }

private:
    struct Factorization {
        Eigen::FullPivLU<Eigen::MatrixXd> lu;
    };

    const Factorization& factor(const std::vector<std::size_t>& states);
    Eigen::VectorXd solve_vector(const std::vector<std::size_t>& states,
                                 const std::vector<double>& charges, double t);

    Netlist netlist_;
    std::size_t dim_ = 0;
    std::map<std::vector<std::size_t>, Factorization> cache_;
    Eigen::VectorXd rhs_;
};

}  // namespace memsim
