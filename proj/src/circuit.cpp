#include "memsim/circuit.hpp"
#include "memsim/errors.hpp"

#include <cmath>

namespace memsim {

namespace {

void stamp_conductance(Eigen::MatrixXd& a, NodeIndex n1, NodeIndex n2, double g) {
    if (n1 != kGround) a(n1 - 1, n1 - 1) += g;
    if (n2 != kGround) a(n2 - 1, n2 - 1) += g;
    if (n1 != kGround && n2 != kGround) {
        a(n1 - 1, n2 - 1) -= g;
        a(n2 - 1, n1 - 1) -= g;
    }
}

void stamp_branch(Eigen::MatrixXd& a, NodeIndex pos, NodeIndex neg, std::size_t row) {
    if (pos != kGround) {
        a(pos - 1, row) += 1.0;
        a(row, pos - 1) += 1.0;
    }
    if (neg != kGround) {
        a(neg - 1, row) -= 1.0;
        a(row, neg - 1) -= 1.0;
    }
}

}  // namespace

CircuitState initial_state(const Netlist& netlist) {
    CircuitState state;
    for (const auto& m : netlist.memristors) state.memristor_states.push_back(m.initial_state);
    for (const auto& c : netlist.capacitors) state.capacitor_charges.push_back(c.initial_charge.value_or(0.0));
    return state;
}

void check_state(const Netlist& netlist, const CircuitState& state) {
    if (state.memristor_states.size() != netlist.memristors.size()) {
        throw ContractViolation("state lists " + std::to_string(state.memristor_states.size()) +
                                " memristors, netlist has " + std::to_string(netlist.memristors.size()));
    }
    if (state.capacitor_charges.size() != netlist.capacitors.size()) {
        throw ContractViolation("state lists " + std::to_string(state.capacitor_charges.size()) +
                                " capacitor charges, netlist has " +
                                std::to_string(netlist.capacitors.size()));
    }
    for (std::size_t j = 0; j < state.memristor_states.size(); ++j) {
        if (state.memristor_states[j] >= netlist.memristors[j].model.num_states()) {
            throw ContractViolation("memristor " + netlist.memristors[j].name + " state out of range");
        }
    }
}

NetworkSolver::NetworkSolver(const Netlist& netlist)
    : netlist_(netlist),
      dim_(netlist.node_count() - 1 + netlist.sources.size() + netlist.capacitors.size()),
      rhs_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_))) {}

const NetworkSolver::Factorization& NetworkSolver::factor(const std::vector<std::size_t>& states) {
    if (auto it = cache_.find(states); it != cache_.end()) return it->second;

    const std::size_t nn = netlist_.node_count() - 1;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
    for (const auto& r : netlist_.resistors) stamp_conductance(a, r.a, r.b, 1.0 / r.ohms);
    for (std::size_t j = 0; j < netlist_.memristors.size(); ++j) {
        const auto& m = netlist_.memristors[j];
        stamp_conductance(a, m.pos, m.neg, 1.0 / m.model.resistance(states[j]));
    }
    std::size_t row = nn;
    for (const auto& v : netlist_.sources) stamp_branch(a, v.pos, v.neg, row++);
    for (const auto& c : netlist_.capacitors) stamp_branch(a, c.pos, c.neg, row++);

    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    lu.setThreshold(1e-14);
    if (!lu.isInvertible()) {
        const Eigen::MatrixXd kernel = lu.kernel();
        std::vector<std::string> nodes;
        std::vector<std::string> elements;
        for (Eigen::Index i = 0; i < kernel.rows(); ++i) {
            if (kernel.row(i).cwiseAbs().maxCoeff() <= 1e-9 * kernel.cwiseAbs().maxCoeff()) continue;
            const auto k = static_cast<std::size_t>(i);
            if (k < nn) {
                nodes.push_back(netlist_.nodes[k + 1]);
            } else if (k - nn < netlist_.sources.size()) {
                elements.push_back(netlist_.sources[k - nn].name);
            } else {
                elements.push_back(netlist_.capacitors[k - nn - netlist_.sources.size()].name);
            }
        }
        std::string message = "singular network matrix";
        auto list = [](const std::vector<std::string>& names) {
            std::string out;
            for (std::size_t i = 0; i < names.size(); ++i) out += (i ? ", " : "") + names[i];
            return out;
        };
        if (!nodes.empty()) message += "; offending nodes: " + list(nodes);
        if (!elements.empty()) message += "; voltage-source/capacitor loop through: " + list(elements);
        throw SingularNetworkError(message, nodes);
    }
    return cache_.emplace(states, Factorization{std::move(lu)}).first->second;
}

Eigen::VectorXd NetworkSolver::solve_vector(const std::vector<std::size_t>& states,
                                            const std::vector<double>& charges, double t) {
    const auto& f = factor(states);
    const std::size_t nn = netlist_.node_count() - 1;
    rhs_.setZero();
    std::size_t row = nn;
    for (const auto& v : netlist_.sources) rhs_(static_cast<Eigen::Index>(row++)) = v.waveform(t);
    for (std::size_t k = 0; k < netlist_.capacitors.size(); ++k) {
        rhs_(static_cast<Eigen::Index>(row++)) = charges[k] / netlist_.capacitors[k].farads;
    }
    return f.lu.solve(rhs_);
}

void NetworkSolver::evaluate(const std::vector<std::size_t>& states, const std::vector<double>& charges,
                             double t, std::vector<double>& memristor_voltages,
                             std::vector<double>& charge_derivatives) {
    const Eigen::VectorXd x = solve_vector(states, charges, t);
    auto voltage = [&](NodeIndex n) { return n == kGround ? 0.0 : x(static_cast<Eigen::Index>(n - 1)); };
    memristor_voltages.resize(netlist_.memristors.size());
    for (std::size_t j = 0; j < netlist_.memristors.size(); ++j) {
        const auto& m = netlist_.memristors[j];
        memristor_voltages[j] = voltage(m.pos) - voltage(m.neg);
    }
    const std::size_t first = netlist_.node_count() - 1 + netlist_.sources.size();
    charge_derivatives.resize(netlist_.capacitors.size());
    for (std::size_t k = 0; k < netlist_.capacitors.size(); ++k) {
        charge_derivatives[k] = x(static_cast<Eigen::Index>(first + k));
    }
}

OperatingPoint NetworkSolver::solve(const CircuitState& state) {
    check_state(netlist_, state);
    OperatingPoint op;
    const Eigen::VectorXd x = solve_vector(state.memristor_states, state.capacitor_charges, state.time);
    op.node_voltages.assign(netlist_.node_count(), 0.0);
    for (std::size_t n = 1; n < netlist_.node_count(); ++n) {
        op.node_voltages[n] = x(static_cast<Eigen::Index>(n - 1));
    }
    for (const auto& m : netlist_.memristors) {
        op.memristor_voltages.push_back(op.node_voltages[m.pos] - op.node_voltages[m.neg]);
    }
    const std::size_t first = netlist_.node_count() - 1 + netlist_.sources.size();
    for (std::size_t k = 0; k < netlist_.capacitors.size(); ++k) {
        op.charge_derivatives.push_back(x(static_cast<Eigen::Index>(first + k)));
    }
    return op;
}

OperatingPoint solve_operating_point(const Netlist& netlist, const CircuitState& state) {
    NetworkSolver solver(netlist);
    return solver.solve(state);
}

Netlist series_mc(const MemristorModel& model, double capacitance, const Waveform& drive) {
    if (!(capacitance > 0.0)) throw ContractViolation("capacitance must be positive");
    Netlist net;
    net.nodes = {"0", "in", "n1"};
    net.sources.push_back({"V1", 1, kGround, drive});
    net.memristors.push_back({"M1", 1, 2, model, 0});
    net.capacitors.push_back({"C1", 2, kGround, capacitance, std::nullopt});
    return net;
}

std::optional<SeriesCircuit> as_series_circuit(const Netlist& net) {
    if (net.sources.size() != 1 || net.memristors.size() != 1 || net.capacitors.size() != 1 ||
        !net.resistors.empty() || net.node_count() != 3) {
        return std::nullopt;
    }
    const auto& v = net.sources.front();
    const auto& m = net.memristors.front();
    const auto& c = net.capacitors.front();
    if (v.neg != kGround || c.neg != kGround || v.pos == kGround || c.pos == kGround) return std::nullopt;
    if (m.pos != v.pos || m.neg != c.pos) return std::nullopt;
    return SeriesCircuit{m.model, c.farads, v.waveform};
}

}  // namespace memsim
