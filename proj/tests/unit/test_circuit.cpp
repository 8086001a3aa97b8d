#include "memsim/circuit.hpp"
#include "memsim/errors.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace memsim;
using Catch::Matchers::WithinRel;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::ContainsSubstring;

namespace {

const MemristorModel kBinary = MemristorModel::binary(1e5, 1e4, 3e5, 0.02);

// Net current leaving every non-ground node through resistive branches, source
// branches excluded; the caller supplies the source and capacitor currents.
double branch_current(double va, double vb, double ohms) { return (va - vb) / ohms; }

}  // namespace

TEST_CASE("series loop operating point matches Kirchhoff's law", "[circuit]") {
    const Netlist net = series_mc(kBinary, 1e-6, Waveform::constant(0.35));
    for (double q : {0.0, 1e-7, 3.5e-7, 5e-7}) {
        for (std::size_t s : {0u, 1u}) {
            const OperatingPoint op = solve_operating_point(net, {{s}, {q}, 0.0});
            const double vm = 0.35 - q / 1e-6;
            CHECK_THAT(op.memristor_voltages[0], WithinAbs(vm, 1e-15));
            CHECK_THAT(op.charge_derivatives[0], WithinAbs(vm / kBinary.resistance(s), 1e-20));
        }
    }
    const OperatingPoint eq = solve_operating_point(net, {{0}, {0.35e-6}, 0.0});
    CHECK_THAT(eq.charge_derivatives[0], WithinAbs(0.0, 1e-20));
}

TEST_CASE("time-dependent sources are evaluated at the state time", "[circuit]") {
    const Netlist net = series_mc(kBinary, 1e-6, Waveform::step(0.0, 0.5, 1e-3));
    CHECK_THAT(solve_operating_point(net, {{0}, {0.0}, 0.5e-3}).memristor_voltages[0], WithinAbs(0.0, 1e-15));
    CHECK_THAT(solve_operating_point(net, {{0}, {0.0}, 2e-3}).memristor_voltages[0], WithinAbs(0.5, 1e-15));
}

TEST_CASE("two parallel memristors halve the series resistance", "[circuit]") {
    const Netlist net = parse_netlist(
        "V1 in 0 DC 0.35\n"
        "M1 in n1 STATES=2 R=100k,10k TAUUP=3e5 VUP=0.02 TAUDOWN=3e5 VDOWN=0.02\n"
        "M2 in n1 STATES=2 R=100k,10k TAUUP=3e5 VUP=0.02 TAUDOWN=3e5 VDOWN=0.02\n"
        "C1 n1 0 1u\n");
    const double q = 1e-7;
    const OperatingPoint op = solve_operating_point(net, {{0, 0}, {q}, 0.0});
    CHECK_THAT(op.charge_derivatives[0], WithinRel((0.35 - q / 1e-6) / 5e4, 1e-12));
    const OperatingPoint mixed = solve_operating_point(net, {{0, 1}, {q}, 0.0});
    CHECK_THAT(mixed.charge_derivatives[0], WithinRel((0.35 - q / 1e-6) * (1.0 / 1e5 + 1.0 / 1e4), 1e-12));
}

TEST_CASE("Kirchhoff's current law holds on a resistive ladder", "[circuit][property]") {
    const Netlist net = parse_netlist(
        "V1 a 0 DC 1.7\n"
        "R1 a b 1k\n"
        "R2 b 0 2.2k\n"
        "M1 b c STATES=3 R=10k,4k,1k TAUUP=1 VUP=0.1 TAUDOWN=1 VDOWN=0.1\n"
        "R3 c 0 3.3k\n"
        "C1 c d 1u\n"
        "R4 d 0 470\n");
    for (std::size_t s = 0; s < 3; ++s) {
        const double q = 2e-7 * static_cast<double>(s + 1);
        const OperatingPoint op = solve_operating_point(net, {{s}, {q}, 0.0});
        auto v = [&](const char* name) {
            const auto it = std::find(net.nodes.begin(), net.nodes.end(), name);
            return op.node_voltages[static_cast<std::size_t>(it - net.nodes.begin())];
        };
        const double rm = net.memristors[0].model.resistance(s);
        const double cap_current = op.charge_derivatives[0];
        CHECK_THAT(v("c") - v("d"), WithinRel(q / 1e-6, 1e-12));
        const double kcl_b = branch_current(v("b"), v("a"), 1e3) + branch_current(v("b"), 0.0, 2.2e3) +
                             branch_current(v("b"), v("c"), rm);
        const double kcl_c = branch_current(v("c"), v("b"), rm) + branch_current(v("c"), 0.0, 3.3e3) + cap_current;
        const double kcl_d = branch_current(v("d"), 0.0, 470.0) - cap_current;
        const double scale = std::abs(branch_current(v("a"), v("b"), 1e3));
        CHECK(std::abs(kcl_b) <= 1e-12 * scale);
        CHECK(std::abs(kcl_c) <= 1e-12 * scale);
        CHECK(std::abs(kcl_d) <= 1e-12 * scale);
        CHECK_THAT(op.memristor_voltages[0], WithinRel(v("b") - v("c"), 1e-14));
    }
}

TEST_CASE("scaling resistances leaves dq/dt times R invariant", "[circuit][property]") {
    const auto small = series_mc(MemristorModel::binary(1e5, 1e4, 3e5, 0.02), 1e-6, Waveform::constant(0.35));
    const auto large = series_mc(MemristorModel::binary(7e5, 7e4, 2.1e6, 0.02), 1e-6, Waveform::constant(0.35));
    for (std::size_t s : {0u, 1u}) {
        const double a = solve_operating_point(small, {{s}, {1e-7}, 0.0}).charge_derivatives[0] * 1e5;
        const double b = solve_operating_point(large, {{s}, {1e-7}, 0.0}).charge_derivatives[0] * 7e5;
        CHECK_THAT(a, WithinRel(b, 1e-13));
    }
}

TEST_CASE("voltage-source loops are reported as singular", "[circuit]") {
    const Netlist net = parse_netlist("V1 a 0 DC 1\nV2 a 0 DC 2\nR1 a 0 1k\n");
    try {
        solve_operating_point(net, initial_state(net));
        FAIL("expected a singular network");
    } catch (const SingularNetworkError& e) {
        CHECK_THAT(e.what(), ContainsSubstring("singular"));
        CHECK_THAT(e.what(), ContainsSubstring("V1"));
        CHECK_THAT(e.what(), ContainsSubstring("V2"));
    }
    const Netlist cap_loop = parse_netlist("V1 a 0 DC 1\nC1 a 0 1u IC=0\n");
    CHECK_THROWS_AS(solve_operating_point(cap_loop, initial_state(cap_loop)), SingularNetworkError);
}

TEST_CASE("states that do not fit the netlist are rejected", "[circuit]") {
    const Netlist net = series_mc(kBinary, 1e-6, Waveform::constant(0.35));
    CHECK_THROWS_AS(solve_operating_point(net, {{2}, {0.0}, 0.0}), ContractViolation);
    CHECK_THROWS_AS(solve_operating_point(net, {{0, 0}, {0.0}, 0.0}), ContractViolation);
    CHECK_THROWS_AS(solve_operating_point(net, {{0}, {}, 0.0}), ContractViolation);
}

TEST_CASE("series_mc builds the canonical loop for any ladder", "[circuit]") {
    const auto model = MemristorModel::uniform({3e5, 1e5, 3e4}, 1e3, 0.05, 1e3, 0.05);
    const Netlist net = series_mc(model, 1e-9, Waveform::sine(0.0, 0.4, 100.0));
    const auto series = as_series_circuit(net);
    REQUIRE(series.has_value());
    CHECK(series->model == model);
    CHECK(series->capacitance == 1e-9);
    CHECK_THAT(series->memristor_voltage(1e-10, 2.5e-3), WithinAbs(0.4 - 0.1, 1e-14));
    const Netlist with_r = parse_netlist(serialize(net) + "R9 in 0 1k\n");
    CHECK_FALSE(as_series_circuit(with_r).has_value());
}

TEST_CASE("the cached solver agrees with the one-shot solve", "[circuit]") {
    const Netlist net = parse_netlist(
        "V1 a 0 SIN 0.1 0.3 50\n"
        "M1 a b STATES=2 R=100k,10k TAUUP=3e5 VUP=0.02 TAUDOWN=3e5 VDOWN=0.02\n"
        "M2 b c STATES=2 R=50k,5k TAUUP=3e5 VUP=0.02 TAUDOWN=3e5 VDOWN=0.02\n"
        "C1 c 0 1u\n"
        "C2 b 0 2u\n");
    NetworkSolver solver(net);
    for (std::size_t k = 0; k < 8; ++k) {
        const CircuitState s{{k % 2, (k / 2) % 2}, {1e-8 * k, -2e-8 * k}, 1e-3 * k};
        const auto a = solver.solve(s);
        const auto b = solve_operating_point(net, s);
        for (std::size_t i = 0; i < a.node_voltages.size(); ++i) {
            CHECK_THAT(a.node_voltages[i], WithinAbs(b.node_voltages[i], 1e-15));
        }
        for (std::size_t j = 0; j < 2; ++j) CHECK(a.charge_derivatives[j] == b.charge_derivatives[j]);
    }
}
