#include "memsim/analytic.hpp"
#include "memsim/errors.hpp"
#include "memsim/mc.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

using namespace memsim;
using namespace memsim::mc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using Catch::Matchers::ContainsSubstring;

namespace {

const MemristorModel kBinary = MemristorModel::binary(1e5, 1e4, 3e5, 0.02);

Netlist reference_loop(double tau = 3e5) {
    return series_mc(MemristorModel::binary(1e5, 1e4, tau, 0.02), 1e-6, Waveform::constant(0.35));
}

std::vector<double> grid(double t_end, int n) {
    std::vector<double> out;
    for (int k = 0; k <= n; ++k) out.push_back(t_end * k / n);
    return out;
}

}  // namespace

TEST_CASE("hazard under a constant voltage crosses at threshold / rate", "[mc]") {
    const double rate = rate_up(kBinary, 0, 0.35);
    CHECK_THAT(rate, WithinRel(132.749, 1e-5));
    const auto hit = hazard_accumulate(kBinary, 0, [](double) { return 0.35; }, 0.0, 1.0, 1.0);
    REQUIRE(hit.switched);
    CHECK_THAT(hit.time, WithinRel(1.0 / rate, 1e-8));
    CHECK_THAT(hit.time, WithinAbs(7.533e-3, 1e-6));
    CHECK_THAT(hit.accumulated, WithinRel(1.0, 1e-8));
}

TEST_CASE("hazard stays zero while the voltage cannot drive a transition", "[mc]") {
    const auto none = hazard_accumulate(kBinary, 0, [](double) { return -0.2; }, 0.0, 1.0, 1e-3);
    CHECK_FALSE(none.switched);
    CHECK(none.accumulated == 0.0);
    CHECK(none.time == 1.0);
    CHECK_THROWS_AS(hazard_accumulate(kBinary, 0, [](double) { return 0.1; }, 1.0, 0.0, 1.0), ContractViolation);
}

TEST_CASE("hazard along the relaxing voltage matches the closed form", "[mc]") {
    const auto vm = [](double t) { return 0.35 * std::exp(-t / 0.1); };
    const auto whole = hazard_accumulate(kBinary, 0, vm, 0.0, 1.0, std::numeric_limits<double>::infinity());
    CHECK_FALSE(whole.switched);
    const double p0 = p0_constant_voltage(ConstantDriveParams::reference(), 1.0);
    CHECK_THAT(whole.accumulated, WithinRel(-std::log(p0), 1e-8));
    CHECK_THAT(whole.accumulated, WithinRel(-std::log(0.446), 2e-3));
}

TEST_CASE("trajectories reduce to RC charging when switching is impossible", "[mc]") {
    const Netlist net = reference_loop(std::numeric_limits<double>::infinity());
    const auto times = grid(0.03, 6);
    const auto rec = simulate_trajectory(net, initial_state(net), 0.03, times, 7);
    CHECK(rec.events.empty());
    const auto params = ConstantDriveParams::reference();
    for (std::size_t k = 0; k < times.size(); ++k) {
        CHECK_THAT(rec.sample_charges[k][0], WithinAbs(rc_charge(params, 1e5, times[k]), 1e-18));
        CHECK(rec.sample_states[k][0] == 0);
    }
}

TEST_CASE("a very fast device switches at once and then follows R1", "[mc]") {
    const Netlist net = reference_loop(1e-9);
    const double t = 0.02;
    const auto rec = simulate_trajectory(net, initial_state(net), t, std::vector<double>{t}, 3);
    REQUIRE(rec.events.size() == 1);
    CHECK(rec.events[0].time < 1e-12);
    CHECK_THAT(rec.terminal.capacitor_charges[0], WithinRel(rc_charge(ConstantDriveParams::reference(), 1e4, t), 1e-6));
}

TEST_CASE("a positive drive switches the reference loop at most once", "[mc]") {
    const Netlist net = reference_loop();
    const auto times = grid(0.03, 3);
    std::size_t switched = 0;
    for (std::uint64_t i = 0; i < 300; ++i) {
        const auto rec = simulate_trajectory(net, initial_state(net), 0.03, times, trajectory_seed(11, i));
        CHECK(rec.events.size() <= 1);
        if (!rec.events.empty()) {
            ++switched;
            CHECK(rec.events[0].from == 0);
            CHECK(rec.events[0].to == 1);
            CHECK(rec.terminal.memristor_states[0] == 1);
        }
        CHECK(rec.terminal.capacitor_charges[0] <= 0.35e-6);
    }
    CHECK(switched > 30);
}

TEST_CASE("two memristors in series both switch under a strong drive", "[mc]") {
    const Netlist net = parse_netlist(
        "V1 a 0 DC 0.7\n"
        "M1 a b STATES=2 R=100k,10k TAUUP=300 VUP=0.02 TAUDOWN=300 VDOWN=0.02\n"
        "M2 b c STATES=2 R=100k,10k TAUUP=300 VUP=0.02 TAUDOWN=300 VDOWN=0.02\n"
        "C1 c 0 1u\n");
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto rec = simulate_trajectory(net, initial_state(net), 0.05, std::vector<double>{0.05}, seed);
        CHECK(rec.events.size() == 2);
        CHECK(rec.terminal.memristor_states == std::vector<std::size_t>{1, 1});
        if (rec.events.size() == 2) CHECK(rec.events[0].memristor != rec.events[1].memristor);
    }
}

TEST_CASE("the general integrator reproduces the exact series path", "[mc]") {
    const Netlist net = reference_loop();
    const auto times = grid(0.03, 5);
    TrajectoryOptions general;
    general.force_general = true;
    std::size_t compared = 0;
    for (std::uint64_t i = 0; i < 40; ++i) {
        const auto seed = trajectory_seed(5, i);
        const auto exact = simulate_trajectory(net, initial_state(net), 0.03, times, seed);
        const auto rk = simulate_trajectory(net, initial_state(net), 0.03, times, seed, general);
        REQUIRE(exact.events.size() == rk.events.size());
        for (std::size_t e = 0; e < exact.events.size(); ++e) {
            CHECK_THAT(rk.events[e].time, WithinRel(exact.events[e].time, 1e-6));
            ++compared;
        }
        for (std::size_t k = 0; k < times.size(); ++k) {
            CHECK_THAT(rk.sample_charges[k][0], WithinAbs(exact.sample_charges[k][0], 1e-15));
        }
    }
    CHECK(compared > 0);
}

TEST_CASE("ensembles do not depend on the thread count", "[mc][property]") {
    const Netlist net = reference_loop();
    const auto times = grid(0.03, 10);
    EnsembleOptions one;
    one.threads = 1;
    one.histogram = {0, 0, 0.0, 0.4e-6, 20};
    EnsembleOptions four = one;
    four.threads = 4;
    const auto a = run_ensemble(net, initial_state(net), 0.03, times, 700, 99, one);
    const auto b = run_ensemble(net, initial_state(net), 0.03, times, 700, 99, four);
    CHECK(a == b);
    CHECK(a.completed == 700);
    for (const auto& p : a.probability) CHECK(p[0][0] + p[0][1] == 1.0);
    const auto c = run_ensemble(net, initial_state(net), 0.03, times, 700, 100, one);
    CHECK_FALSE(a == c);
}

TEST_CASE("ensemble statistics are internally consistent", "[mc]") {
    const Netlist net = reference_loop();
    const auto times = grid(0.03, 3);
    const auto stats = run_ensemble(net, initial_state(net), 0.03, times, 2000, 1);
    CHECK(stats.up_events == stats.switched);
    CHECK(stats.down_events == 0);
    const double p1 = stats.probability.back()[0][1];
    CHECK_THAT(stats.std_error.back()[0][1], WithinRel(std::sqrt(p1 * (1 - p1) / 2000.0), 1e-12));
    CHECK(stats.counts.back()[0][1] == stats.switched);
    CHECK(stats.mean_first_switch > 0.0);
    CHECK(stats.mean_first_switch < 0.03);

    const auto single = run_ensemble(net, initial_state(net), 0.03, times, 1, 1);
    for (const auto& se : single.std_error) CHECK(se[0][0] == 0.0);
    CHECK_THROWS_AS(run_ensemble(net, initial_state(net), 0.03, times, 0, 1), ContractViolation);
}

TEST_CASE("failing trajectories are isolated and reported", "[mc]") {
    const Netlist net = reference_loop(3e3);
    const auto times = grid(0.03, 3);
    EnsembleOptions opts;
    opts.threads = 2;
    opts.trajectory.force_general = true;
    opts.trajectory.max_steps = 40;
    const auto stats = run_ensemble(net, initial_state(net), 0.03, times, 300, 4, opts);
    CHECK(stats.requested == 300);
    CHECK(stats.completed + stats.failures.size() == 300);
    REQUIRE_FALSE(stats.failures.empty());
    CHECK_THAT(stats.failures[0].message, ContainsSubstring("step budget"));
    CHECK(stats.failure_fraction() == static_cast<double>(stats.failures.size()) / 300.0);
    for (std::size_t i = 1; i < stats.failures.size(); ++i) {
        CHECK(stats.failures[i - 1].index < stats.failures[i].index);
    }
}

TEST_CASE("output times outside the window are rejected", "[mc]") {
    const Netlist net = reference_loop();
    CHECK_THROWS_AS(simulate_trajectory(net, initial_state(net), 0.03, std::vector<double>{0.04}, 1),
                    ContractViolation);
    CHECK_THROWS_AS(simulate_trajectory(net, initial_state(net), 0.03, std::vector<double>{0.02, 0.01}, 1),
                    ContractViolation);
}
