#pragma once

#include "memsim/circuit.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace memsim::mc {

struct SwitchEvent {
    double time = 0.0;
    std::size_t memristor = 0;
    std::size_t from = 0;
    std::size_t to = 0;
    friend bool operator==(const SwitchEvent&, const SwitchEvent&) = default;
};

/// One realization of the switching process.
struct TrajectoryRecord {
    std::vector<SwitchEvent> events;
    std::vector<double> sample_times;
    std::vector<std::vector<double>> sample_charges;       // [sample][capacitor]
    std::vector<std::vector<std::size_t>> sample_states;   // [sample][memristor]
    CircuitState terminal;
    bool rate_clamped = false;
    friend bool operator==(const TrajectoryRecord&, const TrajectoryRecord&) = default;
};

struct TrajectoryOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;  // on charges scaled by C*max|V| and on hazards
    std::size_t max_steps = 50'000'000;
    /// Use the general Runge-Kutta path even when the exact series path applies.
    bool force_general = false;
};

/// Samples one trajectory from `initial` to `t_end`, recording the state at
/// each of `output_times` (sorted, inside [initial.time, t_end]).
/// Throws IntegrationError when the step size underflows.
TrajectoryRecord simulate_trajectory(const Netlist& netlist, const CircuitState& initial, double t_end,
                                     std::span<const double> output_times, std::uint64_t seed,
                                     const TrajectoryOptions& options = {});

struct HazardOutcome {
    bool switched = false;
    double time = 0.0;         // crossing time when switched, segment end otherwise
    double accumulated = 0.0;  // hazard gathered up to `time`
};

/// Integrates the exit rate of `state` along V_M(t) on [t0, t1] until it
/// reaches `threshold`. The crossing is located to 1e-9 of the segment length.
HazardOutcome hazard_accumulate(const MemristorModel& model, std::size_t state,
                                const std::function<double(double)>& memristor_voltage, double t0, double t1,
                                double threshold);

/// Per-trajectory seed: splitmix64 over (master_seed, index).
std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t index);

struct HistogramSpec {
    std::size_t capacitor = 0;
    std::size_t memristor = 0;
    double q_min = 0.0;
    double q_max = 0.0;
    std::size_t bins = 0;  // 0 disables histograms
    friend bool operator==(const HistogramSpec&, const HistogramSpec&) = default;
};

struct EnsembleOptions {
    unsigned threads = 0;  // 0 picks the hardware concurrency
    HistogramSpec histogram;
    TrajectoryOptions trajectory;
};

struct TrajectoryFailure {
    std::size_t index = 0;
    std::string message;
    friend bool operator==(const TrajectoryFailure&, const TrajectoryFailure&) = default;
};

struct EnsembleStats {
    std::vector<double> times;
    std::size_t requested = 0;
    std::size_t completed = 0;
    std::vector<TrajectoryFailure> failures;

    /// counts[k][m][i]: completed trajectories with memristor m in state i at times[k].
    std::vector<std::vector<std::vector<std::size_t>>> counts;
    std::vector<std::vector<std::vector<double>>> probability;
    std::vector<std::vector<std::vector<double>>> std_error;

    /// histogram[k][i][b]: counts of the histogram capacitor's charge in bin b
    /// among trajectories whose histogram memristor is in state i at times[k].
    HistogramSpec histogram_spec;
    std::vector<std::vector<std::vector<std::size_t>>> histogram;
    std::size_t histogram_overflow = 0;

    std::size_t up_events = 0;
    std::size_t down_events = 0;
    std::size_t switched = 0;            // trajectories with at least one event
    double mean_first_switch = 0.0;      // over switched trajectories; 0 when none
    bool rate_clamped = false;

    double failure_fraction() const noexcept {
        return requested ? static_cast<double>(failures.size()) / static_cast<double>(requested) : 0.0;
    }

    friend bool operator==(const EnsembleStats&, const EnsembleStats&) = default;
};

/// Runs n trajectories with seeds trajectory_seed(master_seed, index) and
/// aggregates them in index order; the result does not depend on `threads`.
EnsembleStats run_ensemble(const Netlist& netlist, const CircuitState& initial, double t_end,
                           std::span<const double> output_times, std::size_t n, std::uint64_t master_seed,
                           const EnsembleOptions& options = {});

}  // namespace memsim::mc
