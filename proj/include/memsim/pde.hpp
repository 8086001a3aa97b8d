#pragma once

#include "memsim/analytic.hpp"
#include "memsim/circuit.hpp"

#include <cstddef>
#include <vector>

namespace memsim::pde {

/// Uniform cell-centred grid over capacitor charge.
class ChargeGrid {
public:
    ChargeGrid(double q_min, double q_max, std::size_t n_cells);

    /// Grid whose bounds are checked so that the drift points inward at both
    /// edges for every state over [0, t_end].
    static ChargeGrid checked(double q_min, double q_max, std::size_t n_cells,
                              const SeriesCircuit& circuit, double t_end);

    /// Default bounds: the initial charge range and C*V over [0, t_end],
    /// padded by 10% of C*max|V| on both sides.
    static ChargeGrid around(const SeriesCircuit& circuit, double q_lo, double q_hi, double t_end,
                             std::size_t n_cells);

    double q_min() const noexcept { return q_min_; }
    double q_max() const noexcept { return q_max_; }
    std::size_t size() const noexcept { return n_; }
    double dq() const noexcept { return dq_; }
    double center(std::size_t i) const noexcept { return q_min_ + (static_cast<double>(i) + 0.5) * dq_; }
    double face(std::size_t j) const noexcept { return q_min_ + static_cast<double>(j) * dq_; }
    /// Cell containing q (clamped to the grid).
    std::size_t locate(double q) const noexcept;

private:
    double q_min_;
    double q_max_;
    std::size_t n_;
    double dq_;
};

/// Cell-averaged densities p_i (1/C), one array per memristor state.
struct DistributionField {
    std::vector<std::vector<double>> density;
    double time = 0.0;

    std::size_t num_states() const noexcept { return density.size(); }
    double marginal(std::size_t state, const ChargeGrid& grid) const;
    double mass(const ChargeGrid& grid) const;
    double min_value() const;
    /// Conditional mean and variance of q in `state` (cell-centre quadrature).
    std::pair<double, double> moments(std::size_t state, const ChargeGrid& grid) const;

    static DistributionField zeros(const ChargeGrid& grid, std::size_t num_states);
    /// Unit mass in the single cell containing q0.
    static DistributionField point(const ChargeGrid& grid, std::size_t num_states, std::size_t state,
                                   double q0);
    /// Exact cell averages of a density (smooth part and atoms).
    static DistributionField from_density(const ChargeGrid& grid, std::size_t num_states,
                                          std::size_t state, const Density1D& density);
};

/// (V(t) - q/C) / R_state.
double drift_velocity(const SeriesCircuit& circuit, std::size_t state, double q, double t);

struct StepLimits {
    double advection_dt = 0.0;  // largest dt with max|v| dt/dq <= 0.9
    double reaction_dt = 0.0;   // largest dt with max exit rate * dt <= 0.5
    double admissible() const noexcept { return std::min(advection_dt, reaction_dt); }
};

StepLimits step_limits(const ChargeGrid& grid, const SeriesCircuit& circuit, double t);

struct StepDiagnostics {
    double boundary_outflow = 0.0;
    bool rate_clamped = false;
};

/// One Lie-split step: conservative first-order upwind advection per state,
/// then the reaction coupling of adjacent states at cell-centre voltage.
/// Throws StepSizeError when dt exceeds step_limits().
DistributionField step(const DistributionField& field, const ChargeGrid& grid, double dt,
                       const SeriesCircuit& circuit, StepDiagnostics* diagnostics = nullptr);

struct RunOptions {
    double cfl = 0.9;             // fraction of the advection limit used
    double reaction_fraction = 1.0;  // fraction of the reaction limit used
    bool store_fields = false;
};

struct RunResult {
    std::vector<double> times;
    std::vector<std::vector<double>> marginals;  // [output][state]
    std::vector<std::vector<double>> mean_q;     // [output][state]
    std::vector<std::vector<double>> var_q;      // [output][state]
    std::vector<DistributionField> fields;       // only with store_fields
    double max_mass_error = 0.0;                 // over every step
    double min_cell = 0.0;                       // over every step
    std::size_t steps = 0;
    bool rate_clamped = false;
};

/// Integrates from initial.time to t_end, reporting at multiples of
/// `output_interval` and at t_end.
RunResult run(const ChargeGrid& grid, const DistributionField& initial, double t_end,
              double output_interval, const SeriesCircuit& circuit, const RunOptions& options = {});

/// Width between the outermost crossings of half the peak height of
/// `state`'s density, interpolated linearly between cell centres.
double half_height_width(const DistributionField& field, const ChargeGrid& grid, std::size_t state);

}  // namespace memsim::pde
