#include "memsim/pde.hpp"
#include "memsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace memsim::pde {

ChargeGrid::ChargeGrid(double q_min, double q_max, std::size_t n_cells)
    : q_min_(q_min), q_max_(q_max), n_(n_cells), dq_((q_max - q_min) / static_cast<double>(n_cells)) {
    if (!(q_max > q_min)) throw ContractViolation("charge grid needs q_max > q_min");
    if (n_cells < 8) throw ContractViolation("charge grid needs at least 8 cells");
}

ChargeGrid ChargeGrid::checked(double q_min, double q_max, std::size_t n_cells,
                               const SeriesCircuit& circuit, double t_end) {
    ChargeGrid grid(q_min, q_max, n_cells);
    const auto [v_lo, v_hi] = circuit.drive.range(t_end);
    const double c = circuit.capacitance;
    if (q_min > c * v_lo) {
        throw ContractViolation("grid lower edge " + std::to_string(q_min) +
                                " C is above C*min V = " + std::to_string(c * v_lo) +
                                " C; drift would point outward");
    }
    if (q_max < c * v_hi) {
        throw ContractViolation("grid upper edge " + std::to_string(q_max) +
                                " C is below C*max V = " + std::to_string(c * v_hi) +
                                " C; drift would point outward");
    }
    return grid;
}

ChargeGrid ChargeGrid::around(const SeriesCircuit& circuit, double q_lo, double q_hi, double t_end,
                              std::size_t n_cells) {
    const auto [v_lo, v_hi] = circuit.drive.range(t_end);
    const double c = circuit.capacitance;
    double pad = 0.1 * c * std::max(std::abs(v_lo), std::abs(v_hi));
    if (!(pad > 0.0)) pad = 0.1 * std::max(std::abs(q_lo), std::abs(q_hi));
    if (!(pad > 0.0)) throw ContractViolation("cannot size a grid for zero drive and zero charge");
    const double lo = std::min(q_lo, c * v_lo) - pad;
    const double hi = std::max(q_hi, c * v_hi) + pad;
    return checked(lo, hi, n_cells, circuit, t_end);
}

std::size_t ChargeGrid::locate(double q) const noexcept {
    const double x = std::floor((q - q_min_) / dq_);
    if (!(x >= 0.0)) return 0;
    return std::min(static_cast<std::size_t>(x), n_ - 1);
}

double DistributionField::marginal(std::size_t state, const ChargeGrid& grid) const {
    double sum = 0.0;
    for (double p : density.at(state)) sum += p;
    return sum * grid.dq();
}

double DistributionField::mass(const ChargeGrid& grid) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < density.size(); ++i) sum += marginal(i, grid);
    return sum;
}

double DistributionField::min_value() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& row : density) {
        for (double p : row) m = std::min(m, p);
    }
    return m;
}

std::pair<double, double> DistributionField::moments(std::size_t state, const ChargeGrid& grid) const {
    const auto& row = density.at(state);
    double m0 = 0.0;
    double m1 = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) {
        m0 += row[c];
        m1 += row[c] * grid.center(c);
    }
    if (!(m0 > 0.0)) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    const double mean = m1 / m0;
    double m2 = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) {
        const double d = grid.center(c) - mean;
        m2 += row[c] * d * d;
    }
    return {mean, m2 / m0};
}

DistributionField DistributionField::zeros(const ChargeGrid& grid, std::size_t num_states) {
    DistributionField f;
    f.density.assign(num_states, std::vector<double>(grid.size(), 0.0));
    return f;
}

DistributionField DistributionField::point(const ChargeGrid& grid, std::size_t num_states,
                                           std::size_t state, double q0) {
    if (q0 < grid.q_min() || q0 > grid.q_max()) throw ContractViolation("point mass lies outside the grid");
    auto f = zeros(grid, num_states);
    f.density.at(state)[grid.locate(q0)] = 1.0 / grid.dq();
    return f;
}

DistributionField DistributionField::from_density(const ChargeGrid& grid, std::size_t num_states,
                                                  std::size_t state, const Density1D& density) {
    auto f = zeros(grid, num_states);
    auto& row = f.density.at(state);
    if (density.has_smooth()) {
        const std::size_t first = grid.locate(density.lower());
        const std::size_t last = grid.locate(density.upper());
        for (std::size_t c = first; c <= last; ++c) {
            row[c] += density.mass_between(grid.face(c), grid.face(c + 1) ) / grid.dq();
        }
    }
    for (const auto& a : density.atoms()) row[grid.locate(a.location)] += a.weight / grid.dq();
    return f;
}

double drift_velocity(const SeriesCircuit& circuit, std::size_t state, double q, double t) {
    return circuit.memristor_voltage(q, t) / circuit.model.resistance(state);
}

StepLimits step_limits(const ChargeGrid& grid, const SeriesCircuit& circuit, double t) {
    const std::size_t g = circuit.model.num_states();
    double r_min = std::numeric_limits<double>::infinity();
    for (double r : circuit.model.resistances()) r_min = std::min(r_min, r);
    // |v| is affine in q, so its maximum over faces sits at an edge.
    const double vm_max = std::max(std::abs(circuit.memristor_voltage(grid.q_min(), t)),
                                   std::abs(circuit.memristor_voltage(grid.q_max(), t)));
    const double v_max = vm_max / r_min;
    double rate_max = 0.0;
    // Exit rates are monotone in |V_M|, so the extreme cell centres bound them.
    for (double q : {grid.center(0), grid.center(grid.size() - 1)}) {
        const double vm = circuit.memristor_voltage(q, t);
        for (std::size_t i = 0; i < g; ++i) rate_max = std::max(rate_max, total_exit_rate(circuit.model, i, vm));
    }
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {v_max > 0.0 ? 0.9 * grid.dq() / v_max : inf, rate_max > 0.0 ? 0.5 / rate_max : inf};
}

DistributionField step(const DistributionField& field, const ChargeGrid& grid, double dt,
                       const SeriesCircuit& circuit, StepDiagnostics* diagnostics) {
    const std::size_t g = circuit.model.num_states();
    if (field.num_states() != g) throw ContractViolation("field state count does not match the device");
    if (!(dt >= 0.0)) throw ContractViolation("negative time step");
    const double t = field.time;
    const StepLimits limits = step_limits(grid, circuit, t);
    if (dt > limits.admissible() * (1.0 + 1e-12)) {
        throw StepSizeError("time step " + std::to_string(dt) + " s exceeds the stability limit " +
                                std::to_string(limits.admissible()) + " s",
                            limits.admissible());
    }
    if (dt == 0.0) return field;

    const std::size_t n = grid.size();
    const double ratio = dt / grid.dq();
    DistributionField out;
    out.time = t + dt;
    out.density.resize(g);
    double outflow = 0.0;
    std::vector<double> flux(n + 1);

    for (std::size_t i = 0; i < g; ++i) {
        const auto& p = field.density[i];
        auto& next = out.density[i];
        next.resize(n);
        const double r = circuit.model.resistance(i);
        for (std::size_t j = 1; j < n; ++j) {
            const double v = circuit.memristor_voltage(grid.face(j), t) / r;
            flux[j] = v > 0.0 ? v * p[j - 1] : v * p[j];
        }
        const double v_lo = circuit.memristor_voltage(grid.face(0), t) / r;
        const double v_hi = circuit.memristor_voltage(grid.face(n), t) / r;
        flux[0] = v_lo < 0.0 ? v_lo * p[0] : 0.0;
        flux[n] = v_hi > 0.0 ? v_hi * p[n - 1] : 0.0;
        outflow += (flux[n] - flux[0]) * dt;
        for (std::size_t c = 0; c < n; ++c) next[c] = p[c] - ratio * (flux[c + 1] - flux[c]);
    }

    bool clamped = false;
    if (g == 2) {
        auto& p0 = out.density[0];
        auto& p1 = out.density[1];
        for (std::size_t c = 0; c < n; ++c) {
            const double vm = circuit.memristor_voltage(grid.center(c), t);
            const Rate up = rate_up_checked(circuit.model, 0, vm);
            const Rate down = rate_down_checked(circuit.model, 1, vm);
            clamped = clamped || up.clamped || down.clamped;
            const double total = up.value + down.value;
            if (total == 0.0) continue;
            // Exact solution of the two-state exchange over dt.
            double moved = -std::expm1(-total * dt) * (up.value * p0[c] - down.value * p1[c]) / total;
            moved = std::clamp(moved, -p1[c], p0[c]);
            p0[c] -= moved;
            p1[c] += moved;
        }
    } else {
        std::vector<double> up_flow(g);
        std::vector<double> down_flow(g);
        for (std::size_t c = 0; c < n; ++c) {
            const double vm = circuit.memristor_voltage(grid.center(c), t);
            for (std::size_t i = 0; i < g; ++i) {
                up_flow[i] = 0.0;
                down_flow[i] = 0.0;
                if (i + 1 < g) {
                    const Rate up = rate_up_checked(circuit.model, i, vm);
                    clamped = clamped || up.clamped;
                    up_flow[i] = dt * up.value * out.density[i][c];
                }
                if (i > 0) {
                    const Rate down = rate_down_checked(circuit.model, i, vm);
                    clamped = clamped || down.clamped;
                    down_flow[i] = dt * down.value * out.density[i][c];
                }
            }
            for (std::size_t i = 0; i < g; ++i) {
                double delta = -up_flow[i] - down_flow[i];
                if (i > 0) delta += up_flow[i - 1];
                if (i + 1 < g) delta += down_flow[i + 1];
                out.density[i][c] += delta;
            }
        }
    }

    if (diagnostics) {
        diagnostics->boundary_outflow += outflow;
        diagnostics->rate_clamped = diagnostics->rate_clamped || clamped;
    }
    return out;
}

namespace {

void record(RunResult& result, const DistributionField& field, const ChargeGrid& grid, bool store) {
    result.times.push_back(field.time);
    std::vector<double> marg;
    std::vector<double> mean;
    std::vector<double> var;
    for (std::size_t i = 0; i < field.num_states(); ++i) {
        marg.push_back(field.marginal(i, grid));
        const auto [m, v] = field.moments(i, grid);
        mean.push_back(m);
        var.push_back(v);
    }
    result.marginals.push_back(std::move(marg));
    result.mean_q.push_back(std::move(mean));
    result.var_q.push_back(std::move(var));
    if (store) result.fields.push_back(field);
}

}  // namespace

RunResult run(const ChargeGrid& grid, const DistributionField& initial, double t_end, double output_interval,
              const SeriesCircuit& circuit, const RunOptions& options) {
    if (!(t_end > initial.time)) throw ContractViolation("pde run needs t_end after the initial time");
    if (!(output_interval > 0.0)) throw ContractViolation("output interval must be positive");
    if (!(options.cfl > 0.0 && options.cfl <= 1.0) ||
        !(options.reaction_fraction > 0.0 && options.reaction_fraction <= 1.0)) {
        throw ContractViolation("step fractions must lie in (0, 1]");
    }
    for (const auto& row : initial.density) {
        if (row.size() != grid.size()) throw ContractViolation("field does not match the grid");
    }
    if (std::abs(initial.mass(grid) - 1.0) > 1e-8) throw ContractViolation("initial field must carry unit mass");
    (void)ChargeGrid::checked(grid.q_min(), grid.q_max(), grid.size(), circuit, t_end);

    RunResult result;
    DistributionField field = initial;
    result.min_cell = field.min_value();
    result.max_mass_error = std::abs(field.mass(grid) - 1.0);
    record(result, field, grid, options.store_fields);

    StepDiagnostics diag;
    std::size_t next_index = 1;
    const double t0 = initial.time;
    auto output_time = [&](std::size_t k) { return std::min(t0 + static_cast<double>(k) * output_interval, t_end); };
    while (field.time < t_end) {
        const double target = output_time(next_index);
        const StepLimits limits = step_limits(grid, circuit, field.time);
        const double dt_max = std::min(options.cfl / 0.9 * limits.advection_dt,
                                       options.reaction_fraction * limits.reaction_dt);
        const double remaining = target - field.time;
        const bool reaches = remaining <= dt_max;
        const double dt = reaches ? remaining : dt_max;
        field = step(field, grid, dt, circuit, &diag);
        if (reaches) field.time = target;
        ++result.steps;

        result.min_cell = std::min(result.min_cell, field.min_value());
        result.max_mass_error = std::max(result.max_mass_error, std::abs(field.mass(grid) - 1.0));
        if (std::abs(diag.boundary_outflow) > 1e-6) {
            throw BoundaryOutflowError("probability mass " + std::to_string(diag.boundary_outflow) +
                                           " left the charge grid by t = " + std::to_string(field.time) + " s",
                                       diag.boundary_outflow);
        }
        if (reaches) {
            record(result, field, grid, options.store_fields);
            ++next_index;
        }
    }
    result.rate_clamped = diag.rate_clamped;
    return result;
}

double half_height_width(const DistributionField& field, const ChargeGrid& grid, std::size_t state) {
    const auto& p = field.density.at(state);
    const auto peak = std::max_element(p.begin(), p.end());
    if (peak == p.end() || !(*peak > 0.0)) return 0.0;
    const double half = 0.5 * *peak;
    std::size_t first = 0;
    while (p[first] < half) ++first;
    std::size_t last = p.size() - 1;
    while (p[last] < half) --last;
    auto crossing = [&](std::size_t below, std::size_t above) {
        const double w = (half - p[below]) / (p[above] - p[below]);
        return grid.center(below) + w * (grid.center(above) - grid.center(below));
    };
    const double left = first == 0 ? grid.center(0) : crossing(first - 1, first);
    const double right = last + 1 == p.size() ? grid.center(last) : crossing(last + 1, last);
    return right - left;
}

}  // namespace memsim::pde
