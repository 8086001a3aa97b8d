#include "memsim/mc.hpp"
#include "memsim/errors.hpp"
#include "memsim/quadrature.hpp"

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

namespace memsim::mc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Standard exponential from the top 53 bits of the generator.
double draw_exponential(std::mt19937_64& rng) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return -std::log1p(-u);
}

std::string fmt_time(double t) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", t);
    return buf;
}

void validate_request(const Netlist& netlist, const CircuitState& initial, double t_end,
                      std::span<const double> output_times) {
    check_state(netlist, initial);
    if (!(t_end > initial.time)) throw ContractViolation("t_end must lie after the initial time");
    double prev = -kInf;
    for (double t : output_times) {
        if (!(t >= initial.time && t <= t_end)) {
            throw ContractViolation("output time " + fmt_time(t) + " s lies outside the simulated window");
        }
        if (t < prev) throw ContractViolation("output times must be sorted");
        prev = t;
    }
}

std::size_t direction_at(const MemristorModel& model, std::size_t state, double vm) {
    const bool can_rise = state + 1 < model.num_states();
    const bool can_fall = state > 0;
    if (!can_fall) return state + 1;
    if (!can_rise) return state - 1;
    const double up = rate_up(model, state, vm);
    const double down = rate_down(model, state, vm);
    if (up > down || (up == down && vm >= 0.0)) return state + 1;
    return state - 1;
}

bool rate_hits_ceiling(const MemristorModel& model, std::size_t state, double vm) {
    bool clamped = false;
    if (state + 1 < model.num_states()) clamped = clamped || rate_up_checked(model, state, vm).clamped;
    if (state > 0) clamped = clamped || rate_down_checked(model, state, vm).clamped;
    return clamped;
}

// Series loop with a constant source: the charge relaxes exponentially between
// events, so only the switching times need numerical work.
TrajectoryRecord simulate_series_exact(const SeriesCircuit& circuit, const CircuitState& initial, double t_end,
                                       std::span<const double> output_times, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    TrajectoryRecord rec;
    const double va = circuit.drive(initial.time);
    const double c = circuit.capacitance;
    std::size_t state = initial.memristor_states.at(0);
    double q = initial.capacitor_charges.at(0);
    double t = initial.time;
    double threshold = draw_exponential(rng);
    std::size_t next_out = 0;

    while (true) {
        const double tau_c = c * circuit.model.resistance(state);
        const double q_start = q;
        const double t_start = t;
        const double vm0 = va - q_start / c;
        auto charge_at = [&](double u) { return q_start + (c * va - q_start) * -std::expm1(-(u - t_start) / tau_c); };
        auto vm_at = [&](double u) { return vm0 * std::exp(-(u - t_start) / tau_c); };

        rec.rate_clamped = rec.rate_clamped || rate_hits_ceiling(circuit.model, state, vm0);
        HazardOutcome outcome{false, t_end, 0.0};
        // |V_M| decays monotonically without changing sign, so a zero rate now stays zero.
        if (total_exit_rate(circuit.model, state, vm0) > 0.0) {
            outcome = hazard_accumulate(circuit.model, state, vm_at, t_start, t_end, threshold);
        }
        double t_event = outcome.time;
        if (outcome.switched && !(t_event > t_start)) t_event = std::nextafter(t_start, kInf);

        while (next_out < output_times.size() &&
               (outcome.switched ? output_times[next_out] < t_event : output_times[next_out] <= t_end)) {
            const double u = output_times[next_out++];
            rec.sample_times.push_back(u);
            rec.sample_charges.push_back({charge_at(u)});
            rec.sample_states.push_back({state});
        }
        if (!outcome.switched) {
            q = charge_at(t_end);
            t = t_end;
            break;
        }
        const std::size_t to = direction_at(circuit.model, state, vm_at(t_event));
        rec.events.push_back({t_event, 0, state, to});
        q = charge_at(t_event);
        t = t_event;
        state = to;
        threshold = draw_exponential(rng);
    }
    rec.terminal = {{state}, {q}, t};
    return rec;
}

using OdeState = std::vector<double>;

TrajectoryRecord simulate_general(const Netlist& netlist, const CircuitState& initial, double t_end,
                                  std::span<const double> output_times, std::uint64_t seed,
                                  const TrajectoryOptions& options) {
    namespace odeint = boost::numeric::odeint;
    std::mt19937_64 rng(seed);
    NetworkSolver solver(netlist);
    const std::size_t n_cap = netlist.capacitors.size();
    const std::size_t n_mem = netlist.memristors.size();

    double v_scale = 0.0;
    std::vector<double> stops;
    for (const auto& src : netlist.sources) {
        const auto [lo, hi] = src.waveform.range(t_end);
        v_scale = std::max({v_scale, std::abs(lo), std::abs(hi)});
        for (double b : src.waveform.breakpoints(t_end)) {
            if (b > initial.time && b < t_end) stops.push_back(b);
        }
    }
    double q_scale = 0.0;
    for (std::size_t k = 0; k < n_cap; ++k) {
        q_scale = std::max({q_scale, netlist.capacitors[k].farads * v_scale, std::abs(initial.capacitor_charges[k])});
    }
    if (!(q_scale > 0.0)) q_scale = 1.0;
    stops.insert(stops.end(), output_times.begin(), output_times.end());
    stops.push_back(t_end);
    std::sort(stops.begin(), stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

    std::vector<std::size_t> states = initial.memristor_states;
    std::vector<double> charges(n_cap);
    std::vector<double> vm(n_mem);
    std::vector<double> dq(n_cap);
    std::vector<double> thresholds(n_mem);
    for (auto& th : thresholds) th = draw_exponential(rng);

    auto system = [&](const OdeState& x, OdeState& dxdt, double t) {
        for (std::size_t k = 0; k < n_cap; ++k) charges[k] = x[k] * q_scale;
        solver.evaluate(states, charges, t, vm, dq);
        for (std::size_t k = 0; k < n_cap; ++k) dxdt[k] = dq[k] / q_scale;
        for (std::size_t j = 0; j < n_mem; ++j) {
            dxdt[n_cap + j] = total_exit_rate(netlist.memristors[j].model, states[j], vm[j]);
        }
    };

    OdeState x(n_cap + n_mem, 0.0);
    for (std::size_t k = 0; k < n_cap; ++k) x[k] = initial.capacitor_charges[k] / q_scale;
    OdeState deriv(x.size());
    OdeState trial(x.size());

    using Stepper = odeint::runge_kutta_cash_karp54<OdeState>;
    auto controlled = odeint::make_controlled<Stepper>(options.abs_tol, options.rel_tol);
    Stepper plain;

    TrajectoryRecord rec;
    double t = initial.time;
    const double window = t_end - initial.time;
    double dt = 1e-3 * window;
    std::size_t next_out = 0;
    std::size_t next_stop = 0;
    std::size_t steps = 0;

    auto sample_until = [&](double now) {
        while (next_out < output_times.size() && output_times[next_out] <= now) {
            rec.sample_times.push_back(output_times[next_out++]);
            std::vector<double> qs(n_cap);
            for (std::size_t k = 0; k < n_cap; ++k) qs[k] = x[k] * q_scale;
            rec.sample_charges.push_back(std::move(qs));
            rec.sample_states.push_back(states);
        }
    };
    auto track_clamp = [&]() {
        for (std::size_t k = 0; k < n_cap; ++k) charges[k] = x[k] * q_scale;
        solver.evaluate(states, charges, t, vm, dq);
        for (std::size_t j = 0; j < n_mem; ++j) {
            rec.rate_clamped = rec.rate_clamped || rate_hits_ceiling(netlist.memristors[j].model, states[j], vm[j]);
        }
    };

    sample_until(t);
    track_clamp();
    while (t < t_end) {
        while (next_stop < stops.size() && stops[next_stop] <= t) ++next_stop;
        const double stop = stops[next_stop];
        system(x, deriv, t);
        double total_rate = 0.0;
        for (std::size_t j = 0; j < n_mem; ++j) total_rate += deriv[n_cap + j];
        double h = std::min(dt, stop - t);
        if (total_rate > 0.0) h = std::min(h, 0.1 / total_rate);

        const OdeState x0 = x;
        const double t0 = t;
        const bool aims_at_stop = h >= stop - t;
        double h_try = h;
        if (h_try < 1e-15 * std::max(std::abs(t), window)) {
            throw IntegrationError("step size underflow at t = " + fmt_time(t) + " s", t);
        }
        if (++steps > options.max_steps) throw IntegrationError("step budget exhausted at t = " + fmt_time(t) + " s", t);
        if (controlled.try_step(system, x, t, h_try) == odeint::fail) {
            dt = h_try;
            continue;
        }
        const double taken = t - t0;
        dt = h_try;
        if (aims_at_stop) t = stop;

        std::size_t fired = n_mem;
        double fire_offset = kInf;
        for (std::size_t j = 0; j < n_mem; ++j) {
            if (x[n_cap + j] < thresholds[j]) continue;
            auto gap = [&](double tau) {
                if (tau == 0.0) return x0[n_cap + j] - thresholds[j];
                plain.do_step(system, x0, t0, trial, tau);
                return trial[n_cap + j] - thresholds[j];
            };
            const double g_end = gap(taken);
            double offset = taken;
            if (g_end > 0.0) {
                const double tol = 1e-9 * window;
                std::uintmax_t iters = 100;
                const auto bracket = boost::math::tools::toms748_solve(
                    gap, 0.0, taken, gap(0.0), g_end, [tol](double lo, double hi) { return hi - lo <= tol; }, iters);
                offset = bracket.second;
            }
            if (offset < fire_offset) {
                fire_offset = offset;
                fired = j;
            }
        }
        if (fired == n_mem) {
            sample_until(t);
            continue;
        }
        plain.do_step(system, x0, t0, x, fire_offset);
        t = std::max(t0 + fire_offset, std::nextafter(t0, kInf));
        for (std::size_t k = 0; k < n_cap; ++k) charges[k] = x[k] * q_scale;
        solver.evaluate(states, charges, t, vm, dq);
        const auto& model = netlist.memristors[fired].model;
        const std::size_t from = states[fired];
        const std::size_t to = direction_at(model, from, vm[fired]);
        rec.events.push_back({t, fired, from, to});
        states[fired] = to;
        x[n_cap + fired] = 0.0;
        thresholds[fired] = draw_exponential(rng);
        track_clamp();
        sample_until(t);
    }
    sample_until(t_end);

    rec.terminal.memristor_states = states;
    rec.terminal.capacitor_charges.resize(n_cap);
    for (std::size_t k = 0; k < n_cap; ++k) rec.terminal.capacitor_charges[k] = x[k] * q_scale;
    rec.terminal.time = t_end;
    return rec;
}

struct BlockPartial {
    std::vector<std::vector<std::vector<std::size_t>>> counts;
    std::vector<std::vector<std::vector<std::size_t>>> histogram;
    std::size_t histogram_overflow = 0;
    std::vector<TrajectoryFailure> failures;
    std::size_t completed = 0;
    std::size_t up_events = 0;
    std::size_t down_events = 0;
    std::size_t switched = 0;
    double first_switch_sum = 0.0;
    bool rate_clamped = false;
};

}  // namespace

std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t index) {
    return splitmix64(splitmix64(master_seed) ^ splitmix64(index + 0xD1B54A32D192ED03ULL));
}

HazardOutcome hazard_accumulate(const MemristorModel& model, std::size_t state,
                                const std::function<double(double)>& memristor_voltage, double t0, double t1,
                                double threshold) {
    if (!(t1 >= t0)) throw ContractViolation("hazard segment must have t1 >= t0");
    if (!(threshold >= 0.0)) throw ContractViolation("hazard threshold must be non-negative");
    const double span = t1 - t0;
    if (span == 0.0) return {false, t1, 0.0};
    auto rate = [&](double s) { return total_exit_rate(model, state, memristor_voltage(s)); };
    constexpr double tol = 1e-10;

    double accumulated = 0.0;
    double t = t0;
    while (t < t1) {
        const double r = rate(t);
        double h = r > 0.0 ? 0.1 / r : span;
        h = std::max(h, 1e-6 * span);
        double b = t + h;
        if (b >= t1 || t1 - b < 1e-6 * span) b = t1;
        const double piece = quad::integrate(rate, t, b, tol);
        if (accumulated + piece >= threshold) {
            const double base = accumulated;
            const double left = t;
            auto gap = [&](double s) { return base + quad::integrate(rate, left, s, tol) - threshold; };
            const double g_left = base - threshold;
            if (g_left >= 0.0) return {true, left, threshold};
            std::uintmax_t iters = 200;
            const double time_tol = 1e-9 * span;
            const auto [lo, hi] = boost::math::tools::toms748_solve(
                gap, left, b, g_left, accumulated + piece - threshold,
                [time_tol](double x, double y) { return y - x <= time_tol; }, iters);
            return {true, 0.5 * (lo + hi), threshold};
        }
        accumulated += piece;
        t = b;
    }
    return {false, t1, accumulated};
}

TrajectoryRecord simulate_trajectory(const Netlist& netlist, const CircuitState& initial, double t_end,
                                     std::span<const double> output_times, std::uint64_t seed,
                                     const TrajectoryOptions& options) {
    validate_request(netlist, initial, t_end, output_times);
    if (!options.force_general) {
        if (auto series = as_series_circuit(netlist); series && series->drive.is_constant()) {
            return simulate_series_exact(*series, initial, t_end, output_times, seed);
        }
    }
    return simulate_general(netlist, initial, t_end, output_times, seed, options);
}

EnsembleStats run_ensemble(const Netlist& netlist, const CircuitState& initial, double t_end,
                           std::span<const double> output_times, std::size_t n, std::uint64_t master_seed,
                           const EnsembleOptions& options) {
    if (n < 1) throw ContractViolation("run_ensemble needs at least one trajectory");
    validate_request(netlist, initial, t_end, output_times);
    const HistogramSpec& hs = options.histogram;
    if (hs.bins > 0) {
        if (!(hs.q_max > hs.q_min)) throw ContractViolation("histogram needs q_max > q_min");
        if (hs.capacitor >= netlist.capacitors.size() || hs.memristor >= netlist.memristors.size()) {
            throw ContractViolation("histogram refers to a missing capacitor or memristor");
        }
    }

    const std::size_t n_out = output_times.size();
    const std::size_t n_mem = netlist.memristors.size();
    auto empty_counts = [&] {
        std::vector<std::vector<std::vector<std::size_t>>> c(n_out);
        for (auto& per_time : c) {
            per_time.resize(n_mem);
            for (std::size_t m = 0; m < n_mem; ++m) per_time[m].assign(netlist.memristors[m].model.num_states(), 0);
        }
        return c;
    };
    auto empty_histogram = [&] {
        std::vector<std::vector<std::vector<std::size_t>>> h;
        if (hs.bins == 0) return h;
        const std::size_t g = netlist.memristors[hs.memristor].model.num_states();
        h.assign(n_out, std::vector<std::vector<std::size_t>>(g, std::vector<std::size_t>(hs.bins, 0)));
        return h;
    };

    constexpr std::size_t block_size = 256;
    const std::size_t n_blocks = (n + block_size - 1) / block_size;
    std::vector<BlockPartial> partials(n_blocks);
    std::atomic<std::size_t> next_block{0};

    auto worker = [&] {
        for (std::size_t blk = next_block++; blk < n_blocks; blk = next_block++) {
            BlockPartial part;
            part.counts = empty_counts();
            part.histogram = empty_histogram();
            const std::size_t end = std::min(n, (blk + 1) * block_size);
            for (std::size_t idx = blk * block_size; idx < end; ++idx) {
                TrajectoryRecord rec;
                try {
                    rec = simulate_trajectory(netlist, initial, t_end, output_times, trajectory_seed(master_seed, idx),
                                              options.trajectory);
                } catch (const Error& e) {
                    part.failures.push_back({idx, e.what()});
                    continue;
                }
                ++part.completed;
                part.rate_clamped = part.rate_clamped || rec.rate_clamped;
                for (std::size_t k = 0; k < n_out; ++k) {
                    for (std::size_t m = 0; m < n_mem; ++m) ++part.counts[k][m][rec.sample_states[k][m]];
                    if (hs.bins > 0) {
                        const double q = rec.sample_charges[k][hs.capacitor];
                        const double pos = (q - hs.q_min) / (hs.q_max - hs.q_min) * static_cast<double>(hs.bins);
                        if (pos >= 0.0 && pos < static_cast<double>(hs.bins)) {
                            ++part.histogram[k][rec.sample_states[k][hs.memristor]][static_cast<std::size_t>(pos)];
                        } else {
                            ++part.histogram_overflow;
                        }
                    }
                }
                for (const auto& ev : rec.events) {
                    if (ev.to > ev.from) ++part.up_events;
                    else ++part.down_events;
                }
                if (!rec.events.empty()) {
                    ++part.switched;
                    part.first_switch_sum += rec.events.front().time - initial.time;
                }
            }
            partials[blk] = std::move(part);
        }
    };

    unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_blocks));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    }

    EnsembleStats stats;
    stats.times.assign(output_times.begin(), output_times.end());
    stats.requested = n;
    stats.histogram_spec = hs;
    stats.counts = empty_counts();
    stats.histogram = empty_histogram();
    double first_switch_sum = 0.0;
    for (auto& part : partials) {
        stats.completed += part.completed;
        for (auto& f : part.failures) stats.failures.push_back(std::move(f));
        for (std::size_t k = 0; k < n_out; ++k) {
            for (std::size_t m = 0; m < n_mem; ++m) {
                for (std::size_t i = 0; i < stats.counts[k][m].size(); ++i) stats.counts[k][m][i] += part.counts[k][m][i];
            }
            if (hs.bins > 0) {
                for (std::size_t i = 0; i < stats.histogram[k].size(); ++i) {
                    for (std::size_t b = 0; b < hs.bins; ++b) stats.histogram[k][i][b] += part.histogram[k][i][b];
                }
            }
        }
        stats.histogram_overflow += part.histogram_overflow;
        stats.up_events += part.up_events;
        stats.down_events += part.down_events;
        stats.switched += part.switched;
        first_switch_sum += part.first_switch_sum;
        stats.rate_clamped = stats.rate_clamped || part.rate_clamped;
    }
    if (stats.switched > 0) stats.mean_first_switch = first_switch_sum / static_cast<double>(stats.switched);

    stats.probability.resize(n_out);
    stats.std_error.resize(n_out);
    const double total = static_cast<double>(stats.completed);
    for (std::size_t k = 0; k < n_out; ++k) {
        stats.probability[k].resize(n_mem);
        stats.std_error[k].resize(n_mem);
        for (std::size_t m = 0; m < n_mem; ++m) {
            const auto& c = stats.counts[k][m];
            auto& p = stats.probability[k][m];
            auto& se = stats.std_error[k][m];
            p.assign(c.size(), 0.0);
            se.assign(c.size(), 0.0);
            if (stats.completed == 0) continue;
            // The most populated state takes the complement, which keeps the
            // binary sum exactly 1 in floating point.
            const std::size_t largest =
                static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
            double rest = 0.0;
            for (std::size_t i = 0; i < c.size(); ++i) {
                if (i == largest) continue;
                p[i] = static_cast<double>(c[i]) / total;
                rest += p[i];
            }
            p[largest] = 1.0 - rest;
            for (std::size_t i = 0; i < c.size(); ++i) se[i] = std::sqrt(p[i] * (1.0 - p[i]) / total);
        }
    }
    return stats;
}

}  // namespace memsim::mc
