#include "memsim/cli.hpp"
#include "memsim/analytic.hpp"
#include "memsim/errors.hpp"
#include "memsim/mc.hpp"
#include "memsim/pde.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <boost/version.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace memsim::cli {

namespace {

constexpr const char* kVersion = "0.1.0";

[[noreturn]] void field_error(const std::string& field, const std::string& message) {
    throw ParseError(0, 0, "field '" + field + "': " + message);
}

class IniReader {
public:
    explicit IniReader(const boost::property_tree::ptree& tree) : tree_(tree) {}

    void check_known(const std::map<std::string, std::set<std::string>>& known) const {
        for (const auto& [section, body] : tree_) {
            if (body.empty() && !body.data().empty()) field_error(section, "key outside any section");
            const auto it = known.find(section);
            if (it == known.end()) field_error("[" + section + "]", "unknown section");
            for (const auto& [key, value] : body) {
                if (!it->second.count(key)) field_error("[" + section + "] " + key, "unknown key");
            }
        }
    }

    std::optional<std::string> raw(const std::string& section, const std::string& key) const {
        const auto sec = tree_.get_child_optional(section);
        if (!sec) return std::nullopt;
        const auto value = sec->get_optional<std::string>(boost::property_tree::ptree::path_type(key, '\0'));
        if (!value) return std::nullopt;
        return *value;
    }

    std::optional<double> number(const std::string& section, const std::string& key, bool positive) const {
        const auto text = raw(section, key);
        if (!text) return std::nullopt;
        const std::string field = "[" + section + "] " + key;
        errno = 0;
        char* end = nullptr;
        const double value = std::strtod(text->c_str(), &end);
        if (text->empty() || end != text->c_str() + text->size() || errno == ERANGE || !std::isfinite(value)) {
            field_error(field, "expected a finite number, got '" + *text + "'");
        }
        if (positive && !(value > 0.0)) field_error(field, "must be positive, got '" + *text + "'");
        return value;
    }

    std::optional<std::uint64_t> integer(const std::string& section, const std::string& key, bool positive) const {
        const auto text = raw(section, key);
        if (!text) return std::nullopt;
        const std::string field = "[" + section + "] " + key;
        errno = 0;
        char* end = nullptr;
        if (text->empty() || (*text)[0] == '-') field_error(field, "expected a non-negative integer, got '" + *text + "'");
        const unsigned long long value = std::strtoull(text->c_str(), &end, 10);
        if (end != text->c_str() + text->size() || errno == ERANGE) {
            field_error(field, "expected a non-negative integer, got '" + *text + "'");
        }
        if (positive && value == 0) field_error(field, "must be positive");
        return value;
    }

private:
    const boost::property_tree::ptree& tree_;
};

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(0, 0, "cannot read '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct Setup {
    Netlist netlist;
    CircuitState initial;
    std::optional<SeriesCircuit> series;
};

Setup build_setup(const RunConfig& cfg) {
    Setup s;
    if (cfg.netlist_path) {
        const std::string text = read_file(*cfg.netlist_path);
        try {
            s.netlist = parse_netlist(text);
        } catch (const ParseError& e) {
            throw ParseError(e.line(), e.column(), cfg.netlist_path->string() + ": " + e.detail());
        }
        s.initial = initial_state(s.netlist);
    } else {
        const auto model = MemristorModel::binary(cfg.r0, cfg.r1, cfg.tau, cfg.v_scale);
        s.netlist = series_mc(model, cfg.capacitance, Waveform::constant(cfg.va));
        s.initial = initial_state(s.netlist);
        s.initial.capacitor_charges.at(0) = cfg.q0;
    }
    s.series = as_series_circuit(s.netlist);
    return s;
}

const SeriesCircuit& require_series(const Setup& s, const char* engine) {
    if (!s.series) throw DomainError(std::string(engine) + " engine needs a series source-memristor-capacitor loop");
    return *s.series;
}

std::vector<double> output_grid(double t0, double t_end, double interval) {
    std::vector<double> times;
    for (std::size_t k = 0;; ++k) {
        const double t = std::min(t0 + static_cast<double>(k) * interval, t_end);
        times.push_back(t);
        if (t >= t_end) break;
    }
    return times;
}

ConstantDriveParams constant_params(const SeriesCircuit& sc, double q0) {
    if (sc.model.num_states() != 2) throw DomainError("analytic solutions need a binary device");
    if (!sc.drive.is_constant()) throw DomainError("closed-form solution needs a constant drive");
    ConstantDriveParams p;
    p.capacitance = sc.capacitance;
    p.r0 = sc.model.resistance(0);
    p.r1 = sc.model.resistance(1);
    p.tau0 = sc.model.tau_up()[0];
    p.v0 = sc.model.v_up()[0];
    p.va = sc.drive(0.0);
    p.q0 = q0;
    return p;
}

// State-0 and state-1 probabilities of a binary series loop starting in state 0.
std::pair<double, double> analytic_probabilities(const SeriesCircuit& sc, const CircuitState& init, double t) {
    if (sc.model.num_states() != 2) throw DomainError("analytic solutions need a binary device");
    if (init.memristor_states.at(0) != 0) throw DomainError("analytic solutions start from state 0");
    const double q0 = init.capacitor_charges.at(0);
    if (sc.drive.is_constant()) {
        const double p0 = p0_constant_voltage(constant_params(sc, q0), t);
        return {p0, 1.0 - p0};
    }
    const auto [f, g] = unidirectional_densities(Density1D::delta(q0), Density1D(), sc.model, sc.capacitance,
                                                 sc.drive, t);
    return {f.mass(), g.mass()};
}

void common_meta(ResultTable& table, const RunConfig& cfg, const char* engine) {
    table.set_meta("engine", engine);
    table.set_meta("config_hash", hex64(cfg.config_hash));
    table.set_meta("seed", std::to_string(cfg.seed));
    table.set_meta("memsim_version", kVersion);
    table.set_meta("boost_version", BOOST_LIB_VERSION);
    table.set_meta("eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                        "." + std::to_string(EIGEN_MINOR_VERSION));
}

ResultTable run_analytic(const RunConfig& cfg, const Setup& s) {
    const SeriesCircuit& sc = require_series(s, "analytic");
    ResultTable table;
    common_meta(table, cfg, "analytic");
    table.columns = {"time", "p0", "p1"};
    table.probability_groups = {{1, 2}};
    table.prob_sum_tol = cfg.prob_sum_tol.value_or(sc.drive.is_constant() ? 1e-12 : 1e-6);
    for (double t : output_grid(s.initial.time, cfg.t_end, cfg.output_interval)) {
        const auto [p0, p1] = analytic_probabilities(sc, s.initial, t - s.initial.time);
        table.rows.push_back({t, p0, p1});
    }
    if (sc.drive.is_constant()) {
        const auto params = constant_params(sc, s.initial.capacitor_charges.at(0));
        try {
            table.set_meta("t1_mean", format_double(mean_switching_time(params, cfg.t_star)));
        } catch (const DomainError&) {
            table.set_meta("t1_mean", "nan");
        }
        table.set_meta("t_star", format_double(cfg.t_star));
    }
    return table;
}

pde::ChargeGrid make_grid(const RunConfig& cfg, const SeriesCircuit& sc, double q0) {
    if (cfg.q_min || cfg.q_max) {
        if (!cfg.q_min || !cfg.q_max) throw ParseError(0, 0, "field '[pde] q_min/q_max': give both bounds or neither");
        return pde::ChargeGrid::checked(*cfg.q_min, *cfg.q_max, cfg.cells, sc, cfg.t_end);
    }
    return pde::ChargeGrid::around(sc, q0, q0, cfg.t_end, cfg.cells);
}

struct PdeOutput {
    pde::ChargeGrid grid;
    pde::RunResult result;
};

PdeOutput pde_solve(const RunConfig& cfg, const Setup& s) {
    const SeriesCircuit& sc = require_series(s, "pde");
    if (s.initial.time != 0.0) throw ContractViolation("pde engine starts at t = 0");
    const double q0 = s.initial.capacitor_charges.at(0);
    auto grid = make_grid(cfg, sc, q0);
    const auto init = pde::DistributionField::point(grid, sc.model.num_states(), s.initial.memristor_states.at(0), q0);
    pde::RunOptions opts;
    opts.cfl = cfg.cfl;
    auto result = pde::run(grid, init, cfg.t_end, cfg.output_interval, sc, opts);
    return {grid, std::move(result)};
}

ResultTable run_pde(const RunConfig& cfg, const Setup& s) {
    const auto [grid, res] = pde_solve(cfg, s);
    const std::size_t g = res.marginals.front().size();
    ResultTable table;
    common_meta(table, cfg, "pde");
    table.columns = {"time"};
    std::vector<std::size_t> group;
    for (std::size_t i = 0; i < g; ++i) {
        group.push_back(table.columns.size());
        table.columns.push_back("p" + std::to_string(i));
    }
    for (std::size_t i = 0; i < g; ++i) table.columns.push_back("mean_q" + std::to_string(i));
    for (std::size_t i = 0; i < g; ++i) table.columns.push_back("var_q" + std::to_string(i));
    table.probability_groups = {group};
    table.prob_sum_tol = cfg.prob_sum_tol.value_or(1e-8);
    for (std::size_t k = 0; k < res.times.size(); ++k) {
        std::vector<double> row{res.times[k]};
        for (double p : res.marginals[k]) row.push_back(p);
        for (double m : res.mean_q[k]) row.push_back(m);
        for (double v : res.var_q[k]) row.push_back(v);
        table.rows.push_back(std::move(row));
    }
    table.set_meta("cells", std::to_string(grid.size()));
    table.set_meta("q_min", format_double(grid.q_min()));
    table.set_meta("q_max", format_double(grid.q_max()));
    table.set_meta("steps", std::to_string(res.steps));
    table.set_meta("max_mass_error", format_double(res.max_mass_error));
    table.set_meta("min_cell", format_double(res.min_cell));
    table.set_meta("rate_clamped", res.rate_clamped ? "1" : "0");
    return table;
}

mc::EnsembleStats mc_solve(const RunConfig& cfg, const Setup& s, std::vector<double>& times) {
    times = output_grid(s.initial.time, cfg.t_end, cfg.output_interval);
    mc::EnsembleOptions opts;
    opts.threads = cfg.threads;
    if (cfg.histogram_bins > 0 && !s.netlist.capacitors.empty() && !s.netlist.memristors.empty()) {
        double v_max = 0.0;
        for (const auto& src : s.netlist.sources) {
            const auto [lo, hi] = src.waveform.range(cfg.t_end);
            v_max = std::max({v_max, std::abs(lo), std::abs(hi)});
        }
        const double c = s.netlist.capacitors[0].farads;
        const double q0 = s.initial.capacitor_charges[0];
        const double pad = 0.1 * c * v_max;
        opts.histogram = {0, 0, std::min(q0, -c * v_max) - pad, std::max(q0, c * v_max) + pad, cfg.histogram_bins};
    }
    return mc::run_ensemble(s.netlist, s.initial, cfg.t_end, times, cfg.trajectories, cfg.seed, opts);
}

ResultTable run_mc(const RunConfig& cfg, const Setup& s) {
    std::vector<double> times;
    const auto stats = mc_solve(cfg, s, times);
    ResultTable table;
    common_meta(table, cfg, "mc");
    table.columns = {"time"};
    const std::size_t n_mem = s.netlist.memristors.size();
    for (std::size_t m = 0; m < n_mem; ++m) {
        const std::string prefix = n_mem == 1 ? "" : s.netlist.memristors[m].name + ".";
        const std::size_t g = s.netlist.memristors[m].model.num_states();
        std::vector<std::size_t> group;
        for (std::size_t i = 0; i < g; ++i) {
            group.push_back(table.columns.size());
            table.columns.push_back(prefix + "p" + std::to_string(i));
        }
        for (std::size_t i = 0; i < g; ++i) table.columns.push_back(prefix + "se" + std::to_string(i));
        table.probability_groups.push_back(group);
    }
    table.prob_sum_tol = cfg.prob_sum_tol.value_or(1e-12);
    for (std::size_t k = 0; k < times.size(); ++k) {
        std::vector<double> row{times[k]};
        for (std::size_t m = 0; m < n_mem; ++m) {
            for (double p : stats.probability[k][m]) row.push_back(p);
            for (double e : stats.std_error[k][m]) row.push_back(e);
        }
        table.rows.push_back(std::move(row));
    }
    table.set_meta("trajectories", std::to_string(stats.requested));
    table.set_meta("completed", std::to_string(stats.completed));
    table.set_meta("failures", std::to_string(stats.failures.size()));
    table.set_meta("failure_fraction", format_double(stats.failure_fraction()));
    std::string failed;
    for (std::size_t i = 0; i < std::min<std::size_t>(stats.failures.size(), 20); ++i) {
        failed += (i ? "," : "") + std::to_string(stats.failures[i].index);
    }
    table.set_meta("failed_indices", failed.empty() ? "none" : failed);
    table.set_meta("up_events", std::to_string(stats.up_events));
    table.set_meta("down_events", std::to_string(stats.down_events));
    table.set_meta("switched", std::to_string(stats.switched));
    table.set_meta("mean_first_switch", format_double(stats.mean_first_switch));
    table.set_meta("rate_clamped", stats.rate_clamped ? "1" : "0");
    if (stats.completed == 0) throw Error("every trajectory failed; first error: " + stats.failures.front().message);

    if (!stats.histogram.empty() && cfg.output_path) {
        ResultTable hist;
        hist.meta = table.meta;
        hist.columns = {"time", "state", "q_lo", "q_hi", "count"};
        const auto& hs = stats.histogram_spec;
        const double width = (hs.q_max - hs.q_min) / static_cast<double>(hs.bins);
        for (std::size_t k = 0; k < times.size(); ++k) {
            for (std::size_t i = 0; i < stats.histogram[k].size(); ++i) {
                for (std::size_t b = 0; b < hs.bins; ++b) {
                    hist.rows.push_back({times[k], static_cast<double>(i), hs.q_min + width * static_cast<double>(b),
                                         hs.q_min + width * static_cast<double>(b + 1),
                                         static_cast<double>(stats.histogram[k][i][b])});
                }
            }
        }
        auto path = *cfg.output_path;
        path.replace_filename(path.stem().string() + "_hist" + path.extension().string());
        write_csv(hist, path);
    }
    return table;
}

ResultTable run_compare(const RunConfig& cfg, const Setup& s) {
    const SeriesCircuit& sc = require_series(s, "compare");
    const auto pde_out = pde_solve(cfg, s);
    std::vector<double> times;
    const auto stats = mc_solve(cfg, s, times);
    if (stats.completed == 0) throw Error("every Monte Carlo trajectory failed");
    ResultTable table;
    common_meta(table, cfg, "compare");
    table.columns = {"time", "p0_analytic", "p0_pde", "p0_mc", "se_mc"};
    table.prob_sum_tol = cfg.prob_sum_tol.value_or(1e-8);
    double max_dev = 0.0;
    double max_z = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double t = times[k];
        const double exact = analytic_probabilities(sc, s.initial, t - s.initial.time).first;
        const double p_pde = pde_out.result.marginals.at(k)[0];
        const double p_mc = stats.probability[k][0][0];
        const double se = stats.std_error[k][0][0];
        max_dev = std::max(max_dev, std::abs(exact - p_pde));
        const double dev = std::abs(exact - p_mc);
        max_z = std::max(max_z, se > 0.0 ? dev / se : (dev == 0.0 ? 0.0 : std::numeric_limits<double>::infinity()));
        table.rows.push_back({t, exact, p_pde, p_mc, se});
    }
    table.set_meta("max_abs_dev_pde", format_double(max_dev));
    table.set_meta("max_z_mc", format_double(max_z));
    table.set_meta("trajectories", std::to_string(stats.requested));
    table.set_meta("failures", std::to_string(stats.failures.size()));
    table.set_meta("cells", std::to_string(pde_out.grid.size()));
    table.set_meta("max_mass_error", format_double(pde_out.result.max_mass_error));
    return table;
}

void finalize(ResultTable& table) {
    table.set_meta("prob_sum_tol", format_double(table.prob_sum_tol));
    const double defect = table.max_probability_defect();
    if (defect > table.prob_sum_tol) {
        throw Error("probability sum deviates from 1 by " + format_double(defect) + ", above the declared tolerance");
    }
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(text);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    return out;
}

}  // namespace

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in{std::string(text)};
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParseError(e.line(), 1, e.message());
    }
    const IniReader ini(tree);
    ini.check_known({
        {"run", {"engine", "t_end", "output_interval", "output", "prob_sum_tol"}},
        {"circuit", {"netlist", "C", "R0", "R1", "tau0", "V0", "Va", "q0"}},
        {"pde", {"cells", "q_min", "q_max", "cfl"}},
        {"mc", {"trajectories", "seed", "threads", "histogram_bins"}},
        {"analytic", {"t_star"}},
    });

    RunConfig cfg;
    cfg.config_hash = fnv1a(text);
    const auto engine = ini.raw("run", "engine");
    if (!engine) field_error("[run] engine", "missing; choose one of mc, pde, analytic, compare");
    static const std::map<std::string, Engine> engines{
        {"mc", Engine::mc}, {"pde", Engine::pde}, {"analytic", Engine::analytic}, {"compare", Engine::compare}};
    const auto it = engines.find(*engine);
    if (it == engines.end()) field_error("[run] engine", "unknown engine '" + *engine + "'");
    cfg.engine = it->second;

    if (auto v = ini.number("run", "t_end", true)) cfg.t_end = *v;
    if (auto v = ini.number("run", "output_interval", true)) cfg.output_interval = *v;
    if (auto v = ini.raw("run", "output")) cfg.output_path = base_dir / *v;
    if (auto v = ini.number("run", "prob_sum_tol", false)) {
        if (*v < 0.0) field_error("[run] prob_sum_tol", "must be non-negative");
        cfg.prob_sum_tol = *v;
    }

    if (auto v = ini.raw("circuit", "netlist")) {
        for (const char* key : {"C", "R0", "R1", "tau0", "V0", "Va", "q0"}) {
            if (ini.raw("circuit", key)) {
                field_error(std::string("[circuit] ") + key, "inline parameters cannot be combined with a netlist");
            }
        }
        cfg.netlist_path = base_dir / *v;
        if (!std::filesystem::is_regular_file(*cfg.netlist_path)) {
            field_error("[circuit] netlist", "file '" + cfg.netlist_path->string() + "' does not exist");
        }
    }
    if (auto v = ini.number("circuit", "C", true)) cfg.capacitance = *v;
    if (auto v = ini.number("circuit", "R0", true)) cfg.r0 = *v;
    if (auto v = ini.number("circuit", "R1", true)) cfg.r1 = *v;
    if (auto v = ini.number("circuit", "tau0", true)) cfg.tau = *v;
    if (auto v = ini.number("circuit", "V0", true)) cfg.v_scale = *v;
    if (auto v = ini.number("circuit", "Va", false)) cfg.va = *v;
    if (auto v = ini.number("circuit", "q0", false)) cfg.q0 = *v;

    if (auto v = ini.integer("pde", "cells", true)) {
        if (*v < 8) field_error("[pde] cells", "needs at least 8 cells");
        cfg.cells = *v;
    }
    cfg.q_min = ini.number("pde", "q_min", false);
    cfg.q_max = ini.number("pde", "q_max", false);
    if (auto v = ini.number("pde", "cfl", true)) {
        if (*v > 0.9) field_error("[pde] cfl", "must not exceed 0.9");
        cfg.cfl = *v;
    }

    if (auto v = ini.integer("mc", "trajectories", true)) cfg.trajectories = *v;
    if (auto v = ini.integer("mc", "seed", false)) cfg.seed = *v;
    if (auto v = ini.integer("mc", "threads", false)) cfg.threads = static_cast<unsigned>(*v);
    if (auto v = ini.integer("mc", "histogram_bins", false)) cfg.histogram_bins = *v;

    if (auto v = ini.number("analytic", "t_star", true)) cfg.t_star = *v;
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    return parse_config(read_file(path), path.parent_path());
}

void ResultTable::set_meta(const std::string& key, const std::string& value) {
    for (auto& [k, v] : meta) {
        if (k == key) {
            v = value;
            return;
        }
    }
    meta.emplace_back(key, value);
}

std::optional<std::string> ResultTable::meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta) {
        if (k == key) return v;
    }
    return std::nullopt;
}

std::size_t ResultTable::column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw ContractViolation("no column named '" + name + "'");
    return static_cast<std::size_t>(it - columns.begin());
}

double ResultTable::max_probability_defect() const {
    double worst = 0.0;
    for (const auto& row : rows) {
        for (const auto& group : probability_groups) {
            double sum = 0.0;
            for (std::size_t c : group) sum += row.at(c);
            worst = std::max(worst, std::abs(sum - 1.0));
        }
    }
    return worst;
}

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

void write_csv(const ResultTable& table, std::ostream& out) {
    out << "# meta: ";
    for (std::size_t i = 0; i < table.meta.size(); ++i) {
        out << (i ? ";" : "") << table.meta[i].first << '=' << table.meta[i].second;
    }
    out << '\n';
    for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
        out << '\n';
    }
}

void write_csv(const ResultTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    write_csv(table, out);
    if (!out) throw Error("write to '" + path.string() + "' failed");
}

void write_gnuplot(const ResultTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "#";
    for (const auto& c : table.columns) out << ' ' << c;
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? " " : "") << format_double(row[i]);
        out << '\n';
    }
    if (!out) throw Error("write to '" + path.string() + "' failed");
}

ResultTable read_csv(std::istream& in) {
    ResultTable table;
    std::string line;
    if (!std::getline(in, line) || line.rfind("# meta: ", 0) != 0) throw ParseError(1, 1, "missing '# meta:' line");
    for (const auto& item : split(line.substr(8), ';')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ParseError(1, 1, "malformed metadata entry '" + item + "'");
        table.meta.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    }
    if (!std::getline(in, line)) throw ParseError(2, 1, "missing header line");
    table.columns = split(line, ',');
    std::size_t line_no = 2;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> row;
        for (const auto& cell : split(line, ',')) {
            char* end = nullptr;
            row.push_back(std::strtod(cell.c_str(), &end));
            if (end != cell.c_str() + cell.size()) throw ParseError(line_no, 1, "bad number '" + cell + "'");
        }
        if (row.size() != table.columns.size()) throw ParseError(line_no, 1, "row width differs from header");
        table.rows.push_back(std::move(row));
    }
    if (auto tol = table.meta_value("prob_sum_tol")) table.prob_sum_tol = std::strtod(tol->c_str(), nullptr);
    return table;
}

ResultTable cmd_simulate(const RunConfig& config) {
    const Setup setup = build_setup(config);
    ResultTable table;
    switch (config.engine) {
        case Engine::analytic: table = run_analytic(config, setup); break;
        case Engine::pde: table = run_pde(config, setup); break;
        case Engine::mc: table = run_mc(config, setup); break;
        case Engine::compare: table = run_compare(config, setup); break;
    }
    finalize(table);
    if (config.output_path) write_csv(table, *config.output_path);
    return table;
}

ResultTable cmd_reproduce(const std::string& figure, const std::filesystem::path& out_dir) {
    if (figure != "fig2" && figure != "fig3") throw ParseError(0, 0, "unknown figure '" + figure + "' (fig2 or fig3)");
    const auto params = ConstantDriveParams::reference();
    ResultTable table;
    table.set_meta("figure", figure);
    table.set_meta("memsim_version", kVersion);
    table.set_meta("C", format_double(params.capacitance));
    table.set_meta("R0", format_double(params.r0));
    table.set_meta("R1", format_double(params.r1));
    table.set_meta("tau0", format_double(params.tau0));
    table.set_meta("V0", format_double(params.v0));
    table.set_meta("Va", format_double(params.va));
    table.set_meta("q0", format_double(params.q0));
    std::vector<double> times;
    for (int k = 0; k <= 300; ++k) times.push_back(1e-4 * k);

    if (figure == "fig2") {
        table.columns = {"time", "p0", "p1"};
        table.probability_groups = {{1, 2}};
        for (double t : times) {
            const double p0 = p0_constant_voltage(params, t);
            table.rows.push_back({t, p0, 1.0 - p0});
        }
    } else {
        const double t_star = 1.0;
        const double t1 = mean_switching_time(params, t_star);
        const double p0_star = p0_constant_voltage(params, t_star);
        table.set_meta("t1_mean", format_double(t1));
        table.set_meta("t_star", format_double(t_star));
        table.set_meta("p0_t_star", format_double(p0_star));
        table.columns = {"time", "p0", "exp_decay", "plateau_relaxation"};
        for (double t : times) {
            table.rows.push_back({t, p0_constant_voltage(params, t), std::exp(-t / t1),
                                  p0_star + (1.0 - p0_star) * std::exp(-t / t1)});
        }
    }
    finalize(table);
    std::filesystem::create_directories(out_dir);
    write_csv(table, out_dir / (figure + ".csv"));
    write_gnuplot(table, out_dir / (figure + ".dat"));
    return table;
}

NetlistReport cmd_netlist_check(const std::filesystem::path& path) {
    NetlistReport report;
    std::ostringstream out;
    const Netlist netlist = parse_netlist(read_file(path));
    const CircuitState initial = initial_state(netlist);
    NetworkSolver solver(netlist);

    std::size_t configurations = 1;
    for (const auto& m : netlist.memristors) {
        configurations *= m.model.num_states();
        if (configurations > 4096) break;
    }
    std::size_t checked = 0;
    if (configurations <= 4096) {
        CircuitState probe = initial;
        std::vector<std::size_t>& states = probe.memristor_states;
        std::fill(states.begin(), states.end(), 0);
        while (true) {
            solver.solve(probe);
            ++checked;
            std::size_t m = 0;
            for (; m < states.size(); ++m) {
                if (++states[m] < netlist.memristors[m].model.num_states()) break;
                states[m] = 0;
            }
            if (m == states.size()) break;
        }
    } else {
        solver.solve(initial);
        checked = 1;
    }
    out << "OK\n";
    out << "nodes: " << netlist.node_count() - 1 << '\n';
    out << "sources: " << netlist.sources.size() << '\n';
    out << "resistors: " << netlist.resistors.size() << '\n';
    out << "capacitors: " << netlist.capacitors.size() << '\n';
    out << "memristors: " << netlist.memristors.size() << '\n';
    out << "configurations solved: " << checked << '\n';
    out << "series loop: " << (as_series_circuit(netlist) ? "yes" : "no") << '\n';
    report.ok = true;
    report.text = out.str();
    return report;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stochastic memristor-capacitor circuit simulator"};
    app.require_subcommand(1);
    app.fallthrough();
    std::uint64_t seed = 0;
    std::size_t trajectories = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Override the Monte Carlo master seed");
    auto* traj_opt = app.add_option("--trajectories", trajectories, "Override the Monte Carlo trajectory count")
                         ->check(CLI::PositiveNumber);

    std::string config_path;
    std::string out_path;
    auto* simulate = app.add_subcommand("simulate", "Run the engine selected in a configuration file");
    simulate->add_option("--config", config_path, "INI configuration file")->required();
    simulate->add_option("--out", out_path, "CSV output file (overrides [run] output)");

    std::string figure;
    std::string out_dir = ".";
    auto* reproduce = app.add_subcommand("reproduce", "Write the reference figure data");
    reproduce->add_option("figure", figure, "fig2 or fig3")->required()->check(CLI::IsMember({"fig2", "fig3"}));
    reproduce->add_option("--out", out_dir, "Output directory");

    std::string netlist_path;
    auto* check = app.add_subcommand("netlist-check", "Validate a netlist");
    check->add_option("file", netlist_path, "Netlist file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*simulate) {
            RunConfig cfg = load_config(config_path);
            if (*seed_opt) cfg.seed = seed;
            if (*traj_opt) cfg.trajectories = trajectories;
            if (!out_path.empty()) cfg.output_path = out_path;
            const ResultTable table = cmd_simulate(cfg);
            if (!cfg.output_path) write_csv(table, out);
            else out << "wrote " << cfg.output_path->string() << " (" << table.rows.size() << " rows)\n";
            for (const char* key : {"max_abs_dev_pde", "max_z_mc", "t1_mean"}) {
                if (auto v = table.meta_value(key); v && cfg.output_path) out << key << '=' << *v << '\n';
            }
            return 0;
        }
        if (*reproduce) {
            const ResultTable table = cmd_reproduce(figure, out_dir);
            out << "wrote " << (std::filesystem::path(out_dir) / (figure + ".csv")).string() << " and "
                << (std::filesystem::path(out_dir) / (figure + ".dat")).string() << '\n';
            if (auto v = table.meta_value("t1_mean")) out << "t1_mean=" << *v << '\n';
            return 0;
        }
        const NetlistReport report = cmd_netlist_check(netlist_path);
        out << report.text;
        return report.ok ? 0 : 1;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace memsim::cli
