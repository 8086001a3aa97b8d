#pragma once

#include "memsim/circuit.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace memsim::cli {

enum class Engine { mc, pde, analytic, compare };

/// Parsed INI run configuration. All quantities in base SI units.
struct RunConfig {
    Engine engine = Engine::analytic;

    // [circuit]: either a netlist file or an inline series loop.
    std::optional<std::filesystem::path> netlist_path;
    double capacitance = 1e-6;
    double r0 = 1e5;
    double r1 = 1e4;
    double tau = 3e5;
    double v_scale = 0.02;
    double va = 0.35;
    double q0 = 0.0;

    // [run]
    double t_end = 0.03;
    double output_interval = 0.0015;
    std::optional<std::filesystem::path> output_path;
    std::optional<double> prob_sum_tol;

    // [pde]
    std::size_t cells = 2000;
    std::optional<double> q_min;
    std::optional<double> q_max;
    double cfl = 0.9;

    // [mc]
    std::size_t trajectories = 10000;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::size_t histogram_bins = 0;

    // [analytic]
    double t_star = 1.0;

    /// FNV-1a of the configuration text.
    std::uint64_t config_hash = 0;
};

/// Parses INI text. Relative netlist paths resolve against `base_dir`.
/// Throws ParseError naming the offending field.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

std::uint64_t fnv1a(std::string_view text);

/// Time series with a metadata header.
struct ResultTable {
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    /// Column groups whose entries must sum to 1 on every row.
    std::vector<std::vector<std::size_t>> probability_groups;
    double prob_sum_tol = 1e-12;

    void set_meta(const std::string& key, const std::string& value);
    std::optional<std::string> meta_value(const std::string& key) const;
    std::size_t column(const std::string& name) const;
    /// Largest |sum - 1| over every row and probability group.
    double max_probability_defect() const;
};

/// `# meta: k=v;...`, a header line, then rows at 17 significant digits.
void write_csv(const ResultTable& table, std::ostream& out);
void write_csv(const ResultTable& table, const std::filesystem::path& path);
/// Whitespace-separated columns with a commented header, for gnuplot.
void write_gnuplot(const ResultTable& table, const std::filesystem::path& path);
/// Parses what write_csv produced.
ResultTable read_csv(std::istream& in);

std::string format_double(double value);

/// Runs the configured engine and, when an output path is set, writes the CSV.
ResultTable cmd_simulate(const RunConfig& config);

/// Built-in figure data (fig2 or fig3); writes <figure>.csv and <figure>.dat
/// into `out_dir`.
ResultTable cmd_reproduce(const std::string& figure, const std::filesystem::path& out_dir);

struct NetlistReport {
    bool ok = false;
    std::string text;
};
NetlistReport cmd_netlist_check(const std::filesystem::path& path);

/// Full command-line entry point; returns the process exit code
/// (0 success, 1 engine failure, 2 config or parse failure).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace memsim::cli
