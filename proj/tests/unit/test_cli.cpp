#include "memsim/cli.hpp"
#include "memsim/errors.hpp"

#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace memsim;
using namespace memsim::cli;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("memsim_cli_" + std::to_string(Catch::getSeed()) + "_" + std::to_string(counter()++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path write(const std::string& name, const std::string& text) const {
        std::ofstream(path / name) << text;
        return path / name;
    }
    static int& counter() {
        static int n = 0;
        return n;
    }
};

struct Invocation {
    int code = 0;
    std::string out;
    std::string err;
};

Invocation invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "memsim");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
}

ParseError config_failure(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ParseError& e) {
        return e;
    }
    FAIL("expected a config error for: " << text);
    throw std::logic_error("unreachable");
}

}  // namespace

TEST_CASE("configuration errors name the offending field", "[cli]") {
    CHECK_THAT(config_failure("[run]\nt_end = 1\n").what(), ContainsSubstring("[run] engine"));
    CHECK_THAT(config_failure("[run]\nengine = fem\n").what(), ContainsSubstring("unknown engine"));
    CHECK_THAT(config_failure("[run]\nengine = pde\nt_end = -1\n").what(), ContainsSubstring("[run] t_end"));
    CHECK_THAT(config_failure("[run]\nengine = pde\n[pde]\ncells = 4\n").what(), ContainsSubstring("[pde] cells"));
    CHECK_THAT(config_failure("[run]\nengine = pde\n[pde]\ncfl = 1.5\n").what(), ContainsSubstring("[pde] cfl"));
    CHECK_THAT(config_failure("[run]\nengine = mc\n[mc]\ntrajectories = many\n").what(),
               ContainsSubstring("[mc] trajectories"));
    CHECK_THAT(config_failure("[run]\nengine = mc\n[circuit]\nR2 = 5\n").what(), ContainsSubstring("[circuit] R2"));
    CHECK_THAT(config_failure("[run]\nengine = mc\n[extra]\nx = 1\n").what(), ContainsSubstring("extra"));
    CHECK_THAT(config_failure("[run]\nengine = mc\n[circuit]\nnetlist = missing.cir\n").what(),
               ContainsSubstring("[circuit] netlist"));
}

TEST_CASE("configuration values land in the run config", "[cli]") {
    const RunConfig cfg = parse_config(
        "[run]\nengine = compare\nt_end = 0.02\noutput_interval = 0.002\n"
        "[circuit]\nC = 2e-6\nVa = 0.3\n"
        "[pde]\ncells = 500\ncfl = 0.5\n"
        "[mc]\ntrajectories = 123\nseed = 42\nthreads = 2\n");
    CHECK(cfg.engine == Engine::compare);
    CHECK(cfg.t_end == 0.02);
    CHECK(cfg.output_interval == 0.002);
    CHECK(cfg.capacitance == 2e-6);
    CHECK(cfg.va == 0.3);
    CHECK(cfg.r0 == 1e5);
    CHECK(cfg.cells == 500);
    CHECK(cfg.cfl == 0.5);
    CHECK(cfg.trajectories == 123);
    CHECK(cfg.seed == 42);
    CHECK(cfg.threads == 2);
    CHECK(cfg.config_hash == fnv1a("[run]\nengine = compare\nt_end = 0.02\noutput_interval = 0.002\n"
                                   "[circuit]\nC = 2e-6\nVa = 0.3\n"
                                   "[pde]\ncells = 500\ncfl = 0.5\n"
                                   "[mc]\ntrajectories = 123\nseed = 42\nthreads = 2\n"));
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("the analytic engine reports the plateau at one second", "[cli]") {
    RunConfig cfg = parse_config("[run]\nengine = analytic\nt_end = 1\noutput_interval = 0.25\n");
    const ResultTable table = cmd_simulate(cfg);
    REQUIRE(table.rows.size() == 5);
    CHECK(table.rows.back()[0] == 1.0);
    CHECK_THAT(table.rows.back()[table.column("p0")], WithinAbs(0.446, 1e-3));
    CHECK(table.max_probability_defect() <= 1e-12);
}

TEST_CASE("fig2 rows sum to one and fig3 carries the mean switching time", "[cli]") {
    TempDir dir;
    const ResultTable fig2 = cmd_reproduce("fig2", dir.path);
    CHECK(fig2.rows.size() == 301);
    CHECK(fig2.rows.back()[0] == Catch::Approx(0.03));
    for (const auto& row : fig2.rows) CHECK_THAT(row[1] + row[2], WithinAbs(1.0, 1e-15));
    CHECK(fs::exists(dir.path / "fig2.csv"));
    CHECK(fs::exists(dir.path / "fig2.dat"));

    const ResultTable fig3 = cmd_reproduce("fig3", dir.path);
    const double t1 = std::stod(*fig3.meta_value("t1_mean"));
    CHECK_THAT(t1, WithinAbs(5.3e-3, 0.1e-3));
    CHECK(fig3.columns == std::vector<std::string>{"time", "p0", "exp_decay", "plateau_relaxation"});
    CHECK_THROWS_AS(cmd_reproduce("fig9", dir.path), ParseError);
}

TEST_CASE("compare runs all engines side by side", "[cli]") {
    RunConfig cfg = parse_config(
        "[run]\nengine = compare\nt_end = 0.01\noutput_interval = 0.002\n"
        "[pde]\ncells = 400\n[mc]\ntrajectories = 2000\nseed = 3\nthreads = 1\n");
    const ResultTable table = cmd_simulate(cfg);
    CHECK(table.columns == std::vector<std::string>{"time", "p0_analytic", "p0_pde", "p0_mc", "se_mc"});
    CHECK(table.rows.size() == 6);
    CHECK(std::stod(*table.meta_value("max_abs_dev_pde")) < 0.02);
    CHECK(std::stod(*table.meta_value("max_z_mc")) < 5.0);
    CHECK(table.meta_value("config_hash").has_value());
}

TEST_CASE("simulate writes bit-identical files for identical inputs", "[cli]") {
    TempDir dir;
    const auto config = dir.write("mc.ini",
                                  "[run]\nengine = mc\nt_end = 0.01\noutput_interval = 0.001\n"
                                  "[mc]\ntrajectories = 500\nseed = 9\nhistogram_bins = 10\n");
    const auto a = invoke({"simulate", "--config", config.string(), "--out", (dir.path / "a.csv").string()});
    const auto b = invoke({"simulate", "--config", config.string(), "--out", (dir.path / "b.csv").string()});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(slurp(dir.path / "a.csv") == slurp(dir.path / "b.csv"));
    const auto c = invoke({"--seed", "10", "simulate", "--config", config.string(), "--out",
                           (dir.path / "c.csv").string()});
    REQUIRE(c.code == 0);
    CHECK(slurp(dir.path / "a.csv") != slurp(dir.path / "c.csv"));
}

TEST_CASE("netlist-check summarizes valid netlists and rejects broken ones", "[cli]") {
    TempDir dir;
    const auto good = dir.write("good.cir",
                                "V1 in 0 DC 0.35\n"
                                "M1 in n1 STATES=2 R=100k,10k TAUUP=3e5 VUP=0.02 TAUDOWN=3e5 VDOWN=0.02\n"
                                "C1 n1 0 1u\n");
    const auto ok = invoke({"netlist-check", good.string()});
    CHECK(ok.code == 0);
    CHECK_THAT(ok.out, ContainsSubstring("OK"));
    CHECK_THAT(ok.out, ContainsSubstring("nodes: 2"));

    const auto inductor = invoke({"netlist-check", dir.write("l.cir", "V1 a 0 1\nL1 a 0 1m\n").string()});
    CHECK(inductor.code == 2);
    CHECK_THAT(inductor.err, ContainsSubstring("inductors not supported"));

    const auto floating = invoke({"netlist-check", dir.write("f.cir", "V1 a 0 1\nR1 a 0 1k\nR2 x y 1\n").string()});
    CHECK(floating.code == 2);
    CHECK_THAT(floating.err, ContainsSubstring("floating node"));
}

TEST_CASE("exit codes separate usage, config and engine failures", "[cli]") {
    TempDir dir;
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"frobnicate"}).code == 2);
    CHECK(invoke({"reproduce", "fig7"}).code == 2);
    const auto bad = dir.write("bad.ini", "[run]\nengine = mc\n[mc]\nseed = x\n");
    const auto parse = invoke({"simulate", "--config", bad.string()});
    CHECK(parse.code == 2);
    CHECK_THAT(parse.err, ContainsSubstring("[mc] seed"));
    const auto cir = dir.write("ladder.cir",
                               "V1 a 0 DC 1\nR1 a b 1k\n"
                               "M1 b c STATES=2 R=100k,10k TAUUP=3e5 VUP=0.02 TAUDOWN=3e5 VDOWN=0.02\n"
                               "C1 c 0 1u\n");
    const auto pde = dir.write("pde.ini", "[run]\nengine = pde\n[circuit]\nnetlist = ladder.cir\n");
    const auto engine = invoke({"simulate", "--config", pde.string()});
    CHECK(engine.code == 1);
    CHECK_THAT(engine.err, ContainsSubstring("series"));
}

TEST_CASE("the installed binary reports exit codes to the shell", "[cli]") {
    const std::string exe = MEMSIM_CLI_PATH;
    const int ok = std::system((exe + " reproduce fig2 --out " + (fs::temp_directory_path() / "memsim_cli_bin").string() +
                                " > /dev/null").c_str());
    CHECK(WEXITSTATUS(ok) == 0);
    const int bad = std::system((exe + " simulate --config /nonexistent.ini 2> /dev/null").c_str());
    CHECK(WEXITSTATUS(bad) != 0);
    fs::remove_all(fs::temp_directory_path() / "memsim_cli_bin");
}

TEST_CASE("CSV output round-trips through the reader", "[cli][property]") {
    ResultTable table;
    table.set_meta("engine", "mc");
    table.set_meta("seed", "17");
    table.columns = {"time", "p0", "p1"};
    table.rows = {{0.0, 1.0, 0.0}, {1e-3, 0.1 + 0.2, 1.0 - (0.1 + 0.2)}, {2e-3, 1.0 / 3.0, 2.0 / 3.0}};
    std::stringstream buffer;
    write_csv(table, buffer);
    CHECK_THAT(buffer.str(), ContainsSubstring("# meta: engine=mc;seed=17"));
    const ResultTable back = read_csv(buffer);
    CHECK(back.columns == table.columns);
    CHECK(back.rows == table.rows);
    CHECK(back.meta == table.meta);
}
