#include "memsim/circuit.hpp"
#include "memsim/errors.hpp"

#include <catch_amalgamated.hpp>

#include <limits>
#include <string>

using namespace memsim;
using Catch::Matchers::ContainsSubstring;

namespace {

constexpr const char* kSeries =
    "# series loop\n"
    "V1 in 0 DC 0.35\n"
    "M1 in n1 STATES=2 R=100k,10k TAUUP=3e5 VUP=0.02 TAUDOWN=3e5 VDOWN=0.02\n"
    "C1 n1 0 1u\n";

ParseError parse_failure(const std::string& text) {
    try {
        parse_netlist(text);
    } catch (const ParseError& e) {
        return e;
    }
    FAIL("expected a parse error for: " << text);
    throw std::logic_error("unreachable");
}

}  // namespace

TEST_CASE("the series loop netlist parses into its three components", "[netlist]") {
    const Netlist net = parse_netlist(kSeries);
    CHECK(net.sources.size() == 1);
    CHECK(net.memristors.size() == 1);
    CHECK(net.capacitors.size() == 1);
    CHECK(net.resistors.empty());
    CHECK(net.node_count() == 3);
    CHECK(net.capacitors[0].farads == 1e-6);
    CHECK(net.memristors[0].model == MemristorModel::binary(1e5, 1e4, 3e5, 0.02));
    CHECK(as_series_circuit(net).has_value());
}

TEST_CASE("SI suffixes and case-insensitive kinds are accepted", "[netlist]") {
    const Netlist net = parse_netlist("v1 a 0 sin 0 1 1k\nr1 a b 2meg\nc1 b 0 3p ic=1n\n");
    CHECK(net.resistors[0].ohms == 2e6);
    CHECK(net.capacitors[0].farads == 3e-12);
    CHECK(net.capacitors[0].initial_charge == 1e-9);
    CHECK(std::get<Waveform::Sine>(net.sources[0].waveform.shape()).frequency == 1e3);
}

TEST_CASE("malformed netlists are rejected with located messages", "[netlist]") {
    CHECK_THAT(parse_failure("").what(), ContainsSubstring("no components"));
    CHECK_THAT(parse_failure("# only a comment\n* and a SPICE comment\n").what(), ContainsSubstring("no components"));

    const auto neg_c = parse_failure("V1 n1 0 1\nC1 n1 0 -2u\n");
    CHECK_THAT(neg_c.what(), ContainsSubstring("capacitance must be positive"));
    CHECK(neg_c.line() == 2);
    CHECK(neg_c.column() == 9);

    CHECK_THAT(parse_failure("V1 a 0 1\nL1 a 0 1m\n").what(), ContainsSubstring("inductors not supported"));
    CHECK_THAT(parse_failure("V1 a 0 1\nQ1 a 0 1\n").what(), ContainsSubstring("unknown component kind"));
    CHECK_THAT(parse_failure("V1 a 0 1\nR1 a 0 1k\nr1 a 0 2k\n").what(), ContainsSubstring("duplicate component name"));
    CHECK_THAT(parse_failure("V1 a 0 1\nR1 a 0 abc\n").what(), ContainsSubstring("non-numeric parameter"));
    CHECK_THAT(parse_failure("V1 a b 1\nR1 a b 1k\n").what(), ContainsSubstring("no ground node"));

    const auto floating = parse_failure("V1 a 0 1\nR1 a 0 1k\nR2 x y 1k\n");
    CHECK_THAT(floating.what(), ContainsSubstring("floating node 'x'"));
    CHECK(floating.line() == 3);

    CHECK_THAT(parse_failure("R1 a 0 1k\nC1 a 0 1u\n").what(), ContainsSubstring("voltage source"));
    CHECK_THAT(parse_failure("V1 a 0 1\nM1 a 0 R=1,2\n").what(), ContainsSubstring("STATES"));
    CHECK_THAT(parse_failure("V1 a 0 1\nM1 a 0 STATES=2 R=1,2,3 TAUUP=1 VUP=1 TAUDOWN=1 VDOWN=1\n").what(),
               ContainsSubstring("R list"));
    CHECK_THAT(parse_failure("V1 a 0 1\nM1 a 0 STATES=2 R=1,2 TAUUP=1 VUP=1 TAUDOWN=1 VDOWN=1 STATE=2\n").what(),
               ContainsSubstring("STATE out of range"));
    CHECK_THAT(parse_failure("V1 a 0 PWL 0 1 0 2\nR1 a 0 1\n").what(), ContainsSubstring("strictly increasing"));
}

TEST_CASE("parsing never escapes with anything but ParseError", "[netlist][property]") {
    const std::string alphabet = "VRCMLQ01an =,.-+e9kmu#\tSTAE";
    std::uint64_t state = 0x1234567;
    for (int trial = 0; trial < 3000; ++trial) {
        std::string text;
        const int len = static_cast<int>(state % 60);
        for (int i = 0; i < len; ++i) {
            state = state * 6364136223846793005ULL + 1442695040888963407ULL;
            const std::size_t pick = (state >> 33) % (alphabet.size() + 1);
            text += pick == alphabet.size() ? '\n' : alphabet[pick];
        }
        try {
            parse_netlist(text);
        } catch (const ParseError&) {
        } catch (const std::exception& e) {
            FAIL("unexpected exception '" << e.what() << "' for input: " << text);
        }
    }
}

TEST_CASE("serialize and parse round-trip every waveform kind", "[netlist][property]") {
    const double inf = std::numeric_limits<double>::infinity();
    Netlist net = series_mc(MemristorModel::uniform({3e5, 1e5, 2.5e4}, 1e3, 0.05, inf, 0.07), 1e-9,
                            Waveform::sine(0.1, 0.3, 50.0));
    CHECK(parse_netlist(serialize(net)) == net);

    const Netlist mixed = parse_netlist(
        "Vs a 0 PWL 0 0 1m 0.5 2m 0.25\n"
        "Vt b 0 STEP 0 1 1e-3\n"
        "R1 a c 1.5k\n"
        "M1 c b STATES=3 R=1k,2k,3k TAUUP=1,2 VUP=0.1,0.2 TAUDOWN=3,4 VDOWN=0.3,0.4 STATE=1\n"
        "C1 c 0 2.2u IC=1e-7\n");
    CHECK(parse_netlist(serialize(mixed)) == mixed);
    CHECK(mixed.memristors[0].initial_state == 1);
}
