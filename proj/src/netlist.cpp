#include "memsim/circuit.hpp"
#include "memsim/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <variant>

namespace memsim {

namespace {

struct Token {
    std::string text;
    std::size_t column = 0;  // 1-based
};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<Token> tokenize(std::string_view line) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i >= line.size()) break;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        tokens.push_back({std::string(line.substr(start, i - start)), start + 1});
    }
    return tokens;
}

std::optional<double> parse_number(std::string_view text) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr == first) return std::nullopt;
    const std::string suffix = lower(std::string_view(ptr, static_cast<std::size_t>(last - ptr)));
    double scale = 1.0;
    if (suffix.empty()) scale = 1.0;
    else if (suffix == "meg") scale = 1e6;
    else if (suffix == "p") scale = 1e-12;
    else if (suffix == "n") scale = 1e-9;
    else if (suffix == "u") scale = 1e-6;
    else if (suffix == "m") scale = 1e-3;
    else if (suffix == "k") scale = 1e3;
    else if (suffix == "g") scale = 1e9;
    else return std::nullopt;
    const double result = value * scale;
    if (std::isnan(result)) return std::nullopt;
    return result;
}

class LineParser {
public:
    LineParser(std::size_t line_no, std::vector<Token> tokens)
        : line_(line_no), tokens_(std::move(tokens)) {}

    [[noreturn]] void fail(std::size_t token_index, const std::string& message) const {
        const std::size_t col = token_index < tokens_.size() ? tokens_[token_index].column
                                                             : end_column();
        throw ParseError(line_, col, message);
    }

    std::size_t size() const noexcept { return tokens_.size(); }
    const Token& at(std::size_t i) const {
        if (i >= tokens_.size()) fail(i, "missing field");
        return tokens_[i];
    }

    double number(std::size_t i, const char* what) const {
        const auto v = parse_number(at(i).text);
        if (!v || !std::isfinite(*v)) fail(i, std::string("non-numeric parameter for ") + what + ": '" + at(i).text + "'");
        return *v;
    }

    std::vector<double> number_list(std::size_t i, std::string_view list, const char* what) const {
        std::vector<double> out;
        std::size_t start = 0;
        while (start <= list.size()) {
            const std::size_t comma = list.find(',', start);
            const std::string_view item =
                list.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
            const auto v = parse_number(item);
            if (!v) fail(i, std::string("non-numeric parameter in ") + what + ": '" + std::string(item) + "'");
            out.push_back(*v);
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        return out;
    }

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t end_column() const {
        if (tokens_.empty()) return 1;
        return tokens_.back().column + tokens_.back().text.size();
    }

    std::size_t line_;
    std::vector<Token> tokens_;
};

// Component as read, before node names are numbered.
struct RawComponent {
    std::size_t line = 0;
    std::string name;
    std::string node_a;
    std::string node_b;
    std::variant<VoltageSource, Resistor, Capacitor, Memristor> body;
};

Waveform parse_source(const LineParser& p) {
    if (p.size() < 4) p.fail(3, "voltage source needs a value or waveform");
    const std::string kind = lower(p.at(3).text);
    auto expect_count = [&](std::size_t n) {
        if (p.size() != n) p.fail(std::min(p.size(), n), "wrong number of fields for " + kind + " source");
    };
    if (kind == "dc") {
        expect_count(5);
        return Waveform::constant(p.number(4, "DC value"));
    }
    if (kind == "sin") {
        expect_count(7);
        const double hz = p.number(6, "SIN frequency");
        if (hz < 0.0) p.fail(6, "SIN frequency must be non-negative");
        return Waveform::sine(p.number(4, "SIN offset"), p.number(5, "SIN amplitude"), hz);
    }
    if (kind == "step") {
        expect_count(7);
        const double at = p.number(6, "STEP time");
        if (at < 0.0) p.fail(6, "STEP time must be non-negative");
        return Waveform::step(p.number(4, "STEP initial value"), p.number(5, "STEP final value"), at);
    }
    if (kind == "pwl") {
        if (p.size() < 6 || (p.size() - 4) % 2 != 0) p.fail(p.size(), "PWL needs time/value pairs");
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 4; i + 1 < p.size(); i += 2) {
            const double t = p.number(i, "PWL time");
            if (t < 0.0) p.fail(i, "PWL times must be non-negative");
            if (!pts.empty() && !(t > pts.back().first)) p.fail(i, "PWL times must be strictly increasing");
            pts.emplace_back(t, p.number(i + 1, "PWL value"));
        }
        return Waveform::pwl(std::move(pts));
    }
    // Bare value: treated as DC.
    expect_count(4);
    return Waveform::constant(p.number(3, "source value"));
}

Memristor parse_memristor(const LineParser& p) {
    std::optional<std::size_t> states;
    std::optional<std::size_t> initial;
    std::map<std::string, std::pair<std::vector<double>, std::size_t>> lists;
    for (std::size_t i = 3; i < p.size(); ++i) {
        const std::string& text = p.at(i).text;
        const auto eq = text.find('=');
        if (eq == std::string::npos || eq == 0) p.fail(i, "expected KEY=VALUE, got '" + text + "'");
        const std::string key = lower(text.substr(0, eq));
        const std::string value = text.substr(eq + 1);
        if (value.empty()) p.fail(i, "empty value for " + key);
        if (key == "states" || key == "state") {
            const auto v = parse_number(value);
            if (!v || !(*v >= 0.0 && *v <= 1e6) || std::floor(*v) != *v) p.fail(i, "non-numeric parameter for " + key);
            (key == "states" ? states : initial) = static_cast<std::size_t>(*v);
        } else if (key == "r" || key == "tauup" || key == "vup" || key == "taudown" || key == "vdown") {
            if (lists.count(key)) p.fail(i, "duplicate parameter " + key);
            lists[key] = {p.number_list(i, value, key.c_str()), i};
        } else {
            p.fail(i, "unknown memristor parameter '" + key + "'");
        }
    }
    if (!states) p.fail(p.size(), "memristor requires STATES=<G>");
    if (*states < 2) p.fail(p.size(), "STATES must be at least 2");
    const std::size_t g = *states;
    for (const char* key : {"r", "tauup", "vup", "taudown", "vdown"}) {
        if (!lists.count(key)) p.fail(p.size(), std::string("memristor requires ") + key + "=");
    }
    auto& [r, r_at] = lists["r"];
    if (r.size() != g) p.fail(r_at, "R list must have STATES entries");
    for (double v : r) {
        if (!(v > 0.0) || !std::isfinite(v)) p.fail(r_at, "resistance must be positive and finite");
    }
    std::vector<std::vector<double>> per_transition;
    for (const char* key : {"tauup", "vup", "taudown", "vdown"}) {
        auto& [values, at] = lists[key];
        if (values.size() == 1 && g > 2) values.assign(g - 1, values.front());
        if (values.size() != g - 1) p.fail(at, std::string(key) + " list must have STATES-1 entries");
        for (double v : values) {
            if (!(v > 0.0)) p.fail(at, std::string(key) + " values must be positive");
        }
        per_transition.push_back(values);
    }
    if (initial && *initial >= g) p.fail(p.size(), "STATE out of range");
    return Memristor{{}, kGround, kGround,
                     MemristorModel(r, per_transition[0], per_transition[1], per_transition[2],
                                    per_transition[3]),
                     initial.value_or(0)};
}

RawComponent parse_line(const LineParser& p) {
    RawComponent c;
    c.line = p.line();
    c.name = p.at(0).text;
    const char kind = static_cast<char>(std::tolower(static_cast<unsigned char>(c.name[0])));
    if (kind == 'l') p.fail(0, "inductors not supported");
    if (kind != 'v' && kind != 'r' && kind != 'c' && kind != 'm') {
        p.fail(0, "unknown component kind '" + std::string(1, c.name[0]) + "'");
    }
    if (p.size() < 3) p.fail(p.size(), "component needs two nodes");
    c.node_a = p.at(1).text;
    c.node_b = p.at(2).text;
    if (c.node_a == c.node_b) p.fail(2, "both terminals on the same node");
    switch (kind) {
        case 'v':
            c.body = VoltageSource{c.name, kGround, kGround, parse_source(p)};
            break;
        case 'r': {
            if (p.size() != 4) p.fail(std::min<std::size_t>(p.size(), 4), "resistor needs exactly one value");
            const double ohms = p.number(3, "resistance");
            if (!(ohms > 0.0)) p.fail(3, "resistance must be positive");
            c.body = Resistor{c.name, kGround, kGround, ohms};
            break;
        }
        case 'c': {
            if (p.size() != 4 && p.size() != 5) p.fail(std::min<std::size_t>(p.size(), 5), "capacitor needs a value and optional IC=");
            const double farads = p.number(3, "capacitance");
            if (!(farads > 0.0)) p.fail(3, "capacitance must be positive");
            std::optional<double> ic;
            if (p.size() == 5) {
                const std::string& t = p.at(4).text;
                if (lower(t.substr(0, 3)) != "ic=") p.fail(4, "expected IC=<coulombs>");
                const auto v = parse_number(std::string_view(t).substr(3));
                if (!v || !std::isfinite(*v)) p.fail(4, "non-numeric parameter for IC");
                ic = *v;
            }
            c.body = Capacitor{c.name, kGround, kGround, farads, ic};
            break;
        }
        default: {
            Memristor m = parse_memristor(p);
            m.name = c.name;
            c.body = std::move(m);
        }
    }
    return c;
}

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += format_number(values[i]);
    }
    return out;
}

}  // namespace

Netlist parse_netlist(std::string_view text) {
    std::vector<RawComponent> raw;
    std::set<std::string> names;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++line_no;
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        auto tokens = tokenize(line);
        if (tokens.empty() || tokens.front().text.front() == '*') continue;
        LineParser parser(line_no, std::move(tokens));
        RawComponent c = parse_line(parser);
        if (!names.insert(lower(c.name)).second) parser.fail(0, "duplicate component name '" + c.name + "'");
        raw.push_back(std::move(c));
    }
    if (raw.empty()) throw ParseError(0, 0, "no components");

    std::set<std::string> node_names;
    for (const auto& c : raw) {
        node_names.insert(c.node_a);
        node_names.insert(c.node_b);
    }
    if (!node_names.count("0")) throw ParseError(0, 0, "no ground node '0'");

    Netlist net;
    for (const auto& n : node_names) {
        if (n != "0") net.nodes.push_back(n);
    }
    auto index = [&](const std::string& name) -> NodeIndex {
        return static_cast<NodeIndex>(std::find(net.nodes.begin(), net.nodes.end(), name) - net.nodes.begin());
    };

    // Connectivity: every node must reach ground.
    std::vector<NodeIndex> parent(net.nodes.size());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
    auto find = [&](NodeIndex x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& c : raw) parent[find(index(c.node_a))] = find(index(c.node_b));
    for (const auto& c : raw) {
        for (const auto* n : {&c.node_a, &c.node_b}) {
            if (find(index(*n)) != find(kGround)) {
                throw ParseError(c.line, 1, "floating node '" + *n + "' is not connected to ground");
            }
        }
    }

    bool all_ic = true;
    for (auto& c : raw) {
        const NodeIndex a = index(c.node_a);
        const NodeIndex b = index(c.node_b);
        std::visit(
            [&](auto& body) {
                using T = std::decay_t<decltype(body)>;
                if constexpr (std::is_same_v<T, Resistor>) {
                    body.a = a;
                    body.b = b;
                    net.resistors.push_back(body);
                } else {
                    body.pos = a;
                    body.neg = b;
                    if constexpr (std::is_same_v<T, VoltageSource>) net.sources.push_back(body);
                    if constexpr (std::is_same_v<T, Memristor>) net.memristors.push_back(body);
                    if constexpr (std::is_same_v<T, Capacitor>) {
                        all_ic = all_ic && body.initial_charge.has_value();
                        net.capacitors.push_back(body);
                    }
                }
            },
            c.body);
    }
    if (net.sources.empty() && !(all_ic && !net.capacitors.empty())) {
        throw ParseError(0, 0, "circuit needs a voltage source or IC= on every capacitor");
    }
    return net;
}

std::string serialize(const Netlist& net) {
    std::ostringstream out;
    auto node = [&](NodeIndex i) { return net.nodes.at(i); };
    for (const auto& v : net.sources) {
        out << v.name << ' ' << node(v.pos) << ' ' << node(v.neg) << ' ';
        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Waveform::Constant>) {
                    out << "DC " << format_number(s.value);
                } else if constexpr (std::is_same_v<T, Waveform::Step>) {
                    out << "STEP " << format_number(s.before) << ' ' << format_number(s.after) << ' '
                        << format_number(s.at);
                } else if constexpr (std::is_same_v<T, Waveform::Sine>) {
                    out << "SIN " << format_number(s.offset) << ' ' << format_number(s.amplitude) << ' '
                        << format_number(s.frequency);
                } else {
                    out << "PWL";
                    for (const auto& [t, value] : s.points) {
                        out << ' ' << format_number(t) << ' ' << format_number(value);
                    }
                }
            },
            v.waveform.shape());
        out << '\n';
    }
    for (const auto& r : net.resistors) {
        out << r.name << ' ' << node(r.a) << ' ' << node(r.b) << ' ' << format_number(r.ohms) << '\n';
    }
    for (const auto& c : net.capacitors) {
        out << c.name << ' ' << node(c.pos) << ' ' << node(c.neg) << ' ' << format_number(c.farads);
        if (c.initial_charge) out << " IC=" << format_number(*c.initial_charge);
        out << '\n';
    }
    for (const auto& m : net.memristors) {
        const auto& model = m.model;
        out << m.name << ' ' << node(m.pos) << ' ' << node(m.neg) << " STATES=" << model.num_states()
            << " R=" << join(model.resistances()) << " TAUUP=" << join(model.tau_up())
            << " VUP=" << join(model.v_up()) << " TAUDOWN=" << join(model.tau_down())
            << " VDOWN=" << join(model.v_down()) << " STATE=" << m.initial_state << '\n';
    }
    return out.str();
}

}  // namespace memsim
