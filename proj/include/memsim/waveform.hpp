#pragma once

#include <utility>
#include <variant>
#include <vector>

namespace memsim {

/// Source voltage as a function of time, defined for all t >= 0.
class Waveform {
public:
    struct Constant {
        double value = 0.0;
        friend bool operator==(const Constant&, const Constant&) = default;
    };
    /// `before` until `at`, `after` from then on.
    struct Step {
        double before = 0.0;
        double after = 0.0;
        double at = 0.0;
        friend bool operator==(const Step&, const Step&) = default;
    };
    /// offset + amplitude * sin(2 pi f t)
    struct Sine {
        double offset = 0.0;
        double amplitude = 0.0;
        double frequency = 0.0;
        friend bool operator==(const Sine&, const Sine&) = default;
    };
    /// Linear interpolation between (time, volts) breakpoints, held flat
    /// outside the breakpoint range.
    struct PiecewiseLinear {
        std::vector<std::pair<double, double>> points;
        friend bool operator==(const PiecewiseLinear&, const PiecewiseLinear&) = default;
    };

    using Shape = std::variant<Constant, Step, Sine, PiecewiseLinear>;

    Waveform() = default;
    explicit Waveform(Shape shape);

    static Waveform constant(double volts) { return Waveform(Constant{volts}); }
    static Waveform step(double before, double after, double at) { return Waveform(Step{before, after, at}); }
    static Waveform sine(double offset, double amplitude, double hz) { return Waveform(Sine{offset, amplitude, hz}); }
    static Waveform pwl(std::vector<std::pair<double, double>> points) {
        return Waveform(PiecewiseLinear{std::move(points)});
    }

    double operator()(double t) const;

    bool is_constant() const noexcept { return std::holds_alternative<Constant>(shape_); }
    const Shape& shape() const noexcept { return shape_; }

    /// Bounds of the waveform over [0, t_end]. Conservative for sines.
    std::pair<double, double> range(double t_end) const;

    /// Times in (0, t_end) where the waveform has a kink or jump.
    std::vector<double> breakpoints(double t_end) const;

    friend bool operator==(const Waveform&, const Waveform&) = default;

private:
    Shape shape_{Constant{}};
};

}  // namespace memsim
