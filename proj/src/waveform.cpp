#include "memsim/waveform.hpp"

#include "memsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace memsim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

Waveform::Waveform(Shape shape) : shape_(std::move(shape)) {
    if (const auto* pwl = std::get_if<PiecewiseLinear>(&shape_)) {
        if (pwl->points.empty()) throw ContractViolation("PWL waveform needs at least one breakpoint");
        for (std::size_t i = 1; i < pwl->points.size(); ++i) {
            if (!(pwl->points[i].first > pwl->points[i - 1].first)) {
                throw ContractViolation("PWL breakpoint times must be strictly increasing");
            }
        }
    }
    if (const auto* s = std::get_if<Sine>(&shape_); s && !(s->frequency >= 0.0)) {
        throw ContractViolation("sine frequency must be non-negative");
    }
}

double Waveform::operator()(double t) const {
    return std::visit(
        overloaded{
            [](const Constant& c) { return c.value; },
            [t](const Step& s) { return t < s.at ? s.before : s.after; },
            [t](const Sine& s) {
                return s.offset + s.amplitude * std::sin(2.0 * std::numbers::pi * s.frequency * t);
            },
            [t](const PiecewiseLinear& p) {
                const auto& pts = p.points;
                if (t <= pts.front().first) return pts.front().second;
                if (t >= pts.back().first) return pts.back().second;
                auto hi = std::upper_bound(pts.begin(), pts.end(), t,
                                           [](double x, const auto& pt) { return x < pt.first; });
                auto lo = hi - 1;
                const double w = (t - lo->first) / (hi->first - lo->first);
                return lo->second + w * (hi->second - lo->second);
            },
        },
        shape_);
}

std::pair<double, double> Waveform::range(double t_end) const {
    return std::visit(
        overloaded{
            [](const Constant& c) { return std::pair{c.value, c.value}; },
            [t_end](const Step& s) {
                if (s.at > t_end) return std::pair{s.before, s.before};
                if (s.at <= 0.0) return std::pair{s.after, s.after};
                return std::pair{std::min(s.before, s.after), std::max(s.before, s.after)};
            },
            [](const Sine& s) {
                const double a = std::abs(s.amplitude);
                return std::pair{s.offset - a, s.offset + a};
            },
            [this, t_end](const PiecewiseLinear& p) {
                double lo = (*this)(0.0);
                double hi = lo;
                const double end = (*this)(t_end);
                lo = std::min(lo, end);
                hi = std::max(hi, end);
                for (const auto& [time, v] : p.points) {
                    if (time > 0.0 && time < t_end) {
                        lo = std::min(lo, v);
                        hi = std::max(hi, v);
                    }
                }
                return std::pair{lo, hi};
            },
        },
        shape_);
}

std::vector<double> Waveform::breakpoints(double t_end) const {
    std::vector<double> out;
    if (const auto* s = std::get_if<Step>(&shape_)) {
        if (s->at > 0.0 && s->at < t_end) out.push_back(s->at);
    } else if (const auto* p = std::get_if<PiecewiseLinear>(&shape_)) {
        for (const auto& pt : p->points) {
            if (pt.first > 0.0 && pt.first < t_end) out.push_back(pt.first);
        }
    }
    return out;
}

}  // namespace memsim
