#include "memsim/device.hpp"

#include "memsim/errors.hpp"

#include <cmath>
#include <string>

namespace memsim {

namespace {

void require_positive(const std::vector<double>& values, const char* what) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] > 0.0)) {
            throw ContractViolation(std::string(what) + "[" + std::to_string(i) +
                                    "] must be strictly positive");
        }
    }
}

// exp(|v| / scale) / tau, computed from its logarithm and capped at `ceiling`.
Rate exponential_rate(double tau, double scale, double magnitude, double ceiling) {
    if (std::isinf(tau)) return {};
    const double log_rate = magnitude / scale - std::log(tau);
    if (log_rate >= std::log(ceiling)) return {ceiling, true};
    return {std::exp(log_rate), false};
}

}  // namespace

MemristorModel::MemristorModel(std::vector<double> resistances,
                               std::vector<double> tau_up, std::vector<double> v_up,
                               std::vector<double> tau_down, std::vector<double> v_down,
                               double rate_ceiling)
    : resistances_(std::move(resistances)),
      tau_up_(std::move(tau_up)),
      v_up_(std::move(v_up)),
      tau_down_(std::move(tau_down)),
      v_down_(std::move(v_down)),
      rate_ceiling_(rate_ceiling) {
    if (resistances_.size() < 2) {
        throw ContractViolation("a memristor needs at least two resistance states");
    }
    const std::size_t transitions = resistances_.size() - 1;
    if (tau_up_.size() != transitions || v_up_.size() != transitions ||
        tau_down_.size() != transitions || v_down_.size() != transitions) {
        throw ContractViolation("expected " + std::to_string(transitions) +
                                " parameters per switching direction");
    }
    require_positive(resistances_, "resistance");
    require_positive(tau_up_, "tau_up");
    require_positive(v_up_, "v_up");
    require_positive(tau_down_, "tau_down");
    require_positive(v_down_, "v_down");
    for (double r : resistances_) {
        if (!std::isfinite(r)) throw ContractViolation("resistances must be finite");
    }
    if (!(rate_ceiling_ > 0.0) || !std::isfinite(rate_ceiling_)) {
        throw ContractViolation("rate ceiling must be positive and finite");
    }
}

MemristorModel MemristorModel::uniform(std::vector<double> resistances,
                                       double tau_up, double v_up,
                                       double tau_down, double v_down,
                                       double rate_ceiling) {
    const std::size_t n = resistances.empty() ? 0 : resistances.size() - 1;
    return MemristorModel(std::move(resistances),
                          std::vector<double>(n, tau_up), std::vector<double>(n, v_up),
                          std::vector<double>(n, tau_down), std::vector<double>(n, v_down),
                          rate_ceiling);
}

MemristorModel MemristorModel::binary(double r0, double r1, double tau, double v_scale) {
    return uniform({r0, r1}, tau, v_scale, tau, v_scale);
}

double MemristorModel::resistance(std::size_t i) const {
    if (i >= resistances_.size()) {
        throw ContractViolation("state index " + std::to_string(i) + " out of range");
    }
    return resistances_[i];
}

Rate rate_up_checked(const MemristorModel& model, std::size_t i, double v_m) {
    if (i + 1 >= model.num_states()) {
        throw ContractViolation("rate_up: state " + std::to_string(i) + " has no upper neighbour");
    }
    if (!(v_m > 0.0)) return {};
    return exponential_rate(model.tau_up()[i], model.v_up()[i], v_m, model.rate_ceiling());
}

Rate rate_down_checked(const MemristorModel& model, std::size_t i, double v_m) {
    if (i == 0 || i >= model.num_states()) {
        throw ContractViolation("rate_down: state " + std::to_string(i) + " has no lower neighbour");
    }
    if (!(v_m < 0.0)) return {};
    return exponential_rate(model.tau_down()[i - 1], model.v_down()[i - 1], -v_m,
                            model.rate_ceiling());
}

double rate_up(const MemristorModel& model, std::size_t i, double v_m) {
    return rate_up_checked(model, i, v_m).value;
}

double rate_down(const MemristorModel& model, std::size_t i, double v_m) {
    return rate_down_checked(model, i, v_m).value;
}

double total_exit_rate(const MemristorModel& model, std::size_t i, double v_m) {
    if (i >= model.num_states()) {
        throw ContractViolation("total_exit_rate: state " + std::to_string(i) + " out of range");
    }
    double total = 0.0;
    if (i + 1 < model.num_states()) total += rate_up(model, i, v_m);
    if (i > 0) total += rate_down(model, i, v_m);
    return total;
}

}  // namespace memsim
