#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace memsim {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition of an operation was violated by the caller.
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of a formula.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Netlist or configuration text could not be parsed.
class ParseError : public Error {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& message)
        : Error(format(line, column, message)), line_(line), column_(column), detail_(message) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    static std::string format(std::size_t line, std::size_t column, const std::string& message) {
        if (line == 0) return message;
        return "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message;
    }

    std::size_t line_;
    std::size_t column_;
    std::string detail_;
};

/// The modified-nodal-analysis matrix is singular.
class SingularNetworkError : public Error {
public:
    SingularNetworkError(const std::string& message, std::vector<std::string> nodes)
        : Error(message), nodes_(std::move(nodes)) {}

    const std::vector<std::string>& nodes() const noexcept { return nodes_; }

private:
    std::vector<std::string> nodes_;
};

/// A PDE step was requested with a time step above the stability limit.
class StepSizeError : public Error {
public:
    StepSizeError(const std::string& message, double admissible_dt)
        : Error(message), admissible_dt_(admissible_dt) {}

    double admissible_dt() const noexcept { return admissible_dt_; }

private:
    double admissible_dt_;
};

/// Probability mass left the charge grid through a boundary.
class BoundaryOutflowError : public Error {
public:
    BoundaryOutflowError(const std::string& message, double lost_mass)
        : Error(message), lost_mass_(lost_mass) {}

    double lost_mass() const noexcept { return lost_mass_; }

private:
    double lost_mass_;
};

/// Adaptive ODE integration could not make progress.
class IntegrationError : public Error {
public:
    IntegrationError(const std::string& message, double time)
        : Error(message), time_(time) {}

    double time() const noexcept { return time_; }

private:
    double time_;
};

}  // namespace memsim
