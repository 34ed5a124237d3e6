#pragma once

#include <stdexcept>
#include <string>

namespace ncint {

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// An expression referenced a variable the evaluation point does not bind.
struct UnboundVariable : Error {
    explicit UnboundVariable(const std::string& name)
        : Error("unbound variable: " + name), variable(name) {}
    std::string variable;
};

/// Evaluation left the domain of a primitive (sqrt of a negative,
/// log of a non-positive, division by zero, fractional power of a negative).
struct DomainError : Error {
    using Error::Error;
};

/// A symplectic form (or bivector) was numerically singular where an
/// inverse was required.
struct DegenerateForm : Error {
    using Error::Error;
};

/// A chart Jacobian lost rank at the evaluation point.
struct SingularChart : Error {
    using Error::Error;
};

/// A trajectory left the chart: the vector field raised a DomainError
/// mid-step.  Carries the time at which integration stopped.
struct FlowEscapedChart : Error {
    FlowEscapedChart(const std::string& msg, double when)
        : Error(msg), time(when) {}
    double time;
};

/// Adaptive step size shrank below the hard floor (1e-14).
struct StepUnderflow : Error {
    using Error::Error;
};

/// detect_period was asked to flow from an equilibrium of the field.
struct FixedPoint : Error {
    using Error::Error;
};

/// An operation needed Casimir functions the system does not provide.
struct MissingCasimirs : Error {
    using Error::Error;
};

/// Structure constants failed antisymmetry or the Jacobi identity.
struct InvalidStructureConstants : Error {
    using Error::Error;
};

/// A 1-based index was outside the valid range for the object.
struct IndexOutOfRange : Error {
    using Error::Error;
};

/// Text failed to parse.  line/column are 1-based.
struct SyntaxError : Error {
    SyntaxError(const std::string& msg, int line_, int column_)
        : Error(msg + " (line " + std::to_string(line_) + ", column " +
                std::to_string(column_) + ")"),
          line(line_), column(column_) {}
    int line;
    int column;
};

/// A parsed or constructed definition is self-inconsistent.
struct ValidationError : Error {
    using Error::Error;
};

} // namespace ncint
