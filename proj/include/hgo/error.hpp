#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hgo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed expression text; `position` is a 0-based character offset.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t position)
        : Error(what + " at position " + std::to_string(position)), position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// Unbound variable or a domain violation while evaluating an expression.
class EvalError : public Error {
public:
    using Error::Error;
};

class LinalgError : public Error {
public:
    using Error::Error;
};

/// Precondition violations of the delay integrator (lag below step, future queries).
class DdeError : public Error {
public:
    using Error::Error;
};

/// Integration stopped early (divergence, H1 box escape).
class IntegrationError : public Error {
public:
    using Error::Error;
};

/// No feasible high-gain parameter / decay constant for the requested theorem.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace hgo
