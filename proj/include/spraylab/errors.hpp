#pragma once

#include <stdexcept>
#include <string>

namespace spraylab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A jet or real operation left its domain (division by zero, sqrt/ln of a
/// non-positive value, abs at zero, singular point).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Requested derivative order exceeds what a jet carries.
class OrderError : public Error {
public:
    using Error::Error;
};

class SyntaxError : public Error {
public:
    SyntaxError(int line, int col, std::string expected)
        : Error("line " + std::to_string(line) + ", col " + std::to_string(col) + ": expected " + expected),
          line_(line), col_(col), expected_(std::move(expected)) {}

    int line() const noexcept { return line_; }
    int col() const noexcept { return col_; }
    const std::string& expected() const noexcept { return expected_; }

private:
    int line_;
    int col_;
    std::string expected_;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class ArityError : public Error {
public:
    using Error::Error;
};

/// The fundamental tensor is (numerically) singular at the evaluation point.
class DegenerateMetric : public Error {
public:
    using Error::Error;
};

class NegativeMetric : public Error {
public:
    using Error::Error;
};

/// A decision rule was invoked outside the hypothesis it requires.
class PreconditionError : public Error {
public:
    using Error::Error;
};

class RankError : public Error {
public:
    using Error::Error;
};

class PathError : public Error {
public:
    using Error::Error;
};

class ParamError : public Error {
public:
    using Error::Error;
};

class UnknownFixture : public Error {
public:
    using Error::Error;
};

/// The sampler could not find enough admissible points.
class SamplingExhausted : public Error {
public:
    using Error::Error;
};

}  // namespace spraylab
