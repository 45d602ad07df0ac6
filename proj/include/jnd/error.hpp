#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace jnd {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (probability
/// not in (0,1), inverted thresholds, malformed ranges, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Both variance contributions of a cell are zero.
class DegenerateVariance : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// Not enough observations for the requested estimate (empty rows or
/// columns, empty groups, every subject rejected, ...).
class InsufficientData : public Error {
public:
    using Error::Error;
};

/// The observed information of the location block is not positive definite.
class SingularInformation : public Error {
public:
    SingularInformation(const std::string& what, std::vector<std::string> parameters)
        : Error(what), parameters_(std::move(parameters)) {}

    /// Names of the parameters whose pivots were non-positive.
    const std::vector<std::string>& parameters() const noexcept { return parameters_; }

private:
    std::vector<std::string> parameters_;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed input text. Line and column are 1-based; 0 means "not applicable".
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, std::size_t column, const std::string& message)
        : Error(source + ":" + std::to_string(line) + (column ? ":" + std::to_string(column) : std::string{}) +
                ": " + message),
          line_(line),
          column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

}  // namespace jnd
