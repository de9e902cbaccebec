#pragma once

#include <stdexcept>
#include <string>

namespace cgpr {

// Exception hierarchy. The CLI maps each family onto a process exit code:
// ConfigError -> 2, DataError -> 3, NumericalError -> 4.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class SchemaError : public DataError {
public:
    using DataError::DataError;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t row)
        : DataError(what), row_(row) {}
    std::size_t row() const { return row_; }

private:
    std::size_t row_;
};

class EmptyInputError : public DataError {
public:
    using DataError::DataError;
};

class VersionError : public DataError {
public:
    using DataError::DataError;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class ConditioningError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class InfeasibleError : public NumericalError {
public:
    InfeasibleError(const std::string& what, double worst_margin)
        : NumericalError(what), worst_margin_(worst_margin) {}
    double worst_margin() const { return worst_margin_; }

private:
    double worst_margin_;
};

class DomainError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace cgpr
