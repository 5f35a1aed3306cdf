#pragma once

#include <stdexcept>
#include <string>

namespace betaunc {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Caller broke an interface contract (shape mismatch, missing cache, ...).
/// Indicates a programming error rather than bad input data.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Bad configuration, flags, or request (unknown preset, empty dataset, ...).
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class DataErrorCode {
    MissingFile,
    Io,
    MalformedHeader,
    NonMonotoneChangepoints,
    InvalidRecord,
    CorruptCheckpoint,
    UnsupportedVersion,
    ShapeMismatch,
    UnknownRecord,
};

const char* to_string(DataErrorCode code);

/// Failure while reading or writing datasets, records, or checkpoints.
class DataError : public std::runtime_error {
public:
    DataError(DataErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    DataErrorCode code() const noexcept { return code_; }

private:
    DataErrorCode code_;
};

}  // namespace betaunc
