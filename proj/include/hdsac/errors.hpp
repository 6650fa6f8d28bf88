#pragma once

#include <stdexcept>
#include <string>

namespace hdsac {

/// Caller broke a documented precondition (dimension mismatch, stepping a
/// finished episode, intervention without an action, ...).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Non-finite losses or gradients, or value estimates outside the alarm bound.
class TrainingDivergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration value or unknown key.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or version-mismatched file / message.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem failures.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hdsac
