#pragma once

#include <stdexcept>
#include <string>

namespace semopt {

/// Malformed input: plans, configs, catalogs or persisted files that violate their schema.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// API misuse, e.g. a second backward pass over a consumed tape.
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Non-finite or undefined arithmetic on the gradient tape.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A fixed-width structure was asked to hold more than it can.
class CapacityError : public std::length_error {
public:
    using std::length_error::length_error;
};

} // namespace semopt
