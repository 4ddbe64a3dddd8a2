#pragma once

#include <stdexcept>
#include <string>

namespace pathhjb {

// Precondition or configuration violations (bad dimensions, off-grid times, ...).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Failures that only show up while computing: non-finite evaluations,
// singular regressions, trees too large to enumerate.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw InvalidArgument(message);
    }
}

}  // namespace pathhjb
