#pragma once

#include <stdexcept>
#include <string>

namespace srcnet {

// Operand shapes do not fit together; the message names the offending operand.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A call precondition was broken (bad config, key mismatch, non-scalar root, ...).
struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Input outside the mathematical domain of the operation.
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Parameter estimation is impossible for the given sample.
struct EstimationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// File or format problem.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A non-finite value appeared where a finite one is required.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace srcnet
