// errors.hpp
// Exception types shared by the qfid headers.

#pragma once

#include <stdexcept>
#include <string>

namespace qfid {

// Input violates a documented precondition (bad shape, non-Hermitian,
// trace off, negative eigenvalue, malformed file, ...).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A numerical routine failed in a way that should not happen for valid
// input (no convergence, radicand far below zero, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace qfid
