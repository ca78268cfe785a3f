#pragma once

#include <stdexcept>
#include <string>

namespace hamflow {

// Error type used across the library for contract violations
// (non-convergence, domain exits, precondition failures).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline double sqr(double x) { return x * x; }

}  // namespace hamflow
