#pragma once

#include <stdexcept>
#include <string>

namespace tdpg {

// Violated precondition or API contract (caller bug).
class ContractViolation : public std::logic_error {
public:
    explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// Runtime numerical failure (domain error, non-finite values, diverged run).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractViolation(msg);
}

}  // namespace tdpg
