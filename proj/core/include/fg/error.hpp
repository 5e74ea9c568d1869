#pragma once

#include <stdexcept>
#include <string>

namespace fg {

// Invalid user-supplied configuration (bad K, label out of range, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A caller broke an API contract (backward before forward, shape mismatch, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Training produced a non-finite loss.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void check_config(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

inline void check_contract(bool ok, const std::string& msg) {
  if (!ok) throw ContractViolation(msg);
}

}  // namespace fg
