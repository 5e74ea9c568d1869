#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fg {

struct SuiteCheck {
  std::string name;
  std::size_t seeds_run = 0;
  bool passed = true;
  double worst_error = 0.0;
  std::string detail;
};

struct SuiteReport {
  std::vector<SuiteCheck> checks;

  bool all_passed() const {
    for (const auto& c : checks) {
      if (!c.passed) return false;
    }
    return true;
  }
};

// Checks every analytic backward in the library against the central
// finite-difference oracle on randomized inputs: plain and weighted GKMP
// (with respect to the activations and the averaging weights), l2
// normalization, the within- and between-class losses and their sum through
// the online mean update, smooth L1, and the full joint objective through
// normalization and the classification layer. Tolerances are fixed
// library-wide at 1e-4 relative with a 1e-7 absolute floor.
SuiteReport run_gradient_suite(std::size_t seeds_per_check = 10,
                               std::uint64_t base_seed = 20240901);

}  // namespace fg
