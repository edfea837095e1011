// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace neuralsurv::pipeline {

struct SelftestOptions {
  std::uint64_t seed = 7;
  // Test hook: negate the analytic Jacobian before the finite-difference comparison.
  bool inject_jacobian_sign_flip = false;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  double observed = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct SelftestReport {
  std::vector<CheckResult> checks;

  bool all_passed() const;
  std::string to_json() const;
};

// Pólya-Gamma moments against series sampling, Jacobian against finite
// differences, Woodbury against a dense inverse, the augmentation identity by
// Monte Carlo, EM ascent and the digamma recurrence.
SelftestReport run_selftest(const SelftestOptions& opt = {});

}  // namespace neuralsurv::pipeline
