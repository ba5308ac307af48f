#pragma once

#include <string>
#include <vector>

namespace activetest {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Estimator self-test against exact enumeration and closed forms.
/// Deterministic; runs in well under a second.
std::vector<CheckResult> run_estimator_checks();

}  // namespace activetest
