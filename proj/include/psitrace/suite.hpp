#pragma once

#include <optional>
#include <string>
#include <vector>

namespace psitrace {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct SuiteResult {
  std::string title;
  std::vector<CheckResult> checks;
  double seconds = 0.0;
  double budget = 0.0;  // seconds; 0 means none

  bool pass() const;
  /// One line per check followed by a PASS/FAIL summary line.
  std::string to_text() const;
};

struct SuiteOptions {
  int threads = 0;
  /// Self-test fault injection: perturbs one tabulated sphere moment (restored afterwards).
  std::optional<unsigned> perturb_seed;
};

/// Invariant suite: homogeneity, Leibniz, sphere-vanishing, moment table, Mellin reduction,
/// composition and adjoint on truncated matrices, parametrix residual, finite-part split.
SuiteResult run_selftest(const SuiteOptions& opt = {});
/// Helffer-Sjostrand engine: matrix function, Cauchy-Pompeiu identities, dbar vanishing slopes.
SuiteResult run_hs_check(const SuiteOptions& opt = {});

/// Acceptance criterion 1..7.
SuiteResult run_criterion(int id, const SuiteOptions& opt = {});
constexpr int kCriterionCount = 7;

}  // namespace psitrace
