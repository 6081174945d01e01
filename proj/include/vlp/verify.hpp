#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vlp {

struct VerifyCheck {
  std::string name;
  double measured = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct VerifyReport {
  std::string suite;
  std::vector<VerifyCheck> checks;

  bool passed() const;
};

/// Monte Carlo checks of the calibration estimator on the h = 4 m, N = 5 optimal plan.
///   prop1    unbiasedness and covariance sigma^2 (G G^T)^{-1}
///   prop2    O(sigma^2) bias of the normal estimate (log-log slope 2 +- 0.3)
///   prop3    O(sigma^2) bias of the gain estimate
///   theorem1 radius sweep optimum, closed-form minimum, MC agreement, random-geometry search
/// `scale` multiplies the trial counts (1.0 = full size).
VerifyReport run_verify_suite(const std::string& suite, std::uint64_t seed, double scale = 1.0);

}  // namespace vlp
