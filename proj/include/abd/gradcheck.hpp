#pragma once

#include <cstdint>

namespace abd {

struct GradcheckReport {
  std::size_t trials = 0;
  std::size_t coordinates = 0;  // finite-difference checks performed
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = true;
};

struct GradcheckOptions {
  double step = 1e-5;
  double tolerance = 1e-5;
  /// Points closer than this to a hinge kink (s = +-mu) are resampled.
  double kink_gap = 1e-3;
  /// Negative control: perturbs the analytic gradient so the check must fail.
  bool corrupt = false;
};

/// Compares the analytic gradient of alternative_loss with central finite
/// differences on random (t, s, mu) points.
GradcheckReport check_alternative_loss_gradient(std::uint64_t seed, std::size_t trials, GradcheckOptions opts = {});

}  // namespace abd
