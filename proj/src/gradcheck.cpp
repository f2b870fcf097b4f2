#include "abd/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "abd/distill.hpp"
#include "abd/rng.hpp"

namespace abd {

GradcheckReport check_alternative_loss_gradient(std::uint64_t seed, std::size_t trials, GradcheckOptions opts) {
  GradcheckReport rep;
  rep.trials = trials;
  rep.tolerance = opts.tolerance;
  Rng rng(seed);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const std::size_t n = 1 + rng.below(16);
    const Margin mu(rng.uniform(0.25, 4.0));
    Tensor t({n}), s({n});
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = 2.0 * rng.normal();
      do {
        s[i] = 3.0 * rng.normal();
      } while (std::abs(s[i] - mu.value) < opts.kink_gap || std::abs(s[i] + mu.value) < opts.kink_gap);
    }
    Tensor grad = alternative_loss_grad(t, s, mu);
    if (opts.corrupt) grad = scale(grad, 1.001);

    for (std::size_t i = 0; i < n; ++i) {
      Tensor hi = s, lo = s;
      hi[i] += opts.step;
      lo[i] -= opts.step;
      const double fd = (alternative_loss(t, hi, mu) - alternative_loss(t, lo, mu)) / (2.0 * opts.step);
      const double denom = std::max(std::abs(fd), std::abs(grad[i]));
      const double rel = denom == 0.0 ? 0.0 : std::abs(fd - grad[i]) / denom;
      rep.max_rel_error = std::max(rep.max_rel_error, rel);
      ++rep.coordinates;
    }
  }
  rep.passed = rep.max_rel_error <= opts.tolerance;
  return rep;
}

}  // namespace abd
