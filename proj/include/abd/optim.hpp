#pragma once

#include <span>
#include <vector>

#include "abd/nn.hpp"

namespace abd {

struct LrStep {
  double at_fraction;  // in (0, 1)
  double divisor;      // > 0
};

/// SGD with (Nesterov) momentum and an L2 term added to the gradient inside
/// the update. Defaults: base rate 0.1 divided by 5 at 30%, 60% and 80% of
/// the epochs, momentum 0.9, weight decay 5e-4.
struct SgdConfig {
  double lr = 0.1;
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 5e-4;
  std::vector<LrStep> schedule{{0.3, 5.0}, {0.6, 5.0}, {0.8, 5.0}};

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

/// Base rate divided by every divisor whose fraction has been reached.
double effective_lr(const SgdConfig& cfg, double epoch_fraction);

struct SgdState {
  std::vector<Tensor> velocity;
};

/// One update of every parameter from its .grad; state is sized lazily.
void sgd_step(std::span<Param* const> params, SgdState& state, const SgdConfig& cfg,
              double epoch_fraction);

class Sgd {
 public:
  Sgd(std::vector<Param*> params, SgdConfig cfg);

  void step(double epoch_fraction) { sgd_step(params_, state_, cfg_, epoch_fraction); }
  const SgdConfig& config() const { return cfg_; }

 private:
  std::vector<Param*> params_;
  SgdConfig cfg_;
  SgdState state_;
};

}  // namespace abd
