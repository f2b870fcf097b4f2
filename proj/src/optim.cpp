#include "abd/optim.hpp"

#include <stdexcept>
#include <string>

#include "abd/kernels.hpp"

namespace abd {

void SgdConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("sgd: learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("sgd: momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("sgd: weight decay must be non-negative");
  double prev = 0.0;
  for (const auto& s : schedule) {
    if (!(s.at_fraction > prev && s.at_fraction < 1.0)) {
      throw std::invalid_argument("sgd: schedule fractions must be strictly increasing in (0, 1)");
    }
    if (!(s.divisor > 0.0)) throw std::invalid_argument("sgd: schedule divisors must be positive");
    prev = s.at_fraction;
  }
}

double effective_lr(const SgdConfig& cfg, double epoch_fraction) {
  double lr = cfg.lr;
  for (const auto& s : cfg.schedule) {
    if (epoch_fraction >= s.at_fraction) lr /= s.divisor;
  }
  return lr;
}

void sgd_step(std::span<Param* const> params, SgdState& state, const SgdConfig& cfg,
              double epoch_fraction) {
  if (state.velocity.size() != params.size()) {
    state.velocity.clear();
    for (const Param* p : params) state.velocity.emplace_back(p->value.shape());
  }
  const kernels::SgdCoefficients c{effective_lr(cfg, epoch_fraction), cfg.momentum, cfg.weight_decay,
                                   cfg.nesterov};
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    if (p.grad.shape() != p.value.shape()) {
      throw ShapeError("sgd: gradient " + to_string(p.grad.shape()) + " does not match parameter '" + p.name +
                       "' " + to_string(p.value.shape()));
    }
    k.sgd_update(p.value.raw(), p.grad.raw(), state.velocity[i].raw(), p.value.size(), c);
  }
}

Sgd::Sgd(std::vector<Param*> params, SgdConfig cfg) : params_(std::move(params)), cfg_(std::move(cfg)) {
  cfg_.validate();
}

}  // namespace abd
