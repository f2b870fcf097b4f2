#include "abd/distill.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "abd/kernels.hpp"

namespace abd {

namespace {

void require_same(const Tensor& t, const Tensor& s, const char* what) {
  if (t.shape() != s.shape()) {
    throw ShapeError(std::string(what) + ": teacher " + to_string(t.shape()) + " vs student " +
                     to_string(s.shape()));
  }
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace

Margin::Margin(double v) : value(v) {
  if (!(v > 0.0)) throw std::invalid_argument("margin must be positive, got " + std::to_string(v));
}

std::size_t batch_size_of(const Tensor& x) {
  return (x.rank() == 2 || x.rank() == 4) ? x.dim(0) : 1;
}

Tensor indicator(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? 1.0 : 0.0;
  return out;
}

LossGrad mse_transfer_loss(const Tensor& t, const Tensor& s) {
  require_same(t, s, "mse transfer loss");
  const double inv_b = 1.0 / static_cast<double>(batch_size_of(s));
  LossGrad out{0.0, Tensor(s.shape())};
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double d = relu(s[i]) - relu(t[i]);
    total += d * d;
    out.grad[i] = s[i] > 0.0 ? 2.0 * d * inv_b : 0.0;
  }
  out.loss = total * inv_b;
  return out;
}

double activation_transfer_loss(const Tensor& t, const Tensor& s) {
  require_same(t, s, "activation transfer loss");
  std::size_t differing = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((t[i] > 0.0) != (s[i] > 0.0)) ++differing;
  }
  return static_cast<double>(differing) / static_cast<double>(batch_size_of(s));
}

LossGrad alternative_loss_and_grad(const Tensor& t, const Tensor& s, Margin mu) {
  require_same(t, s, "alternative loss");
  const double inv_b = 1.0 / static_cast<double>(batch_size_of(s));
  Tensor terms(s.shape());
  Tensor grad(s.shape());
  const auto& k = kernels::active();
  k.boundary_hinge(t.raw(), s.raw(), mu.value, terms.raw(), grad.raw(), s.size());
  // Sequential reduction keeps the result independent of the kernel backend.
  double total = 0.0;
  for (double v : terms.data()) total += v;
  k.scale(grad.raw(), inv_b, grad.raw(), grad.size());
  return {total * inv_b, std::move(grad)};
}

double alternative_loss(const Tensor& t, const Tensor& s, Margin mu) {
  return alternative_loss_and_grad(t, s, mu).loss;
}

Tensor alternative_loss_grad(const Tensor& t, const Tensor& s, Margin mu) {
  return alternative_loss_and_grad(t, s, mu).grad;
}

LossGrad lp_transfer_loss(const Tensor& t, const Tensor& s, double p) {
  if (p == 2.0) return mse_transfer_loss(t, s);
  if (p != 1.0 && p != 0.5) throw std::invalid_argument("lp transfer loss supports p in {0.5, 1, 2}");
  require_same(t, s, "lp transfer loss");
  const double inv_b = 1.0 / static_cast<double>(batch_size_of(s));
  LossGrad out{0.0, Tensor(s.shape())};
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double d = relu(s[i]) - relu(t[i]);
    const double a = std::fabs(d);
    if (a == 0.0) continue;
    const double sign = d > 0.0 ? 1.0 : -1.0;
    if (p == 1.0) {
      total += a;
      if (s[i] > 0.0) out.grad[i] = sign * inv_b;
    } else {
      const double r = std::sqrt(a);
      total += r;
      if (s[i] > 0.0) out.grad[i] = 0.5 * sign / r * inv_b;
    }
  }
  out.loss = total * inv_b;
  return out;
}

LossGrad transfer_loss(TransferMethod method, const Tensor& t, const Tensor& s, Margin mu) {
  switch (method) {
    case TransferMethod::Mse:
      return mse_transfer_loss(t, s);
    case TransferMethod::L1:
      return lp_transfer_loss(t, s, 1.0);
    case TransferMethod::LHalf:
      return lp_transfer_loss(t, s, 0.5);
    case TransferMethod::Proposed:
      return alternative_loss_and_grad(t, s, mu);
    case TransferMethod::None:
      break;
  }
  throw std::invalid_argument("transfer method 'none' has no loss");
}

ConnectorLossGrad transfer_loss_through(TransferMethod method, const Tensor& t, const Tensor& s, Connector& r,
                                        Margin mu) {
  const Tensor mapped = r.apply(s, Mode::Train);
  if (mapped.shape() != t.shape()) {
    throw ShapeError("connector output " + to_string(mapped.shape()) + " does not match teacher response " +
                     to_string(t.shape()));
  }
  LossGrad lg = transfer_loss(method, t, mapped, mu);
  return {lg.loss, r.backward(lg.grad)};
}

ConnectorLossGrad connector_loss(const Tensor& t, const Tensor& s, Connector& r, Margin mu) {
  return transfer_loss_through(TransferMethod::Proposed, t, s, r, mu);
}

ConnectorLossGrad spatial_loss(const Tensor& t, const Tensor& s, Connector& r, Margin mu) {
  const bool ok_rank = (t.rank() == 3 || t.rank() == 4) && t.rank() == s.rank();
  if (!ok_rank) {
    throw ShapeError("spatial loss expects [B x] H x W x C responses, got teacher " + to_string(t.shape()) +
                     " and student " + to_string(s.shape()));
  }
  const std::size_t off = t.rank() == 4 ? 1 : 0;
  if (t.rank() == 4 && t.dim(0) != s.dim(0)) {
    throw ShapeError("spatial loss batch mismatch: teacher " + to_string(t.shape()) + " vs student " +
                     to_string(s.shape()));
  }
  if (t.dim(off) != s.dim(off) || t.dim(off + 1) != s.dim(off + 1)) {
    throw ShapeError("spatial size mismatch: teacher " + std::to_string(t.dim(off)) + "x" +
                     std::to_string(t.dim(off + 1)) + " vs student " + std::to_string(s.dim(off)) + "x" +
                     std::to_string(s.dim(off + 1)));
  }
  return connector_loss(t, s, r, mu);
}

LossGrad kd_loss(const Tensor& teacher_logits, const Tensor& student_logits, std::span<const int> labels,
                 KdConfig cfg) {
  if (!(cfg.temperature > 0.0)) throw std::invalid_argument("kd temperature must be positive");
  if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0)) throw std::invalid_argument("kd alpha must be in [0, 1]");
  require_same(teacher_logits, student_logits, "kd loss");
  const Tensor zs = student_logits.rank() == 1 ? student_logits.reshaped({1, student_logits.size()}) : student_logits;
  const Tensor zt = teacher_logits.reshaped(zs.shape());
  const std::size_t b = zs.dim(0), k = zs.dim(1);
  const double inv_b = 1.0 / static_cast<double>(b);
  const double temp = cfg.temperature;

  const Tensor p = softmax(zt, temp);
  const Tensor q = softmax(zs, temp);
  LossGrad out{0.0, Tensor(zs.shape())};
  double soft = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double mx = zs[i * k] / temp;
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, zs[i * k + j] / temp);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += std::exp(zs[i * k + j] / temp - mx);
    const double lse = mx + std::log(total);
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t idx = i * k + j;
      soft -= p[idx] * (zs[idx] / temp - lse);
      out.grad[idx] = cfg.alpha * temp * (q[idx] - p[idx]) * inv_b;
    }
  }
  out.loss = cfg.alpha * temp * temp * soft * inv_b;

  if (cfg.alpha < 1.0) {
    const LossGrad hard = softmax_cross_entropy(zs, labels);
    out.loss += (1.0 - cfg.alpha) * hard.loss;
    kernels::active().axpy(1.0 - cfg.alpha, hard.grad.raw(), out.grad.raw(), out.grad.size());
  }
  if (student_logits.rank() == 1) out.grad = out.grad.reshaped(student_logits.shape());
  return out;
}

std::string_view to_string(TransferMethod m) {
  switch (m) {
    case TransferMethod::None:
      return "none";
    case TransferMethod::Mse:
      return "mse";
    case TransferMethod::L1:
      return "l1";
    case TransferMethod::LHalf:
      return "l0.5";
    case TransferMethod::Proposed:
      return "proposed";
  }
  return "unknown";
}

TransferMethod parse_transfer_method(std::string_view name) {
  if (name == "none") return TransferMethod::None;
  if (name == "mse" || name == "l2") return TransferMethod::Mse;
  if (name == "l1") return TransferMethod::L1;
  if (name == "l0.5") return TransferMethod::LHalf;
  if (name == "proposed") return TransferMethod::Proposed;
  throw std::invalid_argument("unknown transfer method '" + std::string(name) +
                              "' (expected none, mse, l1, l0.5 or proposed)");
}

}  // namespace abd
