#pragma once

// Transfer losses between teacher responses t and student responses s.
//
// Responses are pre-activation values. Rank-1 (vector) and rank-3
// (H x W x C) tensors are single samples; rank-2 and rank-4 tensors carry a
// leading batch axis. Every loss sums over neurons and spatial positions and
// averages over the batch. Gradients are taken with respect to s only; the
// teacher is frozen.

#include <span>
#include <string_view>

#include "abd/connector.hpp"
#include "abd/nn.hpp"

namespace abd {

struct Margin {
  explicit Margin(double v = 1.0);
  double value;
};

std::size_t batch_size_of(const Tensor& x);

/// 1 where x > 0, else 0 (so the indicator of 0 is 0).
Tensor indicator(const Tensor& x);

/// || relu(t) - relu(s) ||^2.
LossGrad mse_transfer_loss(const Tensor& t, const Tensor& s);

/// Number of neurons whose activation states differ. Metric only: it is
/// piecewise constant and has no useful gradient.
double activation_transfer_loss(const Tensor& t, const Tensor& s);

/// Squared hinge on the student response, with the teacher's activation
/// state as the label:
///   sum_i [ rho(t_i) relu(mu - s_i) + (1 - rho(t_i)) relu(mu + s_i) ]^2
double alternative_loss(const Tensor& t, const Tensor& s, Margin mu);

/// dL/ds_i = 2(s_i - mu) if rho(t_i) = 1 and s_i < mu,
///           2(s_i + mu) if rho(t_i) = 0 and s_i > -mu,
///           0 otherwise.
Tensor alternative_loss_grad(const Tensor& t, const Tensor& s, Margin mu);
LossGrad alternative_loss_and_grad(const Tensor& t, const Tensor& s, Margin mu);

/// sum_i |relu(t_i) - relu(s_i)|^p for p in {0.5, 1, 2}; p = 2 is
/// mse_transfer_loss. The subgradient is 0 where the difference is 0.
LossGrad lp_transfer_loss(const Tensor& t, const Tensor& s, double p);

struct ConnectorLossGrad {
  double loss = 0.0;
  Tensor grad_s;  // dL/ds; connector parameter gradients are left in the connector
};

/// alternative_loss(t, r(s), mu). The connector runs in train mode.
ConnectorLossGrad connector_loss(const Tensor& t, const Tensor& s, Connector& r, Margin mu);

/// Sum over spatial positions of connector_loss with one shared connector.
/// T is [B x] H x W x M, S is [B x] H x W x N.
ConnectorLossGrad spatial_loss(const Tensor& t, const Tensor& s, Connector& r, Margin mu);

struct KdConfig {
  double temperature = 4.0;
  double alpha = 0.9;
};

/// alpha T^2 CE(softmax(teacher/T), softmax(student/T)) + (1 - alpha) CE(student, labels),
/// averaged over the batch. grad is with respect to the student logits.
LossGrad kd_loss(const Tensor& teacher_logits, const Tensor& student_logits, std::span<const int> labels,
                 KdConfig cfg);

enum class TransferMethod { None, Mse, L1, LHalf, Proposed };

std::string_view to_string(TransferMethod m);
/// Accepts none, mse (or l2), l1, l0.5, proposed; throws std::invalid_argument otherwise.
TransferMethod parse_transfer_method(std::string_view name);

/// Loss of the given method between t and an already-mapped student response.
LossGrad transfer_loss(TransferMethod method, const Tensor& t, const Tensor& s, Margin mu);

/// transfer_loss applied to r(s), backpropagated through the connector.
ConnectorLossGrad transfer_loss_through(TransferMethod method, const Tensor& t, const Tensor& s, Connector& r,
                                        Margin mu);

}  // namespace abd
