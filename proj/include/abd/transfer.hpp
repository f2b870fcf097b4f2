#pragma once

// Two-stage transfer: stage 1 initializes the student so that its hidden
// responses reproduce the teacher's activation states, stage 2 trains it for
// classification without the connectors.

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "abd/connector.hpp"
#include "abd/data.hpp"
#include "abd/distill.hpp"
#include "abd/nn.hpp"
#include "abd/optim.hpp"

namespace abd {

enum class Stage2Loss { CrossEntropy, Kd };

std::string_view to_string(Stage2Loss loss);
/// Accepts "ce" and "kd".
Stage2Loss parse_stage2_loss(std::string_view name);

struct TrainConfig {
  std::size_t epochs_init = 10;
  std::size_t epochs_train = 10;
  SgdConfig init_sgd;  // stage 1
  SgdConfig sgd;       // stage 2
  std::size_t batch_size = 64;
  double margin = 1.0;
  std::uint64_t seed = 0;
  TransferMethod method = TransferMethod::Proposed;
  Stage2Loss stage2 = Stage2Loss::CrossEntropy;
  KdConfig kd;
  double fraction = 1.0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Epoch count for a data fraction. Below reference_fraction the count grows
/// as reference_fraction / fraction so the number of iterations stays about
/// constant; the result never exceeds max_epochs. reference_fraction <= 0
/// disables scaling.
std::size_t scaled_epochs(std::size_t epochs, double fraction, double reference_fraction, std::size_t max_epochs);

enum class ConnectorPolicy {
  Auto,    // connector only where channel counts differ
  Always,  // connector at every pair
  None,    // never; channel counts must match
};

std::string_view to_string(ConnectorPolicy p);
ConnectorPolicy parse_connector_policy(std::string_view name);

struct TransferPair {
  std::size_t teacher_point = 0;  // transfer point ordinals
  std::size_t student_point = 0;
  Connector connector;
  double weight = 1.0;
};

struct TransferPlan {
  std::shared_ptr<const Network> teacher;
  Network student;
  std::vector<TransferPair> pairs;
};

struct PlanOptions {
  ConnectorPolicy policy = ConnectorPolicy::Auto;
  bool batchnorm = true;
  /// Per-pair weights in teacher point order; empty means all 1.
  std::vector<double> weights;
};

/// Pairs teacher and student transfer points of equal spatial size. Within a
/// size group, points pair in network order with the student's deepest points
/// (vector responses form one group). Dense connectors serve vector
/// responses, 1x1 convolutions serve spatial ones.
TransferPlan build_transfer_plan(std::shared_ptr<const Network> teacher, Network student, const PlanOptions& opts,
                                 std::uint64_t seed);

/// Stage 1. Trains the student layers up to the deepest paired point and the
/// connectors on the weighted sum of per-pair transfer losses; labels are
/// never read. Returns the mean per-sample loss of every epoch.
std::vector<double> initialize_student(TransferPlan& plan, const Dataset& ds, const TrainConfig& cfg);

struct TrainCurve {
  std::vector<double> loss;   // mean training loss per epoch
  std::vector<double> error;  // eval error (%) per epoch, when an eval set is given
};

/// Stage 2 (also used to train teachers). kd needs the teacher.
TrainCurve train_student(Network& student, const Dataset& ds, const TrainConfig& cfg, const Network* teacher = nullptr,
                         const Dataset* eval = nullptr);

/// Drops the connectors and returns the student.
Network discard(TransferPlan&& plan);

}  // namespace abd
