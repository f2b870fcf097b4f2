#include "abd/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "abd/errors.hpp"
#include "abd/metrics.hpp"
#include "abd/rng.hpp"

namespace abd {

std::string_view to_string(Stage2Loss loss) { return loss == Stage2Loss::Kd ? "kd" : "ce"; }

Stage2Loss parse_stage2_loss(std::string_view name) {
  if (name == "ce") return Stage2Loss::CrossEntropy;
  if (name == "kd") return Stage2Loss::Kd;
  throw std::invalid_argument("unknown stage-2 loss '" + std::string(name) + "' (expected ce or kd)");
}

std::string_view to_string(ConnectorPolicy p) {
  switch (p) {
    case ConnectorPolicy::Auto:
      return "auto";
    case ConnectorPolicy::Always:
      return "always";
    case ConnectorPolicy::None:
      return "none";
  }
  return "unknown";
}

ConnectorPolicy parse_connector_policy(std::string_view name) {
  if (name == "auto") return ConnectorPolicy::Auto;
  if (name == "always") return ConnectorPolicy::Always;
  if (name == "none") return ConnectorPolicy::None;
  throw std::invalid_argument("unknown connector policy '" + std::string(name) + "' (expected auto, always or none)");
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be at least 1");
  if (!(margin > 0.0)) throw ConfigError("transfer.margin must be positive");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("data.fraction must be in (0, 1]");
  try {
    init_sgd.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("transfer.sgd: ") + e.what());
  }
  try {
    sgd.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("train.sgd: ") + e.what());
  }
  if (!(kd.temperature > 0.0)) throw ConfigError("train.kd.temperature must be positive");
  if (!(kd.alpha >= 0.0 && kd.alpha <= 1.0)) throw ConfigError("train.kd.alpha must be in [0, 1]");
}

std::size_t scaled_epochs(std::size_t epochs, double fraction, double reference_fraction, std::size_t max_epochs) {
  if (reference_fraction <= 0.0 || fraction >= reference_fraction) return std::min(epochs, max_epochs);
  const double scaled = std::ceil(static_cast<double>(epochs) * reference_fraction / fraction - 1e-9);
  return std::min(static_cast<std::size_t>(scaled), max_epochs);
}

namespace {

struct PointInfo {
  std::size_t ordinal;
  Shape shape;
};

// Vector responses share the key (0, 0).
std::pair<std::size_t, std::size_t> size_key(const Shape& s) {
  if (s.size() == 3) return {s[0], s[1]};
  return {0, 0};
}

std::string describe(const Network& net) {
  std::ostringstream os;
  for (std::size_t k = 0; k < net.transfer_points().size(); ++k) {
    if (k) os << ", ";
    os << "layer " << net.transfer_points()[k] << ' ' << to_string(net.response_shape(k));
  }
  if (net.transfer_points().empty()) os << "none";
  return os.str();
}

void check_finite(double v, const char* stage, std::size_t epoch) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string(stage) + " loss became " + (std::isnan(v) ? "NaN" : "infinite") + " in epoch " +
                       std::to_string(epoch + 1));
  }
}

// Weighted transfer loss over the whole set as one batch. Batchnorm uses the
// statistics of the full set, so the value depends only on the parameters and
// not on how the epoch's batches fell. Runs on copies: running statistics of
// the plan stay untouched.
double stage1_loss(const TransferPlan& plan, const Dataset& ds, TransferMethod method, Margin mu, std::size_t s_end,
                   std::size_t t_end) {
  Network student = plan.student;
  const ForwardResult t = plan.teacher->evaluate(ds.inputs, t_end);
  const ForwardResult s = student.forward(ds.inputs, Mode::Train, s_end);
  double total = 0.0;
  for (const auto& p : plan.pairs) {
    Connector r = p.connector;
    const Tensor mapped = r.apply(s.responses[p.student_point], Mode::Train);
    total += p.weight * transfer_loss(method, t.responses[p.teacher_point], mapped, mu).loss;
  }
  return total;
}

}  // namespace

TransferPlan build_transfer_plan(std::shared_ptr<const Network> teacher, Network student, const PlanOptions& opts,
                                 std::uint64_t seed) {
  if (!teacher) throw std::invalid_argument("transfer plan needs a teacher");
  if (teacher->transfer_points().empty() || student.transfer_points().empty()) {
    throw std::invalid_argument("teacher and student need at least one transfer point (teacher: " + describe(*teacher) +
                                "; student: " + describe(student) + ")");
  }
  if (teacher->input_shape() != student.input_shape()) {
    throw std::invalid_argument("teacher input " + to_string(teacher->input_shape()) + " differs from student input " +
                                to_string(student.input_shape()));
  }

  std::map<std::pair<std::size_t, std::size_t>, std::vector<PointInfo>> t_groups, s_groups;
  for (std::size_t k = 0; k < teacher->transfer_points().size(); ++k) {
    const Shape sh = teacher->response_shape(k);
    t_groups[size_key(sh)].push_back({k, sh});
  }
  for (std::size_t k = 0; k < student.transfer_points().size(); ++k) {
    const Shape sh = student.response_shape(k);
    s_groups[size_key(sh)].push_back({k, sh});
  }

  std::vector<std::pair<PointInfo, PointInfo>> matched;
  for (const auto& [key, tpoints] : t_groups) {
    const auto it = s_groups.find(key);
    const std::size_t available = it == s_groups.end() ? 0 : it->second.size();
    if (available < tpoints.size()) {
      throw std::invalid_argument("no student transfer point matches teacher response " +
                                  to_string(tpoints[available].shape) + " (teacher: " + describe(*teacher) +
                                  "; student: " + describe(student) + ")");
    }
    const std::size_t offset = available - tpoints.size();
    for (std::size_t i = 0; i < tpoints.size(); ++i) matched.emplace_back(tpoints[i], it->second[offset + i]);
  }
  std::sort(matched.begin(), matched.end(),
            [](const auto& a, const auto& b) { return a.first.ordinal < b.first.ordinal; });

  if (!opts.weights.empty() && opts.weights.size() != matched.size()) {
    throw std::invalid_argument("got " + std::to_string(opts.weights.size()) + " layer weights for " +
                                std::to_string(matched.size()) + " transfer pairs");
  }

  TransferPlan plan{std::move(teacher), std::move(student), {}};
  const std::uint64_t conn_seed = derive_seed(seed, streams::kConnectorInit);
  for (std::size_t i = 0; i < matched.size(); ++i) {
    const auto& [tp, sp] = matched[i];
    const std::size_t m = tp.shape.back(), n = sp.shape.back();
    const ConnectorKind kind = tp.shape.size() == 3 ? ConnectorKind::Conv1x1 : ConnectorKind::Dense;
    const bool need = opts.policy == ConnectorPolicy::Always || (opts.policy == ConnectorPolicy::Auto && m != n);
    if (!need && m != n) {
      throw std::invalid_argument("teacher response " + to_string(tp.shape) + " and student response " +
                                  to_string(sp.shape) + " differ in channels but connectors are disabled");
    }
    Connector c = need ? Connector::make(kind, n, m, opts.batchnorm, derive_seed(conn_seed, i))
                       : Connector::identity(m);
    const double w = opts.weights.empty() ? 1.0 : opts.weights[i];
    if (!(w >= 0.0)) throw std::invalid_argument("layer weights must be non-negative");
    plan.pairs.push_back({tp.ordinal, sp.ordinal, std::move(c), w});
  }
  return plan;
}

std::vector<double> initialize_student(TransferPlan& plan, const Dataset& ds, const TrainConfig& cfg) {
  if (ds.inputs.empty() || ds.inputs.dim(0) == 0) throw DataError("stage 1 needs a non-empty dataset");
  if (cfg.epochs_init == 0 || cfg.method == TransferMethod::None || plan.pairs.empty()) return {};
  if (cfg.batch_size == 0) throw ConfigError("train.batch_size must be at least 1");

  const Network& teacher = *plan.teacher;
  Network& student = plan.student;
  std::size_t s_end = 0, t_end = 0;
  for (const auto& p : plan.pairs) {
    s_end = std::max(s_end, student.transfer_points()[p.student_point] + 1);
    t_end = std::max(t_end, teacher.transfer_points()[p.teacher_point] + 1);
  }

  std::vector<Param*> params = student.params(s_end);
  for (auto& p : plan.pairs)
    for (Param* q : p.connector.params()) params.push_back(q);
  SgdState state;

  const Margin mu(cfg.margin);
  const std::size_t n = ds.inputs.dim(0);
  const std::uint64_t batch_seed = derive_seed(cfg.seed, streams::kInitBatches);
  std::vector<double> curve;
  std::vector<Tensor> response_grads(student.transfer_points().size());

  for (std::size_t epoch = 0; epoch < cfg.epochs_init; ++epoch) {
    const double frac = static_cast<double>(epoch) / static_cast<double>(cfg.epochs_init);
    for (const auto& idx : batch_order(n, cfg.batch_size, derive_seed(batch_seed, epoch))) {
      const Tensor x = ds.gather_inputs(idx);
      const ForwardResult t = teacher.evaluate(x, t_end);
      const ForwardResult s = student.forward(x, Mode::Train, s_end);
      for (auto& g : response_grads) g = Tensor();

      double batch_loss = 0.0;
      for (auto& p : plan.pairs) {
        ConnectorLossGrad lg = transfer_loss_through(cfg.method, t.responses[p.teacher_point],
                                                     s.responses[p.student_point], p.connector, mu);
        batch_loss += p.weight * lg.loss;
        if (p.weight != 1.0) {
          lg.grad_s = scale(lg.grad_s, p.weight);
          for (Param* q : p.connector.params()) q->grad = scale(q->grad, p.weight);
        }
        Tensor& slot = response_grads[p.student_point];
        slot = slot.empty() ? std::move(lg.grad_s) : add(slot, lg.grad_s);
      }
      student.backward(nullptr, response_grads);
      sgd_step(params, state, cfg.init_sgd, frac);
      check_finite(batch_loss, "stage-1", epoch);
    }
    curve.push_back(stage1_loss(plan, ds, cfg.method, mu, s_end, t_end));
    check_finite(curve.back(), "stage-1", epoch);
  }
  student.clear_cache();
  return curve;
}

TrainCurve train_student(Network& student, const Dataset& ds, const TrainConfig& cfg, const Network* teacher,
                         const Dataset* eval) {
  if (cfg.stage2 == Stage2Loss::Kd && !teacher) throw ConfigError("train.loss = kd requires a teacher");
  if (ds.size() == 0) throw DataError("training needs a non-empty dataset");
  if (cfg.batch_size == 0) throw ConfigError("train.batch_size must be at least 1");

  std::vector<Param*> params = student.params();
  SgdState state;
  const std::uint64_t batch_seed = derive_seed(cfg.seed, streams::kTrainBatches);
  TrainCurve curve;

  for (std::size_t epoch = 0; epoch < cfg.epochs_train; ++epoch) {
    const double frac = static_cast<double>(epoch) / static_cast<double>(cfg.epochs_train);
    double total = 0.0;
    for (const Batch& b : batches(ds, cfg.batch_size, derive_seed(batch_seed, epoch))) {
      const ForwardResult r = student.forward(b.inputs, Mode::Train);
      LossGrad lg = cfg.stage2 == Stage2Loss::Kd
                        ? kd_loss(teacher->evaluate(b.inputs).logits, r.logits, b.labels, cfg.kd)
                        : softmax_cross_entropy(r.logits, b.labels);
      student.backward(&lg.grad, {});
      sgd_step(params, state, cfg.sgd, frac);
      total += lg.loss * static_cast<double>(b.labels.size());
    }
    const double mean = total / static_cast<double>(ds.size());
    check_finite(mean, "training", epoch);
    curve.loss.push_back(mean);
    if (eval) curve.error.push_back(error_rate(student, *eval));
  }
  student.clear_cache();
  return curve;
}

Network discard(TransferPlan&& plan) {
  plan.pairs.clear();
  return std::move(plan.student);
}

}  // namespace abd
