#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "abd/rng.hpp"
#include "abd/tensor.hpp"

namespace abd {

enum class Mode { Train, Eval };

enum class LayerKind { Dense, Conv3x3, Conv1x1, Relu, BatchNorm, GlobalAvgPool, Flatten };

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

/// A layer with an explicit backward pass.
///
/// Shapes passed to forward/backward are batched: the first axis is the
/// sample axis. forward_train caches whatever backward needs; calling
/// backward without a preceding forward_train throws std::logic_error.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  /// Architecture token, e.g. "dense:64", "conv3:32/2", "bn".
  virtual std::string token() const = 0;
  /// Per-sample output shape for a per-sample input shape.
  virtual Shape output_shape(const Shape& in) const = 0;

  virtual Tensor forward_eval(const Tensor& x) const = 0;
  virtual Tensor forward_train(const Tensor& x) = 0;
  /// Overwrites parameter gradients with this call's values and returns dL/dx.
  virtual Tensor backward(const Tensor& dy) = 0;

  virtual void initialize(Rng& rng) { (void)rng; }
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual void clear_cache() {}

  std::span<Param> params() { return params_; }
  std::span<const Param> params() const { return params_; }
  /// Non-trained state that is saved with the model (batchnorm statistics).
  std::span<Tensor> buffers() { return buffers_; }
  std::span<const Tensor> buffers() const { return buffers_; }

 protected:
  std::vector<Param> params_;
  std::vector<Tensor> buffers_;
};

class DenseLayer final : public Layer {
 public:
  /// Weight is out x in; the layer acts on the last axis of its input.
  DenseLayer(std::size_t in, std::size_t out);

  LayerKind kind() const override { return LayerKind::Dense; }
  std::string token() const override;
  Shape output_shape(const Shape& in) const override;
  Tensor forward_eval(const Tensor& x) const override;
  Tensor forward_train(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void initialize(Rng& rng) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<DenseLayer>(*this); }
  void clear_cache() override { input_ = {}; }

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  Tensor& weight() { return params_[0].value; }
  const Tensor& weight() const { return params_[0].value; }
  Tensor& bias() { return params_[1].value; }
  const Tensor& bias() const { return params_[1].value; }

 private:
  std::size_t in_;
  std::size_t out_;
  Tensor input_;
};

class ConvLayer final : public Layer {
 public:
  /// Kernel is k x k x in x out with "same" padding; k is 1 or 3.
  ConvLayer(std::size_t kernel, std::size_t in_channels, std::size_t out_channels,
            std::size_t stride = 1);

  LayerKind kind() const override { return geom_.kernel_h == 3 ? LayerKind::Conv3x3 : LayerKind::Conv1x1; }
  std::string token() const override;
  Shape output_shape(const Shape& in) const override;
  Tensor forward_eval(const Tensor& x) const override;
  Tensor forward_train(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void initialize(Rng& rng) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ConvLayer>(*this); }
  void clear_cache() override { cols_ = {}; }

  std::size_t in_channels() const { return in_; }
  std::size_t out_channels() const { return out_; }
  const Conv2dGeometry& geometry() const { return geom_; }
  Tensor& kernel() { return params_[0].value; }
  const Tensor& kernel() const { return params_[0].value; }
  Tensor& bias() { return params_[1].value; }

 private:
  Tensor apply(const Tensor& cols, const Shape& in_shape) const;

  Conv2dGeometry geom_;
  std::size_t in_;
  std::size_t out_;
  Shape input_shape_;
  Tensor cols_;
};

class ReluLayer final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::Relu; }
  std::string token() const override { return "relu"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward_eval(const Tensor& x) const override;
  Tensor forward_train(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReluLayer>(*this); }
  void clear_cache() override { input_ = {}; }

 private:
  Tensor input_;
};

/// Normalizes over every axis except the last (channel) axis.
class BatchNormLayer final : public Layer {
 public:
  static constexpr double kMomentum = 0.9;
  static constexpr double kEpsilon = 1e-5;

  explicit BatchNormLayer(std::size_t channels);

  LayerKind kind() const override { return LayerKind::BatchNorm; }
  std::string token() const override { return "bn"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward_eval(const Tensor& x) const override;
  Tensor forward_train(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNormLayer>(*this); }
  void clear_cache() override { xhat_ = {}; }

  std::size_t channels() const { return channels_; }
  Tensor& gamma() { return params_[0].value; }
  Tensor& beta() { return params_[1].value; }
  const Tensor& running_mean() const { return buffers_[0]; }
  const Tensor& running_var() const { return buffers_[1]; }

 private:
  std::size_t channels_;
  Tensor xhat_;
  std::vector<double> inv_std_;
};

class GlobalAvgPoolLayer final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::GlobalAvgPool; }
  std::string token() const override { return "gap"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward_eval(const Tensor& x) const override;
  Tensor forward_train(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<GlobalAvgPoolLayer>(*this); }
  void clear_cache() override { input_shape_.clear(); }

 private:
  Shape input_shape_;
};

class FlattenLayer final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::Flatten; }
  std::string token() const override { return "flatten"; }
  Shape output_shape(const Shape& in) const override { return {num_elements(in)}; }
  Tensor forward_eval(const Tensor& x) const override;
  Tensor forward_train(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<FlattenLayer>(*this); }
  void clear_cache() override { input_shape_.clear(); }

 private:
  Shape input_shape_;
};

struct ForwardResult {
  Tensor logits;
  /// Pre-activation responses, one per transfer point, in network order.
  std::vector<Tensor> responses;
};

/// Ordered layer stack with designated transfer points.
///
/// A transfer point is a layer whose output feeds a ReLU; its output is the
/// pre-activation response exported for distillation.
///
/// Architecture strings are comma separated, starting with the per-sample
/// input shape:
///
///     in:8x8x1,conv3:16,bn@,relu,conv3:32/2,bn@,relu,gap,dense:10
///
/// Tokens: dense:N, conv3:F[/stride], conv1:F[/stride], bn, relu, gap,
/// flatten. A trailing '@' marks a transfer point. Without any '@', every
/// dense layer feeding a ReLU is a transfer point, and for spatial layers
/// the last ReLU-feeding layer of each spatial size is.
class Network {
 public:
  Network(Shape input_shape, std::vector<std::unique_ptr<Layer>> layers,
          std::vector<std::size_t> transfer_points);
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  /// Builds and initializes a network from an architecture string.
  static Network from_arch(std::string_view arch, std::uint64_t seed);
  /// Builds the layer stack without random initialization (all zeros).
  static Network parse_arch(std::string_view arch);

  std::string arch() const;
  const Shape& input_shape() const { return input_shape_; }
  Shape output_shape() const;
  std::size_t num_layers() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }

  /// Layer indices of the transfer points, ascending.
  const std::vector<std::size_t>& transfer_points() const { return transfer_points_; }
  /// Per-sample shape of the response at transfer point ordinal k.
  Shape response_shape(std::size_t k) const;

  void initialize(std::uint64_t seed);

  /// Train mode caches intermediates for backward and updates batchnorm
  /// running statistics; eval mode uses the running statistics.
  ///
  /// With end_layer set, only layers [0, end_layer) run: logits stay empty
  /// and only the responses of transfer points inside that range are filled.
  ForwardResult forward(const Tensor& input, Mode mode, std::size_t end_layer = SIZE_MAX);
  ForwardResult evaluate(const Tensor& input, std::size_t end_layer = SIZE_MAX) const;

  /// Backpropagates from the logits (when given) and from per-transfer-point
  /// response gradients (empty tensors mean absent). Parameter gradients are
  /// overwritten; layers after the deepest signal receive zero gradients.
  void backward(const Tensor* dlogits, std::span<const Tensor> response_grads);

  /// Parameters of layers [0, end_layer); all layers by default.
  std::vector<Param*> params(std::size_t end_layer = SIZE_MAX);
  std::size_t parameter_count() const;

  void clear_cache();

 private:
  Tensor check_input(const Tensor& input, bool& unbatched) const;

  Shape input_shape_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<std::size_t> transfer_points_;
  std::size_t cached_end_ = 0;  // layers [0, cached_end_) hold train caches
};

struct LossGrad {
  double loss = 0.0;
  Tensor grad;
};

/// Mean softmax cross-entropy over the batch; grad = (softmax - onehot) / batch.
LossGrad softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

Tensor softmax(const Tensor& logits, double temperature = 1.0);

// Model files: a text header (one line per layer) followed by raw
// little-endian float64 arrays in layer order.
void save_network(const Network& net, const std::string& path);
void write_network(const Network& net, std::ostream& os);
Network load_network(const std::string& path);
Network read_network(std::istream& is);
std::string network_bytes(const Network& net);

}  // namespace abd
