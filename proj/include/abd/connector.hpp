#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "abd/nn.hpp"

namespace abd {

enum class ConnectorKind { Identity, Dense, Conv1x1 };

std::string_view to_string(ConnectorKind kind);

/// Trainable map from student response space (N channels) to teacher
/// response space (M channels): a dense or 1x1-conv layer, optionally
/// followed by batchnorm. Used only while initializing the student.
///
/// Dense weights are M x N and act on the last axis, so a dense connector
/// also applies position-wise to H x W x N responses. Conv1x1 weights are
/// 1 x 1 x N x M and require spatial input.
class Connector {
 public:
  /// Pass-through with no parameters.
  static Connector identity(std::size_t channels);
  /// Seeded initialization; with_batchnorm is the usual configuration.
  static Connector make(ConnectorKind kind, std::size_t in, std::size_t out, bool with_batchnorm,
                        std::uint64_t seed);
  /// Linear connector with identity weights and zero bias, no batchnorm.
  /// r(x) = x exactly, but the weights remain trainable.
  static Connector identity_weights(ConnectorKind kind, std::size_t channels);

  Connector(const Connector& other);
  Connector& operator=(const Connector& other);
  Connector(Connector&&) noexcept = default;
  Connector& operator=(Connector&&) noexcept = default;

  ConnectorKind kind() const { return kind_; }
  std::size_t in_channels() const { return in_; }
  std::size_t out_channels() const { return out_; }
  bool has_batchnorm() const { return bn_ != nullptr; }

  /// Train mode caches for backward (batchnorm uses batch statistics).
  Tensor apply(const Tensor& s, Mode mode);
  Tensor apply(const Tensor& s) const;
  /// Sets connector parameter gradients and returns dL/ds.
  Tensor backward(const Tensor& dout);

  std::vector<Param*> params();
  std::size_t parameter_count() const;

  /// Weight of the linear part (M x N or 1 x 1 x N x M); throws for identity.
  Tensor& weight();
  const Tensor& weight() const;
  Tensor& bias();

 private:
  Connector(ConnectorKind kind, std::size_t in, std::size_t out);

  Tensor check_input(const Tensor& s, bool& unbatched) const;

  ConnectorKind kind_;
  std::size_t in_;
  std::size_t out_;
  std::unique_ptr<Layer> linear_;
  std::unique_ptr<BatchNormLayer> bn_;
  bool unbatched_ = false;
};

}  // namespace abd
