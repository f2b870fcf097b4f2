#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace abd {

// Raised when operand shapes are incompatible. The message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t num_elements(const Shape& shape);

/// Dense row-major array of doubles with 1 to 4 axes.
///
/// Batched values put the sample axis first; images are channels-last
/// (N x H x W x C). A default-constructed Tensor is an empty placeholder
/// that holds no axes.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* raw() { return data_.data(); }
  const double* raw() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  double at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  /// Same data, new shape. Element counts must agree.
  Tensor reshaped(Shape shape) const;

  void fill(double value);

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

enum class BinaryOp { Add, Sub, Mul };

Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// max(a, s) elementwise; with s = 0 this is the ReLU.
Tensor max_scalar(const Tensor& a, double s);

/// a[m x k] . b[k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

double sum(const Tensor& a);

struct Conv2dGeometry {
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t out_h(std::size_t h) const { return (h + 2 * pad - kernel_h) / stride + 1; }
  std::size_t out_w(std::size_t w) const { return (w + 2 * pad - kernel_w) / stride + 1; }
};

/// Padding that keeps spatial size for stride 1: 1 for 3x3 kernels, 0 for 1x1.
std::size_t same_padding(std::size_t kernel);

/// Unfold N x H x W x C into (N*H'*W') x (kh*kw*C) patch rows.
Tensor im2col(const Tensor& input, const Conv2dGeometry& g);
/// Adjoint of im2col: scatter-add patch rows back into an N x H x W x C tensor.
Tensor col2im(const Tensor& cols, const Shape& input_shape, const Conv2dGeometry& g);

/// Cross-correlation of H x W x C (or N x H x W x C) with a kh x kw x C x F kernel.
/// Kernel sizes are restricted to 1 and 3.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t pad);

}  // namespace abd
