#include "abd/nn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "abd/kernels.hpp"

namespace abd {

namespace {

// Views x as rows x last-axis.
std::size_t rows_of(const Tensor& x) { return x.size() / x.shape().back(); }

void add_bias_rows(Tensor& y, const Tensor& bias) {
  const std::size_t n = bias.size();
  const std::size_t rows = y.size() / n;
  const auto& k = kernels::active();
  for (std::size_t r = 0; r < rows; ++r) k.add(y.raw() + r * n, bias.raw(), y.raw() + r * n, n);
}

Tensor column_sums(const Tensor& m2) {
  const std::size_t rows = m2.dim(0), n = m2.dim(1);
  Tensor out({n});
  const auto& k = kernels::active();
  for (std::size_t r = 0; r < rows; ++r) k.add(out.raw(), m2.raw() + r * n, out.raw(), n);
  return out;
}

void require_cache(const Tensor& cache, const char* layer) {
  if (cache.empty()) {
    throw std::logic_error(std::string(layer) + ": backward called without a train-mode forward pass");
  }
}

Shape replace_last(Shape s, std::size_t last) {
  s.back() = last;
  return s;
}

}  // namespace

// ---------------------------------------------------------------- dense

DenseLayer::DenseLayer(std::size_t in, std::size_t out) : in_(in), out_(out) {
  if (in == 0 || out == 0) throw std::invalid_argument("dense layer dimensions must be positive");
  params_.push_back({"weight", Tensor({out, in}), Tensor({out, in})});
  params_.push_back({"bias", Tensor({out}), Tensor({out})});
}

std::string DenseLayer::token() const { return "dense:" + std::to_string(out_); }

Shape DenseLayer::output_shape(const Shape& in) const {
  if (in.empty() || in.back() != in_) {
    throw ShapeError("dense layer expects last axis " + std::to_string(in_) + ", got " + to_string(in));
  }
  return replace_last(in, out_);
}

Tensor DenseLayer::forward_eval(const Tensor& x) const {
  if (x.rank() < 2 || x.shape().back() != in_) {
    throw ShapeError("dense layer expects [batch x .. x " + std::to_string(in_) + "], got " +
                     to_string(x.shape()));
  }
  const Tensor x2 = x.reshaped({rows_of(x), in_});
  Tensor y = matmul(x2, transpose(weight()));
  add_bias_rows(y, bias());
  return y.reshaped(replace_last(x.shape(), out_));
}

Tensor DenseLayer::forward_train(const Tensor& x) {
  Tensor y = forward_eval(x);
  input_ = x;
  return y;
}

Tensor DenseLayer::backward(const Tensor& dy) {
  require_cache(input_, "dense");
  const std::size_t rows = rows_of(input_);
  const Tensor dy2 = dy.reshaped({rows, out_});
  const Tensor x2 = input_.reshaped({rows, in_});
  params_[0].grad = matmul(transpose(dy2), x2);
  params_[1].grad = column_sums(dy2);
  return matmul(dy2, weight()).reshaped(input_.shape());
}

void DenseLayer::initialize(Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in_));
  for (double& w : weight().data()) w = rng.uniform(-bound, bound);
  bias().fill(0.0);
}

// ---------------------------------------------------------------- conv

ConvLayer::ConvLayer(std::size_t kernel, std::size_t in_channels, std::size_t out_channels,
                     std::size_t stride)
    : geom_{kernel, kernel, stride, same_padding(kernel)}, in_(in_channels), out_(out_channels) {
  if (kernel != 1 && kernel != 3) {
    throw std::invalid_argument("conv kernel size must be 1 or 3, got " + std::to_string(kernel));
  }
  if (in_channels == 0 || out_channels == 0 || stride == 0) {
    throw std::invalid_argument("conv layer dimensions must be positive");
  }
  const Shape ks{kernel, kernel, in_channels, out_channels};
  params_.push_back({"kernel", Tensor(ks), Tensor(ks)});
  params_.push_back({"bias", Tensor({out_channels}), Tensor({out_channels})});
}

std::string ConvLayer::token() const {
  std::string t = (geom_.kernel_h == 3 ? "conv3:" : "conv1:") + std::to_string(out_);
  if (geom_.stride != 1) t += "/" + std::to_string(geom_.stride);
  return t;
}

Shape ConvLayer::output_shape(const Shape& in) const {
  if (in.size() != 3 || in[2] != in_) {
    throw ShapeError("conv layer expects H x W x " + std::to_string(in_) + ", got " + to_string(in));
  }
  return {geom_.out_h(in[0]), geom_.out_w(in[1]), out_};
}

Tensor ConvLayer::apply(const Tensor& cols, const Shape& in_shape) const {
  const std::size_t patch = geom_.kernel_h * geom_.kernel_w * in_;
  Tensor y = matmul(cols, kernel().reshaped({patch, out_}));
  add_bias_rows(y, params_[1].value);
  return y.reshaped({in_shape[0], geom_.out_h(in_shape[1]), geom_.out_w(in_shape[2]), out_});
}

Tensor ConvLayer::forward_eval(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(3) != in_) {
    throw ShapeError("conv layer expects N x H x W x " + std::to_string(in_) + ", got " +
                     to_string(x.shape()));
  }
  return apply(im2col(x, geom_), x.shape());
}

Tensor ConvLayer::forward_train(const Tensor& x) {
  if (x.rank() != 4 || x.dim(3) != in_) {
    throw ShapeError("conv layer expects N x H x W x " + std::to_string(in_) + ", got " +
                     to_string(x.shape()));
  }
  cols_ = im2col(x, geom_);
  input_shape_ = x.shape();
  return apply(cols_, input_shape_);
}

Tensor ConvLayer::backward(const Tensor& dy) {
  require_cache(cols_, "conv");
  const std::size_t patch = geom_.kernel_h * geom_.kernel_w * in_;
  const Tensor dy2 = dy.reshaped({cols_.dim(0), out_});
  params_[0].grad = matmul(transpose(cols_), dy2).reshaped(kernel().shape());
  params_[1].grad = column_sums(dy2);
  const Tensor dcols = matmul(dy2, transpose(kernel().reshaped({patch, out_})));
  return col2im(dcols, input_shape_, geom_);
}

void ConvLayer::initialize(Rng& rng) {
  const double fan_in = static_cast<double>(geom_.kernel_h * geom_.kernel_w * in_);
  const double bound = std::sqrt(6.0 / fan_in);
  for (double& w : kernel().data()) w = rng.uniform(-bound, bound);
  bias().fill(0.0);
}

// ---------------------------------------------------------------- relu

Tensor ReluLayer::forward_eval(const Tensor& x) const { return max_scalar(x, 0.0); }

Tensor ReluLayer::forward_train(const Tensor& x) {
  input_ = x;
  return max_scalar(x, 0.0);
}

Tensor ReluLayer::backward(const Tensor& dy) {
  require_cache(input_, "relu");
  if (dy.shape() != input_.shape()) {
    throw ShapeError("relu backward: gradient " + to_string(dy.shape()) + " vs input " +
                     to_string(input_.shape()));
  }
  Tensor dx(input_.shape());
  kernels::active().relu_backward(input_.raw(), dy.raw(), dx.raw(), dx.size());
  return dx;
}

// ---------------------------------------------------------------- batchnorm

BatchNormLayer::BatchNormLayer(std::size_t channels) : channels_(channels) {
  if (channels == 0) throw std::invalid_argument("batchnorm channels must be positive");
  params_.push_back({"gamma", Tensor({channels}, 1.0), Tensor({channels})});
  params_.push_back({"beta", Tensor({channels}), Tensor({channels})});
  buffers_.push_back(Tensor({channels}, 0.0));
  buffers_.push_back(Tensor({channels}, 1.0));
}

Tensor BatchNormLayer::forward_eval(const Tensor& x) const {
  if (x.shape().back() != channels_) {
    throw ShapeError("batchnorm expects " + std::to_string(channels_) + " channels, got " +
                     to_string(x.shape()));
  }
  const std::size_t rows = rows_of(x);
  Tensor y(x.shape());
  const Tensor& g = params_[0].value;
  const Tensor& b = params_[1].value;
  for (std::size_t c = 0; c < channels_; ++c) {
    const double inv = 1.0 / std::sqrt(buffers_[1][c] + kEpsilon);
    const double mean = buffers_[0][c];
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t i = r * channels_ + c;
      y[i] = g[c] * ((x[i] - mean) * inv) + b[c];
    }
  }
  return y;
}

Tensor BatchNormLayer::forward_train(const Tensor& x) {
  if (x.rank() < 2 || x.shape().back() != channels_) {
    throw ShapeError("batchnorm expects [batch x .. x " + std::to_string(channels_) + "], got " +
                     to_string(x.shape()));
  }
  const std::size_t rows = rows_of(x);
  const double inv_rows = 1.0 / static_cast<double>(rows);
  std::vector<double> mean(channels_, 0.0), var(channels_, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < channels_; ++c) mean[c] += x[r * channels_ + c];
  for (double& m : mean) m *= inv_rows;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < channels_; ++c) {
      const double d = x[r * channels_ + c] - mean[c];
      var[c] += d * d;
    }
  }
  for (double& v : var) v *= inv_rows;

  inv_std_.assign(channels_, 0.0);
  xhat_ = Tensor(x.shape());
  Tensor y(x.shape());
  const Tensor& g = params_[0].value;
  const Tensor& b = params_[1].value;
  for (std::size_t c = 0; c < channels_; ++c) inv_std_[c] = 1.0 / std::sqrt(var[c] + kEpsilon);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < channels_; ++c) {
      const std::size_t i = r * channels_ + c;
      xhat_[i] = (x[i] - mean[c]) * inv_std_[c];
      y[i] = g[c] * xhat_[i] + b[c];
    }
  }
  const double unbias = rows > 1 ? static_cast<double>(rows) / static_cast<double>(rows - 1) : 1.0;
  for (std::size_t c = 0; c < channels_; ++c) {
    buffers_[0][c] = kMomentum * buffers_[0][c] + (1.0 - kMomentum) * mean[c];
    buffers_[1][c] = kMomentum * buffers_[1][c] + (1.0 - kMomentum) * var[c] * unbias;
  }
  return y;
}

Tensor BatchNormLayer::backward(const Tensor& dy) {
  require_cache(xhat_, "batchnorm");
  const std::size_t rows = rows_of(xhat_);
  const double n = static_cast<double>(rows);
  Tensor dgamma({channels_}), dbeta({channels_});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < channels_; ++c) {
      const std::size_t i = r * channels_ + c;
      dgamma[c] += dy[i] * xhat_[i];
      dbeta[c] += dy[i];
    }
  }
  Tensor dx(xhat_.shape());
  const Tensor& g = params_[0].value;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < channels_; ++c) {
      const std::size_t i = r * channels_ + c;
      dx[i] = g[c] * inv_std_[c] / n * (n * dy[i] - dbeta[c] - xhat_[i] * dgamma[c]);
    }
  }
  params_[0].grad = std::move(dgamma);
  params_[1].grad = std::move(dbeta);
  return dx;
}

// ---------------------------------------------------------------- pooling / flatten

Shape GlobalAvgPoolLayer::output_shape(const Shape& in) const {
  if (in.size() != 3) throw ShapeError("global average pool expects H x W x C, got " + to_string(in));
  return {in[2]};
}

Tensor GlobalAvgPoolLayer::forward_eval(const Tensor& x) const {
  if (x.rank() != 4) throw ShapeError("global average pool expects N x H x W x C, got " + to_string(x.shape()));
  const std::size_t n = x.dim(0), hw = x.dim(1) * x.dim(2), c = x.dim(3);
  Tensor y({n, c});
  const double inv = 1.0 / static_cast<double>(hw);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t p = 0; p < hw; ++p)
      for (std::size_t ch = 0; ch < c; ++ch) y[b * c + ch] += x[(b * hw + p) * c + ch];
    for (std::size_t ch = 0; ch < c; ++ch) y[b * c + ch] *= inv;
  }
  return y;
}

Tensor GlobalAvgPoolLayer::forward_train(const Tensor& x) {
  Tensor y = forward_eval(x);
  input_shape_ = x.shape();
  return y;
}

Tensor GlobalAvgPoolLayer::backward(const Tensor& dy) {
  if (input_shape_.empty()) throw std::logic_error("gap: backward called without a train-mode forward pass");
  const std::size_t n = input_shape_[0], hw = input_shape_[1] * input_shape_[2], c = input_shape_[3];
  Tensor dx(input_shape_);
  const double inv = 1.0 / static_cast<double>(hw);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t p = 0; p < hw; ++p)
      for (std::size_t ch = 0; ch < c; ++ch) dx[(b * hw + p) * c + ch] = dy[b * c + ch] * inv;
  return dx;
}

Tensor FlattenLayer::forward_eval(const Tensor& x) const {
  return x.reshaped({x.dim(0), x.size() / x.dim(0)});
}

Tensor FlattenLayer::forward_train(const Tensor& x) {
  input_shape_ = x.shape();
  return forward_eval(x);
}

Tensor FlattenLayer::backward(const Tensor& dy) {
  if (input_shape_.empty()) throw std::logic_error("flatten: backward called without a train-mode forward pass");
  return dy.reshaped(input_shape_);
}

// ---------------------------------------------------------------- losses

Tensor softmax(const Tensor& logits, double temperature) {
  const Tensor z = logits.rank() == 1 ? logits.reshaped({1, logits.size()}) : logits;
  if (z.rank() != 2) throw ShapeError("softmax expects batch x classes, got " + to_string(logits.shape()));
  const std::size_t b = z.dim(0), k = z.dim(1);
  Tensor p(z.shape());
  for (std::size_t i = 0; i < b; ++i) {
    double mx = z[i * k];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, z[i * k + j]);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      p[i * k + j] = std::exp((z[i * k + j] - mx) / temperature);
      total += p[i * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) p[i * k + j] /= total;
  }
  return logits.rank() == 1 ? p.reshaped(logits.shape()) : p;
}

LossGrad softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const Tensor z = logits.rank() == 1 ? logits.reshaped({1, logits.size()}) : logits;
  if (z.rank() != 2) {
    throw ShapeError("cross entropy expects batch x classes, got " + to_string(logits.shape()));
  }
  const std::size_t b = z.dim(0), k = z.dim(1);
  if (labels.size() != b) {
    throw ShapeError("cross entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(b));
  }
  LossGrad out{0.0, Tensor(z.shape())};
  const double inv_b = 1.0 / static_cast<double>(b);
  for (std::size_t i = 0; i < b; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw std::out_of_range("label " + std::to_string(y) + " out of range for " + std::to_string(k) +
                              " classes");
    }
    double mx = z[i * k];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, z[i * k + j]);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += std::exp(z[i * k + j] - mx);
    const double lse = mx + std::log(total);
    out.loss += (lse - z[i * k + static_cast<std::size_t>(y)]) * inv_b;
    for (std::size_t j = 0; j < k; ++j) {
      const double pj = std::exp(z[i * k + j] - lse);
      out.grad[i * k + j] = (pj - (static_cast<int>(j) == y ? 1.0 : 0.0)) * inv_b;
    }
  }
  if (logits.rank() == 1) out.grad = out.grad.reshaped(logits.shape());
  return out;
}

}  // namespace abd
