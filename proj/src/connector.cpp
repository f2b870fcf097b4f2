#include "abd/connector.hpp"

#include <stdexcept>

namespace abd {

std::string_view to_string(ConnectorKind kind) {
  switch (kind) {
    case ConnectorKind::Identity:
      return "identity";
    case ConnectorKind::Dense:
      return "dense";
    case ConnectorKind::Conv1x1:
      return "conv1x1";
  }
  return "unknown";
}

Connector::Connector(ConnectorKind kind, std::size_t in, std::size_t out) : kind_(kind), in_(in), out_(out) {
  if (in == 0 || out == 0) throw std::invalid_argument("connector dimensions must be positive");
  if (kind == ConnectorKind::Identity && in != out) {
    throw std::invalid_argument("identity connector needs equal channel counts, got " + std::to_string(in) +
                                " -> " + std::to_string(out));
  }
  if (kind == ConnectorKind::Dense) linear_ = std::make_unique<DenseLayer>(in, out);
  if (kind == ConnectorKind::Conv1x1) linear_ = std::make_unique<ConvLayer>(1, in, out);
}

Connector::Connector(const Connector& other)
    : kind_(other.kind_), in_(other.in_), out_(other.out_), unbatched_(other.unbatched_) {
  if (other.linear_) linear_ = other.linear_->clone();
  if (other.bn_) bn_ = std::make_unique<BatchNormLayer>(*other.bn_);
}

Connector& Connector::operator=(const Connector& other) {
  if (this != &other) {
    Connector tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

Connector Connector::identity(std::size_t channels) {
  return Connector(ConnectorKind::Identity, channels, channels);
}

Connector Connector::make(ConnectorKind kind, std::size_t in, std::size_t out, bool with_batchnorm,
                          std::uint64_t seed) {
  Connector c(kind, in, out);
  if (c.linear_) {
    Rng rng(seed);
    c.linear_->initialize(rng);
  }
  if (with_batchnorm && kind != ConnectorKind::Identity) c.bn_ = std::make_unique<BatchNormLayer>(out);
  return c;
}

Connector Connector::identity_weights(ConnectorKind kind, std::size_t channels) {
  if (kind == ConnectorKind::Identity) return identity(channels);
  Connector c(kind, channels, channels);
  Tensor& w = c.weight();
  w.fill(0.0);
  // Dense is out x in, conv1x1 is 1 x 1 x in x out; both are square here.
  for (std::size_t i = 0; i < channels; ++i) w[i * channels + i] = 1.0;
  return c;
}

Tensor& Connector::weight() {
  if (!linear_) throw std::logic_error("identity connector has no weight");
  return linear_->params()[0].value;
}

const Tensor& Connector::weight() const {
  if (!linear_) throw std::logic_error("identity connector has no weight");
  return linear_->params()[0].value;
}

Tensor& Connector::bias() {
  if (!linear_) throw std::logic_error("identity connector has no bias");
  return linear_->params()[1].value;
}

Tensor Connector::check_input(const Tensor& s, bool& unbatched) const {
  if (s.empty() || s.shape().back() != in_) {
    throw ShapeError("connector expects " + std::to_string(in_) + " input channels, got " + to_string(s.shape()));
  }
  // Rank 1 (vector) and rank 3 (H x W x N) are single samples.
  unbatched = s.rank() == 1 || s.rank() == 3;
  Tensor x = s;
  if (unbatched) {
    Shape b{1};
    b.insert(b.end(), s.shape().begin(), s.shape().end());
    x = s.reshaped(b);
  }
  if (kind_ == ConnectorKind::Conv1x1 && x.rank() != 4) {
    throw ShapeError("conv1x1 connector needs spatial responses, got " + to_string(s.shape()));
  }
  return x;
}

Tensor Connector::apply(const Tensor& s, Mode mode) {
  if (mode == Mode::Eval) return static_cast<const Connector&>(*this).apply(s);
  bool unbatched = false;
  Tensor x = check_input(s, unbatched);
  unbatched_ = unbatched;
  if (linear_) x = linear_->forward_train(x);
  if (bn_) x = bn_->forward_train(x);
  if (unbatched) x = x.reshaped(Shape(x.shape().begin() + 1, x.shape().end()));
  return x;
}

Tensor Connector::apply(const Tensor& s) const {
  bool unbatched = false;
  Tensor x = check_input(s, unbatched);
  if (linear_) x = linear_->forward_eval(x);
  if (bn_) x = bn_->forward_eval(x);
  if (unbatched) x = x.reshaped(Shape(x.shape().begin() + 1, x.shape().end()));
  return x;
}

Tensor Connector::backward(const Tensor& dout) {
  Tensor g = dout;
  if (unbatched_) {
    Shape b{1};
    b.insert(b.end(), dout.shape().begin(), dout.shape().end());
    g = dout.reshaped(b);
  }
  if (bn_) g = bn_->backward(g);
  if (linear_) g = linear_->backward(g);
  if (unbatched_) g = g.reshaped(Shape(g.shape().begin() + 1, g.shape().end()));
  return g;
}

std::vector<Param*> Connector::params() {
  std::vector<Param*> out;
  if (linear_)
    for (auto& p : linear_->params()) out.push_back(&p);
  if (bn_)
    for (auto& p : bn_->params()) out.push_back(&p);
  return out;
}

std::size_t Connector::parameter_count() const {
  std::size_t n = 0;
  if (linear_)
    for (const auto& p : linear_->params()) n += p.value.size();
  if (bn_)
    for (const auto& p : bn_->params()) n += p.value.size();
  return n;
}

}  // namespace abd
