#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>
#include <stdexcept>

#include "abd/nn.hpp"

namespace abd {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::size_t parse_count(std::string_view text, std::string_view token) {
  std::size_t v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || v == 0) {
    throw std::invalid_argument("bad number '" + std::string(text) + "' in architecture token '" +
                                std::string(token) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::unique_ptr<Layer> make_layer(std::string_view token, const Shape& in) {
  const auto colon = token.find(':');
  const std::string_view name = token.substr(0, colon);
  const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : token.substr(colon + 1);
  if (name == "dense") {
    if (in.empty()) throw std::invalid_argument("dense layer needs an input shape");
    return std::make_unique<DenseLayer>(in.back(), parse_count(arg, token));
  }
  if (name == "conv3" || name == "conv1") {
    if (in.size() != 3) {
      throw std::invalid_argument("'" + std::string(token) + "' needs an H x W x C input, got " + to_string(in));
    }
    const auto parts = split(arg, '/');
    const std::size_t filters = parse_count(parts[0], token);
    const std::size_t stride = parts.size() > 1 ? parse_count(parts[1], token) : 1;
    return std::make_unique<ConvLayer>(name == "conv3" ? 3 : 1, in[2], filters, stride);
  }
  if (!arg.empty()) throw std::invalid_argument("unexpected argument in token '" + std::string(token) + "'");
  if (name == "relu") return std::make_unique<ReluLayer>();
  if (name == "bn") return std::make_unique<BatchNormLayer>(in.back());
  if (name == "gap") return std::make_unique<GlobalAvgPoolLayer>();
  if (name == "flatten") return std::make_unique<FlattenLayer>();
  throw std::invalid_argument("unknown layer token '" + std::string(token) + "'");
}

}  // namespace

Network::Network(Shape input_shape, std::vector<std::unique_ptr<Layer>> layers,
                 std::vector<std::size_t> transfer_points)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)),
      transfer_points_(std::move(transfer_points)) {
  if (input_shape_.empty() || input_shape_.size() > 3) {
    throw std::invalid_argument("network input must have 1 to 3 per-sample axes");
  }
  if (layers_.empty()) throw std::invalid_argument("network has no layers");
  Shape s = input_shape_;
  for (const auto& l : layers_) s = l->output_shape(s);
  std::sort(transfer_points_.begin(), transfer_points_.end());
  for (std::size_t tp : transfer_points_) {
    if (tp + 1 >= layers_.size() || layers_[tp + 1]->kind() != LayerKind::Relu) {
      throw std::invalid_argument("transfer point at layer " + std::to_string(tp) +
                                  " must be followed by a relu layer");
    }
    if (layers_[tp]->kind() == LayerKind::Relu) {
      throw std::invalid_argument("transfer point at layer " + std::to_string(tp) + " is itself a relu");
    }
  }
  if (std::adjacent_find(transfer_points_.begin(), transfer_points_.end()) != transfer_points_.end()) {
    throw std::invalid_argument("duplicate transfer point");
  }
}

Network::Network(const Network& other)
    : input_shape_(other.input_shape_), transfer_points_(other.transfer_points_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
  cached_end_ = other.cached_end_;
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

Network Network::parse_arch(std::string_view arch) {
  const auto tokens = split(arch, ',');
  if (tokens.empty()) throw std::invalid_argument("empty architecture string");
  const std::string_view first = trim(tokens[0]);
  if (first.substr(0, 3) != "in:") {
    throw std::invalid_argument("architecture must start with 'in:<shape>', got '" + std::string(first) + "'");
  }
  Shape input;
  for (auto d : split(first.substr(3), 'x')) input.push_back(parse_count(d, first));

  std::vector<std::unique_ptr<Layer>> layers;
  std::vector<std::size_t> points;
  std::vector<Shape> out_shapes;
  Shape s = input;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    std::string_view tok = trim(tokens[i]);
    bool marked = false;
    if (!tok.empty() && tok.back() == '@') {
      marked = true;
      tok.remove_suffix(1);
    }
    auto layer = make_layer(tok, s);
    s = layer->output_shape(s);
    out_shapes.push_back(s);
    if (marked) points.push_back(layers.size());
    layers.push_back(std::move(layer));
  }

  if (points.empty()) {
    // Dense responses: every relu-feeding layer. Spatial responses: the last
    // relu-feeding layer of each spatial size.
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> last_by_size;
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
      if (layers[i + 1]->kind() != LayerKind::Relu || layers[i]->kind() == LayerKind::Relu) continue;
      const Shape& os = out_shapes[i];
      if (os.size() == 1) {
        points.push_back(i);
      } else if (os.size() == 3) {
        last_by_size[{os[0], os[1]}] = i;
      }
    }
    for (const auto& [size, idx] : last_by_size) points.push_back(idx);
  }
  return Network(std::move(input), std::move(layers), std::move(points));
}

Network Network::from_arch(std::string_view arch, std::uint64_t seed) {
  Network net = parse_arch(arch);
  net.initialize(seed);
  return net;
}

void Network::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& l : layers_) l->initialize(rng);
}

std::string Network::arch() const {
  std::string out = "in:";
  for (std::size_t i = 0; i < input_shape_.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(input_shape_[i]);
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    out += ',';
    out += layers_[i]->token();
    if (std::binary_search(transfer_points_.begin(), transfer_points_.end(), i)) out += '@';
  }
  return out;
}

Shape Network::output_shape() const {
  Shape s = input_shape_;
  for (const auto& l : layers_) s = l->output_shape(s);
  return s;
}

Shape Network::response_shape(std::size_t k) const {
  const std::size_t tp = transfer_points_.at(k);
  Shape s = input_shape_;
  for (std::size_t i = 0; i <= tp; ++i) s = layers_[i]->output_shape(s);
  return s;
}

Tensor Network::check_input(const Tensor& input, bool& unbatched) const {
  const auto& sh = input.shape();
  unbatched = sh == input_shape_;
  if (unbatched) {
    Shape b{1};
    b.insert(b.end(), sh.begin(), sh.end());
    return input.reshaped(b);
  }
  if (sh.size() != input_shape_.size() + 1 || !std::equal(input_shape_.begin(), input_shape_.end(), sh.begin() + 1)) {
    throw ShapeError("network expects input " + to_string(input_shape_) + " (optionally batched), got " +
                     to_string(sh));
  }
  return input;
}

namespace {

Tensor drop_batch_axis(const Tensor& t) {
  Shape s(t.shape().begin() + 1, t.shape().end());
  return t.reshaped(s);
}

}  // namespace

ForwardResult Network::forward(const Tensor& input, Mode mode, std::size_t end_layer) {
  if (mode == Mode::Eval) return evaluate(input, end_layer);
  bool unbatched = false;
  Tensor x = check_input(input, unbatched);
  ForwardResult r;
  r.responses.resize(transfer_points_.size());
  const std::size_t end = std::min(end_layer, layers_.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < end; ++i) {
    x = layers_[i]->forward_train(x);
    if (k < transfer_points_.size() && transfer_points_[k] == i) r.responses[k++] = x;
  }
  cached_end_ = end;
  if (end == layers_.size()) r.logits = std::move(x);
  if (unbatched) {
    if (!r.logits.empty()) r.logits = drop_batch_axis(r.logits);
    for (auto& resp : r.responses)
      if (!resp.empty()) resp = drop_batch_axis(resp);
  }
  return r;
}

ForwardResult Network::evaluate(const Tensor& input, std::size_t end_layer) const {
  bool unbatched = false;
  Tensor x = check_input(input, unbatched);
  ForwardResult r;
  r.responses.resize(transfer_points_.size());
  const std::size_t end = std::min(end_layer, layers_.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < end; ++i) {
    x = layers_[i]->forward_eval(x);
    if (k < transfer_points_.size() && transfer_points_[k] == i) r.responses[k++] = x;
  }
  if (end == layers_.size()) r.logits = std::move(x);
  if (unbatched) {
    if (!r.logits.empty()) r.logits = drop_batch_axis(r.logits);
    for (auto& resp : r.responses)
      if (!resp.empty()) resp = drop_batch_axis(resp);
  }
  return r;
}

void Network::backward(const Tensor* dlogits, std::span<const Tensor> response_grads) {
  if (cached_end_ == 0) throw std::logic_error("network backward called without a train-mode forward pass");
  if (response_grads.size() > transfer_points_.size()) {
    throw std::invalid_argument("more response gradients than transfer points");
  }
  for (auto& l : layers_) {
    for (auto& p : l->params()) p.grad = Tensor(p.value.shape());
  }

  std::size_t start = 0;
  bool any = false;
  if (dlogits) {
    start = layers_.size() - 1;
    any = true;
  } else {
    for (std::size_t k = response_grads.size(); k-- > 0;) {
      if (!response_grads[k].empty()) {
        start = transfer_points_[k];
        any = true;
        break;
      }
    }
  }
  if (!any) return;
  if (start >= cached_end_) {
    throw std::logic_error("network backward: layer " + std::to_string(start) +
                           " was not part of the last train-mode forward pass");
  }

  // Gradients for unbatched forward passes carry no sample axis.
  auto batched = [](const Tensor& g, const Shape& per_sample) {
    if (g.shape() != per_sample) return g;
    Shape b{1};
    b.insert(b.end(), per_sample.begin(), per_sample.end());
    return g.reshaped(b);
  };

  Tensor g;
  if (dlogits) g = batched(*dlogits, output_shape());
  for (std::size_t i = start + 1; i-- > 0;) {
    const auto it = std::lower_bound(transfer_points_.begin(), transfer_points_.end(), i);
    if (it != transfer_points_.end() && *it == i) {
      const auto k = static_cast<std::size_t>(it - transfer_points_.begin());
      if (k < response_grads.size() && !response_grads[k].empty()) {
        const Tensor rg = batched(response_grads[k], response_shape(k));
        g = g.empty() ? rg : add(g, rg);
      }
    }
    if (g.empty()) continue;
    g = layers_[i]->backward(g);
  }
}

std::vector<Param*> Network::params(std::size_t end_layer) {
  std::vector<Param*> out;
  const std::size_t end = std::min(end_layer, layers_.size());
  for (std::size_t i = 0; i < end; ++i) {
    for (auto& p : layers_[i]->params()) out.push_back(&p);
  }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_)
    for (const auto& p : l->params()) n += p.value.size();
  return n;
}

void Network::clear_cache() {
  for (auto& l : layers_) l->clear_cache();
  cached_end_ = 0;
}

}  // namespace abd
