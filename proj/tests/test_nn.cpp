#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "abd/nn.hpp"
#include "test_util.hpp"

namespace abd {
namespace {

using test::max_rel_err;
using test::numeric_grad;
using test::random_tensor;

// Moves entries away from the relu kink so finite differences stay on one side.
Tensor away_from_zero(Tensor x, double gap = 1e-2) {
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::abs(x[i]) < gap) x[i] = x[i] < 0 ? x[i] - gap : x[i] + gap;
  return x;
}

// Checks dx and every parameter gradient of L = <proj, layer(x)> against
// central differences.
void check_layer_gradients(Layer& layer, Tensor x, Rng& rng) {
  const Tensor y0 = layer.forward_train(x);
  const Tensor proj = random_tensor(y0.shape(), rng);
  auto loss = [&] { return test::dot(proj, layer.forward_train(x)); };

  layer.forward_train(x);
  const Tensor dx = layer.backward(proj);
  std::vector<Tensor> analytic;
  for (const auto& p : layer.params()) analytic.push_back(p.grad);

  EXPECT_LE(max_rel_err(dx, numeric_grad(loss, x)), 1e-5) << layer.token() << " input gradient";
  auto params = layer.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor fd = numeric_grad(loss, params[i].value);
    EXPECT_LE(test::max_rel_err_floor(analytic[i], fd, 1e-3 * test::max_abs(fd)), 1e-5)
        << layer.token() << " gradient of " << params[i].name;
  }
}

TEST(Layers, DenseGradients) {
  Rng rng(1);
  DenseLayer d(5, 4);
  d.initialize(rng);
  check_layer_gradients(d, random_tensor({3, 5}, rng), rng);
  check_layer_gradients(d, random_tensor({2, 3, 3, 5}, rng), rng);
}

TEST(Layers, ConvGradients) {
  Rng rng(2);
  for (auto [k, stride] : std::vector<std::pair<std::size_t, std::size_t>>{{3, 1}, {3, 2}, {1, 1}, {1, 2}}) {
    ConvLayer c(k, 3, 4, stride);
    c.initialize(rng);
    check_layer_gradients(c, random_tensor({2, 5, 4, 3}, rng), rng);
  }
}

TEST(Layers, ReluGradients) {
  Rng rng(3);
  ReluLayer r;
  check_layer_gradients(r, away_from_zero(random_tensor({4, 6}, rng)), rng);
}

TEST(Layers, BatchNormGradientsTrainMode) {
  Rng rng(4);
  BatchNormLayer bn(3);
  bn.gamma() = random_tensor({3}, rng);
  bn.beta() = random_tensor({3}, rng);
  check_layer_gradients(bn, random_tensor({5, 3}, rng), rng);
  check_layer_gradients(bn, random_tensor({2, 3, 2, 3}, rng), rng);
}

TEST(Layers, PoolAndFlattenGradients) {
  Rng rng(5);
  GlobalAvgPoolLayer gap;
  check_layer_gradients(gap, random_tensor({2, 3, 4, 5}, rng), rng);
  FlattenLayer flat;
  check_layer_gradients(flat, random_tensor({2, 3, 4, 5}, rng), rng);
}

TEST(Layers, BackwardWithoutForwardThrows) {
  DenseLayer d(2, 2);
  EXPECT_THROW(d.backward(Tensor({1, 2})), std::logic_error);
  ReluLayer r;
  EXPECT_THROW(r.backward(Tensor({1, 2})), std::logic_error);
  BatchNormLayer bn(2);
  EXPECT_THROW(bn.backward(Tensor({1, 2})), std::logic_error);
}

TEST(Layers, ReluIsMaxWithZeroAndHasNoParameters) {
  ReluLayer r;
  EXPECT_TRUE(r.params().empty());
  EXPECT_EQ(r.forward_eval(Tensor::matrix({{-1.0, 0.0, 2.5}})), Tensor::matrix({{0.0, 0.0, 2.5}}));
  r.forward_train(Tensor::matrix({{0.0}}));
  EXPECT_EQ(r.backward(Tensor::matrix({{1.0}}))[0], 0.0);
}

TEST(Layers, BatchNormRunningStatistics) {
  Rng rng(6);
  BatchNormLayer bn(2);
  for (int i = 0; i < 50; ++i) {
    Tensor x = random_tensor({16, 2}, rng);
    for (std::size_t r = 0; r < 16; ++r) x.at(r, 1) = 3.0 + 0.5 * x.at(r, 1);
    bn.forward_train(x);
  }
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_TRUE(std::isfinite(bn.running_mean()[c]));
    EXPECT_GE(bn.running_var()[c], 0.0);
  }
  EXPECT_NEAR(bn.running_mean()[1], 3.0, 0.3);
  EXPECT_NEAR(bn.running_var()[1], 0.25, 0.1);
}

TEST(Network, IdentityDenseHandExample) {
  Network net = Network::parse_arch("in:3,dense:3@,relu,dense:3");
  auto& d0 = static_cast<DenseLayer&>(net.layer(0));
  auto& d2 = static_cast<DenseLayer&>(net.layer(2));
  for (std::size_t i = 0; i < 3; ++i) {
    d0.weight().at(i, i) = 1.0;
    d2.weight().at(i, i) = 1.0;
  }
  const Tensor x = Tensor::vector({0.5, 1.5, 2.0});
  const ForwardResult r = net.evaluate(x);
  EXPECT_EQ(r.logits, x);
  EXPECT_EQ(r.responses.at(0), x);
}

TEST(Network, ResponseIsPreActivation) {
  Network net = Network::parse_arch("in:1,dense:1@,relu,dense:1");
  auto& d = static_cast<DenseLayer&>(net.layer(0));
  d.weight()[0] = 1.0;
  d.bias()[0] = -1.0;
  static_cast<DenseLayer&>(net.layer(2)).weight()[0] = 1.0;
  const ForwardResult r = net.evaluate(Tensor::vector({0.5}));
  EXPECT_DOUBLE_EQ(r.responses[0][0], -0.5);
  EXPECT_EQ(r.logits[0], 0.0);
}

// Independent forward for a dense-relu-dense-relu-dense network.
Tensor scalar_mlp(const Network& net, const Tensor& x) {
  std::vector<double> h(x.data().begin(), x.data().end());
  for (std::size_t li : {0u, 2u, 4u}) {
    const auto& d = static_cast<const DenseLayer&>(net.layer(li));
    std::vector<double> out(d.out_features());
    for (std::size_t o = 0; o < out.size(); ++o) {
      double s = d.bias()[o];
      for (std::size_t i = 0; i < h.size(); ++i) s += d.weight().at(o, i) * h[i];
      out[o] = li < 4 ? std::max(0.0, s) : s;
    }
    h = out;
  }
  return Tensor({h.size()}, h);
}

TEST(Network, MlpMatchesScalarOracle) {
  const Network net = Network::from_arch("in:4,dense:8,relu,dense:6,relu,dense:3", 11);
  Rng rng(7);
  for (int i = 0; i < 10; ++i) {
    const Tensor x = random_tensor({4}, rng);
    const Tensor got = net.evaluate(x).logits, want = scalar_mlp(net, x);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(got[k], want[k], 1e-12);
  }
}

TEST(Network, EvalIsBatchSizeInvariant) {
  Network net = Network::from_arch("in:6x6x1,conv3:4,bn,relu,conv3:4/2,bn,relu,gap,dense:3", 3);
  Rng rng(8);
  for (int i = 0; i < 3; ++i) net.forward(random_tensor({8, 6, 6, 1}, rng), Mode::Train);
  const Tensor batch = random_tensor({5, 6, 6, 1}, rng);
  const Tensor all = net.evaluate(batch).logits;
  for (std::size_t n = 0; n < 5; ++n) {
    const Tensor one(Shape{6, 6, 1}, std::vector<double>(batch.raw() + n * 36, batch.raw() + (n + 1) * 36));
    const Tensor l = net.evaluate(one).logits;
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(l[k], all.at(n, k));
  }
}

TEST(Network, BackwardMatchesFiniteDifferences) {
  Network net = Network::from_arch("in:5x5x2,conv3:3,bn@,relu,conv1:4/2,relu,flatten,dense:6@,relu,dense:3", 5);
  Rng rng(9);
  // Zero biases put every all-dead position exactly on a relu kink.
  for (Param* p : net.params())
    if (p->name == "bias") p->value = random_tensor(p->value.shape(), rng, 0.5);
  const Tensor x = random_tensor({3, 5, 5, 2}, rng);
  const ForwardResult r0 = net.forward(x, Mode::Train);
  const Tensor pl = random_tensor(r0.logits.shape(), rng);
  const Tensor p0 = random_tensor(r0.responses[0].shape(), rng);
  const Tensor p1 = random_tensor(r0.responses[1].shape(), rng);
  auto loss = [&] {
    const ForwardResult r = net.forward(x, Mode::Train);
    return test::dot(pl, r.logits) + test::dot(p0, r.responses[0]) + test::dot(p1, r.responses[1]);
  };
  loss();
  const std::vector<Tensor> rg{p0, p1};
  net.backward(&pl, rg);
  std::vector<Tensor> analytic;
  for (Param* p : net.params()) analytic.push_back(p->grad);
  // Biases feeding batchnorm have an exactly zero gradient, so the noise
  // floor is set by the largest gradient anywhere in the network.
  std::vector<Tensor> fds;
  double scale = 0.0;
  for (Param* p : net.params()) {
    fds.push_back(numeric_grad(loss, p->value));
    scale = std::max(scale, test::max_abs(fds.back()));
  }
  const auto ps = net.params();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    EXPECT_LE(test::max_rel_err_floor(analytic[i], fds[i], 1e-3 * scale), 1e-5) << i << ' ' << ps[i]->name;
    EXPECT_LE(test::max_abs(sub(analytic[i], fds[i])), 1e-6 * scale) << i << ' ' << ps[i]->name;
  }
}

TEST(Network, ResponseGradientsOnlyReachEarlierLayers) {
  Network net = Network::from_arch("in:3,dense:4@,relu,dense:4@,relu,dense:2", 2);
  Rng rng(10);
  const ForwardResult r = net.forward(random_tensor({5, 3}, rng), Mode::Train);
  const std::vector<Tensor> rg{random_tensor(r.responses[0].shape(), rng), Tensor()};
  net.backward(nullptr, rg);
  const auto ps = net.params();
  EXPECT_GT(sum(mul(ps[0]->grad, ps[0]->grad)), 0.0);
  for (std::size_t i = 2; i < ps.size(); ++i) EXPECT_EQ(sum(mul(ps[i]->grad, ps[i]->grad)), 0.0);
}

TEST(Network, ZeroUpstreamGivesZeroGradients) {
  Network net = Network::from_arch("in:3,dense:4,relu,dense:2", 1);
  Rng rng(11);
  const ForwardResult r = net.forward(random_tensor({4, 3}, rng), Mode::Train);
  const Tensor zero(r.logits.shape());
  net.backward(&zero, {});
  for (Param* p : net.params())
    for (double g : p->grad.data()) EXPECT_EQ(g, 0.0);
}

TEST(Network, OneParameterLinearLoss) {
  Network net = Network::parse_arch("in:1,dense:1");
  static_cast<DenseLayer&>(net.layer(0)).weight()[0] = 0.7;
  net.forward(Tensor::vector({2.0}), Mode::Train);
  const Tensor up = Tensor::vector({1.0});
  net.backward(&up, {});
  EXPECT_DOUBLE_EQ(net.params()[0]->grad[0], 2.0);
}

TEST(Network, BackwardWithoutForwardThrows) {
  Network net = Network::from_arch("in:2,dense:2,relu,dense:2", 0);
  const Tensor g({1, 2});
  EXPECT_THROW(net.backward(&g, {}), std::logic_error);
}

TEST(Network, TruncatedForwardMatchesFullResponses) {
  Network net = Network::from_arch("in:3,dense:4,bn,relu,dense:5,bn,relu,dense:2", 4);
  Rng rng(12);
  const Tensor x = random_tensor({6, 3}, rng);
  const ForwardResult full = net.evaluate(x);
  const ForwardResult part = net.evaluate(x, net.transfer_points()[0] + 1);
  EXPECT_TRUE(part.logits.empty());
  EXPECT_EQ(part.responses[0], full.responses[0]);
  EXPECT_TRUE(part.responses[1].empty());

  net.forward(x, Mode::Train, net.transfer_points()[0] + 1);
  const Tensor g(full.logits.shape());
  EXPECT_THROW(net.backward(&g, {}), std::logic_error);
}

TEST(Network, InputShapeMismatchThrows) {
  const Network net = Network::from_arch("in:3,dense:2", 0);
  EXPECT_THROW(net.evaluate(Tensor({2, 4})), ShapeError);
}

TEST(Arch, ParseAndRoundTrip) {
  const std::string arch = "in:8x8x1,conv3:8,bn@,relu,conv3:16/2,bn@,relu,gap,dense:10";
  const Network net = Network::parse_arch(arch);
  EXPECT_EQ(net.arch(), arch);
  EXPECT_EQ(net.output_shape(), (Shape{10}));
  EXPECT_EQ(net.response_shape(1), (Shape{4, 4, 16}));
}

TEST(Arch, AutomaticTransferPoints) {
  const Network mlp = Network::parse_arch("in:2,dense:8,bn,relu,dense:8,relu,dense:2");
  EXPECT_EQ(mlp.transfer_points(), (std::vector<std::size_t>{1, 3}));
  const Network cnn = Network::parse_arch("in:8x8x1,conv3:4,relu,conv3:4,relu,conv3:8/2,relu,gap,dense:3");
  EXPECT_EQ(cnn.transfer_points(), (std::vector<std::size_t>{2, 4}));
}

TEST(Arch, RejectsBadStrings) {
  EXPECT_THROW(Network::parse_arch("dense:3"), std::invalid_argument);
  EXPECT_THROW(Network::parse_arch("in:2,dense:x"), std::invalid_argument);
  EXPECT_THROW(Network::parse_arch("in:2,pool"), std::invalid_argument);
  EXPECT_THROW(Network::parse_arch("in:2,conv3:4"), std::invalid_argument);
  EXPECT_THROW(Network::parse_arch("in:2,dense:3@,dense:2"), std::invalid_argument);
  EXPECT_THROW(Network::parse_arch("in:4x4x1,conv5:2"), std::invalid_argument);
}

TEST(Network, SeededInitializationIsDeterministic) {
  const Network a = Network::from_arch("in:3,dense:5,relu,dense:2", 42);
  const Network b = Network::from_arch("in:3,dense:5,relu,dense:2", 42);
  const Network c = Network::from_arch("in:3,dense:5,relu,dense:2", 43);
  EXPECT_EQ(network_bytes(a), network_bytes(b));
  EXPECT_NE(network_bytes(a), network_bytes(c));
}

TEST(Serialize, RoundTripIsBitExact) {
  Network net = Network::from_arch("in:6x6x1,conv3:4,bn@,relu,conv1:3/2,bn,relu,gap,dense:2", 8);
  Rng rng(13);
  net.forward(random_tensor({4, 6, 6, 1}, rng), Mode::Train);
  const std::string bytes = network_bytes(net);
  std::istringstream is(bytes);
  const Network back = read_network(is);
  EXPECT_EQ(network_bytes(back), bytes);
  EXPECT_EQ(back.arch(), net.arch());
  const Tensor x = random_tensor({3, 6, 6, 1}, rng);
  EXPECT_EQ(back.evaluate(x).logits, net.evaluate(x).logits);
}

TEST(Serialize, HeaderIsTextAndRejectsCorruption) {
  const Network net = Network::from_arch("in:2,dense:3,relu,dense:2", 1);
  const std::string bytes = network_bytes(net);
  EXPECT_EQ(bytes.rfind("ABDNET 1\n", 0), 0u);
  std::istringstream truncated(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(read_network(truncated), std::runtime_error);
  std::istringstream trailing(bytes + "x");
  EXPECT_THROW(read_network(trailing), std::runtime_error);
  std::istringstream junk("not a model");
  EXPECT_THROW(read_network(junk), std::runtime_error);
}

double scalar_ce(const Tensor& logits, const std::vector<int>& labels) {
  const std::size_t b = logits.dim(0), k = logits.dim(1);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, logits.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(logits.at(i, j) - mx);
    total += -(logits.at(i, static_cast<std::size_t>(labels[i])) - mx - std::log(z));
  }
  return total / static_cast<double>(b);
}

TEST(CrossEntropy, UniformLogitsGiveLogK) {
  const std::vector<int> y{3, 0};
  EXPECT_NEAR(softmax_cross_entropy(Tensor({2, 7}), y).loss, std::log(7.0), 1e-15);
}

TEST(CrossEntropy, ConfidentCorrectGivesZero) {
  const std::vector<int> y{1};
  EXPECT_LT(softmax_cross_entropy(Tensor::matrix({{0.0, 800.0, 0.0}}), y).loss, 1e-300);
}

TEST(CrossEntropy, MatchesScalarOracleAndFiniteDifferences) {
  Rng rng(14);
  Tensor z = random_tensor({5, 4}, rng, 3.0);
  const std::vector<int> y{0, 3, 2, 1, 3};
  const LossGrad lg = softmax_cross_entropy(z, y);
  EXPECT_NEAR(lg.loss, scalar_ce(z, y), 1e-13);
  const Tensor fd = numeric_grad([&] { return softmax_cross_entropy(z, y).loss; }, z);
  EXPECT_LE(max_rel_err(lg.grad, fd), 1e-5);
}

TEST(CrossEntropy, LabelOutOfRange) {
  const std::vector<int> bad{2};
  EXPECT_THROW(softmax_cross_entropy(Tensor({1, 2}), bad), std::out_of_range);
  const std::vector<int> neg{-1};
  EXPECT_THROW(softmax_cross_entropy(Tensor({1, 2}), neg), std::out_of_range);
}

TEST(Softmax, RowsSumToOneAndTemperatureFlattens) {
  const Tensor z = Tensor::matrix({{1.0, 2.0, 3.0}});
  const Tensor p1 = softmax(z), p4 = softmax(z, 4.0);
  EXPECT_NEAR(sum(p1), 1.0, 1e-15);
  EXPECT_NEAR(sum(p4), 1.0, 1e-15);
  EXPECT_LT(p4[2], p1[2]);
}

}  // namespace
}  // namespace abd
