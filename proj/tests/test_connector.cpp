#include <gtest/gtest.h>

#include "abd/connector.hpp"
#include "test_util.hpp"

namespace abd {
namespace {

using test::random_tensor;

TEST(Connector, IdentityWeightsReproduceInput) {
  Rng rng(1);
  const Tensor x = random_tensor({4, 6}, rng);
  Connector d = Connector::identity_weights(ConnectorKind::Dense, 6);
  EXPECT_EQ(d.apply(x), x);
  EXPECT_FALSE(d.params().empty());
  const Tensor xs = random_tensor({2, 3, 3, 6}, rng);
  Connector c = Connector::identity_weights(ConnectorKind::Conv1x1, 6);
  EXPECT_EQ(c.apply(xs), xs);
  Connector id = Connector::identity(6);
  EXPECT_EQ(id.apply(x, Mode::Train), x);
  EXPECT_TRUE(id.params().empty());
  EXPECT_EQ(id.backward(x), x);
}

TEST(Connector, ZeroParametersGiveZeroOutput) {
  Connector c = Connector::make(ConnectorKind::Dense, 3, 4, false, 5);
  c.weight() = Tensor({4, 3});
  c.bias() = Tensor({4});
  Rng rng(2);
  EXPECT_EQ(c.apply(random_tensor({5, 3}, rng)), Tensor({5, 4}));
}

TEST(Connector, ShapeContract) {
  const Connector d = Connector::make(ConnectorKind::Dense, 32, 64, true, 0);
  EXPECT_EQ(d.weight().shape(), (Shape{64, 32}));
  EXPECT_TRUE(d.has_batchnorm());
  const Connector c = Connector::make(ConnectorKind::Conv1x1, 32, 64, true, 0);
  EXPECT_EQ(c.weight().shape(), (Shape{1, 1, 32, 64}));
  Rng rng(3);
  EXPECT_EQ(c.apply(random_tensor({2, 4, 4, 32}, rng)).shape(), (Shape{2, 4, 4, 64}));
  EXPECT_THROW(c.apply(random_tensor({2, 32}, rng)), ShapeError);
  EXPECT_THROW(d.apply(random_tensor({2, 31}, rng)), ShapeError);
  EXPECT_THROW(Connector::make(ConnectorKind::Dense, 0, 4, false, 0), std::invalid_argument);
  EXPECT_THROW(Connector::identity(0), std::invalid_argument);
}

TEST(Connector, SeededInitializationIsDeterministic) {
  Connector a = Connector::make(ConnectorKind::Dense, 7, 5, true, 99);
  Connector b = Connector::make(ConnectorKind::Dense, 7, 5, true, 99);
  Connector c = Connector::make(ConnectorKind::Dense, 7, 5, true, 100);
  auto pa = a.params(), pb = b.params();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value);
  EXPECT_NE(a.weight(), c.weight());
}

TEST(Connector, DenseMatchesMatmulOracle) {
  Rng rng(4);
  Connector c = Connector::make(ConnectorKind::Dense, 5, 3, false, 2);
  c.bias() = random_tensor({3}, rng);
  const Tensor x = random_tensor({6, 5}, rng);
  const Tensor y = c.apply(x);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t o = 0; o < 3; ++o) {
      double s = c.bias()[o];
      for (std::size_t k = 0; k < 5; ++k) s += c.weight().at(o, k) * x.at(i, k);
      EXPECT_NEAR(y.at(i, o), s, 1e-12);
    }
}

TEST(Connector, Conv1x1EqualsDenseAtEveryPosition) {
  Rng rng(5);
  Connector conv = Connector::make(ConnectorKind::Conv1x1, 4, 3, false, 8);
  conv.bias() = random_tensor({3}, rng);
  Connector dense = Connector::make(ConnectorKind::Dense, 4, 3, false, 0);
  dense.weight() = transpose(conv.weight().reshaped({4, 3}));
  dense.bias() = conv.bias();
  const Tensor x = random_tensor({2, 3, 5, 4}, rng);
  const Tensor y = conv.apply(x);
  const Tensor flat = dense.apply(x.reshaped({30, 4}));
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], flat[i], 1e-12);
}

TEST(Connector, BackwardMatchesFiniteDifferences) {
  Rng rng(6);
  for (ConnectorKind kind : {ConnectorKind::Dense, ConnectorKind::Conv1x1}) {
    for (bool bn : {false, true}) {
      Connector c = Connector::make(kind, 3, 4, bn, 11);
      Tensor x = random_tensor({3, 2, 2, 3}, rng);
      const Tensor proj = random_tensor({3, 2, 2, 4}, rng);
      auto loss = [&] { return test::dot(proj, c.apply(x, Mode::Train)); };
      c.apply(x, Mode::Train);
      const Tensor dx = c.backward(proj);
      std::vector<Tensor> analytic;
      for (Param* p : c.params()) analytic.push_back(p->grad);
      EXPECT_LE(test::max_rel_err_floor(dx, test::numeric_grad(loss, x), 1e-6), 1e-5);
      // With batchnorm the bias gradient is exactly zero; judge it on the
      // scale of the largest parameter gradient.
      std::vector<Tensor> fds;
      double scale = 0.0;
      for (Param* p : c.params()) {
        fds.push_back(test::numeric_grad(loss, p->value));
        scale = std::max(scale, test::max_abs(fds.back()));
      }
      const auto ps = c.params();
      for (std::size_t i = 0; i < ps.size(); ++i) {
        EXPECT_LE(test::max_rel_err_floor(analytic[i], fds[i], 1e-3 * scale), 1e-5)
            << to_string(kind) << ' ' << ps[i]->name << " bn " << bn;
      }
    }
  }
}

TEST(Connector, CopiesAreIndependent) {
  Connector a = Connector::make(ConnectorKind::Dense, 2, 2, true, 3);
  Connector b = a;
  b.weight()[0] += 1.0;
  EXPECT_NE(a.weight()[0], b.weight()[0]);
  EXPECT_EQ(a.parameter_count(), b.parameter_count());
}

}  // namespace
}  // namespace abd
