#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "abd/data.hpp"
#include "abd/nn.hpp"
#include "abd/optim.hpp"
#include "abd/metrics.hpp"

namespace abd {
namespace {

namespace fs = std::filesystem;

void put32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<unsigned char>(v >> s));
}

std::vector<unsigned char> image_file(std::uint32_t n, std::uint32_t rows, std::uint32_t cols,
                                      std::uint32_t magic = 0x803) {
  std::vector<unsigned char> b;
  put32(b, magic);
  put32(b, n);
  put32(b, rows);
  put32(b, cols);
  for (std::uint32_t i = 0; i < n * rows * cols; ++i) b.push_back(static_cast<unsigned char>(i * 37 % 256));
  return b;
}

std::vector<unsigned char> label_file(std::vector<unsigned char> labels) {
  std::vector<unsigned char> b;
  put32(b, 0x801);
  put32(b, static_cast<std::uint32_t>(labels.size()));
  b.insert(b.end(), labels.begin(), labels.end());
  return b;
}

class IdxFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("abd_idx_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::vector<unsigned char>& bytes) {
    const fs::path p = dir_ / name;
    std::ofstream os(p, std::ios::binary);
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    return p.string();
  }

  fs::path dir_;
};

TEST_F(IdxFiles, ParsesHandBuiltFiles) {
  const auto img = write("img", image_file(3, 2, 4));
  const auto lab = write("lab", label_file({2, 0, 1}));
  const Dataset ds = load_idx(img, lab);
  EXPECT_EQ(ds.inputs.shape(), (Shape{3, 2, 4, 1}));
  EXPECT_EQ(ds.labels, (std::vector<int>{2, 0, 1}));
  EXPECT_EQ(ds.num_classes, 3u);
  for (std::size_t i = 0; i < ds.inputs.size(); ++i) {
    EXPECT_DOUBLE_EQ(ds.inputs[i], static_cast<double>(i * 37 % 256) / 255.0);
    EXPECT_GE(ds.inputs[i], 0.0);
    EXPECT_LE(ds.inputs[i], 1.0);
  }
  ASSERT_EQ(ds.norm.mean.size(), 1u);
}

TEST_F(IdxFiles, LabelMagicAsImagesIsRejected) {
  const auto lab = write("lab", label_file({0, 1}));
  try {
    load_idx(lab, lab);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("0x00000801"), std::string::npos) << e.what();
  }
}

TEST_F(IdxFiles, TruncationNamesExpectedAndActualBytes) {
  auto bytes = image_file(4, 3, 3);
  bytes.resize(bytes.size() - 5);
  const auto img = write("img", bytes);
  const auto lab = write("lab", label_file({0, 1, 0, 1}));
  try {
    load_idx(img, lab);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("expected 52 bytes"), std::string::npos) << msg;
    EXPECT_NE(msg.find("got 47"), std::string::npos) << msg;
  }
}

TEST_F(IdxFiles, CountMismatchAndMissingFile) {
  const auto img = write("img", image_file(3, 2, 2));
  const auto lab = write("lab", label_file({0, 1}));
  EXPECT_THROW(load_idx(img, lab), DataError);
  EXPECT_THROW(load_idx((dir_ / "nope").string(), lab), DataError);
}

TEST(Digits, BundledFilesLoad) {
  const std::string dir = ABD_DATA_DIR "/digits/";
  const Dataset train = load_idx(dir + "train-images-idx3-ubyte", dir + "train-labels-idx1-ubyte");
  const Dataset test = load_idx(dir + "test-images-idx3-ubyte", dir + "test-labels-idx1-ubyte");
  EXPECT_EQ(train.inputs.shape(), (Shape{1437, 8, 8, 1}));
  EXPECT_EQ(test.inputs.shape(), (Shape{360, 8, 8, 1}));
  EXPECT_EQ(train.num_classes, 10u);
  EXPECT_NO_THROW(train.validate());
}

TEST(Normalize, ZeroMeanUnitVariance) {
  Dataset ds = make_synthetic(SyntheticKind::Blobs, 200, 4, 0.5, 3);
  const NormalizationStats st = channel_stats(ds.inputs);
  normalize(ds, st);
  const NormalizationStats after = channel_stats(ds.inputs);
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_NEAR(after.mean[c], 0.0, 1e-12);
    EXPECT_NEAR(after.stddev[c], 1.0, 1e-12);
  }
}

TEST(Synthetic, DeterministicPerSeed) {
  for (auto kind : {SyntheticKind::Blobs, SyntheticKind::Moons, SyntheticKind::Spirals}) {
    const std::size_t classes = kind == SyntheticKind::Moons ? 2 : 3;
    const Dataset a = make_synthetic(kind, 301, classes, 0.1, 7);
    const Dataset b = make_synthetic(kind, 301, classes, 0.1, 7);
    const Dataset c = make_synthetic(kind, 301, classes, 0.1, 8);
    EXPECT_EQ(a.inputs, b.inputs);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_NE(a.inputs, c.inputs);
    EXPECT_EQ(a.inputs.shape(), (Shape{301, 2}));
  }
}

TEST(Synthetic, ClassCountsDifferByAtMostOne) {
  for (std::size_t n : {10u, 101u, 997u}) {
    const Dataset ds = make_synthetic(SyntheticKind::Spirals, n, 3, 0.2, 1);
    std::map<int, std::size_t> counts;
    for (int y : ds.labels) ++counts[y];
    ASSERT_EQ(counts.size(), 3u);
    std::size_t lo = n, hi = 0;
    for (auto [c, k] : counts) {
      lo = std::min(lo, k);
      hi = std::max(hi, k);
    }
    EXPECT_LE(hi - lo, 1u);
  }
}

TEST(Synthetic, NoiselessBlobsSitOnTheirCenters) {
  const Dataset ds = make_synthetic(SyntheticKind::Blobs, 60, 3, 0.0, 5);
  std::map<int, std::pair<double, double>> first;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto [it, fresh] = first.emplace(ds.labels[i], std::pair{ds.inputs.at(i, 0), ds.inputs.at(i, 1)});
    if (!fresh) {
      EXPECT_EQ(ds.inputs.at(i, 0), it->second.first);
      EXPECT_EQ(ds.inputs.at(i, 1), it->second.second);
    }
  }
  EXPECT_EQ(first.size(), 3u);
}

TEST(Synthetic, MoonsAreLearnableByASmallMlp) {
  Dataset ds = make_synthetic(SyntheticKind::Moons, 1000, 2, 0.1, 2);
  normalize(ds, channel_stats(ds.inputs));
  Network net = Network::from_arch("in:2,dense:32,relu,dense:32,relu,dense:2", 1);
  auto params = net.params();
  SgdConfig cfg;
  cfg.weight_decay = 0.0;
  SgdState st;
  for (std::size_t epoch = 0; epoch < 40; ++epoch) {
    for (const Batch& b : batches(ds, 32, epoch)) {
      const ForwardResult r = net.forward(b.inputs, Mode::Train);
      const LossGrad lg = softmax_cross_entropy(r.logits, b.labels);
      net.backward(&lg.grad, {});
      sgd_step(params, st, cfg, epoch / 40.0);
    }
  }
  EXPECT_LE(error_rate(net, ds), 5.0);
}

TEST(Synthetic, RejectsBadArguments) {
  EXPECT_THROW(make_synthetic(SyntheticKind::Blobs, 2, 3, 0.1, 0), std::invalid_argument);
  EXPECT_THROW(make_synthetic(SyntheticKind::Moons, 100, 3, 0.1, 0), std::invalid_argument);
  EXPECT_THROW(parse_synthetic_kind("circles"), std::invalid_argument);
  EXPECT_EQ(parse_synthetic_kind("moons"), SyntheticKind::Moons);
}

Dataset balanced(std::size_t per_class, std::size_t classes) {
  Dataset ds;
  const std::size_t n = per_class * classes;
  ds.inputs = Tensor({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    ds.inputs[i] = static_cast<double>(i);
    ds.labels.push_back(static_cast<int>(i % classes));
  }
  ds.num_classes = classes;
  return ds;
}

std::map<int, std::size_t> class_counts(const Dataset& ds) {
  std::map<int, std::size_t> m;
  for (int y : ds.labels) ++m[y];
  return m;
}

TEST(Subsample, TenPercentOfBalancedTenClasses) {
  const Dataset ds = balanced(100, 10);
  const Dataset s = subsample(ds, 0.1, 3);
  EXPECT_EQ(s.size(), 100u);
  for (auto [c, k] : class_counts(s)) EXPECT_EQ(k, 10u) << "class " << c;
  for (std::size_t i = 0; i < s.size(); ++i)
    EXPECT_EQ(static_cast<int>(s.inputs[i]) % 10, s.labels[i]);
}

TEST(Subsample, FullFractionKeepsEverySample) {
  const Dataset ds = balanced(7, 3);
  const Dataset s = subsample(ds, 1.0, 9);
  std::vector<double> a(ds.inputs.data().begin(), ds.inputs.data().end());
  std::vector<double> b(s.inputs.data().begin(), s.inputs.data().end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

TEST(Subsample, SeedsChooseDifferentSubsetsOfEqualSize) {
  const Dataset ds = balanced(50, 4);
  const Dataset a = subsample(ds, 0.2, 1), b = subsample(ds, 0.2, 2), a2 = subsample(ds, 0.2, 1);
  EXPECT_EQ(class_counts(a), class_counts(b));
  EXPECT_NE(a.inputs, b.inputs);
  EXPECT_EQ(a.inputs, a2.inputs);
}

TEST(Subsample, RoundsUpPerClassAndValidatesFraction) {
  Dataset ds = balanced(10, 2);
  ds.labels[0] = 1;  // class 0 now has 9, class 1 has 11
  const auto counts = class_counts(subsample(ds, 0.15, 0));
  EXPECT_EQ(counts.at(0), 2u);
  EXPECT_EQ(counts.at(1), 2u);
  EXPECT_THROW(subsample(ds, 0.0, 0), std::invalid_argument);
  EXPECT_THROW(subsample(ds, 1.5, 0), std::invalid_argument);
  EXPECT_THROW(subsample(ds, 1e-12, 0), DataError);
}

TEST(Batches, EveryIndexOncePerEpoch) {
  for (std::size_t n : {1u, 10u, 65u}) {
    for (std::size_t bs : {1u, 8u, 64u, 100u}) {
      const auto order = batch_order(n, bs, 5);
      std::vector<std::size_t> all;
      for (const auto& b : order) {
        EXPECT_LE(b.size(), bs);
        all.insert(all.end(), b.begin(), b.end());
      }
      std::sort(all.begin(), all.end());
      for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(all[i], i);
      EXPECT_EQ(all.size(), n);
      if (bs >= n) EXPECT_EQ(order.size(), 1u);
    }
  }
  EXPECT_EQ(batch_order(50, 7, 3), batch_order(50, 7, 3));
  EXPECT_NE(batch_order(50, 7, 3), batch_order(50, 7, 4));
  EXPECT_THROW(batch_order(5, 0, 0), std::invalid_argument);
}

TEST(Batches, CarryMatchingLabels) {
  const Dataset ds = balanced(6, 3);
  std::size_t seen = 0;
  for (const Batch& b : batches(ds, 4, 11)) {
    for (std::size_t i = 0; i < b.labels.size(); ++i)
      EXPECT_EQ(static_cast<int>(b.inputs[i]) % 3, b.labels[i]);
    seen += b.labels.size();
  }
  EXPECT_EQ(seen, 18u);
}

TEST(Dataset, ValidateCatchesBrokenInvariants) {
  Dataset ds = balanced(2, 2);
  EXPECT_NO_THROW(ds.validate());
  ds.labels.push_back(0);
  EXPECT_THROW(ds.validate(), DataError);
  ds.labels.pop_back();
  ds.labels[0] = 5;
  EXPECT_THROW(ds.validate(), DataError);
}

}  // namespace
}  // namespace abd
