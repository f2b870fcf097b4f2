#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "abd/experiment.hpp"

namespace abd {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string config_error(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("abd_exp_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

json tiny_run(const fs::path& out) {
  return {{"data", {{"synthetic", {{"n_train", 200}, {"n_test", 200}}}}},
          {"teacher", {{"arch", "in:2,dense:16,bn,relu,dense:16,bn,relu,dense:2"}, {"epochs", 3}}},
          {"student", {{"arch", "in:2,dense:16,bn,relu,dense:16,bn,relu,dense:2"}}},
          {"transfer", {{"epochs", 2}}},
          {"train", {{"epochs", 2}}},
          {"output_dir", out.string()},
          {"run_id", "tiny"}};
}

TEST(Config, DefaultsParse) {
  const RunConfig c = parse_config(json::object());
  EXPECT_EQ(c.data.source, "synthetic");
  EXPECT_EQ(c.transfer.method, TransferMethod::Proposed);
  EXPECT_EQ(c.transfer.margin, 1.0);
  EXPECT_EQ(c.train.kd.temperature, 4.0);
  EXPECT_EQ(c.train.kd.alpha, 0.9);
  EXPECT_EQ(c.train.sgd.schedule.size(), 3u);
}

TEST(Config, UnknownKeysAreRejected) {
  EXPECT_NE(config_error({{"trian", {{"epochs", 3}}}}).find("trian"), std::string::npos);
  EXPECT_NE(config_error({{"train", {{"epoch", 3}}}}).find("train.epoch"), std::string::npos);
}

TEST(Config, TypeAndRangeErrorsNameTheKey) {
  EXPECT_NE(config_error({{"train", {{"epochs", "ten"}}}}).find("train.epochs"), std::string::npos);
  EXPECT_NE(config_error({{"transfer", {{"margin", -1.0}}}}).find("transfer.margin"), std::string::npos);
  EXPECT_NE(config_error({{"transfer", {{"method", "fitnet"}}}}).find("transfer.method"), std::string::npos);
  EXPECT_NE(config_error({{"student", {{"arch", "in:2,dense:x"}}}}).find("student.arch"), std::string::npos);
  EXPECT_NE(config_error({{"train", {{"sgd", {{"schedule", {{0.5}}}}}}}}).find("train.sgd.schedule"),
            std::string::npos);
}

TEST(Config, IdxSourceNeedsExistingPath) {
  EXPECT_NE(config_error({{"data", {{"source", "idx"}}}}).find("data.path"), std::string::npos);
  EXPECT_NE(config_error({{"data", {{"source", "idx"}, {"path", "/no/such/dir"}}}}).find("data.path"),
            std::string::npos);
}

TEST_F(TempDir, PathsResolveAgainstConfigDirectory) {
  fs::create_directories(dir_ / "sub");
  std::ofstream(dir_ / "sub" / "c.json") << R"({"data": {"source": "idx", "path": "../data"}, "teacher": {"model": "t.model"}})";
  fs::create_directories(dir_ / "data");
  const RunConfig c = load_config((dir_ / "sub" / "c.json").string());
  EXPECT_EQ(fs::weakly_canonical(c.data.path), fs::weakly_canonical(dir_ / "data"));
  EXPECT_EQ(c.teacher.model, dir_ / "sub" / "t.model");
  std::ofstream(dir_ / "bad.json") << "{ not json";
  EXPECT_THROW(load_config((dir_ / "bad.json").string()), ConfigError);
}

TEST(Config, ReferenceListsEveryKey) {
  const std::string ref = config_reference();
  for (const char* key : {"data.source", "data.path", "data.fraction", "teacher.arch", "teacher.model",
                          "student.arch", "transfer.method", "transfer.margin", "transfer.epochs",
                          "transfer.layer_weights", "transfer.connector", "train.epochs", "train.loss",
                          "train.kd.temperature", "train.sgd.lr", "train.sgd.schedule", "sweep.margins", "seed",
                          "output_dir", "run_id"}) {
    EXPECT_NE(ref.find(key), std::string::npos) << key;
  }
}

TEST(Results, HeaderIsExact) {
  EXPECT_EQ(ResultsRow::header(2),
            "run_id,method,margin,fraction,epochs_init,epochs_train,seed,test_error_pct,similarity_layer1_pct,"
            "similarity_layer2_pct,wall_seconds");
}

TEST(Results, NoneRowsLeaveSimilarityEmpty) {
  ResultsRow r;
  r.run_id = "x";
  r.layers = 2;
  r.test_error_pct = 12.5;
  EXPECT_EQ(r.csv_deterministic(), "x,none,1,1,0,0,0,12.5000,,");
  r.method = TransferMethod::Proposed;
  r.similarity = {99.0, 97.25};
  r.wall_seconds = 1.5;
  EXPECT_EQ(r.csv(), "x,proposed,1,1,0,0,0,12.5000,99.0000,97.2500,1.500");
}

TEST_F(TempDir, AppendRowChecksHeader) {
  ResultsRow r;
  r.layers = 1;
  append_row(dir_ / "r.csv", r);
  append_row(dir_ / "r.csv", r);
  std::ifstream is(dir_ / "r.csv");
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) ++n;
  EXPECT_EQ(n, 3u);
  r.layers = 3;
  EXPECT_THROW(append_row(dir_ / "r.csv", r), ConfigError);
}

TEST(EpochPlan, ScalesBothStagesBelowReferenceFraction) {
  RunConfig c = parse_config({{"data", {{"fraction", 0.01}}}, {"transfer", {{"epochs", 2}}}, {"train", {{"epochs", 3}}}});
  const TrainConfig tc = train_config(c, 0, 1.0, TransferMethod::Proposed);
  EXPECT_EQ(tc.epochs_init, 20u);
  EXPECT_EQ(tc.epochs_train, 30u);
  EXPECT_EQ(train_config(c, 0, 1.0, TransferMethod::None).epochs_init, 0u);
}

TEST_F(TempDir, RerunReproducesRowsAndModels) {
  json j = tiny_run(dir_ / "a");
  j["sweep"] = {{"methods", {"none", "mse", "proposed"}}};
  const auto rows_a = run_experiment(parse_config(j));
  j["output_dir"] = (dir_ / "b").string();
  const auto rows_b = run_experiment(parse_config(j));
  ASSERT_EQ(rows_a.size(), 3u);
  ASSERT_EQ(rows_b.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(rows_a[i].csv_deterministic(), rows_b[i].csv_deterministic());
    const std::string name = student_model_name("tiny", rows_a[i].method, rows_a[i].margin, rows_a[i].seed);
    const std::string a = slurp(dir_ / "a" / name), b = slurp(dir_ / "b" / name);
    EXPECT_FALSE(a.empty()) << name;
    EXPECT_EQ(a, b) << name;
    EXPECT_EQ(a.find("connector"), std::string::npos);
  }
  EXPECT_TRUE(rows_a[0].similarity.empty());
  EXPECT_EQ(rows_a[2].similarity.size(), 2u);
}

TEST_F(TempDir, MarginSweepWritesOneRowPerMargin) {
  json j = tiny_run(dir_);
  j["sweep"] = {{"margins", {0.75, 1, 2, 4}}};
  j["train"]["epochs"] = 1;
  const auto rows = run_experiment(parse_config(j));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[3].margin, 4.0);
  std::ifstream is(dir_ / "results.csv");
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) ++n;
  EXPECT_EQ(n, 5u);
}

TEST_F(TempDir, MissingTeacherFileIsDataError) {
  json j = tiny_run(dir_);
  j["teacher"]["model"] = (dir_ / "absent.model").string();
  EXPECT_THROW(run_experiment(parse_config(j)), DataError);
}

}  // namespace
}  // namespace abd
