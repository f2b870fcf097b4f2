#pragma once

// Run configuration, results rows and the experiment driver behind the CLI.
//
// Configs are JSON objects. Unknown keys are rejected; every key and default
// is listed by config_reference(). Input paths (data.path, teacher.model) are
// resolved against the config file's directory; output_dir is resolved
// against the working directory.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "abd/data.hpp"
#include "abd/distill.hpp"
#include "abd/nn.hpp"
#include "abd/transfer.hpp"

namespace abd {

struct DataConfig {
  std::string source = "synthetic";  // "idx" or "synthetic"
  std::filesystem::path path;        // directory holding the IDX files
  SyntheticKind kind = SyntheticKind::Moons;
  std::size_t n_train = 1000;
  std::size_t n_test = 1000;
  std::size_t classes = 2;
  double noise = 0.1;
  std::uint64_t seed = 0;
  double fraction = 1.0;
  bool normalize = true;
};

struct TeacherConfig {
  std::string arch;
  std::filesystem::path model;  // load from here when set
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  SgdConfig sgd;
};

struct TransferConfig {
  TransferMethod method = TransferMethod::Proposed;
  double margin = 1.0;
  std::size_t epochs = 10;
  std::vector<double> layer_weights;
  ConnectorPolicy connector = ConnectorPolicy::Auto;
  bool batchnorm = true;
  SgdConfig sgd;
};

struct StageTwoConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  Stage2Loss loss = Stage2Loss::CrossEntropy;
  KdConfig kd;
  SgdConfig sgd;
  double reference_fraction = 0.1;
  std::size_t max_epochs = 12000;
};

struct SweepConfig {
  std::vector<double> margins;
  std::vector<TransferMethod> methods;
  std::vector<std::uint64_t> seeds;
};

struct RunConfig {
  DataConfig data;
  TeacherConfig teacher;
  std::string student_arch;
  TransferConfig transfer;
  StageTwoConfig train;
  SweepConfig sweep;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  std::string run_id = "run";
};

/// Throws ConfigError naming the offending key.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::string& path);
/// Every accepted key with its type, default and meaning.
std::string config_reference();

struct ExperimentData {
  Dataset train_full;  // teacher training set
  Dataset train;       // student training set (after subsampling)
  Dataset test;
};

ExperimentData load_data(const RunConfig& cfg, std::uint64_t seed);

/// Stage-1/stage-2 settings for one run, with epochs scaled for the data fraction.
TrainConfig train_config(const RunConfig& cfg, std::uint64_t seed, double margin, TransferMethod method);

/// Trains a teacher from teacher.arch on the full training set.
Network train_teacher(const RunConfig& cfg, const ExperimentData& data);
/// Loads teacher.model when set (DataError when missing), otherwise trains one.
Network obtain_teacher(const RunConfig& cfg, const ExperimentData& data);

struct ResultsRow {
  std::string run_id;
  TransferMethod method = TransferMethod::None;
  double margin = 1.0;
  double fraction = 1.0;
  std::size_t epochs_init = 0;
  std::size_t epochs_train = 0;
  std::uint64_t seed = 0;
  double test_error_pct = 0.0;
  std::size_t layers = 0;           // number of similarity columns
  std::vector<double> similarity;   // empty for method none
  double wall_seconds = 0.0;

  static std::string header(std::size_t layers);
  std::string csv() const;
  /// csv() without the wall_seconds field.
  std::string csv_deterministic() const;
};

/// Appends a row, writing the header first when the file is new. Throws
/// ConfigError when an existing file has a different header.
void append_row(const std::filesystem::path& file, const ResultsRow& row);

struct RunOutcome {
  ResultsRow row;
  Network student;
  std::vector<double> init_curve;
  TrainCurve train_curve;
};

/// One transfer run against an already available teacher.
RunOutcome run_single(const RunConfig& cfg, const ExperimentData& data, const std::shared_ptr<const Network>& teacher,
                      std::uint64_t seed, double margin, TransferMethod method);

/// Full pipeline over the sweep grid (methods x margins x seeds); rows are
/// appended to <output_dir>/results.csv and student models written next to it.
std::vector<ResultsRow> run_experiment(const RunConfig& cfg);

/// Model file name for one run inside output_dir.
std::string student_model_name(const std::string& run_id, TransferMethod method, double margin, std::uint64_t seed);

}  // namespace abd
