// abdistill: teacher training, activation-boundary distillation runs,
// margin sweeps, gradient checks and boundary dumps.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "abd/errors.hpp"
#include "abd/experiment.hpp"
#include "abd/gradcheck.hpp"
#include "abd/metrics.hpp"
#include "abd/rng.hpp"

namespace {

using namespace abd;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration")->required();
  cmd->add_option("--seed", f.seed, "run seed (overrides the file)");
  cmd->add_option("--out", f.out, "output directory (overrides output_dir)");
}

RunConfig load(const CommonFlags& f) {
  RunConfig cfg = load_config(f.config);
  if (f.seed) {
    cfg.seed = *f.seed;
    if (!cfg.sweep.seeds.empty()) cfg.sweep.seeds = {*f.seed};
  }
  if (!f.out.empty()) cfg.output_dir = f.out;
  return cfg;
}

int cmd_train_teacher(const CommonFlags& f) {
  const RunConfig cfg = load(f);
  const ExperimentData data = load_data(cfg, cfg.seed);
  const Network teacher = train_teacher(cfg, data);
  std::filesystem::path path = cfg.teacher.model;
  if (path.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    path = cfg.output_dir / "teacher.model";
  } else if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  save_network(teacher, path.string());
  std::printf("teacher %s\n", teacher.arch().c_str());
  std::printf("parameters %zu\n", teacher.parameter_count());
  std::printf("test_error_pct %.4f\n", error_rate(teacher, data.test));
  std::printf("model %s\n", path.string().c_str());
  return 0;
}

void print_rows(const std::vector<ResultsRow>& rows) {
  if (rows.empty()) return;
  std::printf("%s\n", ResultsRow::header(rows.front().layers).c_str());
  for (const auto& r : rows) std::printf("%s\n", r.csv().c_str());
}

int cmd_distill(const CommonFlags& f) {
  const RunConfig cfg = load(f);
  print_rows(run_experiment(cfg));
  return 0;
}

int cmd_ablation(const CommonFlags& f, const std::vector<double>& margins) {
  RunConfig cfg = load(f);
  if (!margins.empty()) {
    cfg.sweep.margins = margins;
  } else if (cfg.sweep.margins.empty()) {
    cfg.sweep.margins = {0.75, 1.0, 1.5, 2.0, 4.0};
  }
  for (double m : cfg.sweep.margins)
    if (!(m > 0.0)) throw ConfigError("--margins must be positive");
  print_rows(run_experiment(cfg));
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t trials, bool corrupt) {
  GradcheckOptions opts;
  opts.corrupt = corrupt;
  const GradcheckReport rep = check_alternative_loss_gradient(seed, trials, opts);
  if (trials == 0) std::fprintf(stderr, "warning: 0 trials requested, nothing was checked\n");
  std::printf("trials %zu\ncoordinates %zu\nmax_rel_error %.3e\ntolerance %.1e\n%s\n", rep.trials, rep.coordinates,
              rep.max_rel_error, rep.tolerance, rep.passed ? "PASS" : "FAIL");
  return rep.passed ? 0 : 1;
}

int cmd_boundary_dump(const CommonFlags& f) {
  const RunConfig cfg = load(f);
  const ExperimentData data = load_data(cfg, cfg.seed);
  if (data.train.sample_shape() != Shape{2}) {
    throw ConfigError("boundary-dump needs 2D inputs (data.source = synthetic); got samples of shape " +
                      to_string(data.train.sample_shape()) + ". Boundaries are lines only in a 2D input space.");
  }
  auto teacher = std::make_shared<const Network>(obtain_teacher(cfg, data));
  Network student = Network::from_arch(cfg.student_arch, derive_seed(cfg.seed, streams::kStudentInit));
  std::vector<BoundaryLine> t_lines, s_lines;
  try {
    t_lines = extract_boundaries(*teacher);
    (void)extract_boundaries(student);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("boundary-dump: ") + e.what());
  }
  if (teacher->layer(0).params()[0].value.shape() != student.layer(0).params()[0].value.shape()) {
    throw ConfigError("boundary-dump needs teacher and student first layers of equal width");
  }
  PlanOptions opts{cfg.transfer.connector, cfg.transfer.batchnorm, cfg.transfer.layer_weights};
  TransferPlan plan = build_transfer_plan(teacher, std::move(student), opts, cfg.seed);
  const TrainConfig tc = train_config(cfg, cfg.seed, cfg.transfer.margin, cfg.transfer.method);
  initialize_student(plan, data.train, tc);
  s_lines = extract_boundaries(plan.student);

  std::filesystem::create_directories(cfg.output_dir);
  const auto dir = cfg.output_dir;
  write_boundaries_csv(t_lines, (dir / "teacher_boundaries.csv").string());
  write_boundaries_csv(s_lines, (dir / "student_boundaries.csv").string());
  const Grid grid = Grid::around(data.test.inputs);
  write_boundaries_svg(t_lines, s_lines, data.test, grid, (dir / "boundaries.svg").string());

  auto drawn = [](const std::vector<BoundaryLine>& lines) {
    std::size_t n = 0;
    for (const auto& l : lines) n += l.degenerate ? 0 : 1;
    return n;
  };
  std::printf("method %s\n", std::string(to_string(cfg.transfer.method)).c_str());
  std::printf("teacher_lines %zu\nstudent_lines %zu\n", drawn(t_lines), drawn(s_lines));
  std::printf("boundary_agreement %.6f\n", boundary_agreement(*teacher, plan.student, grid, {0, 0}));
  save_network(plan.student, (dir / "student_init.model").string());
  std::printf("files %s %s %s %s\n", (dir / "teacher_boundaries.csv").string().c_str(),
              (dir / "student_boundaries.csv").string().c_str(), (dir / "boundaries.svg").string().c_str(),
              (dir / "student_init.model").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Activation-boundary distillation experiments"};
  app.require_subcommand(1);

  CommonFlags teacher_flags, distill_flags, ablation_flags, dump_flags;
  auto* teacher_cmd = app.add_subcommand("train-teacher", "train a teacher and save it");
  add_common(teacher_cmd, teacher_flags);

  auto* distill_cmd = app.add_subcommand("distill", "initialize and train students; append results rows");
  add_common(distill_cmd, distill_flags);

  std::vector<double> margins;
  auto* ablation_cmd = app.add_subcommand("ablation", "margin sweep (default 0.75 1 1.5 2 4)");
  add_common(ablation_cmd, ablation_flags);
  ablation_cmd->add_option("--margins", margins, "margins to sweep");

  std::uint64_t gc_seed = 0;
  std::size_t gc_trials = 1000;
  bool gc_corrupt = false;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference check of the transfer loss gradient");
  gradcheck_cmd->add_option("--seed", gc_seed, "seed")->capture_default_str();
  gradcheck_cmd->add_option("--trials", gc_trials, "random points")->capture_default_str();
  gradcheck_cmd->add_flag("--corrupt", gc_corrupt)->group("");

  auto* dump_cmd = app.add_subcommand("boundary-dump", "write teacher/student boundary lines of a 2D run");
  add_common(dump_cmd, dump_flags);

  auto* ref_cmd = app.add_subcommand("config-reference", "print every config key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*teacher_cmd) return cmd_train_teacher(teacher_flags);
    if (*distill_cmd) return cmd_distill(distill_flags);
    if (*ablation_cmd) return cmd_ablation(ablation_flags, margins);
    if (*gradcheck_cmd) return cmd_gradcheck(gc_seed, gc_trials, gc_corrupt);
    if (*dump_cmd) return cmd_boundary_dump(dump_flags);
    if (*ref_cmd) {
      std::cout << config_reference();
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
