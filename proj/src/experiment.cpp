#include "abd/experiment.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "abd/errors.hpp"
#include "abd/metrics.hpp"
#include "abd/rng.hpp"

namespace abd {

using nlohmann::json;

namespace {

enum class FieldType { Int, Real, Bool, String, Reals, Strings, Ints, Schedule };

struct Field {
  std::string key;
  FieldType type;
  json value;
  std::string doc;
};

constexpr const char* kDefaultArch = "in:2,dense:64,bn,relu,dense:64,bn,relu,dense:2";

void add_sgd_fields(std::vector<Field>& f, const std::string& prefix, const std::string& what) {
  const SgdConfig d;
  json sched = json::array();
  for (const auto& s : d.schedule) sched.push_back({s.at_fraction, s.divisor});
  f.push_back({prefix + ".lr", FieldType::Real, d.lr, "base learning rate for " + what});
  f.push_back({prefix + ".momentum", FieldType::Real, d.momentum, "momentum coefficient"});
  f.push_back({prefix + ".nesterov", FieldType::Bool, d.nesterov, "Nesterov momentum"});
  f.push_back({prefix + ".weight_decay", FieldType::Real, d.weight_decay, "L2 coefficient added to the gradient"});
  f.push_back({prefix + ".schedule", FieldType::Schedule, sched,
               "[epoch fraction, divisor] pairs; the rate is divided once each fraction is reached"});
}

const std::vector<Field>& schema() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    f.push_back({"data.source", FieldType::String, "synthetic", "\"idx\" (image files) or \"synthetic\" (2D toy data)"});
    f.push_back({"data.path", FieldType::String, "",
                 "directory with train-/test- (or t10k-) images-idx3-ubyte and labels-idx1-ubyte; required for idx"});
    f.push_back({"data.synthetic.kind", FieldType::String, "moons", "blobs, moons or spirals"});
    f.push_back({"data.synthetic.n_train", FieldType::Int, 1000, "training points"});
    f.push_back({"data.synthetic.n_test", FieldType::Int, 1000, "held-out points"});
    f.push_back({"data.synthetic.classes", FieldType::Int, 2, "number of classes (moons: 2)"});
    f.push_back({"data.synthetic.noise", FieldType::Real, 0.1, "Gaussian noise standard deviation"});
    f.push_back({"data.seed", FieldType::Int, 0, "seed of the synthetic data (independent of the run seed)"});
    f.push_back({"data.fraction", FieldType::Real, 1.0, "stratified share of the training set given to the student"});
    f.push_back({"data.normalize", FieldType::Bool, true, "standardize inputs per channel with training-set statistics"});
    f.push_back({"teacher.arch", FieldType::String, kDefaultArch, "teacher architecture string"});
    f.push_back({"teacher.model", FieldType::String, "", "teacher model file; loaded when set, otherwise trained"});
    f.push_back({"teacher.epochs", FieldType::Int, 30, "teacher training epochs"});
    f.push_back({"teacher.batch_size", FieldType::Int, 64, "teacher mini-batch size"});
    add_sgd_fields(f, "teacher.sgd", "teacher training");
    f.push_back({"student.arch", FieldType::String, kDefaultArch, "student architecture string"});
    f.push_back({"transfer.method", FieldType::String, "proposed", "none, mse (l2), l1, l0.5 or proposed"});
    f.push_back({"transfer.margin", FieldType::Real, 1.0, "margin of the proposed loss (> 0)"});
    f.push_back({"transfer.epochs", FieldType::Int, 10, "initialization epochs"});
    f.push_back({"transfer.layer_weights", FieldType::Reals, json::array(), "per-pair loss weights; empty means 1"});
    f.push_back({"transfer.connector", FieldType::String, "auto",
                 "auto (only where channel counts differ), always, or none"});
    f.push_back({"transfer.batchnorm", FieldType::Bool, true, "append batchnorm to every connector"});
    add_sgd_fields(f, "transfer.sgd", "initialization");
    f.push_back({"train.epochs", FieldType::Int, 10, "classification epochs"});
    f.push_back({"train.batch_size", FieldType::Int, 64, "mini-batch size of both stages"});
    f.push_back({"train.loss", FieldType::String, "ce", "ce or kd"});
    f.push_back({"train.kd.temperature", FieldType::Real, 4.0, "softening temperature of the kd loss"});
    f.push_back({"train.kd.alpha", FieldType::Real, 0.9, "weight of the soft kd term"});
    add_sgd_fields(f, "train.sgd", "classification training");
    f.push_back({"train.epoch_scaling.reference_fraction", FieldType::Real, 0.1,
                 "below this data fraction both stages run epochs * reference / fraction epochs; 0 disables"});
    f.push_back({"train.epoch_scaling.max_epochs", FieldType::Int, 12000, "cap on scaled epochs"});
    f.push_back({"sweep.margins", FieldType::Reals, json::array(), "margins to sweep; empty means transfer.margin"});
    f.push_back({"sweep.methods", FieldType::Strings, json::array(), "methods to sweep; empty means transfer.method"});
    f.push_back({"sweep.seeds", FieldType::Ints, json::array(), "seeds to sweep; empty means seed"});
    f.push_back({"seed", FieldType::Int, 0, "run seed"});
    f.push_back({"output_dir", FieldType::String, "out", "directory for results.csv and model files"});
    f.push_back({"run_id", FieldType::String, "run", "identifier written to every results row"});
    return f;
  }();
  return fields;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : schema())
    if (f.key == key) return &f;
  return nullptr;
}

bool is_section(const std::string& key) {
  const std::string prefix = key + ".";
  for (const auto& f : schema())
    if (f.key.compare(0, prefix.size(), prefix) == 0) return true;
  return false;
}

bool is_count(const json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0); }

void check_type(const Field& f, const json& v) {
  auto fail = [&](const char* want) { throw ConfigError(f.key + ": expected " + want + ", got " + v.dump()); };
  switch (f.type) {
    case FieldType::Int:
      if (!is_count(v)) fail("a non-negative integer");
      break;
    case FieldType::Real:
      if (!v.is_number()) fail("a number");
      break;
    case FieldType::Bool:
      if (!v.is_boolean()) fail("true or false");
      break;
    case FieldType::String:
      if (!v.is_string()) fail("a string");
      break;
    case FieldType::Reals:
      if (!v.is_array()) fail("an array of numbers");
      for (const auto& e : v)
        if (!e.is_number()) fail("an array of numbers");
      break;
    case FieldType::Strings:
      if (!v.is_array()) fail("an array of strings");
      for (const auto& e : v)
        if (!e.is_string()) fail("an array of strings");
      break;
    case FieldType::Ints:
      if (!v.is_array()) fail("an array of non-negative integers");
      for (const auto& e : v)
        if (!is_count(e)) fail("an array of non-negative integers");
      break;
    case FieldType::Schedule:
      if (!v.is_array()) fail("an array of [fraction, divisor] pairs");
      for (const auto& e : v)
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
          fail("an array of [fraction, divisor] pairs");
      break;
  }
}

void flatten(const json& j, const std::string& prefix, std::map<std::string, json>& out) {
  if (!j.is_object()) {
    throw ConfigError((prefix.empty() ? std::string("config") : prefix) + ": expected an object");
  }
  for (const auto& [k, v] : j.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (const Field* f = find_field(key)) {
      check_type(*f, v);
      out[key] = v;
    } else if (is_section(key)) {
      flatten(v, key, out);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

class Values {
 public:
  explicit Values(std::map<std::string, json> v) : v_(std::move(v)) {}

  const json& at(const std::string& key) const { return v_.at(key); }
  std::size_t count(const std::string& key) const { return at(key).get<std::size_t>(); }
  double real(const std::string& key) const { return at(key).get<double>(); }
  bool flag(const std::string& key) const { return at(key).get<bool>(); }
  std::string str(const std::string& key) const { return at(key).get<std::string>(); }

  SgdConfig sgd(const std::string& prefix) const {
    SgdConfig s;
    s.lr = real(prefix + ".lr");
    s.momentum = real(prefix + ".momentum");
    s.nesterov = flag(prefix + ".nesterov");
    s.weight_decay = real(prefix + ".weight_decay");
    s.schedule.clear();
    for (const auto& e : at(prefix + ".schedule")) s.schedule.push_back({e[0].get<double>(), e[1].get<double>()});
    try {
      s.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(prefix + ": " + e.what());
    }
    return s;
  }

 private:
  std::map<std::string, json> v_;
};

template <typename F>
auto as_config_error(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

void check_arch(const std::string& key, const std::string& arch) {
  as_config_error(key, [&] { return Network::parse_arch(arch); });
}

}  // namespace

RunConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  std::map<std::string, json> given;
  flatten(j, "", given);
  std::map<std::string, json> merged;
  for (const auto& f : schema()) merged[f.key] = f.value;
  for (auto& [k, v] : given) merged[k] = v;
  const Values v(std::move(merged));

  RunConfig c;
  c.data.source = v.str("data.source");
  if (c.data.source != "idx" && c.data.source != "synthetic") {
    throw ConfigError("data.source: expected \"idx\" or \"synthetic\", got \"" + c.data.source + "\"");
  }
  c.data.path = resolve(base_dir, v.str("data.path"));
  if (c.data.source == "idx") {
    if (c.data.path.empty()) throw ConfigError("data.path is required when data.source is \"idx\"");
    if (!std::filesystem::is_directory(c.data.path)) {
      throw ConfigError("data.path: directory '" + c.data.path.string() + "' does not exist");
    }
  }
  c.data.kind = as_config_error("data.synthetic.kind", [&] { return parse_synthetic_kind(v.str("data.synthetic.kind")); });
  c.data.n_train = v.count("data.synthetic.n_train");
  c.data.n_test = v.count("data.synthetic.n_test");
  c.data.classes = v.count("data.synthetic.classes");
  c.data.noise = v.real("data.synthetic.noise");
  if (c.data.source == "synthetic") {
    if (c.data.classes == 0) throw ConfigError("data.synthetic.classes must be at least 1");
    if (c.data.n_train < c.data.classes) throw ConfigError("data.synthetic.n_train must be at least the class count");
    if (c.data.n_test < c.data.classes) throw ConfigError("data.synthetic.n_test must be at least the class count");
    if (c.data.kind == SyntheticKind::Moons && c.data.classes != 2) {
      throw ConfigError("data.synthetic.classes must be 2 for moons");
    }
    if (c.data.noise < 0.0) throw ConfigError("data.synthetic.noise must be non-negative");
  }
  c.data.seed = v.at("data.seed").get<std::uint64_t>();
  c.data.fraction = v.real("data.fraction");
  c.data.normalize = v.flag("data.normalize");

  c.teacher.arch = v.str("teacher.arch");
  check_arch("teacher.arch", c.teacher.arch);
  c.teacher.model = resolve(base_dir, v.str("teacher.model"));
  c.teacher.epochs = v.count("teacher.epochs");
  c.teacher.batch_size = v.count("teacher.batch_size");
  if (c.teacher.batch_size == 0) throw ConfigError("teacher.batch_size must be at least 1");
  c.teacher.sgd = v.sgd("teacher.sgd");

  c.student_arch = v.str("student.arch");
  check_arch("student.arch", c.student_arch);

  c.transfer.method = as_config_error("transfer.method", [&] { return parse_transfer_method(v.str("transfer.method")); });
  c.transfer.margin = v.real("transfer.margin");
  c.transfer.epochs = v.count("transfer.epochs");
  c.transfer.layer_weights = v.at("transfer.layer_weights").get<std::vector<double>>();
  for (double w : c.transfer.layer_weights)
    if (!(w >= 0.0)) throw ConfigError("transfer.layer_weights must be non-negative");
  c.transfer.connector =
      as_config_error("transfer.connector", [&] { return parse_connector_policy(v.str("transfer.connector")); });
  c.transfer.batchnorm = v.flag("transfer.batchnorm");
  c.transfer.sgd = v.sgd("transfer.sgd");

  c.train.epochs = v.count("train.epochs");
  c.train.batch_size = v.count("train.batch_size");
  c.train.loss = as_config_error("train.loss", [&] { return parse_stage2_loss(v.str("train.loss")); });
  c.train.kd.temperature = v.real("train.kd.temperature");
  c.train.kd.alpha = v.real("train.kd.alpha");
  c.train.sgd = v.sgd("train.sgd");
  c.train.reference_fraction = v.real("train.epoch_scaling.reference_fraction");
  c.train.max_epochs = v.count("train.epoch_scaling.max_epochs");

  c.sweep.margins = v.at("sweep.margins").get<std::vector<double>>();
  for (double m : c.sweep.margins)
    if (!(m > 0.0)) throw ConfigError("sweep.margins must be positive");
  for (const auto& m : v.at("sweep.methods")) {
    c.sweep.methods.push_back(as_config_error("sweep.methods", [&] { return parse_transfer_method(m.get<std::string>()); }));
  }
  c.sweep.seeds = v.at("sweep.seeds").get<std::vector<std::uint64_t>>();

  c.seed = v.at("seed").get<std::uint64_t>();
  c.output_dir = v.str("output_dir");
  c.run_id = v.str("run_id");
  if (c.run_id.empty() || c.run_id.find_first_of(",\n\"") != std::string::npos) {
    throw ConfigError("run_id must be non-empty and contain no commas, quotes or newlines");
  }

  // Shared invariants (batch size, margin, fraction, kd ranges).
  train_config(c, c.seed, c.transfer.margin, c.transfer.method).validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j, std::filesystem::path(path).parent_path());
}

std::string config_reference() {
  std::ostringstream os;
  os << "# Run configuration keys (JSON; nest by the dotted path)\n";
  std::size_t width = 0;
  for (const auto& f : schema()) width = std::max(width, f.key.size());
  for (const auto& f : schema()) {
    os << std::left << std::setw(static_cast<int>(width) + 2) << f.key << std::setw(40) << f.value.dump() << f.doc
       << '\n';
  }
  return os.str();
}

ExperimentData load_data(const RunConfig& cfg, std::uint64_t seed) {
  ExperimentData d;
  if (cfg.data.source == "idx") {
    namespace fs = std::filesystem;
    const fs::path dir = cfg.data.path;
    auto pick = [&](const char* a, const char* b) {
      return fs::exists(dir / a) || !fs::exists(dir / b) ? (dir / a).string() : (dir / b).string();
    };
    d.train_full = load_idx((dir / "train-images-idx3-ubyte").string(), (dir / "train-labels-idx1-ubyte").string());
    d.test = load_idx(pick("test-images-idx3-ubyte", "t10k-images-idx3-ubyte"),
                      pick("test-labels-idx1-ubyte", "t10k-labels-idx1-ubyte"));
    d.test.num_classes = d.train_full.num_classes = std::max(d.train_full.num_classes, d.test.num_classes);
  } else {
    d.train_full = make_synthetic(cfg.data.kind, cfg.data.n_train, cfg.data.classes, cfg.data.noise,
                                  derive_seed(cfg.data.seed, streams::kSyntheticTrain));
    d.test = make_synthetic(cfg.data.kind, cfg.data.n_test, cfg.data.classes, cfg.data.noise,
                            derive_seed(cfg.data.seed, streams::kSyntheticTest));
  }
  d.train_full.validate();
  d.test.validate();
  if (cfg.data.normalize) {
    const NormalizationStats stats = d.train_full.norm;
    normalize(d.train_full, stats);
    normalize(d.test, stats);
  }
  d.train = cfg.data.fraction < 1.0 ? subsample(d.train_full, cfg.data.fraction, derive_seed(seed, streams::kSubsample))
                                    : d.train_full;
  return d;
}

TrainConfig train_config(const RunConfig& cfg, std::uint64_t seed, double margin, TransferMethod method) {
  TrainConfig t;
  const double frac = cfg.data.fraction;
  t.epochs_init = scaled_epochs(cfg.transfer.epochs, frac, cfg.train.reference_fraction, cfg.train.max_epochs);
  t.epochs_train = scaled_epochs(cfg.train.epochs, frac, cfg.train.reference_fraction, cfg.train.max_epochs);
  if (method == TransferMethod::None) t.epochs_init = 0;
  t.init_sgd = cfg.transfer.sgd;
  t.sgd = cfg.train.sgd;
  t.batch_size = cfg.train.batch_size;
  t.margin = margin;
  t.seed = seed;
  t.method = method;
  t.stage2 = cfg.train.loss;
  t.kd = cfg.train.kd;
  t.fraction = frac;
  return t;
}

namespace {

void check_input_shape(const Network& net, const Dataset& ds, const std::string& key) {
  if (net.input_shape() != ds.sample_shape()) {
    throw ConfigError(key + ": network input " + to_string(net.input_shape()) + " does not match data samples " +
                      to_string(ds.sample_shape()));
  }
  if (net.output_shape() != Shape{ds.num_classes}) {
    throw ConfigError(key + ": network output " + to_string(net.output_shape()) + " does not match " +
                      std::to_string(ds.num_classes) + " classes");
  }
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string general(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

Network train_teacher(const RunConfig& cfg, const ExperimentData& data) {
  Network teacher = Network::from_arch(cfg.teacher.arch, derive_seed(cfg.seed, streams::kTeacherInit));
  check_input_shape(teacher, data.train_full, "teacher.arch");
  TrainConfig t;
  t.epochs_train = cfg.teacher.epochs;
  t.sgd = cfg.teacher.sgd;
  t.batch_size = cfg.teacher.batch_size;
  t.seed = derive_seed(cfg.seed, streams::kTeacherBatches);
  train_student(teacher, data.train_full, t);
  return teacher;
}

Network obtain_teacher(const RunConfig& cfg, const ExperimentData& data) {
  if (cfg.teacher.model.empty()) return train_teacher(cfg, data);
  if (!std::filesystem::exists(cfg.teacher.model)) {
    throw DataError("teacher model file '" + cfg.teacher.model.string() + "' does not exist (teacher.model)");
  }
  Network teacher = [&] {
    try {
      return load_network(cfg.teacher.model.string());
    } catch (const std::invalid_argument& e) {
      throw DataError("teacher model file '" + cfg.teacher.model.string() + "': " + e.what());
    } catch (const std::runtime_error& e) {
      throw DataError("teacher model file '" + cfg.teacher.model.string() + "': " + e.what());
    }
  }();
  check_input_shape(teacher, data.train_full, "teacher.model");
  return teacher;
}

std::string ResultsRow::header(std::size_t layers) {
  std::string h = "run_id,method,margin,fraction,epochs_init,epochs_train,seed,test_error_pct";
  for (std::size_t k = 1; k <= layers; ++k) h += ",similarity_layer" + std::to_string(k) + "_pct";
  return h + ",wall_seconds";
}

std::string ResultsRow::csv_deterministic() const {
  std::string s = run_id + ',' + std::string(to_string(method)) + ',' + general(margin) + ',' + general(fraction) +
                  ',' + std::to_string(epochs_init) + ',' + std::to_string(epochs_train) + ',' + std::to_string(seed) +
                  ',' + fixed(test_error_pct, 4);
  for (std::size_t k = 0; k < layers; ++k) s += ',' + (k < similarity.size() ? fixed(similarity[k], 4) : "");
  return s;
}

std::string ResultsRow::csv() const { return csv_deterministic() + ',' + fixed(wall_seconds, 3); }

void append_row(const std::filesystem::path& file, const ResultsRow& row) {
  const std::string header = ResultsRow::header(row.layers);
  if (std::filesystem::exists(file) && std::filesystem::file_size(file) > 0) {
    std::ifstream is(file);
    std::string first;
    std::getline(is, first);
    if (first != header) {
      throw ConfigError("results file '" + file.string() + "' has header '" + first + "', expected '" + header +
                        "'; use another output_dir");
    }
    std::ofstream os(file, std::ios::app);
    os << row.csv() << '\n';
    if (!os) throw std::runtime_error("cannot append to '" + file.string() + "'");
    return;
  }
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream os(file);
  os << header << '\n' << row.csv() << '\n';
  if (!os) throw std::runtime_error("cannot write '" + file.string() + "'");
}

RunOutcome run_single(const RunConfig& cfg, const ExperimentData& data, const std::shared_ptr<const Network>& teacher,
                      std::uint64_t seed, double margin, TransferMethod method) {
  const auto start = std::chrono::steady_clock::now();
  const TrainConfig tc = train_config(cfg, seed, margin, method);
  tc.validate();

  Network student = Network::from_arch(cfg.student_arch, derive_seed(seed, streams::kStudentInit));
  check_input_shape(student, data.train, "student.arch");
  PlanOptions opts{cfg.transfer.connector, cfg.transfer.batchnorm, cfg.transfer.layer_weights};
  TransferPlan plan = as_config_error("student.arch", [&] { return build_transfer_plan(teacher, std::move(student), opts, seed); });

  RunOutcome out{{}, Network::parse_arch(cfg.student_arch), {}, {}};
  out.init_curve = initialize_student(plan, data.train, tc);

  ResultsRow& row = out.row;
  row.layers = plan.pairs.size();
  if (method != TransferMethod::None) {
    for (const auto& p : plan.pairs) {
      const Connector* conn = p.connector.kind() == ConnectorKind::Identity ? nullptr : &p.connector;
      row.similarity.push_back(
          activation_similarity(*teacher, plan.student, data.test.inputs, {p.teacher_point, p.student_point}, conn));
    }
  }

  out.student = discard(std::move(plan));
  out.train_curve = train_student(out.student, data.train, tc, teacher.get());

  row.run_id = cfg.run_id;
  row.method = method;
  row.margin = margin;
  row.fraction = cfg.data.fraction;
  row.epochs_init = tc.epochs_init;
  row.epochs_train = tc.epochs_train;
  row.seed = seed;
  row.test_error_pct = error_rate(out.student, data.test);
  row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::string student_model_name(const std::string& run_id, TransferMethod method, double margin, std::uint64_t seed) {
  return run_id + "-" + std::string(to_string(method)) + "-m" + general(margin) + "-s" + std::to_string(seed) +
         ".model";
}

std::vector<ResultsRow> run_experiment(const RunConfig& cfg) {
  const std::vector<TransferMethod> methods =
      cfg.sweep.methods.empty() ? std::vector<TransferMethod>{cfg.transfer.method} : cfg.sweep.methods;
  const std::vector<double> margins = cfg.sweep.margins.empty() ? std::vector<double>{cfg.transfer.margin} : cfg.sweep.margins;
  const std::vector<std::uint64_t> seeds = cfg.sweep.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : cfg.sweep.seeds;

  std::filesystem::create_directories(cfg.output_dir);
  std::vector<ResultsRow> rows;
  // The teacher sees the full training set, which does not depend on the seed.
  std::shared_ptr<const Network> teacher;
  for (std::uint64_t seed : seeds) {
    const ExperimentData data = load_data(cfg, seed);
    if (!teacher) teacher = std::make_shared<const Network>(obtain_teacher(cfg, data));
    for (TransferMethod method : methods) {
      for (double margin : margins) {
        RunOutcome r = run_single(cfg, data, teacher, seed, margin, method);
        save_network(r.student, (cfg.output_dir / student_model_name(cfg.run_id, method, margin, seed)).string());
        append_row(cfg.output_dir / "results.csv", r.row);
        rows.push_back(std::move(r.row));
      }
    }
  }
  return rows;
}

}  // namespace abd
