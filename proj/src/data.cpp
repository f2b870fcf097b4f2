#include "abd/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

#include "abd/rng.hpp"

namespace abd {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

std::string hex32(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex;
  os.width(8);
  os.fill('0');
  os << v;
  return os.str();
}

void check_magic(const std::vector<unsigned char>& bytes, std::uint32_t expected, const std::string& path,
                 const char* what) {
  if (bytes.size() < 4) {
    throw DataError("'" + path + "' is truncated: expected at least 4 bytes, got " + std::to_string(bytes.size()));
  }
  const std::uint32_t magic = be32(bytes, 0);
  if (magic != expected) {
    throw DataError("'" + path + "' is not an IDX " + what + " file: magic " + hex32(magic) + ", expected " +
                    hex32(expected));
  }
}

void check_size(const std::vector<unsigned char>& bytes, std::size_t expected, const std::string& path) {
  if (bytes.size() < expected) {
    throw DataError("'" + path + "' is truncated: expected " + std::to_string(expected) + " bytes, got " +
                    std::to_string(bytes.size()));
  }
  if (bytes.size() > expected) {
    throw DataError("'" + path + "' has trailing data: expected " + std::to_string(expected) + " bytes, got " +
                    std::to_string(bytes.size()));
  }
}

}  // namespace

void Dataset::validate() const {
  if (inputs.empty() || inputs.rank() < 2) throw DataError("dataset has no inputs");
  if (inputs.dim(0) != labels.size()) {
    throw DataError("dataset has " + std::to_string(inputs.dim(0)) + " inputs but " + std::to_string(labels.size()) +
                    " labels");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw DataError("label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

Tensor Dataset::gather_inputs(std::span<const std::size_t> indices) const {
  Shape s = inputs.shape();
  const std::size_t stride = inputs.size() / s[0];
  s[0] = indices.size();
  Tensor out(s);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const double* src = inputs.raw() + indices[i] * stride;
    std::copy(src, src + stride, out.raw() + i * stride);
  }
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.inputs = gather_inputs(indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels[i]);
  out.num_classes = num_classes;
  out.norm = norm;
  return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = read_file(images_path);
  check_magic(img, kImageMagic, images_path, "image");
  if (img.size() < 16) {
    throw DataError("'" + images_path + "' is truncated: expected at least 16 bytes, got " + std::to_string(img.size()));
  }
  const std::size_t n = be32(img, 4), rows = be32(img, 8), cols = be32(img, 12);
  check_size(img, 16 + n * rows * cols, images_path);

  const auto lab = read_file(labels_path);
  check_magic(lab, kLabelMagic, labels_path, "label");
  if (lab.size() < 8) {
    throw DataError("'" + labels_path + "' is truncated: expected at least 8 bytes, got " + std::to_string(lab.size()));
  }
  const std::size_t nl = be32(lab, 4);
  check_size(lab, 8 + nl, labels_path);
  if (nl != n) {
    throw DataError("count mismatch: " + std::to_string(n) + " images in '" + images_path + "' but " +
                    std::to_string(nl) + " labels in '" + labels_path + "'");
  }
  if (n == 0 || rows == 0 || cols == 0) throw DataError("'" + images_path + "' contains no pixels");

  Dataset ds;
  ds.inputs = Tensor({n, rows, cols, 1});
  for (std::size_t i = 0; i < n * rows * cols; ++i) ds.inputs[i] = static_cast<double>(img[16 + i]) / 255.0;
  ds.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = lab[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = static_cast<std::size_t>(max_label) + 1;
  ds.norm = channel_stats(ds.inputs);
  return ds;
}

NormalizationStats channel_stats(const Tensor& inputs) {
  const std::size_t c = inputs.shape().back();
  const std::size_t rows = inputs.size() / c;
  NormalizationStats st{std::vector<double>(c, 0.0), std::vector<double>(c, 0.0)};
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < c; ++k) st.mean[k] += inputs[r * c + k];
  for (double& m : st.mean) m /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < c; ++k) {
      const double d = inputs[r * c + k] - st.mean[k];
      st.stddev[k] += d * d;
    }
  }
  for (double& s : st.stddev) {
    s = std::sqrt(s / static_cast<double>(rows));
    if (s == 0.0) s = 1.0;
  }
  return st;
}

void normalize(Dataset& ds, const NormalizationStats& stats) {
  const std::size_t c = ds.inputs.shape().back();
  if (stats.mean.size() != c || stats.stddev.size() != c) {
    throw DataError("normalization stats have " + std::to_string(stats.mean.size()) + " channels, data has " +
                    std::to_string(c));
  }
  const std::size_t rows = ds.inputs.size() / c;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < c; ++k) {
      double& v = ds.inputs[r * c + k];
      v = (v - stats.mean[k]) / stats.stddev[k];
    }
  ds.norm = stats;
}

std::string_view to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::Blobs:
      return "blobs";
    case SyntheticKind::Moons:
      return "moons";
    case SyntheticKind::Spirals:
      return "spirals";
  }
  return "unknown";
}

SyntheticKind parse_synthetic_kind(std::string_view name) {
  if (name == "blobs") return SyntheticKind::Blobs;
  if (name == "moons") return SyntheticKind::Moons;
  if (name == "spirals") return SyntheticKind::Spirals;
  throw std::invalid_argument("unknown synthetic dataset '" + std::string(name) +
                              "' (expected blobs, moons or spirals)");
}

Dataset make_synthetic(SyntheticKind kind, std::size_t n, std::size_t classes, double noise, std::uint64_t seed) {
  if (classes == 0 || n < classes) throw std::invalid_argument("synthetic data needs n >= classes >= 1");
  if (kind == SyntheticKind::Moons && classes != 2) throw std::invalid_argument("moons data has exactly 2 classes");
  if (noise < 0.0) throw std::invalid_argument("synthetic noise must be non-negative");

  Rng rng(seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());

  Dataset ds;
  ds.inputs = Tensor({n, 2});
  ds.labels.assign(n, 0);
  ds.num_classes = classes;
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    // Round-robin labels keep classes balanced to within one sample.
    const std::size_t c = i % classes;
    double x = 0.0, y = 0.0;
    switch (kind) {
      case SyntheticKind::Blobs: {
        const double angle = two_pi * static_cast<double>(c) / static_cast<double>(classes);
        x = 3.0 * std::cos(angle);
        y = 3.0 * std::sin(angle);
        break;
      }
      case SyntheticKind::Moons: {
        const double theta = rng.uniform(0.0, std::numbers::pi);
        if (c == 0) {
          x = std::cos(theta);
          y = std::sin(theta);
        } else {
          x = 1.0 - std::cos(theta);
          y = 0.5 - std::sin(theta);
        }
        break;
      }
      case SyntheticKind::Spirals: {
        const double t = rng.uniform(0.05, 1.0);
        const double angle = two_pi * static_cast<double>(c) / static_cast<double>(classes) + 1.5 * two_pi * t;
        x = 2.0 * t * std::cos(angle);
        y = 2.0 * t * std::sin(angle);
        break;
      }
    }
    x += noise * rng.normal();
    y += noise * rng.normal();
    const std::size_t slot = order[i];
    ds.inputs.at(slot, 0) = x;
    ds.inputs.at(slot, 1) = y;
    ds.labels[slot] = static_cast<int>(c);
  }
  ds.norm = channel_stats(ds.inputs);
  return ds;
}

Dataset subsample(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("subsample fraction must be in (0, 1], got " + std::to_string(fraction));
  }
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  Rng rng(seed);
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) continue;
    // Guard against 0.1 * 1000 landing just above 100 in floating point.
    const auto take = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(idx.size()) - 1e-9));
    if (take == 0) {
      throw DataError("fraction " + std::to_string(fraction) + " leaves no samples of class " + std::to_string(c));
    }
    rng.shuffle(idx.begin(), idx.end());
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(keep.begin(), keep.end());
  return ds.subset(keep);
}

std::vector<std::vector<std::size_t>> batch_order(std::size_t n, std::size_t batch_size, std::uint64_t epoch_seed) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(epoch_seed);
  rng.shuffle(perm.begin(), perm.end());
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start), perm.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

std::vector<Batch> batches(const Dataset& ds, std::size_t batch_size, std::uint64_t epoch_seed) {
  std::vector<Batch> out;
  for (const auto& idx : batch_order(ds.size(), batch_size, epoch_seed)) {
    Batch b{ds.gather_inputs(idx), {}};
    b.labels.reserve(idx.size());
    for (std::size_t i : idx) b.labels.push_back(ds.labels[i]);
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace abd
