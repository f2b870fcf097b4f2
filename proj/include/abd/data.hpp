#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "abd/errors.hpp"
#include "abd/tensor.hpp"

namespace abd {

struct NormalizationStats {
  std::vector<double> mean;    // per channel
  std::vector<double> stddev;  // per channel
};

struct Dataset {
  Tensor inputs;  // samples x features, or samples x H x W x C
  std::vector<int> labels;
  std::size_t num_classes = 0;
  NormalizationStats norm;

  std::size_t size() const { return labels.size(); }
  Shape sample_shape() const { return Shape(inputs.shape().begin() + 1, inputs.shape().end()); }
  /// Checks the length and label-range invariants; throws DataError.
  void validate() const;
  Dataset subset(std::span<const std::size_t> indices) const;
  Tensor gather_inputs(std::span<const std::size_t> indices) const;
};

/// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
/// Pixels are scaled to [0, 1]; per-channel statistics are computed but not
/// applied.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Per-channel mean and standard deviation over all samples and positions.
NormalizationStats channel_stats(const Tensor& inputs);
/// Applies (x - mean) / stddev per channel in place and records the stats.
void normalize(Dataset& ds, const NormalizationStats& stats);

enum class SyntheticKind { Blobs, Moons, Spirals };

std::string_view to_string(SyntheticKind kind);
SyntheticKind parse_synthetic_kind(std::string_view name);

/// 2D toy data, deterministic per seed. Class counts differ by at most one.
/// Moons is two-class only.
Dataset make_synthetic(SyntheticKind kind, std::size_t n, std::size_t classes, double noise,
                       std::uint64_t seed);

/// Stratified: ceil(fraction * n_c) samples of every class c, chosen by a
/// seeded shuffle and returned in original order.
Dataset subsample(const Dataset& ds, double fraction, std::uint64_t seed);

/// Shuffled index batches for one epoch; the last batch may be short.
std::vector<std::vector<std::size_t>> batch_order(std::size_t n, std::size_t batch_size,
                                                  std::uint64_t epoch_seed);

struct Batch {
  Tensor inputs;
  std::vector<int> labels;
};

std::vector<Batch> batches(const Dataset& ds, std::size_t batch_size, std::uint64_t epoch_seed);

}  // namespace abd
