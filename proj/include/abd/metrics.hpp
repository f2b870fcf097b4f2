#pragma once

#include <string>
#include <vector>

#include "abd/connector.hpp"
#include "abd/data.hpp"
#include "abd/nn.hpp"

namespace abd {

/// Argmax predictions in eval mode; ties go to the lowest class index.
std::vector<int> predict(const Network& net, const Tensor& inputs, std::size_t batch_size = 256);

/// Percentage of misclassified samples.
double error_rate(const Network& net, const Dataset& ds);

struct LayerPair {
  std::size_t teacher_point = 0;  // transfer point ordinals
  std::size_t student_point = 0;
};

/// Percentage of (sample, position, neuron) triples where the teacher and
/// student activation states agree. When a connector is given, it maps the
/// student response (eval mode) before comparison; otherwise the responses
/// must have equal shapes.
double activation_similarity(const Network& teacher, const Network& student, const Tensor& inputs, LayerPair pair,
                             const Connector* connector = nullptr);

/// Same measure on precomputed responses.
double response_agreement(const Tensor& teacher_responses, const Tensor& student_responses);

/// Hyperplane w . x + b = 0 where a first-layer neuron's pre-activation
/// crosses zero.
struct BoundaryLine {
  std::size_t neuron = 0;
  double w1 = 0.0;
  double w2 = 0.0;
  double b = 0.0;
  bool degenerate = false;  // all-zero weights: no line exists
};

/// Lines of every neuron of a dense layer fed directly by a 2D input.
/// Throws std::invalid_argument for any other architecture.
std::vector<BoundaryLine> extract_boundaries(const Network& net, std::size_t layer = 0);

/// Axis-aligned lattice of nx x ny points spanning the box, edges included.
struct Grid {
  double x_min = -1.0, x_max = 1.0, y_min = -1.0, y_max = 1.0;
  std::size_t nx = 64, ny = 64;

  /// Bounding box of N x 2 points expanded by `expand` of its extent per side.
  static Grid around(const Tensor& points, double expand = 0.1, std::size_t n = 64);
  Tensor points() const;
};

/// Mean over grid points and neurons of activation-state agreement, in [0, 1].
double boundary_agreement(const Network& teacher, const Network& student, const Grid& grid, LayerPair pair);

void write_boundaries_csv(const std::vector<BoundaryLine>& lines, const std::string& path);

/// Teacher lines solid, student lines dashed, over the labelled data points.
void write_boundaries_svg(const std::vector<BoundaryLine>& teacher, const std::vector<BoundaryLine>& student,
                          const Dataset& data, const Grid& grid, const std::string& path);

}  // namespace abd
