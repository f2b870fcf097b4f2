#include "abd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <stdexcept>

namespace abd {

std::vector<int> predict(const Network& net, const Tensor& inputs, std::size_t batch_size) {
  const std::size_t n = inputs.dim(0);
  std::vector<int> out;
  out.reserve(n);
  std::vector<std::size_t> idx;
  const std::size_t stride = inputs.size() / n;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    Shape s = inputs.shape();
    s[0] = end - start;
    Tensor chunk(s, std::vector<double>(inputs.raw() + start * stride, inputs.raw() + end * stride));
    const Tensor logits = net.evaluate(chunk).logits;
    const std::size_t k = logits.dim(1);
    for (std::size_t i = 0; i < end - start; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < k; ++j) {
        if (logits[i * k + j] > logits[i * k + best]) best = j;
      }
      out.push_back(static_cast<int>(best));
    }
  }
  return out;
}

double error_rate(const Network& net, const Dataset& ds) {
  if (ds.size() == 0) throw std::invalid_argument("error rate of an empty dataset");
  const auto pred = predict(net, ds.inputs);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != ds.labels[i] ? 1 : 0;
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(ds.size());
}

namespace {

std::size_t count_agreement(const Tensor& t, const Tensor& s) {
  if (t.shape() != s.shape()) {
    throw ShapeError("activation similarity: teacher responses " + to_string(t.shape()) + " vs student responses " +
                     to_string(s.shape()));
  }
  std::size_t same = 0;
  for (std::size_t i = 0; i < t.size(); ++i) same += (t[i] > 0.0) == (s[i] > 0.0) ? 1 : 0;
  return same;
}

Tensor rows(const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t stride = x.size() / x.dim(0);
  Shape s = x.shape();
  s[0] = end - begin;
  return Tensor(s, std::vector<double>(x.raw() + begin * stride, x.raw() + end * stride));
}

}  // namespace

double response_agreement(const Tensor& teacher_responses, const Tensor& student_responses) {
  const std::size_t same = count_agreement(teacher_responses, student_responses);
  return 100.0 * static_cast<double>(same) / static_cast<double>(teacher_responses.size());
}

double activation_similarity(const Network& teacher, const Network& student, const Tensor& inputs, LayerPair pair,
                             const Connector* connector) {
  if (teacher.transfer_points().size() <= pair.teacher_point || student.transfer_points().size() <= pair.student_point) {
    throw std::out_of_range("activation similarity: transfer point ordinal out of range");
  }
  const std::size_t t_end = teacher.transfer_points()[pair.teacher_point] + 1;
  const std::size_t s_end = student.transfer_points()[pair.student_point] + 1;
  if (inputs.shape() == teacher.input_shape()) {
    const Tensor t = teacher.evaluate(inputs, t_end).responses[pair.teacher_point];
    Tensor s = student.evaluate(inputs, s_end).responses[pair.student_point];
    if (connector) s = connector->apply(s);
    return response_agreement(t, s);
  }
  // Chunked so that large evaluation sets never hold every response at once.
  constexpr std::size_t kChunk = 256;
  const std::size_t n = inputs.dim(0);
  std::size_t same = 0, total = 0;
  for (std::size_t begin = 0; begin < n; begin += kChunk) {
    const Tensor x = rows(inputs, begin, std::min(n, begin + kChunk));
    const Tensor t = teacher.evaluate(x, t_end).responses[pair.teacher_point];
    Tensor s = student.evaluate(x, s_end).responses[pair.student_point];
    if (connector) s = connector->apply(s);
    same += count_agreement(t, s);
    total += t.size();
  }
  return 100.0 * static_cast<double>(same) / static_cast<double>(total);
}

std::vector<BoundaryLine> extract_boundaries(const Network& net, std::size_t layer) {
  if (net.input_shape() != Shape{2}) {
    throw std::invalid_argument("boundary extraction needs a 2D input, network input is " +
                                to_string(net.input_shape()));
  }
  if (layer != 0 || net.layer(0).kind() != LayerKind::Dense) {
    throw std::invalid_argument(
        "boundary lines are exact only for the first hidden layer of a dense network (layer 0 must be dense)");
  }
  const auto& dense = static_cast<const DenseLayer&>(net.layer(0));
  std::vector<BoundaryLine> out;
  for (std::size_t j = 0; j < dense.out_features(); ++j) {
    BoundaryLine l{j, dense.weight().at(j, 0), dense.weight().at(j, 1), dense.bias()[j], false};
    l.degenerate = l.w1 == 0.0 && l.w2 == 0.0;
    out.push_back(l);
  }
  return out;
}

Grid Grid::around(const Tensor& points, double expand, std::size_t n) {
  if (points.rank() != 2 || points.dim(1) != 2) throw ShapeError("grid needs N x 2 points, got " + to_string(points.shape()));
  Grid g;
  g.x_min = g.x_max = points.at(0, 0);
  g.y_min = g.y_max = points.at(0, 1);
  for (std::size_t i = 1; i < points.dim(0); ++i) {
    g.x_min = std::min(g.x_min, points.at(i, 0));
    g.x_max = std::max(g.x_max, points.at(i, 0));
    g.y_min = std::min(g.y_min, points.at(i, 1));
    g.y_max = std::max(g.y_max, points.at(i, 1));
  }
  const double dx = (g.x_max - g.x_min) * expand, dy = (g.y_max - g.y_min) * expand;
  g.x_min -= dx;
  g.x_max += dx;
  g.y_min -= dy;
  g.y_max += dy;
  g.nx = g.ny = n;
  return g;
}

Tensor Grid::points() const {
  if (nx == 0 || ny == 0) throw std::invalid_argument("grid is empty");
  Tensor p({nx * ny, 2});
  for (std::size_t iy = 0; iy < ny; ++iy) {
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const double fx = nx > 1 ? static_cast<double>(ix) / static_cast<double>(nx - 1) : 0.5;
      const double fy = ny > 1 ? static_cast<double>(iy) / static_cast<double>(ny - 1) : 0.5;
      p.at(iy * nx + ix, 0) = x_min + fx * (x_max - x_min);
      p.at(iy * nx + ix, 1) = y_min + fy * (y_max - y_min);
    }
  }
  return p;
}

double boundary_agreement(const Network& teacher, const Network& student, const Grid& grid, LayerPair pair) {
  if (teacher.input_shape() != Shape{2} || student.input_shape() != Shape{2}) {
    throw std::invalid_argument("boundary agreement needs networks with 2D input");
  }
  const Tensor pts = grid.points();
  return activation_similarity(teacher, student, pts, pair) / 100.0;
}

void write_boundaries_csv(const std::vector<BoundaryLine>& lines, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  os << "neuron_id,w1,w2,b\n" << std::setprecision(17);
  for (const auto& l : lines) {
    if (l.degenerate) continue;
    os << l.neuron << ',' << l.w1 << ',' << l.w2 << ',' << l.b << '\n';
  }
}

namespace {

// Clips w1 x + w2 y + b = 0 to the grid box; false when it misses the box.
bool clip_line(const BoundaryLine& l, const Grid& g, double& x0, double& y0, double& x1, double& y1) {
  std::vector<std::pair<double, double>> hits;
  auto inside_x = [&](double x) { return x >= g.x_min - 1e-12 && x <= g.x_max + 1e-12; };
  auto inside_y = [&](double y) { return y >= g.y_min - 1e-12 && y <= g.y_max + 1e-12; };
  if (l.w2 != 0.0) {
    for (double x : {g.x_min, g.x_max}) {
      const double y = -(l.w1 * x + l.b) / l.w2;
      if (inside_y(y)) hits.emplace_back(x, y);
    }
  }
  if (l.w1 != 0.0) {
    for (double y : {g.y_min, g.y_max}) {
      const double x = -(l.w2 * y + l.b) / l.w1;
      if (inside_x(x)) hits.emplace_back(x, y);
    }
  }
  if (hits.size() < 2) return false;
  std::sort(hits.begin(), hits.end());
  x0 = hits.front().first;
  y0 = hits.front().second;
  x1 = hits.back().first;
  y1 = hits.back().second;
  return true;
}

}  // namespace

void write_boundaries_svg(const std::vector<BoundaryLine>& teacher, const std::vector<BoundaryLine>& student,
                          const Dataset& data, const Grid& grid, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  constexpr double kSize = 600.0;
  const double sx = kSize / (grid.x_max - grid.x_min);
  const double sy = kSize / (grid.y_max - grid.y_min);
  auto px = [&](double x) { return (x - grid.x_min) * sx; };
  auto py = [&](double y) { return kSize - (y - grid.y_min) * sy; };
  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
     << "\" viewBox=\"0 0 " << kSize << ' ' << kSize << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<g opacity=\"0.5\">\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    os << "<circle cx=\"" << px(data.inputs.at(i, 0)) << "\" cy=\"" << py(data.inputs.at(i, 1))
       << "\" r=\"2\" fill=\"" << kColors[static_cast<std::size_t>(data.labels[i]) % 10] << "\"/>\n";
  }
  os << "</g>\n";
  auto draw = [&](const std::vector<BoundaryLine>& lines, const char* cls, const char* style) {
    os << "<g class=\"" << cls << "\" " << style << ">\n";
    for (const auto& l : lines) {
      double x0, y0, x1, y1;
      if (l.degenerate || !clip_line(l, grid, x0, y0, x1, y1)) continue;
      os << "<line x1=\"" << px(x0) << "\" y1=\"" << py(y0) << "\" x2=\"" << px(x1) << "\" y2=\"" << py(y1)
         << "\"/>\n";
    }
    os << "</g>\n";
  };
  draw(teacher, "teacher", "stroke=\"black\" stroke-width=\"2\"");
  draw(student, "student", "stroke=\"red\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"");
  os << "</svg>\n";
}

}  // namespace abd
