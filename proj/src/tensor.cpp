#include "abd/tensor.hpp"

#include <sstream>

#include "abd/kernels.hpp"
#include "abd/parallel.hpp"

namespace abd {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t num_elements(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty() || shape.size() > 4) {
    throw ShapeError("tensor must have 1 to 4 axes, got " + std::to_string(shape.size()));
  }
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + to_string(shape));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(num_elements(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != num_elements(shape_)) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     to_string(shape_));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(m * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({m, n}, std::move(data));
}

Tensor Tensor::reshaped(Shape shape) const {
  check_shape(shape);
  if (num_elements(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "elementwise");
  Tensor out(a.shape());
  const auto& k = kernels::active();
  switch (op) {
    case BinaryOp::Add:
      k.add(a.raw(), b.raw(), out.raw(), a.size());
      break;
    case BinaryOp::Sub:
      k.sub(a.raw(), b.raw(), out.raw(), a.size());
      break;
    case BinaryOp::Mul:
      k.mul(a.raw(), b.raw(), out.raw(), a.size());
      break;
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::Mul, a, b); }

Tensor scale(const Tensor& a, double factor) {
  Tensor out(a.shape());
  kernels::active().scale(a.raw(), factor, out.raw(), a.size());
  return out;
}

Tensor max_scalar(const Tensor& a, double s) {
  Tensor out(a.shape());
  kernels::active().max_scalar(a.raw(), s, out.raw(), a.size());
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul expects matrices, got " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul inner dimension mismatch " + to_string(a.shape()) + " . " +
                     to_string(b.shape()));
  }
  Tensor c({m, n});
  const auto& kt = kernels::active();
  const double* pa = a.raw();
  const double* pb = b.raw();
  double* pc = c.raw();
  // Rows are independent, so splitting them across threads keeps results exact.
  const std::size_t row_cost = std::max<std::size_t>(1, n * k);
  parallel_for(m, std::max<std::size_t>(1, (1u << 16) / row_cost),
               [&](std::size_t begin, std::size_t end) { kt.gemm_rows(begin, end, n, k, pa, pb, pc); });
  return c;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose expects a matrix, got " + to_string(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor t({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t[j * m + i] = a[i * n + j];
  return t;
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return s;
}

std::size_t same_padding(std::size_t kernel) { return kernel / 2; }

namespace {

void check_geometry(const Conv2dGeometry& g) {
  auto ok = [](std::size_t k) { return k == 1 || k == 3; };
  if (!ok(g.kernel_h) || !ok(g.kernel_w)) {
    throw ShapeError("conv2d supports 1x1 and 3x3 kernels, got " + std::to_string(g.kernel_h) + "x" +
                     std::to_string(g.kernel_w));
  }
  if (g.stride == 0) throw ShapeError("conv2d stride must be positive");
}

}  // namespace

Tensor im2col(const Tensor& input, const Conv2dGeometry& g) {
  if (input.rank() != 4) throw ShapeError("im2col expects N x H x W x C, got " + to_string(input.shape()));
  check_geometry(g);
  const std::size_t n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  if (h + 2 * g.pad < g.kernel_h || w + 2 * g.pad < g.kernel_w) {
    throw ShapeError("conv2d kernel larger than padded input " + to_string(input.shape()));
  }
  const std::size_t oh = g.out_h(h), ow = g.out_w(w);
  const std::size_t patch = g.kernel_h * g.kernel_w * c;
  Tensor cols({n * oh * ow, patch});
  const double* src = input.raw();
  double* dst = cols.raw();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double* row = dst + ((b * oh + oy) * ow + ox) * patch;
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            double* cell = row + (ky * g.kernel_w + kx) * c;
            if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) {
              std::fill(cell, cell + c, 0.0);
            } else {
              const double* px = src + ((b * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)) * c;
              std::copy(px, px + c, cell);
            }
          }
        }
      }
    }
  }
  return cols;
}

Tensor col2im(const Tensor& cols, const Shape& input_shape, const Conv2dGeometry& g) {
  check_geometry(g);
  const std::size_t n = input_shape.at(0), h = input_shape.at(1), w = input_shape.at(2),
                    c = input_shape.at(3);
  const std::size_t oh = g.out_h(h), ow = g.out_w(w);
  const std::size_t patch = g.kernel_h * g.kernel_w * c;
  if (cols.rank() != 2 || cols.dim(0) != n * oh * ow || cols.dim(1) != patch) {
    throw ShapeError("col2im: columns " + to_string(cols.shape()) + " do not match input " +
                     to_string(input_shape));
  }
  Tensor out(input_shape);
  double* dst = out.raw();
  const double* src = cols.raw();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const double* row = src + ((b * oh + oy) * ow + ox) * patch;
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix < 0 || ix >= static_cast<long>(w)) continue;
            const double* cell = row + (ky * g.kernel_w + kx) * c;
            double* px = dst + ((b * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)) * c;
            for (std::size_t ch = 0; ch < c; ++ch) px[ch] += cell[ch];
          }
        }
      }
    }
  }
  return out;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t pad) {
  if (kernel.rank() != 4) {
    throw ShapeError("conv2d kernel must be kh x kw x C x F, got " + to_string(kernel.shape()));
  }
  const bool single = input.rank() == 3;
  if (!single && input.rank() != 4) {
    throw ShapeError("conv2d input must be H x W x C or N x H x W x C, got " + to_string(input.shape()));
  }
  const Tensor batched =
      single ? input.reshaped({1, input.dim(0), input.dim(1), input.dim(2)}) : input;
  const std::size_t c = batched.dim(3);
  if (kernel.dim(2) != c) {
    throw ShapeError("conv2d channel mismatch: input " + to_string(input.shape()) + ", kernel " +
                     to_string(kernel.shape()));
  }
  Conv2dGeometry g{kernel.dim(0), kernel.dim(1), stride, pad};
  check_geometry(g);
  const std::size_t f = kernel.dim(3);
  const Tensor cols = im2col(batched, g);
  const Tensor flat = matmul(cols, kernel.reshaped({g.kernel_h * g.kernel_w * c, f}));
  const std::size_t oh = g.out_h(batched.dim(1)), ow = g.out_w(batched.dim(2));
  if (single) return flat.reshaped({oh, ow, f});
  return flat.reshaped({batched.dim(0), oh, ow, f});
}

}  // namespace abd
