#include "abd/kernels.hpp"

namespace abd::kernels {
namespace {

void gemm_rows(std::size_t row_begin, std::size_t row_end, std::size_t n, std::size_t k,
               const double* a, const double* b, double* c) {
  for (std::size_t i = row_begin; i < row_end; ++i) {
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] = crow[j] + av * brow[j];
    }
  }
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(const double* a, double s, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

void max_scalar(const double* a, double s, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > s ? a[i] : s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void relu_backward(const double* x, const double* dy, double* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void boundary_hinge(const double* teacher, const double* s, double margin, double* term,
                    double* grad, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const bool active = teacher[i] > 0.0;
    const double gap = active ? margin - s[i] : margin + s[i];
    const double v = gap > 0.0 ? gap : 0.0;
    term[i] = v * v;
    grad[i] = active ? -(v + v) : v + v;
  }
}

void sgd_update(double* p, const double* g, double* v, std::size_t n, SgdCoefficients c) {
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = g[i] + c.weight_decay * p[i];
    v[i] = c.momentum * v[i] + gi;
    const double d = c.nesterov ? gi + c.momentum * v[i] : v[i];
    p[i] = p[i] - c.lr * d;
  }
}

}  // namespace

namespace detail {
const KernelTable kScalarTable{
    Backend::Scalar, gemm_rows, add, sub, mul, scale, max_scalar, axpy, relu_backward,
    boundary_hinge,  sgd_update,
};
}  // namespace detail

}  // namespace abd::kernels
