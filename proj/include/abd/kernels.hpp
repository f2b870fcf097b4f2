#pragma once

// Inner-loop kernels with a scalar reference and SIMD variants.
//
// Every variant performs the same floating-point operations per element in
// the same order (no fused multiply-add, no reassociated reductions), so a
// SIMD kernel must agree with the scalar kernel bit for bit. Reductions that
// would otherwise be reassociated across lanes are left to the caller.

#include <cstddef>
#include <string_view>
#include <vector>

namespace abd::kernels {

enum class Backend { Scalar, Avx2 };

std::string_view name(Backend b);

struct SgdCoefficients {
  double lr;
  double momentum;
  double weight_decay;
  bool nesterov;
};

struct KernelTable {
  Backend backend;

  // c[m x n] = a[m x k] . b[k x n], rows [row_begin, row_end) only.
  void (*gemm_rows)(std::size_t row_begin, std::size_t row_end, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c);

  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*scale)(const double* a, double s, double* out, std::size_t n);
  void (*max_scalar)(const double* a, double s, double* out, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // dx = x > 0 ? dy : 0
  void (*relu_backward)(const double* x, const double* dy, double* dx, std::size_t n);
  // Per-neuron margin penalty of the activation-boundary loss:
  //   v = teacher > 0 ? max(0, margin - s) : max(0, margin + s)
  //   term = v * v, grad = teacher > 0 ? -2v : 2v
  void (*boundary_hinge)(const double* teacher, const double* s, double margin, double* term,
                         double* grad, std::size_t n);
  // g' = g + wd*p; v = m*v + g'; d = nesterov ? g' + m*v : v; p -= lr*d
  void (*sgd_update)(double* p, const double* g, double* v, std::size_t n, SgdCoefficients c);
};

bool available(Backend b);
const KernelTable& table(Backend b);

/// Kernel table used by the tensor library. Picks the widest available
/// backend unless ABDISTILL_KERNELS=scalar is set.
const KernelTable& active();
void set_active(Backend b);

std::vector<Backend> available_backends();

namespace detail {
extern const KernelTable kScalarTable;
#if defined(ABD_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
}  // namespace detail

}  // namespace abd::kernels
