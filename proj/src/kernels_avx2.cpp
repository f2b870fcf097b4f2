// AVX2 variants. Compiled with -mavx2 (and without FMA) in isolation; only
// reached through the dispatch table after a runtime CPU check.

#include <immintrin.h>

#include "abd/kernels.hpp"

namespace abd::kernels {
namespace {

void gemm_rows(std::size_t row_begin, std::size_t row_end, std::size_t n, std::size_t k,
               const double* a, const double* b, double* c) {
  for (std::size_t i = row_begin; i < row_end; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) {
      __m256d acc0 = _mm256_setzero_pd();
      __m256d acc1 = _mm256_setzero_pd();
      __m256d acc2 = _mm256_setzero_pd();
      __m256d acc3 = _mm256_setzero_pd();
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d av = _mm256_set1_pd(arow[p]);
        const double* brow = b + p * n + j;
        acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(av, _mm256_loadu_pd(brow)));
        acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(av, _mm256_loadu_pd(brow + 4)));
        acc2 = _mm256_add_pd(acc2, _mm256_mul_pd(av, _mm256_loadu_pd(brow + 8)));
        acc3 = _mm256_add_pd(acc3, _mm256_mul_pd(av, _mm256_loadu_pd(brow + 12)));
      }
      _mm256_storeu_pd(crow + j, acc0);
      _mm256_storeu_pd(crow + j + 4, acc1);
      _mm256_storeu_pd(crow + j + 8, acc2);
      _mm256_storeu_pd(crow + j + 12, acc3);
    }
    for (; j + 4 <= n; j += 4) {
      __m256d acc = _mm256_setzero_pd();
      for (std::size_t p = 0; p < k; ++p) {
        acc = _mm256_add_pd(acc,
                            _mm256_mul_pd(_mm256_set1_pd(arow[p]), _mm256_loadu_pd(b + p * n + j)));
      }
      _mm256_storeu_pd(crow + j, acc);
    }
    for (; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc = acc + arow[p] * b[p * n + j];
      crow[j] = acc;
    }
  }
}

template <typename VecOp, typename ScalarOp>
inline void binary(const double* a, const double* b, double* out, std::size_t n, VecOp vop,
                   ScalarOp sop) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, vop(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = sop(a[i], b[i]);
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  binary(a, b, out, n, [](__m256d x, __m256d y) { return _mm256_add_pd(x, y); },
         [](double x, double y) { return x + y; });
}

void sub(const double* a, const double* b, double* out, std::size_t n) {
  binary(a, b, out, n, [](__m256d x, __m256d y) { return _mm256_sub_pd(x, y); },
         [](double x, double y) { return x - y; });
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
  binary(a, b, out, n, [](__m256d x, __m256d y) { return _mm256_mul_pd(x, y); },
         [](double x, double y) { return x * y; });
}

void scale(const double* a, double s, double* out, std::size_t n) {
  const __m256d sv = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), sv));
  for (; i < n; ++i) out[i] = a[i] * s;
}

// maxpd(x, y) returns x > y ? x : y, matching the scalar kernel for signed
// zeros and NaN.
void max_scalar(const double* a, double s, double* out, std::size_t n) {
  const __m256d sv = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(a + i), sv));
  for (; i < n; ++i) out[i] = a[i] > s ? a[i] : s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i,
                     _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(av, _mm256_loadu_pd(x + i))));
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void relu_backward(const double* x, const double* dy, double* dx, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(dx + i, _mm256_and_pd(mask, _mm256_loadu_pd(dy + i)));
  }
  for (; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void boundary_hinge(const double* teacher, const double* s, double margin, double* term,
                    double* grad, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d mu = _mm256_set1_pd(margin);
  const __m256d sign = _mm256_set1_pd(-0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d active = _mm256_cmp_pd(_mm256_loadu_pd(teacher + i), zero, _CMP_GT_OQ);
    const __m256d sv = _mm256_loadu_pd(s + i);
    const __m256d gap = _mm256_blendv_pd(_mm256_add_pd(mu, sv), _mm256_sub_pd(mu, sv), active);
    const __m256d v = _mm256_max_pd(gap, zero);
    const __m256d twice = _mm256_add_pd(v, v);
    _mm256_storeu_pd(term + i, _mm256_mul_pd(v, v));
    _mm256_storeu_pd(grad + i, _mm256_xor_pd(twice, _mm256_and_pd(active, sign)));
  }
  for (; i < n; ++i) {
    const bool active = teacher[i] > 0.0;
    const double gap = active ? margin - s[i] : margin + s[i];
    const double v = gap > 0.0 ? gap : 0.0;
    term[i] = v * v;
    grad[i] = active ? -(v + v) : v + v;
  }
}

void sgd_update(double* p, const double* g, double* v, std::size_t n, SgdCoefficients c) {
  const __m256d lr = _mm256_set1_pd(c.lr);
  const __m256d mom = _mm256_set1_pd(c.momentum);
  const __m256d wd = _mm256_set1_pd(c.weight_decay);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d pv = _mm256_loadu_pd(p + i);
    const __m256d gi = _mm256_add_pd(_mm256_loadu_pd(g + i), _mm256_mul_pd(wd, pv));
    const __m256d vel = _mm256_add_pd(_mm256_mul_pd(mom, _mm256_loadu_pd(v + i)), gi);
    _mm256_storeu_pd(v + i, vel);
    const __m256d d = c.nesterov ? _mm256_add_pd(gi, _mm256_mul_pd(mom, vel)) : vel;
    _mm256_storeu_pd(p + i, _mm256_sub_pd(pv, _mm256_mul_pd(lr, d)));
  }
  for (; i < n; ++i) {
    const double gi = g[i] + c.weight_decay * p[i];
    v[i] = c.momentum * v[i] + gi;
    const double d = c.nesterov ? gi + c.momentum * v[i] : v[i];
    p[i] = p[i] - c.lr * d;
  }
}

}  // namespace

namespace detail {
const KernelTable kAvx2Table{
    Backend::Avx2, gemm_rows, add, sub, mul, scale, max_scalar, axpy, relu_backward,
    boundary_hinge, sgd_update,
};
}  // namespace detail

}  // namespace abd::kernels
