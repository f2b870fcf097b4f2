#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "abd/kernels.hpp"

namespace abd::kernels {

std::string_view name(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
  }
  return "unknown";
}

bool available(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
#if defined(ABD_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Backend b) {
  if (!available(b)) {
    throw std::runtime_error("kernel backend '" + std::string(name(b)) +
                             "' is not available on this CPU/build");
  }
#if defined(ABD_HAVE_AVX2)
  if (b == Backend::Avx2) return detail::kAvx2Table;
#endif
  return detail::kScalarTable;
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::Scalar, Backend::Avx2}) {
    if (available(b)) out.push_back(b);
  }
  return out;
}

namespace {

const KernelTable* pick_default() {
  if (const char* env = std::getenv("ABDISTILL_KERNELS")) {
    if (std::string(env) == "scalar") return &detail::kScalarTable;
  }
  if (available(Backend::Avx2)) return &table(Backend::Avx2);
  return &detail::kScalarTable;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> ptr{pick_default()};
  return ptr;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void set_active(Backend b) { current().store(&table(b), std::memory_order_release); }

}  // namespace abd::kernels
