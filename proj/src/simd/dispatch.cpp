#include <atomic>
#include <stdexcept>
#include <string>

#include "memqa/simd/kernels.hpp"

namespace memqa::simd {
namespace {

constexpr KernelTable kGenericTable{"generic", generic::Dot, generic::Axpy, generic::Mul,
                                    generic::Max};
#if defined(MEMQA_HAVE_AVX2)
constexpr KernelTable kAvx2Table{"avx2", avx2::Dot, avx2::Axpy, avx2::Mul, avx2::Max};
#endif

const KernelTable* Detect() {
#if defined(MEMQA_HAVE_AVX2)
  if (CpuSupportsAvx2()) return &kAvx2Table;
#endif
  return &kGenericTable;
}

std::atomic<const KernelTable*>& ActiveSlot() {
  static std::atomic<const KernelTable*> slot{Detect()};
  return slot;
}

}  // namespace

bool CpuSupportsAvx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::vector<const KernelTable*> AvailableTables() {
  std::vector<const KernelTable*> out{&kGenericTable};
#if defined(MEMQA_HAVE_AVX2)
  if (CpuSupportsAvx2()) out.push_back(&kAvx2Table);
#endif
  return out;
}

const KernelTable& Table(Backend backend) {
  switch (backend) {
    case Backend::kAuto:
      return *Detect();
    case Backend::kGeneric:
      return kGenericTable;
    case Backend::kAvx2:
#if defined(MEMQA_HAVE_AVX2)
      if (CpuSupportsAvx2()) return kAvx2Table;
#endif
      throw std::invalid_argument("avx2 kernels are not available on this machine");
  }
  return kGenericTable;
}

const KernelTable& Active() { return *ActiveSlot().load(std::memory_order_acquire); }

void SetBackend(Backend backend) {
  ActiveSlot().store(&Table(backend), std::memory_order_release);
}

Backend ParseBackend(std::string_view name) {
  if (name == "auto") return Backend::kAuto;
  if (name == "generic" || name == "scalar") return Backend::kGeneric;
  if (name == "avx2") return Backend::kAvx2;
  throw std::invalid_argument("unknown kernel backend '" + std::string(name) + "'");
}

}  // namespace memqa::simd
