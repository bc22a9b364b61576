#pragma once

// Dense double-precision inner loops used by the autodiff core.
//
// Every kernel has a portable reference implementation in `generic::` and,
// on x86-64 builds, an AVX2/FMA variant in `avx2::`. The active table is
// picked once at startup from CPUID and can be pinned for testing. Variants
// differ only in summation order and FMA rounding, so results agree to a
// few ulps rather than bit-for-bit.

#include <cstddef>
#include <string_view>
#include <vector>

namespace memqa::simd {

using DotFn = double (*)(const double* a, const double* b, std::size_t n);
// y += alpha * x
using AxpyFn = void (*)(double alpha, const double* x, double* y, std::size_t n);
// out = a * b (elementwise)
using MulFn = void (*)(const double* a, const double* b, double* out, std::size_t n);
// y = max(y, x) (elementwise)
using MaxFn = void (*)(const double* x, double* y, std::size_t n);

struct KernelTable {
  std::string_view name;
  DotFn dot;
  AxpyFn axpy;
  MulFn mul;
  MaxFn vmax;
};

enum class Backend { kAuto, kGeneric, kAvx2 };

namespace generic {
double Dot(const double* a, const double* b, std::size_t n);
void Axpy(double alpha, const double* x, double* y, std::size_t n);
void Mul(const double* a, const double* b, double* out, std::size_t n);
void Max(const double* x, double* y, std::size_t n);
}  // namespace generic

#if defined(MEMQA_HAVE_AVX2)
namespace avx2 {
double Dot(const double* a, const double* b, std::size_t n);
void Axpy(double alpha, const double* x, double* y, std::size_t n);
void Mul(const double* a, const double* b, double* out, std::size_t n);
void Max(const double* x, double* y, std::size_t n);
}  // namespace avx2
#endif

bool CpuSupportsAvx2();

// Tables that can run on this machine, generic first.
std::vector<const KernelTable*> AvailableTables();

const KernelTable& Table(Backend backend);

// Active table; resolved from CPUID on first use.
const KernelTable& Active();

// Pins the active table. Throws std::invalid_argument if the requested
// backend is not available on this CPU or was not compiled in.
void SetBackend(Backend backend);

Backend ParseBackend(std::string_view name);

}  // namespace memqa::simd
