#include "memqa/simd/kernels.hpp"

namespace memqa::simd::generic {

double Dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void Axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void Mul(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void Max(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > y[i]) y[i] = x[i];
  }
}

}  // namespace memqa::simd::generic
