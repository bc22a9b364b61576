#include <cmath>
#include <vector>

#include "doctest.h"
#include "memqa/rng.hpp"
#include "memqa/simd/kernels.hpp"

using namespace memqa;
using namespace memqa::simd;

namespace {

std::vector<double> Random(std::size_t n, RngStream& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.Uniform(-3.0, 3.0);
  return v;
}

// Lengths around every vector-width boundary.
const std::size_t kLengths[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 33, 64, 100, 257};

}  // namespace

TEST_SUITE("simd") {
  TEST_CASE("generic kernels match naive loops") {
    RngStream rng(1);
    const KernelTable& k = Table(Backend::kGeneric);
    for (std::size_t n : kLengths) {
      auto a = Random(n, rng), b = Random(n, rng);
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += a[i] * b[i];
      CHECK(k.dot(a.data(), b.data(), n) == doctest::Approx(dot).epsilon(1e-12));

      auto y = b;
      k.axpy(0.5, a.data(), y.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(y[i] == doctest::Approx(b[i] + 0.5 * a[i]));

      std::vector<double> out(n);
      k.mul(a.data(), b.data(), out.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(out[i] == a[i] * b[i]);

      auto m = b;
      k.vmax(a.data(), m.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(m[i] == std::max(a[i], b[i]));
    }
  }

  TEST_CASE("every available backend agrees with the generic reference") {
    RngStream rng(2);
    const KernelTable& ref = Table(Backend::kGeneric);
    for (const KernelTable* k : AvailableTables()) {
      CAPTURE(k->name);
      for (std::size_t n : kLengths) {
        auto a = Random(n, rng), b = Random(n, rng);
        double scale = 0.0;
        for (std::size_t i = 0; i < n; ++i) scale += std::abs(a[i] * b[i]);
        CHECK(std::abs(k->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= 1e-13 * (scale + 1.0));

        auto y1 = b, y2 = b;
        k->axpy(-1.25, a.data(), y1.data(), n);
        ref.axpy(-1.25, a.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-14));

        std::vector<double> o1(n), o2(n);
        k->mul(a.data(), b.data(), o1.data(), n);
        ref.mul(a.data(), b.data(), o2.data(), n);
        CHECK(o1 == o2);

        auto m1 = b, m2 = b;
        k->vmax(a.data(), m1.data(), n);
        ref.vmax(a.data(), m2.data(), n);
        CHECK(m1 == m2);
      }
    }
  }

  TEST_CASE("backend selection") {
    CHECK(AvailableTables().front() == &Table(Backend::kGeneric));
    CHECK(ParseBackend("generic") == Backend::kGeneric);
    CHECK_THROWS(ParseBackend("sse9"));
    const KernelTable* before = &Active();
    SetBackend(Backend::kGeneric);
    CHECK(&Active() == &Table(Backend::kGeneric));
    if (CpuSupportsAvx2() && AvailableTables().size() > 1) {
      SetBackend(Backend::kAvx2);
      CHECK(Active().name == Table(Backend::kAvx2).name);
    }
    SetBackend(Backend::kAuto);
    CHECK(&Active() == before);
  }
}
