#include "memqa/rng.hpp"

#include <cmath>
#include <numbers>

namespace memqa {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t RngStream::NextU64() {
  const std::uint64_t key = SplitMix64(seed_);
  return SplitMix64(key ^ (counter_++ * 0xD1B54A32D192ED03ULL));
}

double RngStream::Uniform() {
  return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
}

double RngStream::Normal() {
  double u1 = Uniform();
  while (u1 <= 0.0) u1 = Uniform();
  const double u2 = Uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t RngStream::Below(std::size_t n) {
  // Lemire's multiply-shift; the bias for n << 2^64 is negligible here.
  const unsigned __int128 m = static_cast<unsigned __int128>(NextU64()) * n;
  return static_cast<std::size_t>(m >> 64);
}

RngStream RngStream::Split(std::uint64_t stream_id) const {
  return RngStream(SplitMix64(seed_ ^ SplitMix64(stream_id + 0x5851F42D4C957F2DULL)), 0);
}

}  // namespace memqa
