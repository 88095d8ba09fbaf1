#include "aiqn/rng.hpp"

#include <cmath>
#include <numbers>

namespace aiqn {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), key_(mix64(seed ^ 0x5851F42D4C957F2DULL)) {}

std::uint64_t Rng::next_u64() {
  const std::uint64_t c = counter_++;
  return mix64(key_ + (c + 1) * kGolden);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (spare_normal_) {
    const double z = *spare_normal_;
    spare_normal_.reset();
    return z;
  }
  const double u1 = 1.0 - uniform();  // (0,1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(a);
  return r * std::cos(a);
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Lemire's multiply-shift; bias is below 2^-64 * n and irrelevant here.
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

Rng Rng::stream(std::uint64_t index) const {
  return Rng(seed_, mix64(key_ ^ mix64(index + kGolden)));
}

std::vector<Rng> Rng::split(std::size_t count) const {
  std::vector<Rng> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(stream(k));
  return out;
}

}  // namespace aiqn
