#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace aiqn {

/// Counter-based splittable generator. Output k of a stream is a pure
/// function of (key, k), so results do not depend on evaluation order
/// across streams. Not thread-safe; give each thread its own split stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform on [0,1) with a full 53-bit mantissa.
  double uniform();
  /// Standard normal by Box-Muller. Each pair of uniforms yields two
  /// normals, returned in order.
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Child stream `index`; depends only on this stream's key and `index`.
  Rng stream(std::uint64_t index) const;
  std::vector<Rng> split(std::size_t count) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t position() const noexcept { return counter_; }

 private:
  Rng(std::uint64_t seed, std::uint64_t key) : seed_(seed), key_(key) {}

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::optional<double> spare_normal_;
};

}  // namespace aiqn
