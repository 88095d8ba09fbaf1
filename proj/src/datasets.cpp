#include "aiqn/datasets.hpp"

#include <cmath>

#include "aiqn/errors.hpp"

namespace aiqn {

Tensor sample_analytic(const AnalyticDist& dist, std::size_t count, Rng& rng) {
  Tensor out({count, 1});
  for (std::size_t i = 0; i < count; ++i) out[i] = dist.sample(rng);
  return out;
}

Tensor sample_equicorrelated_gaussian(std::size_t dims, double rho, std::size_t count, Rng& rng) {
  if (dims == 0) throw DomainError("equicorrelated gaussian: dims must be >= 1");
  if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("equicorrelated gaussian: rho must lie in [0,1)");
  const double shared = std::sqrt(rho);
  const double own = std::sqrt(1.0 - rho);
  Tensor out({count, dims});
  for (std::size_t r = 0; r < count; ++r) {
    const double z0 = rng.normal();
    for (std::size_t j = 0; j < dims; ++j) out.at(r, j) = shared * z0 + own * rng.normal();
  }
  return out;
}

namespace bars {

std::array<std::size_t, 2> bottom_modes(std::size_t top) {
  if (top >= 4) throw DomainError("bars: top column must be in 0..3");
  return {top, top + 4};
}

std::array<double, kPixels> clean_image(std::size_t top, std::size_t bottom) {
  std::array<double, kPixels> img{};
  for (std::size_t r = 0; r < kSide; ++r) img[r * kSide + (r < kSide / 2 ? top : bottom)] = 1.0;
  return img;
}

Tensor generate(std::size_t count, Rng& rng) {
  Tensor out({count, kPixels});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t top = rng.below(4);
    const std::size_t bottom = bottom_modes(top)[rng.below(2)];
    const auto clean = clean_image(top, bottom);
    for (std::size_t p = 0; p < kPixels; ++p) {
      const double u = kNoise * rng.uniform();
      out.at(i, p) = clean[p] > 0.5 ? 1.0 - u : u;
    }
  }
  return out;
}

std::size_t top_column(std::span<const double> image) {
  if (image.size() < kHalf) throw DomainError("bars: image needs at least the top half");
  std::size_t best = 0;
  double best_sum = -1.0;
  for (std::size_t c = 0; c < kSide; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < kSide / 2; ++r) s += image[r * kSide + c];
    if (s > best_sum) {
      best_sum = s;
      best = c;
    }
  }
  return best;
}

std::size_t nearest_mode(std::span<const double> image, std::size_t top) {
  if (image.size() != kPixels) throw DomainError("bars: image must have 64 pixels");
  const auto modes = bottom_modes(top);
  double dist[2] = {0.0, 0.0};
  for (std::size_t m = 0; m < 2; ++m) {
    const auto clean = clean_image(top, modes[m]);
    for (std::size_t p = kHalf; p < kPixels; ++p) {
      const double d = image[p] - clean[p];
      dist[m] += d * d;
    }
  }
  return dist[1] < dist[0] ? 1 : 0;
}

}  // namespace bars
}  // namespace aiqn
