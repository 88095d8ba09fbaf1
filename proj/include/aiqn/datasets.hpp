#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "aiqn/distributions.hpp"
#include "aiqn/rng.hpp"
#include "aiqn/tensor.hpp"

namespace aiqn {

/// [count, 1] i.i.d. draws.
Tensor sample_analytic(const AnalyticDist& dist, std::size_t count, Rng& rng);

/// [count, dims] standard normals with every pairwise correlation equal to rho
/// (x_i = sqrt(rho) z_0 + sqrt(1 - rho) z_i). Requires 0 <= rho < 1.
Tensor sample_equicorrelated_gaussian(std::size_t dims, double rho, std::size_t count, Rng& rng);

/// 8x8 bar images in raster order. The top four rows hold a vertical bar in a
/// column c drawn uniformly from 0..3; the bottom four rows hold a vertical bar
/// in column c or c + 4 with probability 1/2 each. Bar pixels are 1 - U(0, 0.05),
/// background pixels U(0, 0.05).
namespace bars {

inline constexpr std::size_t kSide = 8;
inline constexpr std::size_t kPixels = kSide * kSide;
inline constexpr std::size_t kHalf = kPixels / 2;
inline constexpr double kNoise = 0.05;

Tensor generate(std::size_t count, Rng& rng);
/// One noise-free image with top bar in `top_column` and bottom bar in `bottom_column`.
std::array<double, kPixels> clean_image(std::size_t top_column, std::size_t bottom_column);
/// The two admissible bottom-half columns for a top bar column.
std::array<std::size_t, 2> bottom_modes(std::size_t top_column);
/// Column of the top-half bar, by largest column mean over the top rows.
std::size_t top_column(std::span<const double> image);
/// Index (0 or 1) of the nearest noise-free bottom half; ties go to mode 0.
std::size_t nearest_mode(std::span<const double> image, std::size_t top_column);

}  // namespace bars
}  // namespace aiqn
