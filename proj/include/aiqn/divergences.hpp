#pragma once

#include <functional>
#include <span>

#include "aiqn/distributions.hpp"
#include "aiqn/tensor.hpp"

namespace aiqn {

inline constexpr double kTauLo = 1e-4;
inline constexpr double kTauHi = 1.0 - 1e-4;

/// A scalar quantile function tau -> value. When declared monotone, it is
/// checked to be nondecreasing on the grid {0.01, ..., 0.99} at construction.
class QuantileFn {
 public:
  QuantileFn(std::function<double(double)> fn, bool monotone);

  static QuantileFn of(const AnalyticDist& d);

  double operator()(double tau) const { return fn_(tau); }
  bool monotone() const noexcept { return monotone_; }

 private:
  std::function<double(double)> fn_;
  bool monotone_;
};

/// g_tau(q) = E_{z~P}[rho_tau(z - q)], via the integration-by-parts form
/// int_{-inf}^q F_P(x) dx + tau (E[X] - q).
double expected_pinball(const AnalyticDist& p, double q, double tau);

/// Inner integral of the quantile divergence at one tau:
/// int_{F_P^{-1}(tau)}^{Q(tau)} (F_P(x) - tau) dx.
double quantile_divergence_at(const AnalyticDist& p, double q_value, double tau, double tol);

/// q(P,Q) = int_0^1 int_{F_P^{-1}(tau)}^{Q(tau)} (F_P(x) - tau) dx dtau with the
/// outer integral over [kTauLo, kTauHi].
double quantile_divergence(const AnalyticDist& p, const QuantileFn& q, double tol);

/// Mean absolute difference of order statistics; sizes must match.
double wasserstein1_empirical(std::span<const double> a, std::span<const double> b);

struct MomentSummary {
  Tensor mean;  // [d]
  Tensor cov;   // [d,d]
  std::size_t count = 0;
};

/// Sample mean and unbiased covariance of the rows of `features` [m,d], m >= 2.
MomentSummary moment_summary(const Tensor& features);

/// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}), clamped at 0.
double frechet_distance(const MomentSummary& a, const MomentSummary& b);

}  // namespace aiqn
