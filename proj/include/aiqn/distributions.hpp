#pragma once

#include <utility>
#include <vector>

#include "aiqn/rng.hpp"

namespace aiqn {

/// Standard normal quantile: Acklam's rational approximation followed by
/// one Halley step against the exact CDF.
double inverse_normal_cdf(double p);
double normal_cdf(double z);

/// Closed-form scalar distribution used as ground truth in 1-D work.
/// Parameters are validated at construction.
class AnalyticDist {
 public:
  enum class Kind { kGaussian, kUniform, kExponential, kMixture };

  static AnalyticDist gaussian(double mean, double stddev);
  static AnalyticDist uniform(double lo, double hi);
  static AnalyticDist exponential(double rate);
  static AnalyticDist mixture(std::vector<double> weights, std::vector<AnalyticDist> components);

  Kind kind() const noexcept { return kind_; }

  double pdf(double x) const;
  double cdf(double x) const;
  /// Inverse CDF; tau must lie in (0,1).
  double quantile(double tau) const;
  double mean() const;
  double variance() const;
  double sample(Rng& rng) const;

  /// Finite interval carrying all but a negligible tail of the mass; used
  /// as integration limits.
  std::pair<double, double> support() const;

  const std::vector<double>& params() const noexcept { return params_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<AnalyticDist>& components() const noexcept { return components_; }

 private:
  AnalyticDist(Kind kind, std::vector<double> params) : kind_(kind), params_(std::move(params)) {}

  Kind kind_;
  std::vector<double> params_;
  std::vector<double> weights_;
  std::vector<AnalyticDist> components_;
};

}  // namespace aiqn
