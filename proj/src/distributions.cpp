#include "aiqn/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "aiqn/errors.hpp"

namespace aiqn {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("inverse_normal_cdf: p must lie in (0,1)");

  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // Halley refinement.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

AnalyticDist AnalyticDist::gaussian(double mean, double stddev) {
  if (!std::isfinite(mean) || !(stddev > 0.0) || !std::isfinite(stddev)) {
    throw DomainError("gaussian: require finite mean and stddev > 0");
  }
  return AnalyticDist(Kind::kGaussian, {mean, stddev});
}

AnalyticDist AnalyticDist::uniform(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) {
    throw DomainError("uniform: require finite bounds with hi > lo");
  }
  return AnalyticDist(Kind::kUniform, {lo, hi});
}

AnalyticDist AnalyticDist::exponential(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw DomainError("exponential: require rate > 0");
  return AnalyticDist(Kind::kExponential, {rate});
}

AnalyticDist AnalyticDist::mixture(std::vector<double> weights,
                                   std::vector<AnalyticDist> components) {
  if (weights.empty() || weights.size() != components.size()) {
    throw DomainError("mixture: need one weight per component");
  }
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("mixture: negative weight");
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("mixture: weights must sum to 1");
  AnalyticDist d(Kind::kMixture, {});
  d.weights_ = std::move(weights);
  d.components_ = std::move(components);
  return d;
}

double AnalyticDist::pdf(double x) const {
  switch (kind_) {
    case Kind::kGaussian: {
      const double z = (x - params_[0]) / params_[1];
      return std::exp(-0.5 * z * z) / (params_[1] * std::sqrt(2.0 * std::numbers::pi));
    }
    case Kind::kUniform:
      return (x >= params_[0] && x <= params_[1]) ? 1.0 / (params_[1] - params_[0]) : 0.0;
    case Kind::kExponential:
      return x < 0.0 ? 0.0 : params_[0] * std::exp(-params_[0] * x);
    case Kind::kMixture: {
      double s = 0.0;
      for (std::size_t k = 0; k < weights_.size(); ++k) s += weights_[k] * components_[k].pdf(x);
      return s;
    }
  }
  return 0.0;
}

double AnalyticDist::cdf(double x) const {
  switch (kind_) {
    case Kind::kGaussian:
      return normal_cdf((x - params_[0]) / params_[1]);
    case Kind::kUniform:
      return std::clamp((x - params_[0]) / (params_[1] - params_[0]), 0.0, 1.0);
    case Kind::kExponential:
      return x <= 0.0 ? 0.0 : -std::expm1(-params_[0] * x);
    case Kind::kMixture: {
      double s = 0.0;
      for (std::size_t k = 0; k < weights_.size(); ++k) s += weights_[k] * components_[k].cdf(x);
      return std::min(s, 1.0);
    }
  }
  return 0.0;
}

double AnalyticDist::quantile(double tau) const {
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError("quantile: tau must lie in (0,1)");
  switch (kind_) {
    case Kind::kGaussian:
      return params_[0] + params_[1] * inverse_normal_cdf(tau);
    case Kind::kUniform:
      return params_[0] + tau * (params_[1] - params_[0]);
    case Kind::kExponential:
      return -std::log1p(-tau) / params_[0];
    case Kind::kMixture: {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (const auto& c : components_) {
        lo = std::min(lo, c.quantile(1e-12));
        hi = std::max(hi, c.quantile(1.0 - 1e-12));
      }
      while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (cdf(mid) < tau ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
  }
  return 0.0;
}

double AnalyticDist::mean() const {
  switch (kind_) {
    case Kind::kGaussian:
      return params_[0];
    case Kind::kUniform:
      return 0.5 * (params_[0] + params_[1]);
    case Kind::kExponential:
      return 1.0 / params_[0];
    case Kind::kMixture: {
      double s = 0.0;
      for (std::size_t k = 0; k < weights_.size(); ++k) s += weights_[k] * components_[k].mean();
      return s;
    }
  }
  return 0.0;
}

double AnalyticDist::variance() const {
  switch (kind_) {
    case Kind::kGaussian:
      return params_[1] * params_[1];
    case Kind::kUniform: {
      const double w = params_[1] - params_[0];
      return w * w / 12.0;
    }
    case Kind::kExponential:
      return 1.0 / (params_[0] * params_[0]);
    case Kind::kMixture: {
      const double m = mean();
      double s = 0.0;
      for (std::size_t k = 0; k < weights_.size(); ++k) {
        const double dm = components_[k].mean() - m;
        s += weights_[k] * (components_[k].variance() + dm * dm);
      }
      return s;
    }
  }
  return 0.0;
}

double AnalyticDist::sample(Rng& rng) const {
  switch (kind_) {
    case Kind::kGaussian:
      return params_[0] + params_[1] * rng.normal();
    case Kind::kUniform:
      return params_[0] + rng.uniform() * (params_[1] - params_[0]);
    case Kind::kExponential:
      return -std::log1p(-rng.uniform()) / params_[0];
    case Kind::kMixture: {
      const double u = rng.uniform();
      double acc = 0.0;
      std::size_t k = 0;
      for (; k + 1 < weights_.size(); ++k) {
        acc += weights_[k];
        if (u < acc) break;
      }
      return components_[k].sample(rng);
    }
  }
  return 0.0;
}

std::pair<double, double> AnalyticDist::support() const {
  switch (kind_) {
    case Kind::kGaussian:
      return {params_[0] - 10.0 * params_[1], params_[0] + 10.0 * params_[1]};
    case Kind::kUniform:
      return {params_[0], params_[1]};
    case Kind::kExponential:
      return {0.0, quantile(1.0 - 1e-12)};
    case Kind::kMixture: {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (const auto& c : components_) {
        const auto [a, b] = c.support();
        lo = std::min(lo, a);
        hi = std::max(hi, b);
      }
      return {lo, hi};
    }
  }
  return {0.0, 0.0};
}

}  // namespace aiqn
