#include "aiqn/divergences.hpp"

#include <algorithm>
#include <cmath>

#include "aiqn/errors.hpp"
#include "aiqn/linalg.hpp"
#include "aiqn/quadrature.hpp"

namespace aiqn {

QuantileFn::QuantileFn(std::function<double(double)> fn, bool monotone)
    : fn_(std::move(fn)), monotone_(monotone) {
  if (!fn_) throw DomainError("QuantileFn: empty callable");
  if (monotone_) {
    double prev = fn_(0.01);
    for (int k = 2; k <= 99; ++k) {
      const double v = fn_(k / 100.0);
      if (v < prev) throw DomainError("QuantileFn: declared monotone but decreases near tau=" +
                                      std::to_string(k / 100.0));
      prev = v;
    }
  }
}

QuantileFn QuantileFn::of(const AnalyticDist& d) {
  return QuantileFn([d](double t) { return d.quantile(t); }, true);
}

double expected_pinball(const AnalyticDist& p, double q, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError("expected_pinball: tau must lie in (0,1)");
  const double lo = p.support().first;
  const double partial =
      q > lo ? integrate([&](double x) { return p.cdf(x); }, lo, q, 1e-10) : 0.0;
  return partial + tau * (p.mean() - q);
}

double quantile_divergence_at(const AnalyticDist& p, double q_value, double tau, double tol) {
  const double start = p.quantile(tau);
  auto integrand = [&](double x) { return p.cdf(x) - tau; };
  if (q_value >= start) return integrate(integrand, start, q_value, tol);
  return -integrate(integrand, q_value, start, tol);
}

double quantile_divergence(const AnalyticDist& p, const QuantileFn& q, double tol) {
  if (!(tol > 0.0)) throw DomainError("quantile_divergence: tol must be positive");
  const double inner_tol = 0.1 * tol;
  const double value = integrate(
      [&](double tau) { return quantile_divergence_at(p, q(tau), tau, inner_tol); }, kTauLo,
      kTauHi, tol);
  return (value < 0.0 && value >= -tol) ? 0.0 : value;
}

double wasserstein1_empirical(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DomainError("wasserstein1_empirical: sample sizes differ (" + std::to_string(a.size()) +
                      " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw DomainError("wasserstein1_empirical: empty samples");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double s = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) s += std::abs(sa[i] - sb[i]);
  return s / static_cast<double>(sa.size());
}

MomentSummary moment_summary(const Tensor& features) {
  if (features.rank() != 2) throw DomainError("moment_summary: features must be [m,d]");
  const std::size_t m = features.rows();
  const std::size_t d = features.cols();
  if (m < 2) throw DomainError("moment_summary: need at least 2 rows");

  MomentSummary out{Tensor({d}), Tensor({d, d}), m};
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < d; ++j) out.mean[j] += features.at(r, j);
  for (std::size_t j = 0; j < d; ++j) out.mean[j] /= static_cast<double>(m);

  std::vector<double> centered(d);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t j = 0; j < d; ++j) centered[j] = features.at(r, j) - out.mean[j];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) out.cov.at(i, j) += centered[i] * centered[j];
  }
  const double norm = 1.0 / static_cast<double>(m - 1);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      out.cov.at(i, j) *= norm;
      out.cov.at(j, i) = out.cov.at(i, j);
    }
  return out;
}

double frechet_distance(const MomentSummary& a, const MomentSummary& b) {
  const std::size_t d = a.mean.size();
  if (b.mean.size() != d || a.cov.size() != d * d || b.cov.size() != d * d) {
    throw DomainError("frechet_distance: dimension mismatch");
  }
  double mean_term = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double diff = a.mean[j] - b.mean[j];
    mean_term += diff * diff;
  }
  double trace = 0.0;
  for (std::size_t j = 0; j < d; ++j) trace += a.cov.at(j, j) + b.cov.at(j, j);

  // Tr (S1 S2)^{1/2} = Tr (S1^{1/2} S2 S1^{1/2})^{1/2}; the middle matrix is symmetric PSD.
  const Tensor root_a = sym_sqrt(a.cov);
  Tensor middle = matmul(matmul(root_a, b.cov), root_a);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      const double s = 0.5 * (middle.at(i, j) + middle.at(j, i));
      middle.at(i, j) = middle.at(j, i) = s;
    }
  double cross = 0.0;
  for (double lambda : sym_eig(middle).values) cross += std::sqrt(std::max(lambda, 0.0));

  return std::max(0.0, mean_term + trace - 2.0 * cross);
}

}  // namespace aiqn
