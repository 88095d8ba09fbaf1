#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aiqn/distributions.hpp"
#include "aiqn/divergences.hpp"
#include "aiqn/network.hpp"
#include "aiqn/tensor.hpp"

namespace aiqn {

struct SampleRequest {
  std::size_t count = 1;
  std::uint64_t seed = 0;
  /// Overrides how tau is drawn; kShared gives one tau per sample for every position.
  std::optional<TauMode> tau_mode;
  std::vector<double> context;
  std::optional<std::pair<double, double>> clamp;
};

struct InpaintRequest {
  /// Values for the first k positions of the model's ordering, 1 <= k < n.
  std::vector<double> prefix;
  std::size_t count = 1;
  std::uint64_t seed = 0;
  std::vector<double> context;
  std::optional<std::pair<double, double>> clamp;
};

/// Rows are processed in chunks of this size; each sample has its own tau stream.
inline constexpr std::size_t kSampleChunk = 256;

Tensor sample(const AiqnModel& model, const SampleRequest& req);
Tensor inpaint(const AiqnModel& model, const InpaintRequest& req);

/// Throws DomainError unless `positions` is exactly {ordering[0..k-1]} for some 1 <= k < n.
std::size_t check_ordering_prefix(const AiqnModel& model, const std::vector<std::size_t>& positions);

/// Learned quantile map of an x-independent output (n == 1 or non-autoregressive);
/// the other coordinates are held at zero and their tau at 0.5.
QuantileFn learned_quantile_fn(const AiqnModel& model, std::size_t dim);

using FeatureMap = std::function<Tensor(const Tensor&)>;

struct EvalOptions {
  std::uint64_t seed = 0;
  /// 0 means min(m, 10000).
  std::size_t sample_count = 0;
  FeatureMap features;
  /// Analytic marginal per dimension, for the quantile divergence rows.
  std::vector<std::optional<AnalyticDist>> truths;
  double divergence_tol = 1e-7;
};

struct MetricRow {
  std::string metric;
  double value = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kMinEvalRows = 100;
inline constexpr std::size_t kDefaultEvalSamples = 10000;
inline constexpr std::size_t kFloorSplits = 8;

/// Compares `samples` with `data`: per-dimension W1 on equal-size subsamples,
/// Frechet distance on raw vectors or features, and the split-half noise floor
/// of each (two disjoint halves of the data compared the same way).
std::vector<MetricRow> compare_samples(const Tensor& samples, const Tensor& data,
                                       const EvalOptions& opts);

/// Draws model samples and runs compare_samples, plus per-marginal quantile
/// divergence for every dimension with a known truth whose output does not read x.
std::vector<MetricRow> eval_suite(const AiqnModel& model, const Tensor& data, const EvalOptions& opts);

/// CSV with header `metric,value,samples,seed`.
std::string metric_csv(const std::vector<MetricRow>& rows);
const MetricRow* find_metric(const std::vector<MetricRow>& rows, const std::string& name);

struct DensityRow {
  double tau = 0.0;
  double exact = 0.0;
  double finite_difference = 0.0;
  std::optional<double> density;  // 1 / exact when exact > 1e-8
};

inline constexpr double kDensityFloor = 1e-8;

/// dQ/dtau along `dim` at row `x`; the other tau entries are held at 0.5.
std::vector<DensityRow> quantile_density_report(const AiqnModel& model, const std::vector<double>& x,
                                                const std::vector<double>& tau_grid, std::size_t dim,
                                                const std::vector<double>& context = {});

/// Bootstrap resample of the rows of `data`.
Tensor bootstrap_rows(const Tensor& data, std::size_t count, Rng& rng);

double pearson_correlation(std::span<const double> a, std::span<const double> b);
/// Pearson correlation of ranks (average ranks for ties).
double spearman_correlation(std::span<const double> a, std::span<const double> b);

}  // namespace aiqn
