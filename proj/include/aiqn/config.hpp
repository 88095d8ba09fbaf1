#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "aiqn/distributions.hpp"
#include "aiqn/network.hpp"
#include "aiqn/rng.hpp"
#include "aiqn/tensor.hpp"
#include "aiqn/train.hpp"

namespace aiqn {

/// Parses `gaussian(m,s)`, `uniform(a,b)`, `exponential(rate)` and
/// `mixture(w*component, ...)`. Throws ConfigError on malformed text.
AnalyticDist parse_distribution(const std::string& text);

enum class Task { kScalarAnalytic, kMultivariateGaussian, kBars8x8, kExternalIdx };

std::string to_string(Task task);
Task parse_task(const std::string& s);

/// One experiment. Read from flat `key = value` text with `#` comments;
/// unknown or repeated keys are rejected. Keys left out take task-dependent
/// defaults (model size from n, Polyak 0.999 for runs under 50K steps).
struct ExperimentConfig {
  Task task = Task::kScalarAnalytic;
  std::string distribution = "gaussian(3,2)";  // scalar-analytic
  std::size_t data_count = 100000;
  std::size_t dims = 2;    // multivariate-gaussian
  double rho = 0.8;        // multivariate-gaussian
  std::string idx_path;    // external-idx
  std::size_t image_rows = 0;
  std::size_t image_cols = 0;
  /// Empty means <out_dir>/data.aiqt.
  std::string data_path;
  /// Optional [m, c] tensor of per-example context (e.g. one-hot labels).
  std::string context_path;
  ModelSpec model;
  TrainConfig train;
  /// Model samples drawn by eval; 0 means min(m, 10000).
  std::size_t eval_samples = 0;
  std::string out_dir = "out";

  std::size_t data_dim() const;
  bool is_image() const { return image_rows > 0; }
  std::filesystem::path resolved_data_path() const;
  /// Analytic marginal of coordinate `dim`, when the task has one.
  std::optional<AnalyticDist> truth(std::size_t dim) const;
  /// Synthetic dataset for the generated tasks; external-idx reads idx_path.
  Tensor make_dataset(Rng& rng) const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Every key with its resolved value; parse_config(format_config(c)) == c.
std::string format_config(const ExperimentConfig& cfg);
bool equivalent(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace aiqn
