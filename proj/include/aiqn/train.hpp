#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aiqn/losses.hpp"
#include "aiqn/network.hpp"
#include "aiqn/optimizer.hpp"
#include "aiqn/tensor.hpp"

namespace aiqn {

inline constexpr double kDefaultLearningRate = 1e-4;
inline constexpr double kDefaultPolyak = 0.9999;
inline constexpr double kShortRunPolyak = 0.999;

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = kDefaultLearningRate;
  double kappa = kDefaultKappa;
  std::size_t batch_size = 64;
  std::size_t steps = 20000;
  double polyak = kDefaultPolyak;
  std::size_t eval_interval = 1000;
  std::uint64_t seed = 0;
  /// tau draws per example per step.
  std::size_t tau_samples = 1;
  /// (first step, learning rate) boundaries, ascending; applies from that step on.
  std::vector<std::pair<std::size_t, double>> lr_schedule;

  void validate() const;
  double learning_rate_at(std::size_t step) const;
};

std::string format_lr_schedule(const std::vector<std::pair<std::size_t, double>>& schedule);
std::vector<std::pair<std::size_t, double>> parse_lr_schedule(const std::string& text);

/// Everything needed to resume training or to sample.
struct Checkpoint {
  ModelSpec spec;
  MaskSet masks;
  std::vector<Tensor> params;
  std::vector<Tensor> polyak;
  OptimizerState optimizer;
  TrainConfig config;
  std::uint64_t step = 0;
  /// Free-form metadata carried through serialization (task name, image shape, ...).
  std::map<std::string, std::string> extra;

  AiqnModel raw_model() const;
  /// Model with Polyak-averaged parameters; the one used for sampling and evaluation.
  AiqnModel eval_model() const;
};

struct MetricsRow {
  std::size_t step = 0;
  double loss = 0.0;
  std::string metric;
  double value = 0.0;
};

/// CSV with header `step,loss,metric_name,metric_value`.
std::string metrics_csv(const std::vector<MetricsRow>& rows);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<MetricsRow> log;
  std::vector<double> losses;  // one per step
};

/// Non-finite loss or gradient. Carries the state before the failing step.
class TrainingAborted : public TrainingError {
 public:
  TrainingAborted(const std::string& what, Checkpoint last_good, std::size_t step)
      : TrainingError(what), last_good_(std::move(last_good)), step_(step) {}
  const Checkpoint& last_good() const noexcept { return last_good_; }
  std::size_t step() const noexcept { return step_; }

 private:
  Checkpoint last_good_;
  std::size_t step_;
};

/// Metrics computed on the Polyak-averaged model at each eval interval.
using Evaluator = std::function<std::vector<std::pair<std::string, double>>(const AiqnModel&)>;

/// Minibatches drawn with replacement; fresh tau per (example, dimension) per
/// step (one per example in shared mode); optimizer step then Polyak update.
TrainResult train(const AiqnModel& model, const Tensor& data, const TrainConfig& cfg,
                  const Tensor* context = nullptr, const Evaluator& evaluator = {});

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_param_index = 0;
  std::size_t worst_entry = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
  /// Masked entries whose analytic gradient was not exactly zero.
  std::size_t masked_nonzero = 0;
};

/// Gradient perturbation used to exercise the checker.
struct GradFault {
  std::size_t param = 0;
  std::size_t entry = 0;
  double delta = 1e-2;
};

inline constexpr std::size_t kFullGradCheckLimit = 50000;
inline constexpr std::size_t kGradCheckSubset = 200;
/// Denominator floor of the relative error, so that entries whose true
/// gradient is zero are judged on absolute error.
inline constexpr double kGradCheckFloor = 1e-6;

/// Relative error |a - f| / max(|a|, |f|, floor).
double grad_relative_error(double analytic, double numeric);

/// Generic five-point central-difference check. `loss` must read `params`. Entries where
/// `masks[i]` is zero are not perturbed; their analytic gradient must be 0.
GradCheckReport grad_check(std::vector<Tensor>& params, const std::vector<Tensor>& analytic,
                           const std::vector<std::string>& names,
                           const std::vector<const Tensor*>& masks,
                           const std::function<double()>& loss, double eps,
                           std::size_t max_entries, Rng& rng);

/// Checks AiqnModel::loss_and_grads on one batch: every parameter when the
/// model has at most kFullGradCheckLimit entries, else kGradCheckSubset random ones.
GradCheckReport grad_check(const AiqnModel& model, const Tensor& x, const Tensor& tau,
                           const Tensor& target, const LossConfig& cfg, double eps, Rng& rng,
                           const Tensor* ctx = nullptr,
                           std::optional<GradFault> fault = std::nullopt);

}  // namespace aiqn
