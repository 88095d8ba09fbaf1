#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aiqn/losses.hpp"
#include "aiqn/rng.hpp"
#include "aiqn/tensor.hpp"

namespace aiqn {

/// Init half-widths of the per-position tau map (weights v, offsets e).
inline constexpr double kTauWeightInit = 1.0;
inline constexpr double kTauBiasInit = 2.0;

enum class TauMode {
  kPerDimension,  // tau_i per output
  kShared,        // one tau for all outputs (comonotonic)
};

std::string to_string(TauMode mode);
TauMode parse_tau_mode(const std::string& s);

struct ModelSpec {
  std::size_t n = 1;
  std::vector<std::size_t> hidden{64, 64};
  /// Width of the per-position gated stream.
  std::size_t head_width = 64;
  std::size_t context_width = 0;
  /// ordering[r] is the position generated at step r. Empty means identity.
  std::vector<std::size_t> ordering;
  TauMode tau_mode = TauMode::kPerDimension;
  /// false: every x-mask is zero, giving the independent-marginals variant.
  bool autoregressive = true;

  /// 2 blocks of width 64 for n <= 16, 3 blocks of width 256 otherwise.
  static ModelSpec defaults_for(std::size_t n);

  void validate() const;
  std::vector<std::size_t> resolved_ordering() const;
};

/// MADE-style connectivity for the trunk. Degrees of each layer are sorted
/// ascending so that units sharing a degree form a contiguous column range.
struct MaskSet {
  std::vector<std::vector<std::size_t>> degrees;  // per layer, values in 1..max(1,n-1)
  std::vector<Tensor> trunk;                      // per layer [fan_in, width], entries 0/1
};

/// Input j reaches unit u iff degree(u) >= rank(j); hidden-to-hidden iff
/// degree(dst) >= degree(src). Output i later reads units with degree < rank(i).
/// With n == 1 or `autoregressive == false` every x-mask is zero.
MaskSet build_masks(std::size_t n, const std::vector<std::size_t>& hidden,
                    const std::vector<std::size_t>& ordering, Rng& rng,
                    bool autoregressive = true);

struct Gradients {
  std::vector<Tensor> params;
  Tensor dx;    // [B,n]
  Tensor dtau;  // [B,n], w.r.t. tau in [0,1] (not the rescaled value)
};

struct LossAndGrads {
  double loss = 0.0;
  Tensor pred;
  Gradients grads;
};

/// Masked autoregressive implicit quantile network.
///
/// Block k has a trunk of gated units over x (masked by degree) and a
/// gated stream per output position i whose pre-activations are
///   A^T (trunk units with degree < rank(i)) + U h_{k-1}[i] + e[i] + (2 tau_i - 1) v + C ctx.
/// tau_i and the context enter only position i's stream, so output i
/// depends on x through x_{<i} and on tau only through tau_i.
class AiqnModel {
 public:
  static AiqnModel build(const ModelSpec& spec, Rng& rng);

  const ModelSpec& spec() const noexcept { return spec_; }
  std::size_t n() const noexcept { return spec_.n; }
  const std::vector<std::size_t>& ordering() const noexcept { return ordering_; }
  /// 1-based generation rank of each position.
  const std::vector<std::size_t>& ranks() const noexcept { return ranks_; }
  const MaskSet& masks() const noexcept { return masks_; }

  const std::vector<Tensor>& params() const noexcept { return params_; }
  std::vector<Tensor>& params() noexcept { return params_; }
  const std::vector<std::string>& param_names() const noexcept { return names_; }
  /// Mask applied to parameter `index`, or nullptr when it is unmasked.
  const Tensor* param_mask(std::size_t index) const;
  std::size_t param_count() const;

  /// Same architecture and masks with a different parameter set.
  AiqnModel with_params(std::vector<Tensor> params) const;
  /// Parameter names, in storage order, for an architecture.
  static std::vector<std::string> parameter_names(const ModelSpec& spec);
  /// Rebuilds a model from stored structure; validates every shape.
  static AiqnModel restore(const ModelSpec& spec, MaskSet masks, std::vector<Tensor> params);

  /// x [B,n], tau [B,n] in [0,1], ctx [B,c] (required iff c > 0). Returns [B,n].
  Tensor forward(const Tensor& x, const Tensor& tau, const Tensor* ctx = nullptr) const;

  /// Reverse pass for an arbitrary upstream gradient d(objective)/d(output).
  Gradients backprop(const Tensor& x, const Tensor& tau, const Tensor* ctx,
                     const Tensor& dout) const;

  /// Batch quantile loss against `target` and its exact gradients.
  LossAndGrads loss_and_grads(const Tensor& x, const Tensor& tau, const Tensor& target,
                              const LossConfig& cfg, const Tensor* ctx = nullptr) const;

 private:
  struct BlockIndex {
    std::size_t wf, wg, bf, bg;
    std::size_t af, ag;
    std::optional<std::size_t> uf, ug;
    std::size_t ef, eg, vf, vg;
    std::optional<std::size_t> cf, cg;
  };
  struct Cache;

  AiqnModel() = default;
  void layout();
  void check_inputs(const Tensor& x, const Tensor& tau, const Tensor* ctx) const;
  void run_forward(const Tensor& x, const Tensor& tau, const Tensor* ctx, Cache& cache) const;
  Gradients backward(const Cache& cache, const Tensor& dout) const;

  ModelSpec spec_;
  std::vector<std::size_t> ordering_;
  std::vector<std::size_t> ranks_;
  MaskSet masks_;
  std::vector<std::vector<std::size_t>> degree_offsets_;  // per layer, size n+1
  std::vector<Tensor> params_;
  std::vector<std::string> names_;
  std::vector<BlockIndex> blocks_;
  std::size_t out_w_ = 0;
  std::size_t out_b_ = 0;
};

/// Exact d output[dim] / d tau[dim] for a single row by one reverse pass.
/// In shared mode the derivative is taken w.r.t. the shared tau.
double dquantile_dtau(const AiqnModel& model, std::span<const double> x,
                      std::span<const double> tau, std::size_t dim,
                      std::span<const double> ctx = {});

/// Central difference (Q(tau+h) - Q(tau-h)) / 2h along tau[dim]; h shrinks to
/// keep tau +- h inside (0,1).
double dquantile_dtau_fd(const AiqnModel& model, std::span<const double> x,
                         std::span<const double> tau, std::size_t dim, double h = 1e-4,
                         std::span<const double> ctx = {});

}  // namespace aiqn
