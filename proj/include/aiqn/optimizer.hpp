#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "aiqn/tensor.hpp"

namespace aiqn {

enum class OptimizerKind { kAdam, kRmsProp, kSgd };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& s);

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;
inline constexpr double kRmsPropDecay = 0.9;
inline constexpr double kRmsPropEpsilon = 1e-8;

/// Raised when training hits a non-finite gradient or loss.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Moment accumulators mirroring the parameter shapes. RMSProp uses only
/// `second`; SGD uses neither.
struct OptimizerState {
  std::vector<Tensor> first;
  std::vector<Tensor> second;
  std::uint64_t step = 0;

  static OptimizerState zeros_like(const std::vector<Tensor>& params);
};

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, OptimizerState& state,
               double lr);
void rmsprop_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                  OptimizerState& state, double lr);
void sgd_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, OptimizerState& state,
              double lr);
void optimizer_step(OptimizerKind kind, std::vector<Tensor>& params,
                    const std::vector<Tensor>& grads, OptimizerState& state, double lr);

/// avg <- w * avg + (1 - w) * params, elementwise. w in [0,1).
void polyak_update(std::vector<Tensor>& avg, const std::vector<Tensor>& params, double w);

}  // namespace aiqn
