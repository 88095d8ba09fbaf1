#include "aiqn/optimizer.hpp"

#include <cmath>

#include "aiqn/errors.hpp"

namespace aiqn {
namespace {

void check_grads(const std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) throw DomainError("optimizer: gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape()) {
      throw DomainError("optimizer: gradient shape mismatch at parameter " + std::to_string(i));
    }
    for (std::size_t j = 0; j < grads[i].size(); ++j) {
      if (!std::isfinite(grads[i][j])) {
        throw TrainingError("optimizer: non-finite gradient at parameter " + std::to_string(i) +
                            " entry " + std::to_string(j));
      }
    }
  }
}

void ensure_state(OptimizerState& state, const std::vector<Tensor>& params) {
  if (state.first.empty() && state.second.empty()) {
    state = OptimizerState::zeros_like(params);
    return;
  }
  if (state.first.size() != params.size() || state.second.size() != params.size()) {
    throw DomainError("optimizer: state does not match parameters");
  }
}

}  // namespace

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kAdam: return "adam";
    case OptimizerKind::kRmsProp: return "rmsprop";
    case OptimizerKind::kSgd: return "sgd";
  }
  return "adam";
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "rmsprop") return OptimizerKind::kRmsProp;
  if (s == "sgd") return OptimizerKind::kSgd;
  throw DomainError("unknown optimizer '" + s + "' (expected adam, rmsprop or sgd)");
}

OptimizerState OptimizerState::zeros_like(const std::vector<Tensor>& params) {
  OptimizerState s;
  for (const auto& p : params) {
    s.first.emplace_back(p.shape());
    s.second.emplace_back(p.shape());
  }
  return s;
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, OptimizerState& state,
               double lr) {
  check_grads(params, grads);
  ensure_state(state, params);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(kAdamBeta1, t);
  const double c2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    Tensor& m = state.first[i];
    Tensor& v = state.second[i];
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = kAdamBeta1 * m[j] + (1.0 - kAdamBeta1) * g[j];
      v[j] = kAdamBeta2 * v[j] + (1.0 - kAdamBeta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + kAdamEpsilon);
    }
  }
}

void rmsprop_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                  OptimizerState& state, double lr) {
  check_grads(params, grads);
  ensure_state(state, params);
  ++state.step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    Tensor& v = state.second[i];
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      v[j] = kRmsPropDecay * v[j] + (1.0 - kRmsPropDecay) * g[j] * g[j];
      p[j] -= lr * g[j] / (std::sqrt(v[j]) + kRmsPropEpsilon);
    }
  }
}

void sgd_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, OptimizerState& state,
              double lr) {
  check_grads(params, grads);
  ensure_state(state, params);
  ++state.step;
  for (std::size_t i = 0; i < params.size(); ++i)
    for (std::size_t j = 0; j < params[i].size(); ++j) params[i][j] -= lr * grads[i][j];
}

void optimizer_step(OptimizerKind kind, std::vector<Tensor>& params,
                    const std::vector<Tensor>& grads, OptimizerState& state, double lr) {
  switch (kind) {
    case OptimizerKind::kAdam: adam_step(params, grads, state, lr); return;
    case OptimizerKind::kRmsProp: rmsprop_step(params, grads, state, lr); return;
    case OptimizerKind::kSgd: sgd_step(params, grads, state, lr); return;
  }
}

void polyak_update(std::vector<Tensor>& avg, const std::vector<Tensor>& params, double w) {
  if (!(w >= 0.0 && w < 1.0)) throw DomainError("polyak_update: weight must lie in [0,1)");
  if (avg.size() != params.size()) throw DomainError("polyak_update: parameter count mismatch");
  for (std::size_t i = 0; i < avg.size(); ++i) {
    if (avg[i].shape() != params[i].shape()) throw DomainError("polyak_update: shape mismatch");
    for (std::size_t j = 0; j < avg[i].size(); ++j) avg[i][j] = w * avg[i][j] + (1.0 - w) * params[i][j];
  }
}

}  // namespace aiqn
