#pragma once

#include "aiqn/tensor.hpp"

namespace aiqn {

inline constexpr double kDefaultKappa = 0.002;

struct LossConfig {
  /// Huber threshold; 0 selects the plain pinball loss.
  double kappa = kDefaultKappa;

  void validate() const;
};

/// Pinball loss rho_tau(u) = (tau - 1{u <= 0}) * u.
double qr_loss(double u, double tau);

/// Huber quantile loss: |tau - 1{u<=0}| * u^2 / (2 kappa) inside |u| <= kappa,
/// |tau - 1{u<=0}| * (|u| - kappa/2) outside. kappa must be positive.
double huber_qr_loss(double u, double tau, double kappa);

/// Loss selected by kappa: pinball for kappa == 0, Huber otherwise.
double quantile_loss(double u, double tau, double kappa);

/// d loss / d u. For kappa == 0 this is tau - 1{u<=0}, so u == 0 gives tau - 1.
double qr_loss_grad(double u, double tau, double kappa);

struct BatchLoss {
  double loss = 0.0;
  Tensor grad;  // d loss / d pred, same shape as pred
};

/// Mean over rows of the per-row sum of quantile losses of (target - pred).
BatchLoss batch_quantile_loss(const Tensor& pred, const Tensor& target, const Tensor& tau,
                              const LossConfig& cfg);

}  // namespace aiqn
