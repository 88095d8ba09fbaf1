#include "aiqn/losses.hpp"

#include <cmath>

#include "aiqn/errors.hpp"

namespace aiqn {
namespace {

double indicator_weight(double u, double tau) { return tau - (u <= 0.0 ? 1.0 : 0.0); }

}  // namespace

void LossConfig::validate() const {
  if (!std::isfinite(kappa) || kappa < 0.0) throw DomainError("kappa must be finite and >= 0");
}

double qr_loss(double u, double tau) { return indicator_weight(u, tau) * u; }

double huber_qr_loss(double u, double tau, double kappa) {
  const double w = std::abs(indicator_weight(u, tau));
  const double a = std::abs(u);
  if (a <= kappa) return w * u * u / (2.0 * kappa);
  return w * (a - 0.5 * kappa);
}

double quantile_loss(double u, double tau, double kappa) {
  return kappa == 0.0 ? qr_loss(u, tau) : huber_qr_loss(u, tau, kappa);
}

double qr_loss_grad(double u, double tau, double kappa) {
  if (kappa == 0.0) return indicator_weight(u, tau);
  const double w = std::abs(indicator_weight(u, tau));
  if (std::abs(u) <= kappa) return w * u / kappa;
  return u > 0.0 ? w : -w;
}

BatchLoss batch_quantile_loss(const Tensor& pred, const Tensor& target, const Tensor& tau,
                              const LossConfig& cfg) {
  cfg.validate();
  if (pred.shape() != target.shape() || pred.shape() != tau.shape() || pred.rank() != 2) {
    throw DomainError("batch_quantile_loss: pred " + pred.shape_string() + ", target " +
                      target.shape_string() + ", tau " + tau.shape_string() +
                      " must share one [B,n] shape");
  }
  const double inv_b = 1.0 / static_cast<double>(pred.rows());
  BatchLoss out{0.0, Tensor(pred.shape())};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double t = tau[i];
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("batch_quantile_loss: tau outside [0,1]");
    const double u = target[i] - pred[i];
    out.loss += quantile_loss(u, t, cfg.kappa);
    out.grad[i] = -qr_loss_grad(u, t, cfg.kappa) * inv_b;
  }
  out.loss *= inv_b;
  return out;
}

}  // namespace aiqn
