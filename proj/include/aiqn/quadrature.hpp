#pragma once

#include <functional>

namespace aiqn {

inline constexpr int kMaxQuadratureDepth = 50;

/// Adaptive Simpson quadrature of f over [a,b] to absolute tolerance `tol`.
/// Throws IntegrationError (with the best estimate) if any subinterval is
/// still unconverged at depth kMaxQuadratureDepth.
double integrate(const std::function<double(double)>& f, double a, double b, double tol);

}  // namespace aiqn
