#include "aiqn/quadrature.hpp"

#include <cmath>
#include <limits>

#include "aiqn/errors.hpp"

namespace aiqn {
namespace {

struct Simpson {
  const std::function<double(double)>& f;
  bool exhausted = false;

  double recurse(double a, double b, double fa, double fm, double fb, double whole, double tol,
                 int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    // Below roundoff of the partial sum the error estimate carries no information.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(left + right);
    if (std::abs(delta) <= 15.0 * tol || std::abs(delta) <= noise || lm <= a || rm >= b) {
      return left + right + delta / 15.0;
    }
    if (depth >= kMaxQuadratureDepth) {
      exhausted = true;
      return left + right + delta / 15.0;
    }
    return recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
           recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
  }
};

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  if (!(a <= b) || !std::isfinite(a) || !std::isfinite(b)) {
    throw DomainError("integrate: require finite a <= b");
  }
  if (!(tol > 0.0)) throw DomainError("integrate: tol must be positive");
  if (a == b) return 0.0;

  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  Simpson s{f};
  const double result = s.recurse(a, b, fa, fm, fb, whole, tol, 1);
  if (s.exhausted) {
    throw IntegrationError("integrate: depth cap reached without convergence", result);
  }
  if (!std::isfinite(result)) throw IntegrationError("integrate: non-finite result", result);
  return result;
}

}  // namespace aiqn
