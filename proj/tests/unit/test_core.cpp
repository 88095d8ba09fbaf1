#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "aiqn/distributions.hpp"
#include "aiqn/errors.hpp"
#include "aiqn/linalg.hpp"
#include "aiqn/quadrature.hpp"
#include "aiqn/rng.hpp"
#include "aiqn/tensor.hpp"

using namespace aiqn;
using doctest::Approx;

TEST_CASE("tensor shape checks") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.at(1, 2) == 1.5);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DomainError);
  Tensor bad = Tensor::vector({1.0, NAN});
  CHECK_FALSE(bad.all_finite());
  CHECK_THROWS_AS(bad.require_finite("x"), DomainError);
  CHECK(t.identical(Tensor({2, 3}, 1.5)));
  CHECK_FALSE(t.identical(Tensor({3, 2}, 1.5)));
}

TEST_CASE("rng is reproducible and stream-independent") {
  Rng a(42), b(42);
  CHECK(a.uniform() == b.uniform());
  CHECK(a.normal() == b.normal());
  Rng s1 = Rng(7).stream(3);
  Rng parent(7);
  for (int i = 0; i < 10; ++i) parent.next_u64();
  Rng s2 = parent.stream(3);
  CHECK(s1.next_u64() == s2.next_u64());
  CHECK(Rng(7).stream(1).next_u64() != Rng(7).stream(2).next_u64());
}

TEST_CASE("rng moments") {
  Rng r(1);
  const int m = 1000000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < m; ++i) su += r.uniform();
  for (int i = 0; i < m; ++i) {
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(std::abs(su / m - 0.5) < 0.002);
  const double mean = sn / m;
  CHECK(std::abs(sn2 / m - mean * mean - 1.0) < 0.01);
  for (int i = 0; i < 1000; ++i) CHECK(r.below(5) < 5);
}

TEST_CASE("distribution values") {
  const auto g = AnalyticDist::gaussian(0, 1);
  CHECK(g.pdf(0) == Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-12));
  CHECK(AnalyticDist::uniform(0, 1).pdf(0.5) == 1.0);
  CHECK(AnalyticDist::exponential(1).pdf(0) == 1.0);
  CHECK(g.cdf(0) == Approx(0.5));
  CHECK(AnalyticDist::uniform(2, 4).cdf(3) == Approx(0.5));
  CHECK(AnalyticDist::exponential(1).cdf(std::log(2.0)) == Approx(0.5).epsilon(1e-14));
  CHECK(std::abs(g.quantile(0.5)) < 1e-12);
  CHECK(AnalyticDist::exponential(1).quantile(0.5) == Approx(std::log(2.0)).epsilon(1e-12));
  // Phi(1) to 10 digits, so the quantile lands on 5 to about 1e-9.
  CHECK(AnalyticDist::gaussian(3, 2).quantile(0.8413447461) == Approx(5.0).epsilon(1e-8));
  CHECK(AnalyticDist::gaussian(3, 2).mean() == 3.0);
  CHECK(AnalyticDist::uniform(0, 4).mean() == 2.0);
  const auto mix = AnalyticDist::mixture({0.5, 0.5}, {AnalyticDist::gaussian(0, 1), AnalyticDist::gaussian(4, 1)});
  CHECK(mix.mean() == Approx(2.0));
  CHECK(mix.variance() == Approx(5.0));
  CHECK(mix.cdf(mix.quantile(0.3)) == Approx(0.3).epsilon(1e-9));
  CHECK_THROWS_AS(g.quantile(0.0), DomainError);
  CHECK_THROWS_AS(g.quantile(1.0), DomainError);
  CHECK_THROWS_AS(AnalyticDist::gaussian(0, -1), DomainError);
}

TEST_CASE("inverse normal round trip") {
  for (double p : {1e-10, 1e-4, 0.02, 0.3, 0.5, 0.77, 0.975, 1 - 1e-8}) {
    CHECK(normal_cdf(inverse_normal_cdf(p)) == Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("quadrature") {
  CHECK(integrate([](double x) { return x * x; }, 0, 1, 1e-10) == Approx(1.0 / 3.0).epsilon(1e-10));
  CHECK(integrate([](double) { return 1.0; }, 2, 5, 1e-3) == Approx(3.0));
  const auto g = AnalyticDist::gaussian(0, 1);
  CHECK(std::abs(integrate([&](double x) { return g.pdf(x); }, -8, 8, 1e-9) - 1.0) < 1e-8);
  // A jump at a non-dyadic point never resolves: the depth cap trips and the estimate is carried.
  try {
    integrate([](double x) { return x < 1.0 / 3.0 ? 0.0 : 1.0; }, 0, 1, 1e-300);
    FAIL("expected IntegrationError");
  } catch (const IntegrationError& e) {
    CHECK(e.best_estimate() == Approx(2.0 / 3.0).epsilon(1e-6));
  }
}

TEST_CASE("symmetric eigensolver") {
  auto e = sym_eig(Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  for (double v : e.values) CHECK(v == Approx(1.0));
  e = sym_eig(Tensor::matrix(2, 2, {4, 0, 0, 9}));
  CHECK(e.values[0] == Approx(4.0));
  CHECK(e.values[1] == Approx(9.0));
  CHECK(std::abs(e.vectors.at(0, 0)) == Approx(1.0));
  e = sym_eig(Tensor::matrix(2, 2, {2, 1, 1, 2}));
  CHECK(e.values[0] == Approx(1.0));
  CHECK(e.values[1] == Approx(3.0));
  CHECK_THROWS_AS(sym_eig(Tensor::matrix(2, 2, {1, 2, 0, 1})), DomainError);

  Rng r(5);
  const std::size_t d = 6;
  Tensor a({d, d});
  for (double& v : a.values()) v = r.normal();
  const Tensor m = matmul(a, transpose(a));
  e = sym_eig(m);
  Tensor rec({d, d});
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k) rec.at(i, j) += e.vectors.at(i, k) * e.values[k] * e.vectors.at(j, k);
  for (std::size_t i = 0; i < d * d; ++i) CHECK(std::abs(rec[i] - m[i]) < 1e-8);
  const Tensor s = sym_sqrt(m);
  const Tensor ss = matmul(s, s);
  for (std::size_t i = 0; i < d * d; ++i) CHECK(std::abs(ss[i] - m[i]) < 1e-8);
}
