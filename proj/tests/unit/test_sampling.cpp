#include <doctest.h>

#include <cmath>

#include "aiqn/datasets.hpp"
#include "aiqn/errors.hpp"
#include "aiqn/sampling.hpp"

using namespace aiqn;
using doctest::Approx;

namespace {

AiqnModel model_for(std::size_t n, std::uint64_t seed, std::vector<std::size_t> ordering = {}) {
  ModelSpec spec;
  spec.n = n;
  spec.hidden = {12};
  spec.head_width = 6;
  spec.ordering = std::move(ordering);
  Rng rng(seed);
  return AiqnModel::build(spec, rng);
}

}  // namespace

TEST_CASE("sampling is deterministic") {
  const auto m = model_for(3, 1);
  SampleRequest req;
  req.count = kSampleChunk + 7;
  req.seed = 99;
  const Tensor a = sample(m, req);
  CHECK(a.identical(sample(m, req)));
  req.seed = 100;
  CHECK_FALSE(a.identical(sample(m, req)));
  req.seed = 99;
  req.clamp = std::make_pair(0.0, 0.1);
  for (double v : sample(m, req).values()) CHECK((v >= 0.0 && v <= 0.1));
  req.context = {1.0};
  CHECK_THROWS_AS(sample(m, req), DomainError);
  req.context.clear();
  req.count = 0;
  CHECK_THROWS_AS(sample(m, req), DomainError);
}

TEST_CASE("sampling follows the recursion") {
  // Row r of sample() equals feeding back outputs one position at a time.
  const auto m = model_for(3, 2, {2, 0, 1});
  SampleRequest req;
  req.count = 1;
  req.seed = 5;
  const Tensor s = sample(m, req);
  Tensor tau({1, 3});
  Rng rs = Rng(5).stream(0);
  for (std::size_t k = 0; k < 3; ++k) tau[m.ordering()[k]] = rs.uniform();
  const Tensor out = m.forward(s, tau);
  for (std::size_t i = 0; i < 3; ++i) CHECK(out[i] == s[i]);
}

TEST_CASE("inpainting") {
  const auto m = model_for(4, 3);
  InpaintRequest req;
  req.prefix = {0.1, 0.2, 0.3};
  req.count = 20;
  req.seed = 1;
  const Tensor c = inpaint(m, req);
  bool varied = false;
  for (std::size_t r = 0; r < c.rows(); ++r) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(c.at(r, j) == req.prefix[j]);
    if (c.at(r, 3) != c.at(0, 3)) varied = true;
  }
  CHECK(varied);
  int differ = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    InpaintRequest a = req, b = req;
    a.count = b.count = 1;
    a.seed = 2 * s;
    b.seed = 2 * s + 1;
    if (!inpaint(m, a).identical(inpaint(m, b))) ++differ;
  }
  CHECK(differ == 20);
  req.prefix = {};
  CHECK_THROWS_AS(inpaint(m, req), DomainError);
  req.prefix = {1, 2, 3, 4};
  CHECK_THROWS_AS(inpaint(m, req), DomainError);
}

TEST_CASE("ordering prefix check") {
  const auto m = model_for(4, 4, {3, 1, 0, 2});
  CHECK(check_ordering_prefix(m, {1, 3}) == 2);
  try {
    check_ordering_prefix(m, {0, 1});
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("raster") != std::string::npos);
  }
  CHECK_THROWS_AS(check_ordering_prefix(m, {3, 1, 0, 2}), DomainError);
}

TEST_CASE("sample comparison and noise floors") {
  Rng rng(6);
  const Tensor data = sample_equicorrelated_gaussian(2, 0.5, 2000, rng);
  EvalOptions opts;
  opts.seed = 3;
  const auto same = compare_samples(data, data, opts);
  CHECK(find_metric(same, "frechet")->value == Approx(0.0).epsilon(1e-9));
  // A bootstrap resample sits below the split-half floor; a shifted draw is far above it.
  const Tensor boot = bootstrap_rows(data, data.rows(), rng);
  const auto rows = compare_samples(boot, data, opts);
  CHECK(find_metric(rows, "frechet")->value < find_metric(rows, "frechet_floor")->value);
  CHECK(find_metric(rows, "w1_dim0")->value < find_metric(rows, "w1_floor_dim0")->value);
  CHECK(find_metric(rows, "w1_dim1")->value < find_metric(rows, "w1_floor_dim1")->value);
  Tensor shifted = sample_equicorrelated_gaussian(2, 0.5, 2000, rng);
  for (std::size_t r = 0; r < shifted.rows(); ++r) shifted.at(r, 0) += 0.5;
  const auto far = compare_samples(shifted, data, opts);
  CHECK(find_metric(far, "w1_dim0")->value > 5 * find_metric(far, "w1_floor_dim0")->value);
  CHECK(find_metric(far, "frechet")->value > 20 * find_metric(far, "frechet_floor")->value);
  CHECK(find_metric(rows, "w1_dim0")->samples == 2000);
  CHECK(metric_csv(rows).rfind("metric,value,samples,seed\n", 0) == 0);
  CHECK_THROWS_AS(compare_samples(boot, Tensor({50, 2}), opts), DomainError);
  CHECK_THROWS_AS(compare_samples(Tensor({10, 3}), data, opts), DomainError);
}

TEST_CASE("eval suite on a scalar model") {
  const auto m = model_for(1, 7);
  Rng rng(8);
  const Tensor data = sample_analytic(AnalyticDist::gaussian(0, 1), 300, rng);
  EvalOptions opts;
  opts.truths = {AnalyticDist::gaussian(0, 1)};
  opts.divergence_tol = 1e-5;
  const auto rows = eval_suite(m, data, opts);
  REQUIRE(find_metric(rows, "quantile_divergence_dim0"));
  CHECK(find_metric(rows, "quantile_divergence_dim0")->value >= 0.0);
  CHECK(find_metric(rows, "frechet")->samples == 300);
  CHECK_THROWS_AS(eval_suite(model_for(2, 1), data, opts), DomainError);
}

TEST_CASE("density report") {
  const auto m = model_for(2, 9);
  const auto rows = quantile_density_report(m, {0.3, 0.4}, {0.2, 0.5, 0.8}, 1);
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) {
    CHECK(std::abs(r.exact - r.finite_difference) <= 1e-3 * std::max(std::abs(r.exact), 1e-6));
    CHECK(r.density.has_value() == (r.exact > kDensityFloor));
    if (r.density) CHECK(*r.density == Approx(1.0 / r.exact));
  }
  CHECK_THROWS_AS(quantile_density_report(m, {0.3, 0.4}, {0.0}, 1), DomainError);
}

TEST_CASE("correlations") {
  const std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8}, c{1, 8, 27, 64}, d{4, 3, 2, 1};
  CHECK(pearson_correlation(a, b) == Approx(1.0));
  CHECK(spearman_correlation(a, c) == Approx(1.0));
  CHECK(pearson_correlation(a, c) < 1.0);
  CHECK(spearman_correlation(a, d) == Approx(-1.0));
}

TEST_CASE("bars dataset law") {
  Rng rng(10);
  const Tensor t = bars::generate(4000, rng);
  CHECK(t.cols() == 64);
  std::size_t lower_mode = 0;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (double v : t.row(r)) CHECK((v >= 0.0 && v <= 1.0));
    const std::size_t top = bars::top_column(t.row(r));
    CHECK(top < 4);
    if (bars::nearest_mode(t.row(r), top) == 0) ++lower_mode;
  }
  CHECK(std::abs(lower_mode / 4000.0 - 0.5) < 0.04);
  CHECK(bars::bottom_modes(2) == std::array<std::size_t, 2>{2, 6});
  const auto img = bars::clean_image(1, 5);
  CHECK(img[0 * 8 + 1] == 1.0);
  CHECK(img[7 * 8 + 5] == 1.0);
}

TEST_CASE("equicorrelated gaussian") {
  Rng rng(11);
  const Tensor t = sample_equicorrelated_gaussian(2, 0.8, 20000, rng);
  std::vector<double> a(t.rows()), b(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    a[r] = t.at(r, 0);
    b[r] = t.at(r, 1);
  }
  CHECK(pearson_correlation(a, b) == Approx(0.8).epsilon(0.02));
  CHECK_THROWS_AS(sample_equicorrelated_gaussian(2, 1.0, 5, rng), DomainError);
}
