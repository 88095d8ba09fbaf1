#include "aiqn/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "aiqn/errors.hpp"
#include "aiqn/io.hpp"

namespace aiqn {
namespace {

Tensor context_rows(const AiqnModel& model, const std::vector<double>& context, std::size_t rows) {
  const std::size_t c = model.spec().context_width;
  if (context.size() != c) {
    throw DomainError("sampling: context has " + std::to_string(context.size()) + " entries but model expects " +
                      std::to_string(c));
  }
  if (c == 0) return {};
  Tensor out({rows, c});
  for (std::size_t r = 0; r < rows; ++r) std::copy(context.begin(), context.end(), out.row(r).begin());
  return out;
}

// Fills positions ordering[first..n-1] of `x` for rows [begin, begin + rows).
// Sample s draws its tau from stream s of the base generator, in generation order.
void generate(const AiqnModel& model, Tensor& x, std::size_t first, std::uint64_t seed, TauMode mode,
              const std::vector<double>& context) {
  const std::size_t n = model.n();
  const auto& order = model.ordering();
  const Rng base(seed);
  for (std::size_t begin = 0; begin < x.rows(); begin += kSampleChunk) {
    const std::size_t rows = std::min(kSampleChunk, x.rows() - begin);
    Tensor xc({rows, n});
    Tensor tau({rows, n});
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(x.row(begin + r).begin(), n, xc.row(r).begin());
      Rng rs = base.stream(begin + r);
      if (mode == TauMode::kShared) {
        std::fill_n(tau.row(r).begin(), n, rs.uniform());
      } else {
        for (std::size_t k = 0; k < n; ++k) tau.at(r, order[k]) = rs.uniform();
      }
    }
    const Tensor ctx = context_rows(model, context, rows);
    const Tensor* ctx_ptr = ctx.empty() ? nullptr : &ctx;
    for (std::size_t k = first; k < n; ++k) {
      const Tensor out = model.forward(xc, tau, ctx_ptr);
      const std::size_t pos = order[k];
      for (std::size_t r = 0; r < rows; ++r) xc.at(r, pos) = out.at(r, pos);
    }
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(xc.row(r).begin(), n, x.row(begin + r).begin());
  }
}

void apply_clamp(Tensor& t, const std::optional<std::pair<double, double>>& clamp) {
  if (!clamp) return;
  if (!(clamp->first <= clamp->second)) throw DomainError("sampling: clamp range must satisfy lo <= hi");
  for (double& v : t.values()) v = std::clamp(v, clamp->first, clamp->second);
}

std::vector<std::size_t> shuffled_indices(std::size_t m, Rng rng) {
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i + 1 < m; ++i) std::swap(idx[i], idx[i + rng.below(m - i)]);
  return idx;
}

Tensor take_rows(const Tensor& t, std::span<const std::size_t> idx) {
  Tensor out({idx.size(), t.cols()});
  for (std::size_t r = 0; r < idx.size(); ++r) std::copy_n(t.row(idx[r]).begin(), t.cols(), out.row(r).begin());
  return out;
}

std::vector<double> column(const Tensor& t, std::size_t j) {
  std::vector<double> out(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) out[r] = t.at(r, j);
  return out;
}

std::vector<double> ranks_of(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
    i = j + 1;
  }
  return rank;
}

}  // namespace

Tensor sample(const AiqnModel& model, const SampleRequest& req) {
  if (req.count < 1) throw DomainError("sample: count must be >= 1");
  Tensor x({req.count, model.n()});
  generate(model, x, 0, req.seed, req.tau_mode.value_or(model.spec().tau_mode), req.context);
  apply_clamp(x, req.clamp);
  return x;
}

Tensor inpaint(const AiqnModel& model, const InpaintRequest& req) {
  const std::size_t n = model.n();
  const std::size_t k = req.prefix.size();
  if (k < 1 || k >= n) {
    throw DomainError("inpaint: prefix length " + std::to_string(k) + " must lie in [1, " + std::to_string(n - 1) + "]");
  }
  if (req.count < 1) throw DomainError("inpaint: count must be >= 1");
  Tensor x({req.count, n});
  const auto& order = model.ordering();
  for (std::size_t r = 0; r < req.count; ++r) {
    for (std::size_t j = 0; j < k; ++j) x.at(r, order[j]) = req.prefix[j];
  }
  generate(model, x, k, req.seed, model.spec().tau_mode, req.context);
  apply_clamp(x, req.clamp);
  // The prefix is conditioning input, never altered by the clamp.
  for (std::size_t r = 0; r < req.count; ++r) {
    for (std::size_t j = 0; j < k; ++j) x.at(r, order[j]) = req.prefix[j];
  }
  return x;
}

std::size_t check_ordering_prefix(const AiqnModel& model, const std::vector<std::size_t>& positions) {
  const std::size_t n = model.n();
  const std::size_t k = positions.size();
  std::vector<std::size_t> sorted = positions;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> expect(model.ordering().begin(), model.ordering().begin() + std::min(k, n));
  std::sort(expect.begin(), expect.end());
  if (k < 1 || k >= n || sorted != expect) {
    throw DomainError(
        "inpaint: known positions must be a contiguous prefix of the generation ordering "
        "(for raster-scan images: whole top rows, starting at pixel 0) and leave at least one free position");
  }
  return k;
}

QuantileFn learned_quantile_fn(const AiqnModel& model, std::size_t dim) {
  if (dim >= model.n()) throw DomainError("learned_quantile_fn: dim out of range");
  const bool x_free = model.n() == 1 || !model.spec().autoregressive || model.ranks()[dim] == 1;
  if (!x_free) throw DomainError("learned_quantile_fn: output " + std::to_string(dim) + " depends on x");
  if (model.spec().context_width > 0) throw DomainError("learned_quantile_fn: model needs a context");
  auto m = std::make_shared<const AiqnModel>(model);
  return QuantileFn(
      [m, dim](double t) {
        Tensor x({1, m->n()});
        Tensor tau({1, m->n()}, 0.5);
        if (m->spec().tau_mode == TauMode::kShared) tau.fill(t);
        tau[dim] = t;
        return m->forward(x, tau)[dim];
      },
      false);
}

std::vector<MetricRow> compare_samples(const Tensor& samples, const Tensor& data, const EvalOptions& opts) {
  if (data.rank() != 2 || data.rows() < kMinEvalRows) {
    throw DomainError("eval: need at least " + std::to_string(kMinEvalRows) + " data rows");
  }
  if (samples.rank() != 2 || samples.rows() < 2) throw DomainError("eval: need at least 2 model samples");
  if (samples.cols() != data.cols()) {
    throw DomainError("eval: samples have " + std::to_string(samples.cols()) + " columns, data has " +
                      std::to_string(data.cols()));
  }
  const std::size_t n = data.cols();
  const std::size_t m = data.rows();
  const std::size_t s = samples.rows();
  const std::size_t k = std::min(s, m);
  const std::size_t h = m / 2;
  const Rng base(opts.seed);

  const auto perm = shuffled_indices(m, base.stream(2));
  const Tensor data_sub = take_rows(data, std::span(perm).first(k));
  std::vector<std::size_t> first_k(k);
  std::iota(first_k.begin(), first_k.end(), 0);
  const Tensor sample_sub = take_rows(samples, first_k);

  // The floor is the mean over several random split-halves; one split alone is too noisy to compare against.
  std::vector<Tensor> half_a, half_b;
  for (std::size_t t = 0; t < kFloorSplits; ++t) {
    const auto halves = shuffled_indices(m, base.stream(3).stream(t));
    half_a.push_back(take_rows(data, std::span(halves).first(h)));
    half_b.push_back(take_rows(data, std::span(halves).subspan(h, h)));
  }

  std::vector<MetricRow> rows;
  double w1_sum = 0.0;
  double floor_sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double w = wasserstein1_empirical(column(sample_sub, j), column(data_sub, j));
    double f = 0.0;
    for (std::size_t t = 0; t < kFloorSplits; ++t) f += wasserstein1_empirical(column(half_a[t], j), column(half_b[t], j));
    f /= static_cast<double>(kFloorSplits);
    rows.push_back({"w1_dim" + std::to_string(j), w, k, opts.seed});
    rows.push_back({"w1_floor_dim" + std::to_string(j), f, h, opts.seed});
    w1_sum += w;
    floor_sum += f;
  }
  rows.push_back({"w1_mean", w1_sum / static_cast<double>(n), k, opts.seed});
  rows.push_back({"w1_floor_mean", floor_sum / static_cast<double>(n), h, opts.seed});

  auto feats = [&](const Tensor& t) { return opts.features ? opts.features(t) : t; };
  const double fd = frechet_distance(moment_summary(feats(samples)), moment_summary(feats(data)));
  double fd_floor = 0.0;
  for (std::size_t t = 0; t < kFloorSplits; ++t) {
    fd_floor += frechet_distance(moment_summary(feats(half_a[t])), moment_summary(feats(half_b[t])));
  }
  fd_floor /= static_cast<double>(kFloorSplits);
  rows.push_back({"frechet", fd, s, opts.seed});
  rows.push_back({"frechet_floor", fd_floor, h, opts.seed});
  return rows;
}

std::vector<MetricRow> eval_suite(const AiqnModel& model, const Tensor& data, const EvalOptions& opts) {
  if (data.rank() != 2 || data.cols() != model.n()) {
    throw DomainError("eval: data has " + (data.rank() == 2 ? std::to_string(data.cols()) : std::string("?")) +
                      " columns but model n = " + std::to_string(model.n()));
  }
  if (data.rows() < kMinEvalRows) throw DomainError("eval: need at least " + std::to_string(kMinEvalRows) + " data rows");
  if (model.spec().context_width > 0) throw DomainError("eval: context-conditioned models are not supported");
  SampleRequest req;
  req.count = opts.sample_count ? opts.sample_count : std::min(data.rows(), kDefaultEvalSamples);
  req.seed = opts.seed;
  const Tensor samples = sample(model, req);
  auto rows = compare_samples(samples, data, opts);
  for (std::size_t j = 0; j < opts.truths.size() && j < model.n(); ++j) {
    if (!opts.truths[j]) continue;
    const bool x_free = model.n() == 1 || !model.spec().autoregressive || model.ranks()[j] == 1;
    if (!x_free) continue;
    const double q = quantile_divergence(*opts.truths[j], learned_quantile_fn(model, j), opts.divergence_tol);
    rows.push_back({"quantile_divergence_dim" + std::to_string(j), q, 0, opts.seed});
  }
  return rows;
}

std::string metric_csv(const std::vector<MetricRow>& rows) {
  std::string out = "metric,value,samples,seed\n";
  for (const auto& r : rows) {
    out += r.metric + "," + format_double(r.value) + "," + std::to_string(r.samples) + "," +
           std::to_string(r.seed) + "\n";
  }
  return out;
}

const MetricRow* find_metric(const std::vector<MetricRow>& rows, const std::string& name) {
  for (const auto& r : rows) {
    if (r.metric == name) return &r;
  }
  return nullptr;
}

std::vector<DensityRow> quantile_density_report(const AiqnModel& model, const std::vector<double>& x,
                                                const std::vector<double>& tau_grid, std::size_t dim,
                                                const std::vector<double>& context) {
  if (x.size() != model.n()) throw DomainError("density report: x must have n entries");
  if (dim >= model.n()) throw DomainError("density report: dim out of range");
  std::vector<DensityRow> out;
  std::vector<double> tau(model.n(), 0.5);
  for (const double t : tau_grid) {
    if (!(t > 0.0 && t < 1.0)) throw DomainError("density report: tau grid must lie in (0,1)");
    if (model.spec().tau_mode == TauMode::kShared) std::fill(tau.begin(), tau.end(), t);
    tau[dim] = t;
    DensityRow row;
    row.tau = t;
    row.exact = dquantile_dtau(model, x, tau, dim, context);
    row.finite_difference = dquantile_dtau_fd(model, x, tau, dim, 1e-4, context);
    if (row.exact > kDensityFloor) row.density = 1.0 / row.exact;
    out.push_back(row);
  }
  return out;
}

Tensor bootstrap_rows(const Tensor& data, std::size_t count, Rng& rng) {
  if (data.rank() != 2 || data.rows() == 0) throw DomainError("bootstrap: data must be a nonempty matrix");
  Tensor out({count, data.cols()});
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t src = rng.below(data.rows());
    std::copy_n(data.row(src).begin(), data.cols(), out.row(r).begin());
  }
  return out;
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw DomainError("correlation: need two equal-length series");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

double spearman_correlation(std::span<const double> a, std::span<const double> b) {
  const auto ra = ranks_of(a);
  const auto rb = ranks_of(b);
  return pearson_correlation(ra, rb);
}

}  // namespace aiqn
