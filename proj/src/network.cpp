#include "aiqn/network.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "aiqn/errors.hpp"

namespace aiqn {
namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using MapC = Eigen::Map<const Mat>;
using MapM = Eigen::Map<Mat>;
using RowMapC = Eigen::Map<const RowVec>;
using RowMapM = Eigen::Map<RowVec>;

MapC view(const Tensor& t, std::size_t rows, std::size_t cols) {
  return MapC(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MapM view(Tensor& t, std::size_t rows, std::size_t cols) {
  return MapM(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
RowMapC row_view(const Tensor& t) { return RowMapC(t.data(), static_cast<Eigen::Index>(t.size())); }
RowMapM row_view(Tensor& t) { return RowMapM(t.data(), static_cast<Eigen::Index>(t.size())); }

Mat sigmoid(const Mat& m) { return (1.0 + (-m.array()).exp()).inverse().matrix(); }

void uniform_init(Tensor& t, double limit, Rng& rng) {
  for (double& v : t.values()) v = limit * (2.0 * rng.uniform() - 1.0);
}

void glorot(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng, const Tensor* mask) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = (2.0 * rng.uniform() - 1.0) * limit;
    t[i] = (mask && (*mask)[i] == 0.0) ? 0.0 : v;
  }
}

std::size_t max_degree(std::size_t n) { return std::max<std::size_t>(1, n - 1); }

}  // namespace

std::string to_string(TauMode mode) {
  return mode == TauMode::kShared ? "shared" : "per-dimension";
}

TauMode parse_tau_mode(const std::string& s) {
  if (s == "shared") return TauMode::kShared;
  if (s == "per-dimension") return TauMode::kPerDimension;
  throw DomainError("unknown tau mode '" + s + "' (expected per-dimension or shared)");
}

ModelSpec ModelSpec::defaults_for(std::size_t n) {
  ModelSpec s;
  s.n = n;
  if (n <= 16) {
    s.hidden = {64, 64};
    s.head_width = 64;
  } else {
    s.hidden = {256, 256, 256};
    s.head_width = 32;
  }
  return s;
}

std::vector<std::size_t> ModelSpec::resolved_ordering() const {
  if (!ordering.empty()) return ordering;
  std::vector<std::size_t> id(n);
  for (std::size_t i = 0; i < n; ++i) id[i] = i;
  return id;
}

void ModelSpec::validate() const {
  if (n == 0) throw DomainError("model: n must be >= 1");
  if (hidden.empty()) throw DomainError("model: need at least one gated block");
  for (std::size_t h : hidden)
    if (h == 0) throw DomainError("model: hidden sizes must be >= 1");
  if (head_width == 0) throw DomainError("model: head width must be >= 1");
  if (!ordering.empty()) {
    if (ordering.size() != n) throw DomainError("model: ordering must list all n positions");
    std::vector<bool> seen(n, false);
    for (std::size_t p : ordering) {
      if (p >= n || seen[p]) throw DomainError("model: ordering is not a permutation");
      seen[p] = true;
    }
  }
}

MaskSet build_masks(std::size_t n, const std::vector<std::size_t>& hidden,
                    const std::vector<std::size_t>& ordering, Rng& rng, bool autoregressive) {
  if (n == 0) throw DomainError("build_masks: n must be >= 1");
  if (ordering.size() != n) throw DomainError("build_masks: ordering must have n entries");
  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[ordering[r]] = r + 1;

  const std::size_t top = max_degree(n);
  const bool connect_x = autoregressive && n > 1;
  MaskSet out;
  std::size_t fan_in = n;
  for (std::size_t layer = 0; layer < hidden.size(); ++layer) {
    if (hidden[layer] == 0) throw DomainError("build_masks: hidden sizes must be >= 1");
    std::vector<std::size_t> deg(hidden[layer]);
    for (auto& d : deg) d = 1 + rng.below(top);
    std::sort(deg.begin(), deg.end());

    Tensor mask({fan_in, hidden[layer]});
    if (connect_x) {
      for (std::size_t src = 0; src < fan_in; ++src) {
        const std::size_t src_deg = layer == 0 ? rank[src] : out.degrees.back()[src];
        for (std::size_t u = 0; u < hidden[layer]; ++u) mask.at(src, u) = deg[u] >= src_deg ? 1.0 : 0.0;
      }
    }
    out.degrees.push_back(std::move(deg));
    out.trunk.push_back(std::move(mask));
    fan_in = hidden[layer];
  }
  return out;
}

struct AiqnModel::Cache {
  std::size_t batch = 0;
  Mat tau_tilde;                    // [B,n] effective rescaled tau
  Mat ctx;                          // [B,c]
  std::vector<Mat> trunk;           // trunk[0] = x, trunk[k+1] = output of block k
  std::vector<Mat> trunk_f, trunk_g;
  std::vector<Mat> head;            // [B, n*E] per block
  std::vector<Mat> head_f, head_g;
  Mat out;                          // [B,n]
};

AiqnModel AiqnModel::build(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  AiqnModel m;
  m.spec_ = spec;
  m.ordering_ = spec.resolved_ordering();
  m.masks_ = build_masks(spec.n, spec.hidden, m.ordering_, rng, spec.autoregressive);
  m.layout();

  const std::size_t n = spec.n;
  const std::size_t e = spec.head_width;
  const std::size_t c = spec.context_width;
  std::size_t fan_in = n;
  for (std::size_t k = 0; k < m.blocks_.size(); ++k) {
    const BlockIndex& b = m.blocks_[k];
    const std::size_t h = spec.hidden[k];
    glorot(m.params_[b.wf], fan_in, h, rng, &m.masks_.trunk[k]);
    glorot(m.params_[b.wg], fan_in, h, rng, &m.masks_.trunk[k]);
    glorot(m.params_[b.af], h, e, rng, nullptr);
    glorot(m.params_[b.ag], h, e, rng, nullptr);
    if (b.uf) {
      glorot(m.params_[*b.uf], e, e, rng, nullptr);
      glorot(m.params_[*b.ug], e, e, rng, nullptr);
    }
    // Glorot on the 1 -> e tau map leaves every unit near-linear in tau and
    // centred at tau = 1/2; wider draws spread the unit transitions over (0,1).
    uniform_init(m.params_[b.vf], kTauWeightInit, rng);
    uniform_init(m.params_[b.vg], kTauWeightInit, rng);
    uniform_init(m.params_[b.ef], kTauBiasInit, rng);
    uniform_init(m.params_[b.eg], kTauBiasInit, rng);
    if (b.cf) {
      glorot(m.params_[*b.cf], c, e, rng, nullptr);
      glorot(m.params_[*b.cg], c, e, rng, nullptr);
    }
    fan_in = h;
  }
  glorot(m.params_[m.out_w_], e, 1, rng, nullptr);
  return m;
}

void AiqnModel::layout() {
  const std::size_t n = spec_.n;
  const std::size_t e = spec_.head_width;
  const std::size_t c = spec_.context_width;

  ranks_.assign(n, 0);
  for (std::size_t r = 0; r < n; ++r) ranks_[ordering_[r]] = r + 1;

  const std::size_t top = max_degree(n);
  degree_offsets_.clear();
  for (const auto& deg : masks_.degrees) {
    // offsets[d] = first unit with degree >= d, for d in 1..top+1.
    std::vector<std::size_t> offsets(top + 2, 0);
    for (std::size_t d = 1; d <= top + 1; ++d) {
      offsets[d] = static_cast<std::size_t>(std::lower_bound(deg.begin(), deg.end(), d) - deg.begin());
    }
    degree_offsets_.push_back(std::move(offsets));
  }

  params_.clear();
  names_.clear();
  blocks_.clear();
  auto add = [&](std::string name, std::vector<std::size_t> shape) {
    names_.push_back(std::move(name));
    params_.emplace_back(std::move(shape));
    return params_.size() - 1;
  };
  std::size_t fan_in = n;
  for (std::size_t k = 0; k < spec_.hidden.size(); ++k) {
    const std::size_t h = spec_.hidden[k];
    const std::string p = "block" + std::to_string(k) + ".";
    BlockIndex b{};
    b.wf = add(p + "trunk.wf", {fan_in, h});
    b.wg = add(p + "trunk.wg", {fan_in, h});
    b.bf = add(p + "trunk.bf", {h});
    b.bg = add(p + "trunk.bg", {h});
    b.af = add(p + "head.af", {h, e});
    b.ag = add(p + "head.ag", {h, e});
    if (k > 0) {
      b.uf = add(p + "head.uf", {e, e});
      b.ug = add(p + "head.ug", {e, e});
    }
    b.ef = add(p + "head.ef", {n, e});
    b.eg = add(p + "head.eg", {n, e});
    b.vf = add(p + "tau.vf", {e});
    b.vg = add(p + "tau.vg", {e});
    if (c > 0) {
      b.cf = add(p + "ctx.cf", {c, e});
      b.cg = add(p + "ctx.cg", {c, e});
    }
    blocks_.push_back(b);
    fan_in = h;
  }
  out_w_ = add("out.w", {n, e});
  out_b_ = add("out.b", {n});
}

const Tensor* AiqnModel::param_mask(std::size_t index) const {
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    if (index == blocks_[k].wf || index == blocks_[k].wg) return &masks_.trunk[k];
  }
  return nullptr;
}

std::size_t AiqnModel::param_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.size();
  return total;
}

AiqnModel AiqnModel::with_params(std::vector<Tensor> params) const {
  if (params.size() != params_.size()) throw DomainError("with_params: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != params_[i].shape()) {
      throw DomainError("with_params: shape mismatch for " + names_[i]);
    }
  }
  AiqnModel m = *this;
  m.params_ = std::move(params);
  return m;
}

std::vector<std::string> AiqnModel::parameter_names(const ModelSpec& spec) {
  spec.validate();
  AiqnModel m;
  m.spec_ = spec;
  m.ordering_ = spec.resolved_ordering();
  m.layout();
  return m.names_;
}

AiqnModel AiqnModel::restore(const ModelSpec& spec, MaskSet masks, std::vector<Tensor> params) {
  spec.validate();
  AiqnModel m;
  m.spec_ = spec;
  m.ordering_ = spec.resolved_ordering();
  if (masks.degrees.size() != spec.hidden.size() || masks.trunk.size() != spec.hidden.size()) {
    throw DomainError("restore: mask layers do not match hidden sizes");
  }
  std::size_t fan_in = spec.n;
  for (std::size_t k = 0; k < spec.hidden.size(); ++k) {
    if (masks.degrees[k].size() != spec.hidden[k] ||
        masks.trunk[k].shape() != std::vector<std::size_t>{fan_in, spec.hidden[k]} ||
        !std::is_sorted(masks.degrees[k].begin(), masks.degrees[k].end())) {
      throw DomainError("restore: malformed mask for layer " + std::to_string(k));
    }
    fan_in = spec.hidden[k];
  }
  m.masks_ = std::move(masks);
  m.layout();
  return m.with_params(std::move(params));
}

void AiqnModel::check_inputs(const Tensor& x, const Tensor& tau, const Tensor* ctx) const {
  const std::size_t n = spec_.n;
  if (x.rank() != 2 || x.cols() != n) {
    throw DomainError("forward: x must be [B," + std::to_string(n) + "], got " + x.shape_string());
  }
  if (tau.shape() != x.shape()) {
    throw DomainError("forward: tau shape " + tau.shape_string() + " differs from x " + x.shape_string());
  }
  for (double t : tau.values()) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("forward: tau outside [0,1]");
  }
  x.require_finite("forward: x");
  if (spec_.context_width > 0) {
    if (!ctx || ctx->rank() != 2 || ctx->rows() != x.rows() || ctx->cols() != spec_.context_width) {
      throw DomainError("forward: context must be [B," + std::to_string(spec_.context_width) + "]");
    }
    ctx->require_finite("forward: context");
  } else if (ctx && !ctx->empty()) {
    throw DomainError("forward: model takes no context");
  }
}

void AiqnModel::run_forward(const Tensor& x, const Tensor& tau, const Tensor* ctx, Cache& cache) const {
  check_inputs(x, tau, ctx);
  const auto n = static_cast<Eigen::Index>(spec_.n);
  const auto e = static_cast<Eigen::Index>(spec_.head_width);
  const auto batch = static_cast<Eigen::Index>(x.rows());
  const bool trunk_live = spec_.n > 1;
  cache.batch = x.rows();

  cache.tau_tilde.resize(batch, n);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::size_t src = spec_.tau_mode == TauMode::kShared ? ordering_[0] : static_cast<std::size_t>(i);
      cache.tau_tilde(b, i) = 2.0 * tau.at(static_cast<std::size_t>(b), src) - 1.0;
    }
  }
  if (spec_.context_width > 0) cache.ctx = view(*ctx, ctx->rows(), ctx->cols());

  const std::size_t blocks = blocks_.size();
  cache.trunk.assign(blocks + 1, Mat());
  cache.trunk_f.assign(blocks, Mat());
  cache.trunk_g.assign(blocks, Mat());
  cache.head.assign(blocks, Mat());
  cache.head_f.assign(blocks, Mat());
  cache.head_g.assign(blocks, Mat());
  cache.trunk[0] = view(x, x.rows(), x.cols());

  for (std::size_t k = 0; k < blocks; ++k) {
    const BlockIndex& bi = blocks_[k];

    if (trunk_live) {
      const Tensor& wf = params_[bi.wf];
      const Tensor& wg = params_[bi.wg];
      Mat pf = cache.trunk[k] * view(wf, wf.rows(), wf.cols());
      pf.rowwise() += row_view(params_[bi.bf]);
      Mat pg = cache.trunk[k] * view(wg, wg.rows(), wg.cols());
      pg.rowwise() += row_view(params_[bi.bg]);
      cache.trunk_f[k] = pf.array().tanh().matrix();
      cache.trunk_g[k] = sigmoid(pg);
      cache.trunk[k + 1] = cache.trunk_f[k].cwiseProduct(cache.trunk_g[k]);
    }

    auto preactivation = [&](std::size_t a_idx, const std::optional<std::size_t>& u_idx,
                             std::size_t e_idx, std::size_t v_idx,
                             const std::optional<std::size_t>& c_idx) {
      Mat pre(batch, n * e);
      Mat acc = Mat::Zero(batch, e);
      const MapC a = view(params_[a_idx], spec_.hidden[k], spec_.head_width);
      const auto& offsets = degree_offsets_[k];
      for (std::size_t r = 1; r <= spec_.n; ++r) {
        const auto pos = static_cast<Eigen::Index>(ordering_[r - 1]);
        pre.middleCols(pos * e, e) = acc;
        if (trunk_live && r < offsets.size() - 1) {
          const auto start = static_cast<Eigen::Index>(offsets[r]);
          const auto len = static_cast<Eigen::Index>(offsets[r + 1]) - start;
          if (len > 0) acc.noalias() += cache.trunk[k + 1].middleCols(start, len) * a.middleRows(start, len);
        }
      }
      MapM flat(pre.data(), batch * n, e);
      if (u_idx) {
        const MapC prev(cache.head[k - 1].data(), batch * n, e);
        flat.noalias() += prev * view(params_[*u_idx], spec_.head_width, spec_.head_width);
      }
      pre.rowwise() += row_view(params_[e_idx]);
      const RowMapC v = row_view(params_[v_idx]);
      for (Eigen::Index b = 0; b < batch; ++b)
        for (Eigen::Index i = 0; i < n; ++i) pre.block(b, i * e, 1, e) += cache.tau_tilde(b, i) * v;
      if (c_idx) {
        const Mat proj = cache.ctx * view(params_[*c_idx], spec_.context_width, spec_.head_width);
        for (Eigen::Index i = 0; i < n; ++i) pre.middleCols(i * e, e) += proj;
      }
      return pre;
    };

    const Mat pf = preactivation(bi.af, bi.uf, bi.ef, bi.vf, bi.cf);
    const Mat pg = preactivation(bi.ag, bi.ug, bi.eg, bi.vg, bi.cg);
    cache.head_f[k] = pf.array().tanh().matrix();
    cache.head_g[k] = sigmoid(pg);
    cache.head[k] = cache.head_f[k].cwiseProduct(cache.head_g[k]);
  }

  const Mat& last = cache.head[blocks - 1];
  const MapC w = view(params_[out_w_], spec_.n, spec_.head_width);
  cache.out.resize(batch, n);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index i = 0; i < n; ++i)
      cache.out(b, i) = last.row(b).segment(i * e, e).dot(w.row(i)) + params_[out_b_][static_cast<std::size_t>(i)];
}

Tensor AiqnModel::forward(const Tensor& x, const Tensor& tau, const Tensor* ctx) const {
  Cache cache;
  run_forward(x, tau, ctx, cache);
  Tensor out({x.rows(), spec_.n});
  view(out, x.rows(), spec_.n) = cache.out;
  out.require_finite("forward: output");
  return out;
}

Gradients AiqnModel::backprop(const Tensor& x, const Tensor& tau, const Tensor* ctx,
                              const Tensor& dout) const {
  Cache cache;
  run_forward(x, tau, ctx, cache);
  return backward(cache, dout);
}

Gradients AiqnModel::backward(const Cache& cache, const Tensor& dout) const {
  if (dout.rank() != 2 || dout.rows() != cache.batch || dout.cols() != spec_.n) {
    throw DomainError("backprop: upstream gradient must be [B,n]");
  }

  const auto n = static_cast<Eigen::Index>(spec_.n);
  const auto e = static_cast<Eigen::Index>(spec_.head_width);
  const auto batch = static_cast<Eigen::Index>(cache.batch);
  const bool trunk_live = spec_.n > 1;
  const std::size_t blocks = blocks_.size();

  Gradients g;
  for (const auto& p : params_) g.params.emplace_back(p.shape());
  const MapC up = view(dout, dout.rows(), dout.cols());

  // Output layer.
  Mat dhead(batch, n * e);
  {
    const MapC w = view(params_[out_w_], spec_.n, spec_.head_width);
    MapM dw = view(g.params[out_w_], spec_.n, spec_.head_width);
    const Mat& last = cache.head[blocks - 1];
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index i = 0; i < n; ++i) {
        dhead.block(b, i * e, 1, e) = up(b, i) * w.row(i);
        dw.row(i) += up(b, i) * last.block(b, i * e, 1, e);
        g.params[out_b_][static_cast<std::size_t>(i)] += up(b, i);
      }
    }
  }

  Mat dtau_tilde = Mat::Zero(batch, n);
  Mat dctx;
  if (spec_.context_width > 0) dctx = Mat::Zero(batch, static_cast<Eigen::Index>(spec_.context_width));
  std::vector<Mat> dtrunk(blocks + 1);
  for (std::size_t k = 0; k <= blocks; ++k) {
    const auto width = static_cast<Eigen::Index>(k == 0 ? spec_.n : spec_.hidden[k - 1]);
    dtrunk[k] = Mat::Zero(batch, width);
  }

  for (std::size_t kk = blocks; kk-- > 0;) {
    const BlockIndex& bi = blocks_[kk];
    const Mat& hf = cache.head_f[kk];
    const Mat& hg = cache.head_g[kk];
    const Mat dpf = (dhead.array() * hg.array() * (1.0 - hf.array().square())).matrix();
    const Mat dpg = (dhead.array() * hf.array() * hg.array() * (1.0 - hg.array())).matrix();

    Mat dprev;
    auto gate_backward = [&](const Mat& dp, std::size_t a_idx, const std::optional<std::size_t>& u_idx,
                             std::size_t e_idx, std::size_t v_idx, const std::optional<std::size_t>& c_idx) {
      row_view(g.params[e_idx]) += dp.colwise().sum();

      const RowMapC v = row_view(params_[v_idx]);
      RowMapM dv = row_view(g.params[v_idx]);
      for (Eigen::Index b = 0; b < batch; ++b) {
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto blk = dp.row(b).segment(i * e, e);
          dv += cache.tau_tilde(b, i) * blk;
          dtau_tilde(b, i) += blk.dot(v);
        }
      }

      if (c_idx) {
        Mat summed = Mat::Zero(batch, e);
        for (Eigen::Index i = 0; i < n; ++i) summed += dp.middleCols(i * e, e);
        const MapC cw = view(params_[*c_idx], spec_.context_width, spec_.head_width);
        view(g.params[*c_idx], spec_.context_width, spec_.head_width).noalias() += cache.ctx.transpose() * summed;
        dctx.noalias() += summed * cw.transpose();
      }

      if (u_idx) {
        const MapC flat(dp.data(), batch * n, e);
        const MapC prev(cache.head[kk - 1].data(), batch * n, e);
        const MapC u = view(params_[*u_idx], spec_.head_width, spec_.head_width);
        view(g.params[*u_idx], spec_.head_width, spec_.head_width).noalias() += prev.transpose() * flat;
        if (dprev.size() == 0) dprev = Mat::Zero(batch, n * e);
        MapM(dprev.data(), batch * n, e).noalias() += flat * u.transpose();
      }

      if (trunk_live) {
        const auto& offsets = degree_offsets_[kk];
        const MapC a = view(params_[a_idx], spec_.hidden[kk], spec_.head_width);
        MapM da = view(g.params[a_idx], spec_.hidden[kk], spec_.head_width);
        Mat acc = Mat::Zero(batch, e);
        for (std::size_t r = spec_.n; r >= 1; --r) {
          // acc holds the summed adjoint of every position with rank > r.
          if (r < offsets.size() - 1) {
            const auto start = static_cast<Eigen::Index>(offsets[r]);
            const auto len = static_cast<Eigen::Index>(offsets[r + 1]) - start;
            if (len > 0) {
              da.middleRows(start, len).noalias() += cache.trunk[kk + 1].middleCols(start, len).transpose() * acc;
              dtrunk[kk + 1].middleCols(start, len).noalias() += acc * a.middleRows(start, len).transpose();
            }
          }
          acc += dp.middleCols(static_cast<Eigen::Index>(ordering_[r - 1]) * e, e);
        }
      }
    };
    gate_backward(dpf, bi.af, bi.uf, bi.ef, bi.vf, bi.cf);
    gate_backward(dpg, bi.ag, bi.ug, bi.eg, bi.vg, bi.cg);
    if (kk > 0) dhead = std::move(dprev);

    if (trunk_live) {
      const Mat& tf = cache.trunk_f[kk];
      const Mat& tg = cache.trunk_g[kk];
      const Mat& dt = dtrunk[kk + 1];
      const Mat dtf = (dt.array() * tg.array() * (1.0 - tf.array().square())).matrix();
      const Mat dtg = (dt.array() * tf.array() * tg.array() * (1.0 - tg.array())).matrix();
      const Tensor& mask = masks_.trunk[kk];
      const MapC m = view(mask, mask.rows(), mask.cols());
      MapM dwf = view(g.params[bi.wf], mask.rows(), mask.cols());
      MapM dwg = view(g.params[bi.wg], mask.rows(), mask.cols());
      dwf.noalias() += cache.trunk[kk].transpose() * dtf;
      dwg.noalias() += cache.trunk[kk].transpose() * dtg;
      dwf = dwf.cwiseProduct(m);
      dwg = dwg.cwiseProduct(m);
      row_view(g.params[bi.bf]) += dtf.colwise().sum();
      row_view(g.params[bi.bg]) += dtg.colwise().sum();
      dtrunk[kk].noalias() += dtf * view(params_[bi.wf], mask.rows(), mask.cols()).transpose();
      dtrunk[kk].noalias() += dtg * view(params_[bi.wg], mask.rows(), mask.cols()).transpose();
    }
  }

  g.dx = Tensor({cache.batch, spec_.n});
  view(g.dx, cache.batch, spec_.n) = dtrunk[0];
  g.dtau = Tensor({cache.batch, spec_.n});
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::size_t dst = spec_.tau_mode == TauMode::kShared ? ordering_[0] : static_cast<std::size_t>(i);
      g.dtau.at(static_cast<std::size_t>(b), dst) += 2.0 * dtau_tilde(b, i);
    }
  }
  return g;
}

LossAndGrads AiqnModel::loss_and_grads(const Tensor& x, const Tensor& tau, const Tensor& target,
                                       const LossConfig& cfg, const Tensor* ctx) const {
  Cache cache;
  run_forward(x, tau, ctx, cache);
  LossAndGrads out;
  out.pred = Tensor({x.rows(), spec_.n});
  view(out.pred, x.rows(), spec_.n) = cache.out;
  out.pred.require_finite("forward: output");
  BatchLoss bl = batch_quantile_loss(out.pred, target, tau, cfg);
  out.loss = bl.loss;
  out.grads = backward(cache, bl.grad);
  return out;
}

namespace {

struct SingleRow {
  Tensor x, tau, ctx;
};

SingleRow single_row(const AiqnModel& model, std::span<const double> x, std::span<const double> tau,
                     std::span<const double> ctx, std::size_t dim) {
  const std::size_t n = model.n();
  if (x.size() != n || tau.size() != n) throw DomainError("dquantile_dtau: x and tau need n entries");
  if (dim >= n) throw DomainError("dquantile_dtau: dim out of range");
  SingleRow s{Tensor({1, n}, std::vector<double>(x.begin(), x.end())),
              Tensor({1, n}, std::vector<double>(tau.begin(), tau.end())), Tensor()};
  if (!ctx.empty()) s.ctx = Tensor({1, ctx.size()}, std::vector<double>(ctx.begin(), ctx.end()));
  return s;
}

}  // namespace

double dquantile_dtau(const AiqnModel& model, std::span<const double> x, std::span<const double> tau,
                      std::size_t dim, std::span<const double> ctx) {
  SingleRow s = single_row(model, x, tau, ctx, dim);
  Tensor seed({1, model.n()});
  seed[dim] = 1.0;
  const Gradients g = model.backprop(s.x, s.tau, s.ctx.empty() ? nullptr : &s.ctx, seed);
  const std::size_t src = model.spec().tau_mode == TauMode::kShared ? model.ordering()[0] : dim;
  return g.dtau[src];
}

double dquantile_dtau_fd(const AiqnModel& model, std::span<const double> x, std::span<const double> tau,
                         std::size_t dim, double h, std::span<const double> ctx) {
  SingleRow s = single_row(model, x, tau, ctx, dim);
  const std::size_t src = model.spec().tau_mode == TauMode::kShared ? model.ordering()[0] : dim;
  const double t = s.tau[src];
  while (h > 1e-12 && (t - h <= 0.0 || t + h >= 1.0)) h *= 0.5;
  const Tensor* c = s.ctx.empty() ? nullptr : &s.ctx;
  s.tau[src] = t + h;
  const double hi = model.forward(s.x, s.tau, c)[dim];
  s.tau[src] = t - h;
  const double lo = model.forward(s.x, s.tau, c)[dim];
  return (hi - lo) / (2.0 * h);
}

}  // namespace aiqn
