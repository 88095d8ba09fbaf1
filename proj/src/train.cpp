#include "aiqn/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "aiqn/errors.hpp"
#include "aiqn/io.hpp"

namespace aiqn {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw DomainError("train: learning rate must be > 0");
  }
  if (batch_size < 1) throw DomainError("train: batch size must be >= 1");
  if (steps < 1) throw DomainError("train: steps must be >= 1");
  if (!(polyak >= 0.0 && polyak < 1.0)) throw DomainError("train: polyak weight must lie in [0,1)");
  if (eval_interval < 1) throw DomainError("train: eval interval must be >= 1");
  if (tau_samples < 1) throw DomainError("train: tau_samples must be >= 1");
  LossConfig{kappa}.validate();
  std::size_t prev = 0;
  for (const auto& [step, lr] : lr_schedule) {
    if (step < prev) throw DomainError("train: learning-rate schedule must be ascending");
    if (!(lr > 0.0)) throw DomainError("train: scheduled learning rates must be > 0");
    prev = step;
  }
}

double TrainConfig::learning_rate_at(std::size_t step) const {
  double lr = learning_rate;
  for (const auto& [from, value] : lr_schedule) {
    if (step >= from) lr = value;
  }
  return lr;
}

std::string format_lr_schedule(const std::vector<std::pair<std::size_t, double>>& schedule) {
  std::string s;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(schedule[i].first) + ":" + format_double(schedule[i].second);
  }
  return s;
}

std::vector<std::pair<std::size_t, double>> parse_lr_schedule(const std::string& text) {
  std::vector<std::pair<std::size_t, double>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw DomainError("lr schedule entry '" + item + "' is not step:rate");
    try {
      out.emplace_back(std::stoull(item.substr(0, colon)), std::stod(item.substr(colon + 1)));
    } catch (const std::logic_error&) {
      throw DomainError("lr schedule entry '" + item + "' is not step:rate");
    }
  }
  return out;
}

AiqnModel Checkpoint::raw_model() const { return AiqnModel::restore(spec, masks, params); }

AiqnModel Checkpoint::eval_model() const { return AiqnModel::restore(spec, masks, polyak); }

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "step,loss,metric_name,metric_value\n";
  for (const auto& r : rows) {
    out += std::to_string(r.step) + "," + format_double(r.loss) + "," + r.metric + "," +
           format_double(r.value) + "\n";
  }
  return out;
}

TrainResult train(const AiqnModel& model, const Tensor& data, const TrainConfig& cfg,
                  const Tensor* context, const Evaluator& evaluator) {
  cfg.validate();
  const std::size_t n = model.n();
  const std::size_t c = model.spec().context_width;
  if (data.rank() != 2 || data.rows() == 0) throw DomainError("train: dataset must be a nonempty [m,n] tensor");
  if (data.cols() != n) {
    throw DomainError("train: dataset has " + std::to_string(data.cols()) + " columns but model n = " +
                      std::to_string(n));
  }
  if (c > 0 && (!context || context->rank() != 2 || context->rows() != data.rows() || context->cols() != c)) {
    throw DomainError("train: context must be [m," + std::to_string(c) + "]");
  }

  AiqnModel work = model;
  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  ck.spec = model.spec();
  ck.masks = model.masks();
  ck.config = cfg;
  std::vector<Tensor> polyak = model.params();
  OptimizerState state = OptimizerState::zeros_like(model.params());

  auto snapshot = [&](std::size_t step) {
    Checkpoint s = ck;
    s.params = work.params();
    s.polyak = polyak;
    s.optimizer = state;
    s.step = step;
    return s;
  };

  const LossConfig loss_cfg{cfg.kappa};
  const bool shared = model.spec().tau_mode == TauMode::kShared;
  const std::size_t rows = cfg.batch_size * cfg.tau_samples;
  Rng rng = Rng(cfg.seed).stream(1);
  Tensor x({rows, n});
  Tensor tau({rows, n});
  Tensor ctx = c > 0 ? Tensor({rows, c}) : Tensor();

  result.losses.reserve(cfg.steps);
  double window_sum = 0.0;
  std::size_t window_count = 0;
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const std::size_t idx = rng.below(data.rows());
      for (std::size_t t = 0; t < cfg.tau_samples; ++t) {
        const std::size_t r = b * cfg.tau_samples + t;
        std::copy_n(data.row(idx).begin(), n, x.row(r).begin());
        if (c > 0) std::copy_n(context->row(idx).begin(), c, ctx.row(r).begin());
        if (shared) {
          std::fill_n(tau.row(r).begin(), n, rng.uniform());
        } else {
          for (std::size_t i = 0; i < n; ++i) tau.at(r, i) = rng.uniform();
        }
      }
    }

    LossAndGrads lg = work.loss_and_grads(x, tau, x, loss_cfg, c > 0 ? &ctx : nullptr);
    if (!std::isfinite(lg.loss)) {
      throw TrainingAborted("train: non-finite loss at step " + std::to_string(step), snapshot(step - 1), step);
    }
    try {
      optimizer_step(cfg.optimizer, work.params(), lg.grads.params, state, cfg.learning_rate_at(step));
    } catch (const TrainingError& e) {
      throw TrainingAborted(std::string(e.what()) + " at step " + std::to_string(step), snapshot(step - 1), step);
    }
    polyak_update(polyak, work.params(), cfg.polyak);

    result.losses.push_back(lg.loss);
    window_sum += lg.loss;
    ++window_count;
    if (step % cfg.eval_interval == 0 || step == cfg.steps) {
      const double window_loss = window_sum / static_cast<double>(window_count);
      result.log.push_back({step, window_loss, "train_loss", window_loss});
      if (evaluator) {
        for (const auto& [name, value] : evaluator(work.with_params(polyak))) {
          result.log.push_back({step, window_loss, name, value});
        }
      }
      window_sum = 0.0;
      window_count = 0;
    }
  }

  ck = snapshot(cfg.steps);
  return result;
}

double grad_relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(std::vector<Tensor>& params, const std::vector<Tensor>& analytic,
                           const std::vector<std::string>& names,
                           const std::vector<const Tensor*>& masks,
                           const std::function<double()>& loss, double eps,
                           std::size_t max_entries, Rng& rng) {
  if (!(eps > 0.0)) throw DomainError("grad_check: eps must be positive");
  if (analytic.size() != params.size() || names.size() != params.size() || masks.size() != params.size()) {
    throw DomainError("grad_check: parameter, gradient, name and mask lists must align");
  }

  GradCheckReport report;
  std::vector<std::pair<std::size_t, std::size_t>> entries;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      if (masks[p] && (*masks[p])[i] == 0.0) {
        if (analytic[p][i] != 0.0) ++report.masked_nonzero;
        continue;
      }
      entries.emplace_back(p, i);
    }
  }
  if (entries.size() > max_entries) {
    for (std::size_t k = 0; k < max_entries; ++k) {
      const std::size_t j = k + rng.below(entries.size() - k);
      std::swap(entries[k], entries[j]);
    }
    entries.resize(max_entries);
  }

  for (const auto& [p, i] : entries) {
    // Five-point central stencil: truncation error O(eps^4).
    const double saved = params[p][i];
    auto at = [&](double offset) {
      params[p][i] = saved + offset;
      return loss();
    };
    const double numeric = (8.0 * (at(eps) - at(-eps)) - (at(2.0 * eps) - at(-2.0 * eps))) / (12.0 * eps);
    params[p][i] = saved;
    const double err = grad_relative_error(analytic[p][i], numeric);
    ++report.checked;
    if (report.checked == 1 || err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_param = names[p];
      report.worst_param_index = p;
      report.worst_entry = i;
      report.analytic = analytic[p][i];
      report.numeric = numeric;
    }
  }
  if (report.masked_nonzero > 0) report.max_rel_error = std::numeric_limits<double>::infinity();
  return report;
}

GradCheckReport grad_check(const AiqnModel& model, const Tensor& x, const Tensor& tau,
                           const Tensor& target, const LossConfig& cfg, double eps, Rng& rng,
                           const Tensor* ctx, std::optional<GradFault> fault) {
  AiqnModel work = model;
  std::vector<Tensor> analytic = work.loss_and_grads(x, tau, target, cfg, ctx).grads.params;
  if (fault) {
    if (fault->param >= analytic.size() || fault->entry >= analytic[fault->param].size()) {
      throw DomainError("grad_check: fault address out of range");
    }
    analytic[fault->param][fault->entry] += fault->delta;
  }
  std::vector<const Tensor*> masks;
  for (std::size_t p = 0; p < work.params().size(); ++p) masks.push_back(work.param_mask(p));
  auto loss = [&] { return batch_quantile_loss(work.forward(x, tau, ctx), target, tau, cfg).loss; };
  const std::size_t limit =
      work.param_count() <= kFullGradCheckLimit ? std::numeric_limits<std::size_t>::max() : kGradCheckSubset;
  return grad_check(work.params(), analytic, work.param_names(), masks, loss, eps, limit, rng);
}

}  // namespace aiqn
