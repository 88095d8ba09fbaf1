#include "aiqn/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>

#include "aiqn/checkpoint.hpp"
#include "aiqn/config.hpp"
#include "aiqn/errors.hpp"
#include "aiqn/io.hpp"
#include "aiqn/sampling.hpp"
#include "aiqn/train.hpp"

namespace aiqn::cli {
namespace fs = std::filesystem;

namespace {

inline constexpr double kGradCheckTolerance = 1e-4;
inline constexpr double kGradCheckEps = 1e-5;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool dry_run = false;

  std::string data_path;
  std::string checkpoint;
  std::string samples_path;
  std::string prefix_path;
  std::string known;
  std::string tau_mode;
  std::vector<double> clamp;
  std::size_t count = 16;
  std::size_t row = 0;
  std::size_t batch = 4;
  bool no_images = false;
  bool inject_fault = false;
  bool count_set = false;
};

Tensor require_tensor(const fs::path& path, const char* what) {
  if (!fs::exists(path)) throw ConfigError(std::string(what) + " file not found: " + path.string());
  return read_tensor_file(path);
}

Checkpoint require_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("checkpoint file not found: " + path.string());
  return load_checkpoint(path);
}

fs::path checkpoint_path(const Options& o, const ExperimentConfig& cfg) {
  return o.checkpoint.empty() ? fs::path(cfg.out_dir) / "checkpoint.aiqn" : fs::path(o.checkpoint);
}

std::uint64_t seed_of(const Options& o, const ExperimentConfig& cfg) { return o.seed.value_or(cfg.train.seed); }

void write_images(const fs::path& dir, const std::string& stem, const Tensor& t, std::size_t rows,
                  std::size_t cols, std::ostream& out) {
  for (std::size_t i = 0; i < t.rows(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "%s_%04zu.pgm", stem.c_str(), i);
    write_pgm(dir / name, t.row(i), rows, cols);
  }
  out << "wrote " << t.rows() << " images to " << dir.string() << "\n";
}

std::optional<std::pair<std::size_t, std::size_t>> image_shape(const Checkpoint& ck) {
  const auto r = ck.extra.find("image_rows");
  const auto c = ck.extra.find("image_cols");
  if (r == ck.extra.end() || c == ck.extra.end()) return std::nullopt;
  const std::size_t rows = std::stoull(r->second), cols = std::stoull(c->second);
  if (rows == 0 || rows * cols != ck.spec.n) return std::nullopt;
  return std::make_pair(rows, cols);
}

std::optional<std::pair<double, double>> clamp_of(const Options& o) {
  if (o.clamp.empty()) return std::nullopt;
  return std::make_pair(o.clamp[0], o.clamp[1]);
}

Tensor maybe_context(const ExperimentConfig& cfg, std::size_t rows) {
  if (cfg.context_path.empty()) {
    if (cfg.model.context_width > 0) throw ConfigError("config: context_width > 0 needs context_path");
    return {};
  }
  Tensor ctx = require_tensor(cfg.context_path, "context");
  if (ctx.rank() != 2 || ctx.rows() != rows || ctx.cols() != cfg.model.context_width) {
    throw ConfigError("context " + cfg.context_path + " has shape " + ctx.shape_string() + ", expected [" +
                      std::to_string(rows) + "," + std::to_string(cfg.model.context_width) + "]");
  }
  return ctx;
}

// ---- commands ----

int cmd_gen_data(const ExperimentConfig& cfg, std::ostream& out) {
  Rng rng = Rng(cfg.train.seed).stream(2);
  const Tensor data = cfg.make_dataset(rng);
  const fs::path path = cfg.resolved_data_path();
  write_tensor_file(path, data);
  // The tensor container has no metadata block, so provenance goes in a sidecar.
  write_text_file(path.string() + ".meta", "task = " + to_string(cfg.task) + "\nseed = " +
                                               std::to_string(cfg.train.seed) + "\nshape = " +
                                               data.shape_string() + "\n");
  out << "wrote " << path.string() << " " << data.shape_string() << "\n";
  return kExitOk;
}

Evaluator scalar_evaluator(const ExperimentConfig& cfg) {
  const auto truth = cfg.truth(0);
  if (cfg.task != Task::kScalarAnalytic || !truth) return {};
  return [truth = *truth](const AiqnModel& m) {
    const QuantileFn q = learned_quantile_fn(m, 0);
    double worst = 0.0;
    for (int k = 1; k <= 9; ++k) {
      const double t = 0.1 * k;
      worst = std::max(worst, std::abs(q(t) - truth.quantile(t)));
    }
    return std::vector<std::pair<std::string, double>>{
        {"quantile_max_error", worst}, {"quantile_divergence", quantile_divergence(truth, q, 1e-6)}};
  };
}

int cmd_train(const ExperimentConfig& cfg, const Options& o, std::ostream& out, std::ostream& err) {
  const fs::path data_path = o.data_path.empty() ? cfg.resolved_data_path() : fs::path(o.data_path);
  const Tensor data = require_tensor(data_path, "dataset");
  if (data.rank() != 2 || data.cols() != cfg.model.n) {
    throw ConfigError("dataset " + data_path.string() + " has shape " + data.shape_string() +
                      " but the model expects n = " + std::to_string(cfg.model.n));
  }
  const Tensor ctx = maybe_context(cfg, data.rows());
  Rng init = Rng(cfg.train.seed).stream(0);
  const AiqnModel model = AiqnModel::build(cfg.model, init);

  TrainResult result;
  const fs::path dir(cfg.out_dir);
  try {
    result = train(model, data, cfg.train, ctx.empty() ? nullptr : &ctx, scalar_evaluator(cfg));
  } catch (const TrainingAborted& e) {
    save_checkpoint(dir / "checkpoint.last_good.aiqn", e.last_good());
    err << "error: " << e.what() << "; last good state saved to "
        << (dir / "checkpoint.last_good.aiqn").string() << "\n";
    return kExitCheckFailed;
  }
  Checkpoint& ck = result.checkpoint;
  ck.extra["task"] = to_string(cfg.task);
  if (cfg.task == Task::kScalarAnalytic) ck.extra["distribution"] = cfg.distribution;
  if (cfg.is_image()) {
    ck.extra["image_rows"] = std::to_string(cfg.image_rows);
    ck.extra["image_cols"] = std::to_string(cfg.image_cols);
  }
  save_checkpoint(dir / "checkpoint.aiqn", ck);
  write_text_file(dir / "metrics.csv", metrics_csv(result.log));

  std::size_t last = 0;
  for (const auto& r : result.log) last = r.step;
  out << "trained " << cfg.train.steps << " steps; checkpoint " << (dir / "checkpoint.aiqn").string() << "\n";
  for (const auto& r : result.log) {
    if (r.step == last) out << r.metric << " = " << format_double(r.value) << "\n";
  }
  return kExitOk;
}

int cmd_sample(const ExperimentConfig& cfg, const Options& o, std::ostream& out) {
  const Checkpoint ck = require_checkpoint(checkpoint_path(o, cfg));
  SampleRequest req;
  req.count = o.count;
  req.seed = seed_of(o, cfg);
  if (!o.tau_mode.empty()) req.tau_mode = parse_tau_mode(o.tau_mode);
  req.clamp = clamp_of(o);
  const Tensor samples = sample(ck.eval_model(), req);
  const fs::path dir(cfg.out_dir);
  write_tensor_file(dir / "samples.aiqt", samples);
  out << "wrote " << (dir / "samples.aiqt").string() << " " << samples.shape_string() << "\n";
  if (const auto shape = image_shape(ck); shape && !o.no_images) {
    write_images(dir / "samples", "sample", samples, shape->first, shape->second, out);
  }
  return kExitOk;
}

std::vector<std::size_t> parse_positions(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    try {
      if (dash == std::string::npos) {
        out.push_back(std::stoull(item));
      } else {
        const std::size_t a = std::stoull(item.substr(0, dash)), b = std::stoull(item.substr(dash + 1));
        if (b < a) throw ConfigError("--known: range '" + item + "' is reversed");
        for (std::size_t i = a; i <= b; ++i) out.push_back(i);
      }
    } catch (const std::logic_error&) {
      throw ConfigError("--known: cannot read '" + item + "' (use e.g. 0-31)");
    }
  }
  return out;
}

int cmd_inpaint(const ExperimentConfig& cfg, const Options& o, std::ostream& out) {
  const Checkpoint ck = require_checkpoint(checkpoint_path(o, cfg));
  const AiqnModel model = ck.eval_model();
  const Tensor source = require_tensor(o.prefix_path, "prefix");
  std::span<const double> image;
  if (source.rank() == 1 && source.size() == model.n()) {
    image = source.values();
  } else if (source.rank() == 2 && source.cols() == model.n() && o.row < source.rows()) {
    image = source.row(o.row);
  } else {
    throw ConfigError("prefix " + o.prefix_path + " has shape " + source.shape_string() +
                      "; need [n] or [m,n] with --row < m, n = " + std::to_string(model.n()));
  }
  std::vector<std::size_t> known;
  if (o.known.empty()) {
    known.assign(model.ordering().begin(), model.ordering().begin() + model.n() / 2);
  } else {
    known = parse_positions(o.known);
  }
  const std::size_t k = check_ordering_prefix(model, known);
  InpaintRequest req;
  for (std::size_t j = 0; j < k; ++j) req.prefix.push_back(image[model.ordering()[j]]);
  req.count = o.count;
  req.seed = seed_of(o, cfg);
  req.clamp = clamp_of(o);
  const Tensor completions = inpaint(model, req);
  const fs::path dir(cfg.out_dir);
  write_tensor_file(dir / "inpaint.aiqt", completions);
  out << "wrote " << (dir / "inpaint.aiqt").string() << " " << completions.shape_string() << "\n";
  if (const auto shape = image_shape(ck); shape && !o.no_images) {
    write_images(dir / "inpaint", "inpaint", completions, shape->first, shape->second, out);
  }
  return kExitOk;
}

int cmd_eval(const ExperimentConfig& cfg, const Options& o, std::ostream& out) {
  const fs::path data_path = o.data_path.empty() ? cfg.resolved_data_path() : fs::path(o.data_path);
  const Tensor data = require_tensor(data_path, "dataset");
  EvalOptions eo;
  eo.seed = seed_of(o, cfg);
  eo.sample_count = o.count_set ? o.count : cfg.eval_samples;
  std::vector<MetricRow> rows;
  if (!o.samples_path.empty()) {
    const Tensor samples = require_tensor(o.samples_path, "samples");
    if (samples.rank() != 2 || data.rank() != 2 || samples.cols() != data.cols()) {
      throw ConfigError("samples " + o.samples_path + " " + samples.shape_string() + " do not match dataset " +
                        data.shape_string());
    }
    rows = compare_samples(samples, data, eo);
  } else {
    const Checkpoint ck = require_checkpoint(checkpoint_path(o, cfg));
    if (data.rank() != 2 || data.cols() != ck.spec.n) {
      throw ConfigError("dataset " + data_path.string() + " has shape " + data.shape_string() +
                        " but the checkpoint model has n = " + std::to_string(ck.spec.n));
    }
    if (const auto it = ck.extra.find("distribution"); it != ck.extra.end()) {
      eo.truths = {parse_distribution(it->second)};
    } else if (ck.extra.count("task") && ck.extra.at("task") == "multivariate-gaussian") {
      eo.truths.assign(ck.spec.n, AnalyticDist::gaussian(0.0, 1.0));
    }
    rows = eval_suite(ck.eval_model(), data, eo);
  }
  const std::string csv = metric_csv(rows);
  write_text_file(fs::path(cfg.out_dir) / "eval.csv", csv);
  out << csv;
  return kExitOk;
}

int cmd_gradcheck(const ExperimentConfig& cfg, const Options& o, std::ostream& out) {
  const std::uint64_t seed = seed_of(o, cfg);
  Rng rng(seed);
  Rng init = rng.stream(0);
  ModelSpec spec = cfg.model;
  const AiqnModel model = AiqnModel::build(spec, init);
  const std::size_t n = model.n();
  const std::size_t b = o.batch;
  if (b < 1) throw ConfigError("--batch must be >= 1");

  Rng draw = rng.stream(1);
  Tensor x({b, n});
  Tensor tau({b, n});
  for (double& v : x.values()) v = draw.uniform();
  for (double& v : tau.values()) v = 0.05 + 0.9 * draw.uniform();
  Tensor ctx;
  if (spec.context_width > 0) {
    ctx = Tensor({b, spec.context_width});
    for (std::size_t r = 0; r < b; ++r) ctx.at(r, r % spec.context_width) = 1.0;
  }
  const Tensor* ctx_ptr = ctx.empty() ? nullptr : &ctx;
  // Residuals are placed well away from the loss kinks (0 and +-kappa) so the
  // central differences never straddle one.
  const Tensor pred = model.forward(x, tau, ctx_ptr);
  Tensor target = pred;
  const double kappa = cfg.train.kappa;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double sign = draw.uniform() < 0.5 ? -1.0 : 1.0;
    const double mag = kappa > 0.0 && draw.uniform() < 0.5 ? kappa * (0.25 + 0.5 * draw.uniform())
                                                           : std::max(kappa, 1e-3) * (2.0 + 8.0 * draw.uniform());
    target[i] += sign * mag;
  }

  std::optional<GradFault> fault;
  if (o.inject_fault) fault = GradFault{model.params().size() - 1, 0, 1e-2};
  Rng pick = rng.stream(2);
  const GradCheckReport rep =
      grad_check(model, x, tau, target, LossConfig{kappa}, kGradCheckEps, pick, ctx_ptr, fault);
  out << "parameters = " << model.param_count() << "\n";
  out << "checked = " << rep.checked << "\n";
  out << "max_rel_error = " << format_double(rep.max_rel_error) << "\n";
  out << "worst_param = " << rep.worst_param << "[" << rep.worst_entry << "]\n";
  out << "analytic = " << format_double(rep.analytic) << "\n";
  out << "numeric = " << format_double(rep.numeric) << "\n";
  if (rep.masked_nonzero > 0) out << "masked_nonzero = " << rep.masked_nonzero << "\n";
  const bool pass = rep.max_rel_error <= kGradCheckTolerance;
  out << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Autoregressive implicit quantile networks"};
  app.name("aiqn");
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config_path, "Config file (flat key = value)");
  app.add_option("--seed", o.seed, "Seed; overrides the config");
  app.add_option("--out", o.out_dir, "Output directory; overrides the config");
  app.add_flag("--dry-run", o.dry_run, "Print the resolved config and exit");

  auto* gen = app.add_subcommand("gen-data", "Generate or ingest the dataset");
  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--data", o.data_path, "Dataset tensor file");
  auto* sa = app.add_subcommand("sample", "Draw samples from a checkpoint");
  sa->add_option("--checkpoint", o.checkpoint, "Checkpoint file");
  sa->add_option("--count", o.count, "Number of samples")->check(CLI::PositiveNumber);
  sa->add_option("--tau-mode", o.tau_mode, "per-dimension or shared");
  sa->add_option("--clamp", o.clamp, "Clamp range LO HI")->expected(2);
  sa->add_flag("--no-images", o.no_images, "Skip PGM output for image tasks");
  auto* in = app.add_subcommand("inpaint", "Complete images from a fixed prefix");
  in->add_option("--checkpoint", o.checkpoint, "Checkpoint file");
  in->add_option("--prefix", o.prefix_path, "Tensor file holding the source example(s)")->required();
  in->add_option("--row", o.row, "Row of a [m,n] prefix file");
  in->add_option("--known", o.known, "Known positions, e.g. 0-31 (default: first half of the ordering)");
  in->add_option("--count", o.count, "Number of completions")->check(CLI::PositiveNumber);
  in->add_option("--clamp", o.clamp, "Clamp range LO HI")->expected(2);
  in->add_flag("--no-images", o.no_images, "Skip PGM output for image tasks");
  auto* ev = app.add_subcommand("eval", "Metric suite against a dataset");
  ev->add_option("--checkpoint", o.checkpoint, "Checkpoint file");
  ev->add_option("--data", o.data_path, "Dataset tensor file");
  ev->add_option("--samples", o.samples_path, "Evaluate this sample tensor instead of the model");
  auto* count_opt = ev->add_option("--count", o.count, "Model samples (default min(m, 10000))");
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  gc->add_option("--batch", o.batch, "Synthetic batch size");
  gc->add_flag("--inject-fault", o.inject_fault, "Perturb one analytic gradient entry");
  for (auto* sub : {gen, tr, sa, in, ev, gc}) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  o.count_set = count_opt->count() > 0;

  try {
    ExperimentConfig cfg = o.config_path.empty() ? parse_config("") : load_config(o.config_path);
    if (o.seed) cfg.train.seed = *o.seed;
    if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
    if (o.dry_run) {
      out << format_config(cfg);
      return kExitOk;
    }
    if (gen->parsed()) return cmd_gen_data(cfg, out);
    if (tr->parsed()) return cmd_train(cfg, o, out, err);
    if (sa->parsed()) return cmd_sample(cfg, o, out);
    if (in->parsed()) return cmd_inpaint(cfg, o, out);
    if (ev->parsed()) return cmd_eval(cfg, o, out);
    return cmd_gradcheck(cfg, o, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
}

}  // namespace aiqn::cli
