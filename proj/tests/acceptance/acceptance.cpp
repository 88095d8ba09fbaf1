// Acceptance suite: one PASS/FAIL line per criterion. `--criterion N` runs a single one.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "aiqn/checkpoint.hpp"
#include "aiqn/cli.hpp"
#include "aiqn/config.hpp"
#include "aiqn/datasets.hpp"
#include "aiqn/divergences.hpp"
#include "aiqn/io.hpp"
#include "aiqn/losses.hpp"
#include "aiqn/network.hpp"
#include "aiqn/sampling.hpp"
#include "aiqn/train.hpp"

using namespace aiqn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [fail]");
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path g_work;

fs::path workdir(const std::string& name) {
  const fs::path p = g_work / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

CliResult cli_in(const fs::path& dir, const std::string& config, std::vector<std::string> args) {
  write_text_file(dir / "run.cfg", config);
  std::vector<std::string> full{"--config", (dir / "run.cfg").string(), "--out", dir.string()};
  full.insert(full.end(), args.begin(), args.end());
  return cli_run(full);
}

double read_value(const std::string& text, const std::string& key) {
  const auto at = text.find(key + " = ");
  if (at == std::string::npos) return NAN;
  return std::stod(text.substr(at + key.size() + 3));
}

std::string slurp(const fs::path& p) {
  const auto b = read_file_bytes(p);
  return std::string(b.begin(), b.end());
}

// Generates data and trains through the CLI; returns the Polyak-averaged model.
AiqnModel cli_train(const fs::path& dir, const std::string& config, Outcome& o) {
  const auto gen = cli_in(dir, config, {"gen-data"});
  const auto tr = gen.code == 0 ? cli_in(dir, config, {"train"}) : gen;
  if (tr.code != 0) {
    o.require(false, "training exited " + std::to_string(tr.code) + ": " + tr.err);
    throw std::runtime_error("training failed");
  }
  return load_checkpoint(dir / "checkpoint.aiqn").eval_model();
}

// ---------------------------------------------------------------------------

Outcome loss_formulas() {
  Outcome o;
  const double ex = 1e-15;
  auto near = [&](double a, double b) { return std::abs(a - b) <= ex; };
  bool ok = qr_loss(0, 0.3) == 0 && qr_loss(1, 0.5) == 0.5 && qr_loss(-1, 0.5) == 0.5 && near(qr_loss(-1, 0.9), 0.1) &&
            near(qr_loss(1, 0.9), 0.9);
  o.require(ok, "pinball examples");
  ok = near(huber_qr_loss(0.5, 0.7, 1), 0.0875) && near(huber_qr_loss(-2, 0.7, 1), 0.45) &&
       huber_qr_loss(0, 0.4, 0.3) == 0;
  o.require(ok, "huber examples");
  ok = near(qr_loss_grad(1, 0.3, 0), 0.3) && qr_loss_grad(0, 0.6, 1) == 0 && near(qr_loss_grad(-2, 0.7, 1), -0.3) &&
       near(qr_loss_grad(0, 0.3, 0), -0.7);
  o.require(ok, "gradient examples");
  const auto b = batch_quantile_loss(Tensor({1, 1}, {0.0}), Tensor({1, 1}, {0.5}), Tensor({1, 1}, {0.7}), {1.0});
  o.require(near(b.loss, 0.0875) && near(b.grad[0], -0.35), "batch example");

  Rng rng(1);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double kappa = 1e-3 + rng.uniform();
    const double tau = rng.uniform();
    const double mag = kappa * (1.0 + 10.0 * rng.uniform());
    const double u = rng.uniform() < 0.5 ? -mag : mag;
    const double w = std::abs(tau - (u <= 0 ? 1.0 : 0.0));
    worst = std::max(worst, std::abs(huber_qr_loss(u, tau, kappa) - (qr_loss(u, tau) - w * kappa / 2)));
  }
  o.require(worst <= 1e-12, "huber/pinball identity max " + fmt("%.1e", worst));

  double fd_worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double kappa = 1e-3 + rng.uniform();
    const double tau = rng.uniform();
    double u = (rng.uniform() * 2 - 1) * 3;
    if (std::abs(u) < 1e-3) u = 1e-3;
    if (std::abs(std::abs(u) - kappa) < 1e-3) u += 2e-3;
    const double h = 1e-6;
    const double fd_p = (qr_loss(u + h, tau) - qr_loss(u - h, tau)) / (2 * h);
    const double fd_h = (huber_qr_loss(u + h, tau, kappa) - huber_qr_loss(u - h, tau, kappa)) / (2 * h);
    const double gp = qr_loss_grad(u, tau, 0), gh = qr_loss_grad(u, tau, kappa);
    fd_worst = std::max(fd_worst, std::abs(fd_p - gp) / std::max(std::abs(gp), 1e-300));
    fd_worst = std::max(fd_worst, std::abs(fd_h - gh) / std::max(std::abs(gh), 1e-300));
  }
  o.require(fd_worst <= 1e-8, "loss gradient FD max rel " + fmt("%.1e", fd_worst));
  return o;
}

Outcome gradient_exactness() {
  Outcome o;
  const fs::path dir = workdir("gradcheck");
  for (const std::string task : {"scalar-analytic", "bars8x8"}) {
    const auto r = cli_in(dir, "task = " + task + "\n", {"gradcheck"});
    const double err = read_value(r.out, "max_rel_error");
    o.require(r.code == 0 && err <= 1e-4, task + " max_rel_error " + fmt("%.2e", err));
  }
  return o;
}

Outcome autoregressivity() {
  Outcome o;
  const auto cfg = parse_config("task = bars8x8\n");
  Rng init = Rng(11).stream(0);
  const AiqnModel m = AiqnModel::build(cfg.model, init);
  const std::size_t n = m.n();
  const double h = 1e-5;
  Rng r(12);
  std::vector<double> x(n), tau(n);
  for (auto& v : x) v = r.uniform();
  for (auto& v : tau) v = 0.05 + 0.9 * r.uniform();

  auto jacobian = [&](bool wrt_tau) {
    Tensor X({2 * n, n}), T({2 * n, n});
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t s = 0; s < 2; ++s) {
        const std::size_t row = 2 * j + s;
        std::copy(x.begin(), x.end(), X.row(row).begin());
        std::copy(tau.begin(), tau.end(), T.row(row).begin());
        (wrt_tau ? T : X).at(row, j) += s == 0 ? h : -h;
      }
    }
    const Tensor out = m.forward(X, T);
    Tensor J({n, n});
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) J.at(i, j) = (out.at(2 * j, i) - out.at(2 * j + 1, i)) / (2 * h);
    return J;
  };

  const Tensor jx = jacobian(false);
  const Tensor jt = jacobian(true);
  const auto& rank = m.ranks();
  double off_x = 0.0, off_t = 0.0, min_diag_t = INFINITY;
  std::size_t allowed = 0, live = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (rank[j] < rank[i]) {
        ++allowed;
        live += std::abs(jx.at(i, j)) > 1e-9;
      } else {
        off_x = std::max(off_x, std::abs(jx.at(i, j)));
      }
      if (i == j) min_diag_t = std::min(min_diag_t, std::abs(jt.at(i, j)));
      else off_t = std::max(off_t, std::abs(jt.at(i, j)));
    }
  }
  o.require(off_x <= 1e-9, "max |dout_i/dx_j| off-pattern " + fmt("%.1e", off_x));
  o.require(off_t <= 1e-9, "max |dout_i/dtau_j| j!=i " + fmt("%.1e", off_t));
  // Guards against a vacuous pass from a dead network.
  o.require(live * 10 >= allowed * 9, std::to_string(live) + "/" + std::to_string(allowed) + " allowed entries live");
  o.require(min_diag_t > 1e-9, "min |dout_i/dtau_i| " + fmt("%.1e", min_diag_t));
  return o;
}

Outcome scalar_recovery() {
  Outcome o;
  struct Case {
    std::string dist;
    double tol;
  };
  for (const Case& c : {Case{"gaussian(3,2)", 0.15}, Case{"exponential(1)", 0.1}}) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = workdir("scalar_" + c.dist.substr(0, c.dist.find('(')));
    const std::string config = "task = scalar-analytic\ndistribution = " + c.dist + "\n";
    const AiqnModel m = cli_train(dir, config, o);
    const auto truth = parse_distribution(c.dist);
    const QuantileFn q = learned_quantile_fn(m, 0);
    double worst = 0.0;
    for (int k = 1; k <= 9; ++k) worst = std::max(worst, std::abs(q(0.1 * k) - truth.quantile(0.1 * k)));
    const double div = quantile_divergence(truth, q, 1e-7);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(worst <= c.tol, c.dist + " max quantile error " + fmt("%.4f", worst) + " (tol " + fmt("%.2f", c.tol) + ")");
    o.require(div <= 5e-3, c.dist + " divergence " + fmt("%.2e", div));
    o.require(secs <= 600, c.dist + " " + fmt("%.0f s", secs));
  }
  return o;
}

// Both Monte-Carlo criteria draw tau on the same truncated range the divergence integrates over.
constexpr double kTauSpan = kTauHi - kTauLo;

Outcome proposition() {
  Outcome o;
  const auto p = AnalyticDist::gaussian(0, 1);
  auto qa = [](double t) { return t; };
  auto qb = [](double t) { return 2 * t - 1; };
  Rng rng = Rng(5).stream(0);
  const int m = 1000000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < m; ++i) {
    const double z = rng.normal();
    const double t = kTauLo + kTauSpan * rng.uniform();
    const double d = kTauSpan * (qr_loss(z - qa(t), t) - qr_loss(z - qb(t), t));
    sum += d;
    sq += d * d;
  }
  const double mean = sum / m;
  const double se = std::sqrt((sq / m - mean * mean) / (m - 1));
  const double exact = quantile_divergence(p, QuantileFn(qa, true), 1e-10) -
                       quantile_divergence(p, QuantileFn(qb, true), 1e-10);
  const double gap = std::abs(mean - exact);
  o.require(gap <= 3 * se, "MC " + fmt("%.5f", mean) + " vs divergence " + fmt("%.5f", exact) + ", gap " +
                               fmt("%.2f SE", gap / se));
  return o;
}

Outcome unbiased_gradient() {
  Outcome o;
  const auto p = AnalyticDist::gaussian(0, 1);
  const double theta = 0.5, h = 1e-3;
  auto div_at = [&](double th) {
    return quantile_divergence(p, QuantileFn([&, th](double t) { return th + inverse_normal_cdf(t); }, true), 1e-11);
  };
  const double fd = (div_at(theta + h) - div_at(theta - h)) / (2 * h);
  Rng rng = Rng(6).stream(0);
  const int m = 1000000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < m; ++i) {
    const double z = rng.normal();
    const double t = kTauLo + kTauSpan * rng.uniform();
    // d/dtheta rho_t(z - Q_theta(t)) = -rho'_t(u) since dQ/dtheta = 1.
    const double g = -kTauSpan * qr_loss_grad(z - (theta + inverse_normal_cdf(t)), t, 0.0);
    sum += g;
    sq += g * g;
  }
  const double mean = sum / m;
  const double se = std::sqrt((sq / m - mean * mean) / (m - 1));
  const double gap = std::abs(mean - fd);
  o.require(gap <= 3 * se, "sample gradient " + fmt("%.5f", mean) + " vs FD " + fmt("%.5f", fd) + ", gap " +
                               fmt("%.2f SE", gap / se));
  return o;
}

Outcome quantile_density() {
  Outcome o;
  const fs::path dir = workdir("density");
  const AiqnModel m = cli_train(dir, "task = scalar-analytic\ndistribution = uniform(0,1)\n", o);
  std::vector<double> grid;
  for (int k = 20; k <= 80; k += 5) grid.push_back(k / 100.0);
  double lo = INFINITY, hi = 0.0, rel = 0.0;
  bool missing = false;
  for (const auto& row : quantile_density_report(m, {0.0}, grid, 0)) {
    rel = std::max(rel, std::abs(row.exact - row.finite_difference) / std::max(std::abs(row.exact), 1e-12));
    if (!row.density) missing = true;
    else {
      lo = std::min(lo, *row.density);
      hi = std::max(hi, *row.density);
    }
  }
  o.require(!missing && lo >= 0.8 && hi <= 1.25, "density on [0.2,0.8] in [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "]");

  // Exact vs finite difference on an untrained multivariate model as well.
  const auto bars = parse_config("task = bars8x8\n");
  Rng init = Rng(13).stream(0);
  const AiqnModel b = AiqnModel::build(bars.model, init);
  Rng r(14);
  std::vector<double> x(b.n()), tau(b.n());
  for (auto& v : x) v = r.uniform();
  for (std::size_t dim : {0u, 9u, 35u, 63u}) {
    for (double t : {0.02, 0.2, 0.5, 0.8, 0.98}) {
      for (auto& v : tau) v = r.uniform();
      tau[dim] = t;
      const double e = dquantile_dtau(b, x, tau, dim);
      const double f = dquantile_dtau_fd(b, x, tau, dim);
      rel = std::max(rel, std::abs(e - f) / std::max(std::abs(e), 1e-12));
    }
  }
  o.require(rel <= 1e-3, "exact vs FD max rel " + fmt("%.1e", rel));
  return o;
}

Outcome dependence() {
  Outcome o;
  struct Variant {
    std::string name, extra;
  };
  for (const Variant& v : {Variant{"autoregressive", ""}, Variant{"independent", "autoregressive = false\n"},
                           Variant{"shared-tau", "tau_mode = shared\n"}}) {
    const fs::path dir = workdir("mvg_" + v.name);
    const AiqnModel m = cli_train(dir, "task = multivariate-gaussian\ndims = 2\nrho = 0.8\ndata_count = 10000\n" + v.extra, o);
    SampleRequest req;
    req.count = 10000;
    req.seed = 1;
    const Tensor s = sample(m, req);
    std::vector<double> a(s.rows()), b(s.rows());
    for (std::size_t r = 0; r < s.rows(); ++r) {
      a[r] = s.at(r, 0);
      b[r] = s.at(r, 1);
    }
    const double pearson = pearson_correlation(a, b);
    if (v.name == "autoregressive") {
      o.require(std::abs(pearson - 0.8) <= 0.1, v.name + " pearson " + fmt("%.3f", pearson));
    } else if (v.name == "independent") {
      o.require(std::abs(pearson) <= 0.2, v.name + " pearson " + fmt("%.3f", pearson));
    } else {
      const double spearman = spearman_correlation(a, b);
      o.require(spearman >= 0.99, v.name + " spearman " + fmt("%.4f", spearman));
    }
  }
  return o;
}

Outcome inpainting() {
  Outcome o;
  const fs::path dir = workdir("bars");
  const AiqnModel m = cli_train(dir, "task = bars8x8\n", o);
  (void)m;
  // A fresh draw from the data law, not in the training set.
  Rng held = Rng(0).stream(7);
  const Tensor prefix = bars::generate(1, held);
  write_tensor_file(dir / "prefix.aiqt", prefix);
  const auto r = cli_in(dir, "task = bars8x8\n",
                        {"--seed", "3", "inpaint", "--prefix", (dir / "prefix.aiqt").string(), "--count", "200", "--no-images"});
  if (r.code != 0) {
    o.require(false, "inpaint exited " + std::to_string(r.code) + ": " + r.err);
    return o;
  }
  const Tensor out = read_tensor_file(dir / "inpaint.aiqt");
  const std::size_t top = bars::top_column(prefix.row(0));
  std::size_t hits[2] = {0, 0};
  bool verbatim = out.rows() == 200;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t p = 0; p < bars::kHalf; ++p) verbatim = verbatim && out.at(i, p) == prefix.at(0, p);
    ++hits[bars::nearest_mode(out.row(i), top)];
  }
  const double f0 = hits[0] / 200.0, f1 = hits[1] / 200.0;
  o.require(std::abs(f0 - 0.5) <= 0.15 && std::abs(f1 - 0.5) <= 0.15,
            "mode frequencies " + fmt("%.3f", f0) + " / " + fmt("%.3f", f1));
  o.require(verbatim, "prefix reproduced verbatim");
  return o;
}

double order_statistics_oracle(std::vector<double> a, std::vector<double> b) {
  // Area between the two empirical CDFs, integrated over the merged breakpoints.
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<double> pts(a);
  pts.insert(pts.end(), b.begin(), b.end());
  std::sort(pts.begin(), pts.end());
  double area = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const double x = pts[k];
    const double fa = double(std::upper_bound(a.begin(), a.end(), x) - a.begin()) / a.size();
    const double fb = double(std::upper_bound(b.begin(), b.end(), x) - b.begin()) / b.size();
    area += std::abs(fa - fb) * (pts[k + 1] - x);
  }
  return area;
}

Outcome metric_bench() {
  Outcome o;
  auto summary = [](double mean, double var) { return MomentSummary{Tensor({1}, {mean}), Tensor({1, 1}, {var}), 2}; };
  o.require(frechet_distance(summary(0, 1), summary(1, 1)) == 1.0 && frechet_distance(summary(2, 1), summary(2, 4)) == 1.0 &&
                frechet_distance(summary(0.3, 2), summary(0.3, 2)) == 0.0,
            "1-D Frechet cases");

  Rng r(20);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(200), b(200);
    for (auto& v : a) v = r.normal();
    for (auto& v : b) v = 0.5 + 2 * r.normal();
    worst = std::max(worst, std::abs(wasserstein1_empirical(a, b) - order_statistics_oracle(a, b)));
  }
  o.require(worst <= 1e-12, "W1 vs CDF-area oracle max diff " + fmt("%.1e", worst));

  for (const std::string task : {"multivariate-gaussian", "bars8x8"}) {
    const auto cfg = parse_config("task = " + task + "\n");
    Rng rng = Rng(0).stream(2);
    const Tensor data = cfg.make_dataset(rng);
    Rng br = Rng(0).stream(9);
    const Tensor boot = bootstrap_rows(data, data.rows(), br);
    EvalOptions opts;
    opts.seed = 0;
    const auto rows = compare_samples(boot, data, opts);
    std::size_t below = 0;
    for (std::size_t j = 0; j < data.cols(); ++j) {
      below += find_metric(rows, "w1_dim" + std::to_string(j))->value <
               find_metric(rows, "w1_floor_dim" + std::to_string(j))->value;
    }
    const double fd = find_metric(rows, "frechet")->value, floor = find_metric(rows, "frechet_floor")->value;
    const double w1 = find_metric(rows, "w1_mean")->value, w1_floor = find_metric(rows, "w1_floor_mean")->value;
    o.require(w1 < w1_floor, task + " bootstrap mean W1 " + fmt("%.2e", w1) + " < floor " + fmt("%.2e", w1_floor) + " (" +
                                 std::to_string(below) + "/" + std::to_string(data.cols()) + " dims below)");
    o.require(fd < floor, task + " bootstrap Frechet " + fmt("%.2e", fd) + " < floor " + fmt("%.2e", floor));
  }
  return o;
}

Outcome determinism() {
  Outcome o;
  const std::string config = "task = bars8x8\nsteps = 200\neval_interval = 100\nhidden = 64\nhead_width = 16\ndata_count = 500\n";
  std::vector<fs::path> dirs{workdir("det_a"), workdir("det_b")};
  for (const auto& d : dirs) {
    bool ok = cli_in(d, config, {"gen-data"}).code == 0 && cli_in(d, config, {"train"}).code == 0 &&
              cli_in(d, config, {"--seed", "4", "sample", "--count", "8"}).code == 0 &&
              cli_in(d, config, {"eval", "--count", "200"}).code == 0;
    o.require(ok, "pipeline in " + d.filename().string());
    if (!ok) return o;
  }
  std::vector<std::string> files{"data.aiqt", "checkpoint.aiqn", "metrics.csv", "eval.csv", "samples.aiqt"};
  for (int k = 0; k < 8; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "samples/sample_%04d.pgm", k);
    files.push_back(name);
  }
  std::size_t same = 0;
  for (const auto& f : files) same += slurp(dirs[0] / f) == slurp(dirs[1] / f);
  o.require(same == files.size(), std::to_string(same) + "/" + std::to_string(files.size()) + " artifacts byte-identical");

  const Checkpoint ck = load_checkpoint(dirs[0] / "checkpoint.aiqn");
  save_checkpoint(dirs[0] / "resaved.aiqn", ck);
  o.require(slurp(dirs[0] / "resaved.aiqn") == slurp(dirs[0] / "checkpoint.aiqn"), "checkpoint round trip bitwise");
  const Tensor t = read_tensor_file(dirs[0] / "data.aiqt");
  write_tensor_file(dirs[0] / "rewritten.aiqt", t);
  o.require(slurp(dirs[0] / "rewritten.aiqt") == slurp(dirs[0] / "data.aiqt") && read_tensor_file(dirs[0] / "rewritten.aiqt").identical(t),
            "tensor round trip bitwise");
  return o;
}

struct Criterion {
  int id;
  const char* title;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AIQN acceptance suite"};
  int only = 0;
  std::string work = (fs::temp_directory_path() / "aiqn_acceptance").string();
  app.add_option("--criterion", only, "Run one criterion (1-11)")->check(CLI::Range(1, 11));
  app.add_option("--work-dir", work, "Scratch directory for runs");
  CLI11_PARSE(app, argc, argv);
  g_work = work;

  const std::vector<Criterion> all{
      {1, "loss formulas", 1, loss_formulas},
      {2, "gradient exactness", 30, gradient_exactness},
      {3, "autoregressivity", 60, autoregressivity},
      {4, "scalar quantile recovery", 1200, scalar_recovery},
      {5, "expected-loss proposition", 60, proposition},
      {6, "unbiased gradient", 60, unbiased_gradient},
      {7, "quantile density", 300, quantile_density},
      {8, "dependence structure", 900, dependence},
      {9, "inpainting mode diversity", 3600, inpainting},
      {10, "metric bench", 60, metric_bench},
      {11, "determinism and formats", 60, determinism},
  };

  bool all_pass = true;
  for (const auto& c : all) {
    if (only && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs <= c.budget_seconds, fmt("%.1f s", secs) + " (budget " + fmt("%.0f s", c.budget_seconds) + ")");
    std::printf("criterion %2d %s  %s: %s\n", c.id, o.pass ? "PASS" : "FAIL", c.title, o.detail.c_str());
    std::fflush(stdout);
    all_pass = all_pass && o.pass;
  }
  return all_pass ? 0 : 1;
}
