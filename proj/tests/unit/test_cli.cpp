#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "aiqn/checkpoint.hpp"
#include "aiqn/cli.hpp"
#include "aiqn/io.hpp"

using namespace aiqn;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("aiqn_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_config(const fs::path& path, const std::string& text) { write_text_file(path, text); }

std::string slurp(const fs::path& p) {
  const auto b = read_file_bytes(p);
  return std::string(b.begin(), b.end());
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(run_cli({}).code == cli::kExitUsage);
  CHECK(run_cli({"fly"}).code == cli::kExitUsage);
  CHECK(run_cli({"train", "--bogus"}).code == cli::kExitUsage);
  CHECK(run_cli({"--help"}).code == cli::kExitOk);
  const auto dir = scratch("usage");
  write_config(dir / "bad.cfg", "mystery = 1\n");
  const auto r = run_cli({"--config", (dir / "bad.cfg").string(), "gen-data"});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("mystery") != std::string::npos);
  CHECK(run_cli({"--config", (dir / "absent.cfg").string(), "gen-data"}).code == cli::kExitUsage);
}

TEST_CASE("dry run prints a config that parses back") {
  const auto dir = scratch("dry");
  const auto r = run_cli({"--seed", "12", "--out", dir.string(), "--dry-run", "train"});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out.find("seed = 12") != std::string::npos);
  write_config(dir / "echo.cfg", r.out);
  const auto again = run_cli({"--config", (dir / "echo.cfg").string(), "--dry-run", "train"});
  CHECK(again.out == r.out);
  CHECK_FALSE(fs::exists(dir / "data.aiqt"));
}

TEST_CASE("train reports a missing dataset") {
  const auto dir = scratch("missing");
  const auto r = run_cli({"--out", dir.string(), "train"});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find((dir / "data.aiqt").string()) != std::string::npos);
}

TEST_CASE("gen-data writes deterministic datasets") {
  const auto dir = scratch("gen");
  CHECK(run_cli({"--out", (dir / "a").string(), "--seed", "3", "gen-data"}).code == 0);
  CHECK(run_cli({"--out", (dir / "b").string(), "--seed", "3", "gen-data"}).code == 0);
  CHECK(slurp(dir / "a" / "data.aiqt") == slurp(dir / "b" / "data.aiqt"));
  CHECK(slurp(dir / "a" / "data.aiqt.meta").find("seed = 3") != std::string::npos);
  const Tensor t = read_tensor_file(dir / "a" / "data.aiqt");
  CHECK(t.shape() == std::vector<std::size_t>{100000, 1});
  double s = 0;
  for (double v : t.values()) s += v;
  CHECK(std::abs(s / t.size() - 3.0) < 0.02);

  write_config(dir / "bars.cfg", "task = bars8x8\n");
  CHECK(run_cli({"--config", (dir / "bars.cfg").string(), "--out", (dir / "c").string(), "gen-data"}).code == 0);
  CHECK(read_tensor_file(dir / "c" / "data.aiqt").shape() == std::vector<std::size_t>{5000, 64});
  CHECK(run_cli({"--out", "/proc/forbidden/dir", "gen-data"}).code == cli::kExitIo);
}

TEST_CASE("gradcheck exit codes") {
  CHECK(run_cli({"gradcheck"}).code == cli::kExitOk);
  const auto r = run_cli({"gradcheck", "--inject-fault"});
  CHECK(r.code == cli::kExitCheckFailed);
  CHECK(r.out.find("out.b") != std::string::npos);
}

TEST_CASE("bars pipeline: train, sample, inpaint, eval") {
  const auto dir = scratch("bars");
  write_config(dir / "b.cfg", "task = bars8x8\nsteps = 3\neval_interval = 3\nhidden = 32\nhead_width = 8\ndata_count = 200\n");
  const std::string cfg = (dir / "b.cfg").string();
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> a{"--config", cfg, "--out", dir.string()};
    a.insert(a.end(), extra.begin(), extra.end());
    return run_cli(a);
  };
  REQUIRE(with({"gen-data"}).code == 0);
  const auto tr = with({"train"});
  REQUIRE(tr.code == 0);
  CHECK(tr.out.find("train_loss") != std::string::npos);
  CHECK(slurp(dir / "metrics.csv").rfind("step,loss,metric_name,metric_value", 0) == 0);
  const std::string first_ckpt = slurp(dir / "checkpoint.aiqn");
  REQUIRE(with({"train"}).code == 0);
  CHECK(slurp(dir / "checkpoint.aiqn") == first_ckpt);

  REQUIRE(with({"--seed", "5", "sample", "--count", "16"}).code == 0);
  CHECK(read_tensor_file(dir / "samples.aiqt").shape() == std::vector<std::size_t>{16, 64});
  std::size_t pgms = 0;
  for (const auto& e : fs::directory_iterator(dir / "samples")) pgms += e.path().extension() == ".pgm";
  CHECK(pgms == 16);
  const std::string pgm = slurp(dir / "samples" / "sample_0007.pgm");
  CHECK(pgm.rfind("P5\n8 8\n255\n", 0) == 0);
  REQUIRE(with({"--seed", "5", "sample", "--count", "16"}).code == 0);
  CHECK(slurp(dir / "samples" / "sample_0007.pgm") == pgm);

  const std::string data = (dir / "data.aiqt").string();
  REQUIRE(with({"inpaint", "--prefix", data, "--row", "4", "--count", "5"}).code == 0);
  const Tensor src = read_tensor_file(dir / "data.aiqt");
  const Tensor out = read_tensor_file(dir / "inpaint.aiqt");
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t p = 0; p < 32; ++p) CHECK(out.at(r, p) == src.at(4, p));
  const auto bad = with({"inpaint", "--prefix", data, "--known", "0-15,40"});
  CHECK(bad.code == cli::kExitUsage);
  CHECK(bad.err.find("raster") != std::string::npos);

  const auto ev = with({"eval", "--count", "100"});
  REQUIRE(ev.code == 0);
  CHECK(ev.out.rfind("metric,value,samples,seed", 0) == 0);
  CHECK(with({"eval", "--count", "100"}).out == ev.out);

  write_tensor_file(dir / "narrow.aiqt", Tensor({200, 3}));
  CHECK(with({"eval", "--data", (dir / "narrow.aiqt").string()}).code == cli::kExitUsage);

  auto bytes = read_file_bytes(dir / "checkpoint.aiqn");
  bytes.resize(bytes.size() / 2);
  write_file_bytes(dir / "broken.aiqn", bytes);
  CHECK(with({"sample", "--checkpoint", (dir / "broken.aiqn").string()}).code == cli::kExitIo);
}
