#include "aiqn/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "aiqn/datasets.hpp"
#include "aiqn/errors.hpp"
#include "aiqn/io.hpp"

namespace aiqn {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("config: '" + key + "' expects a real number, got '" + v + "'");
  }
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("config: '" + key + "' expects true or false, got '" + v + "'");
}

std::vector<std::size_t> to_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_size(key, trim(item)));
  return out;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

// Recursive-descent reader for the distribution grammar.
class DistParser {
 public:
  explicit DistParser(const std::string& text) : s_(text) {}

  AnalyticDist parse() {
    AnalyticDist d = dist();
    skip();
    if (pos_ != s_.size()) fail("trailing text");
    return d;
  }

 private:
  AnalyticDist dist() {
    const std::string name = word();
    expect('(');
    if (name == "mixture") {
      std::vector<double> w;
      std::vector<AnalyticDist> parts;
      do {
        w.push_back(number());
        expect('*');
        parts.push_back(dist());
      } while (accept(','));
      expect(')');
      return AnalyticDist::mixture(std::move(w), std::move(parts));
    }
    std::vector<double> args{number()};
    while (accept(',')) args.push_back(number());
    expect(')');
    if (name == "gaussian" && args.size() == 2) return AnalyticDist::gaussian(args[0], args[1]);
    if (name == "uniform" && args.size() == 2) return AnalyticDist::uniform(args[0], args[1]);
    if (name == "exponential" && args.size() == 1) return AnalyticDist::exponential(args[0]);
    fail("unknown distribution or wrong argument count for '" + name + "'");
  }

  void skip() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }
  std::string word() {
    skip();
    const std::size_t b = pos_;
    while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (b == pos_) fail("expected a distribution name");
    return s_.substr(b, pos_ - b);
  }
  double number() {
    skip();
    double v = 0.0;
    const auto res = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (res.ec != std::errc()) fail("expected a number");
    pos_ = static_cast<std::size_t>(res.ptr - s_.data());
    return v;
  }
  [[noreturn]] void fail(const std::string& why) const {
    throw ConfigError("distribution '" + s_ + "': " + why + " at column " + std::to_string(pos_));
  }

  std::string s_;
  std::size_t pos_ = 0;
};

}  // namespace

AnalyticDist parse_distribution(const std::string& text) {
  try {
    return DistParser(text).parse();
  } catch (const DomainError& e) {
    throw ConfigError("distribution '" + text + "': " + e.what());
  }
}

std::string to_string(Task task) {
  switch (task) {
    case Task::kScalarAnalytic: return "scalar-analytic";
    case Task::kMultivariateGaussian: return "multivariate-gaussian";
    case Task::kBars8x8: return "bars8x8";
    case Task::kExternalIdx: return "external-idx";
  }
  return "?";
}

Task parse_task(const std::string& s) {
  for (Task t : {Task::kScalarAnalytic, Task::kMultivariateGaussian, Task::kBars8x8, Task::kExternalIdx}) {
    if (s == to_string(t)) return t;
  }
  throw ConfigError("config: unknown task '" + s +
                    "' (expected scalar-analytic, multivariate-gaussian, bars8x8 or external-idx)");
}

std::size_t ExperimentConfig::data_dim() const {
  switch (task) {
    case Task::kScalarAnalytic: return 1;
    case Task::kMultivariateGaussian: return dims;
    case Task::kBars8x8: return bars::kPixels;
    case Task::kExternalIdx: return image_rows * image_cols;
  }
  return 0;
}

std::filesystem::path ExperimentConfig::resolved_data_path() const {
  return data_path.empty() ? std::filesystem::path(out_dir) / "data.aiqt" : std::filesystem::path(data_path);
}

std::optional<AnalyticDist> ExperimentConfig::truth(std::size_t dim) const {
  if (task == Task::kScalarAnalytic && dim == 0) return parse_distribution(distribution);
  if (task == Task::kMultivariateGaussian && dim < dims) return AnalyticDist::gaussian(0.0, 1.0);
  return std::nullopt;
}

Tensor ExperimentConfig::make_dataset(Rng& rng) const {
  switch (task) {
    case Task::kScalarAnalytic: return sample_analytic(parse_distribution(distribution), data_count, rng);
    case Task::kMultivariateGaussian: return sample_equicorrelated_gaussian(dims, rho, data_count, rng);
    case Task::kBars8x8: return bars::generate(data_count, rng);
    case Task::kExternalIdx: {
      Tensor t = read_idx(idx_path);
      if (t.cols() != data_dim()) {
        throw ConfigError("config: " + idx_path + " holds " + std::to_string(t.cols()) +
                          " values per example but image_rows*image_cols = " + std::to_string(data_dim()));
      }
      return t;
    }
  }
  return {};
}

ExperimentConfig parse_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (!kv.emplace(key, trim(line.substr(eq + 1))).second) {
      throw ConfigError("config line " + std::to_string(line_no) + ": key '" + key + "' repeated");
    }
  }

  ExperimentConfig c;
  if (auto it = kv.find("task"); it != kv.end()) c.task = parse_task(it->second);
  switch (c.task) {
    case Task::kScalarAnalytic: c.data_count = 100000; break;
    case Task::kMultivariateGaussian: c.data_count = 10000; break;
    case Task::kBars8x8:
      c.data_count = 5000;
      c.image_rows = c.image_cols = bars::kSide;
      c.train.steps = 50000;
      break;
    case Task::kExternalIdx: c.data_count = 0; break;
  }

  bool hidden_set = false, head_set = false, polyak_set = false;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"task", [](const std::string&, const std::string&) {}},
      {"distribution", [&](auto&, auto& v) { parse_distribution(v); c.distribution = v; }},
      {"data_count", [&](auto& k, auto& v) { c.data_count = to_size(k, v); }},
      {"dims", [&](auto& k, auto& v) { c.dims = to_size(k, v); }},
      {"rho", [&](auto& k, auto& v) { c.rho = to_real(k, v); }},
      {"idx_path", [&](auto&, auto& v) { c.idx_path = v; }},
      {"image_rows", [&](auto& k, auto& v) { c.image_rows = to_size(k, v); }},
      {"image_cols", [&](auto& k, auto& v) { c.image_cols = to_size(k, v); }},
      {"data_path", [&](auto&, auto& v) { c.data_path = v; }},
      {"context_path", [&](auto&, auto& v) { c.context_path = v; }},
      {"hidden", [&](auto& k, auto& v) { c.model.hidden = to_sizes(k, v); hidden_set = true; }},
      {"head_width", [&](auto& k, auto& v) { c.model.head_width = to_size(k, v); head_set = true; }},
      {"context_width", [&](auto& k, auto& v) { c.model.context_width = to_size(k, v); }},
      {"ordering", [&](auto& k, auto& v) { c.model.ordering = to_sizes(k, v); }},
      {"tau_mode", [&](auto&, auto& v) { c.model.tau_mode = parse_tau_mode(v); }},
      {"autoregressive", [&](auto& k, auto& v) { c.model.autoregressive = to_bool(k, v); }},
      {"optimizer", [&](auto&, auto& v) { c.train.optimizer = parse_optimizer(v); }},
      {"learning_rate", [&](auto& k, auto& v) { c.train.learning_rate = to_real(k, v); }},
      {"lr_schedule", [&](auto&, auto& v) { c.train.lr_schedule = parse_lr_schedule(v); }},
      {"kappa", [&](auto& k, auto& v) { c.train.kappa = to_real(k, v); }},
      {"batch_size", [&](auto& k, auto& v) { c.train.batch_size = to_size(k, v); }},
      {"steps", [&](auto& k, auto& v) { c.train.steps = to_size(k, v); }},
      {"polyak", [&](auto& k, auto& v) { c.train.polyak = to_real(k, v); polyak_set = true; }},
      {"eval_interval", [&](auto& k, auto& v) { c.train.eval_interval = to_size(k, v); }},
      {"seed", [&](auto& k, auto& v) { c.train.seed = to_size(k, v); }},
      {"tau_samples", [&](auto& k, auto& v) { c.train.tau_samples = to_size(k, v); }},
      {"eval_samples", [&](auto& k, auto& v) { c.eval_samples = to_size(k, v); }},
      {"out_dir", [&](auto&, auto& v) { c.out_dir = v; }},
  };
  for (const auto& [key, value] : kv) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("config: unknown key '" + key + "'");
    try {
      it->second(key, value);
    } catch (const DomainError& e) {
      throw ConfigError("config: '" + key + "': " + e.what());
    }
  }

  if (c.task == Task::kBars8x8 && (c.image_rows != bars::kSide || c.image_cols != bars::kSide)) {
    throw ConfigError("config: bars8x8 images are 8x8");
  }
  if (c.task == Task::kExternalIdx && (c.idx_path.empty() || c.image_rows == 0 || c.image_cols == 0)) {
    throw ConfigError("config: external-idx needs idx_path, image_rows and image_cols");
  }
  if (c.task == Task::kMultivariateGaussian && (c.dims < 1 || !(c.rho >= 0.0 && c.rho < 1.0))) {
    throw ConfigError("config: multivariate-gaussian needs dims >= 1 and rho in [0,1)");
  }
  if (c.task != Task::kExternalIdx && c.data_count < 1) throw ConfigError("config: data_count must be >= 1");

  c.model.n = c.data_dim();
  const ModelSpec defaults = ModelSpec::defaults_for(c.model.n);
  if (!hidden_set) c.model.hidden = defaults.hidden;
  if (!head_set) c.model.head_width = defaults.head_width;
  if (!polyak_set) c.train.polyak = c.train.steps < 50000 ? kShortRunPolyak : kDefaultPolyak;
  try {
    c.model.validate();
    c.train.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  const auto bytes = read_file_bytes(path);
  return parse_config(std::string(bytes.begin(), bytes.end()));
}

std::string format_config(const ExperimentConfig& c) {
  std::string s;
  auto put = [&](const std::string& k, const std::string& v) { s += k + " = " + v + "\n"; };
  put("task", to_string(c.task));
  put("distribution", c.distribution);
  put("data_count", std::to_string(c.data_count));
  put("dims", std::to_string(c.dims));
  put("rho", format_double(c.rho));
  put("idx_path", c.idx_path);
  put("image_rows", std::to_string(c.image_rows));
  put("image_cols", std::to_string(c.image_cols));
  put("data_path", c.data_path);
  put("context_path", c.context_path);
  put("hidden", join(c.model.hidden));
  put("head_width", std::to_string(c.model.head_width));
  put("context_width", std::to_string(c.model.context_width));
  put("ordering", join(c.model.ordering));
  put("tau_mode", to_string(c.model.tau_mode));
  put("autoregressive", c.model.autoregressive ? "true" : "false");
  put("optimizer", to_string(c.train.optimizer));
  put("learning_rate", format_double(c.train.learning_rate));
  put("lr_schedule", format_lr_schedule(c.train.lr_schedule));
  put("kappa", format_double(c.train.kappa));
  put("batch_size", std::to_string(c.train.batch_size));
  put("steps", std::to_string(c.train.steps));
  put("polyak", format_double(c.train.polyak));
  put("eval_interval", std::to_string(c.train.eval_interval));
  put("seed", std::to_string(c.train.seed));
  put("tau_samples", std::to_string(c.train.tau_samples));
  put("eval_samples", std::to_string(c.eval_samples));
  put("out_dir", c.out_dir);
  return s;
}

bool equivalent(const ExperimentConfig& a, const ExperimentConfig& b) { return format_config(a) == format_config(b); }

}  // namespace aiqn
