#include "aiqn/checkpoint.hpp"

#include <map>
#include <sstream>

#include "aiqn/errors.hpp"
#include "aiqn/io.hpp"

namespace aiqn {
namespace {

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<std::size_t> split_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoull(item));
  }
  return out;
}

class Metadata {
 public:
  explicit Metadata(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  const std::string& get(const std::string& key) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw FormatError("checkpoint metadata lacks key '" + key + "'", 0);
    return it->second;
  }
  std::size_t size(const std::string& key) const { return std::stoull(get(key)); }
  double real(const std::string& key) const { return std::stod(get(key)); }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::map<std::string, std::string> meta;
  const TrainConfig& c = ckpt.config;
  meta["config.optimizer"] = to_string(c.optimizer);
  meta["config.learning_rate"] = format_double(c.learning_rate);
  meta["config.kappa"] = format_double(c.kappa);
  meta["config.batch_size"] = std::to_string(c.batch_size);
  meta["config.steps"] = std::to_string(c.steps);
  meta["config.polyak"] = format_double(c.polyak);
  meta["config.eval_interval"] = std::to_string(c.eval_interval);
  meta["config.seed"] = std::to_string(c.seed);
  meta["config.tau_samples"] = std::to_string(c.tau_samples);
  meta["config.lr_schedule"] = format_lr_schedule(c.lr_schedule);
  const ModelSpec& s = ckpt.spec;
  meta["model.n"] = std::to_string(s.n);
  meta["model.hidden"] = join(s.hidden);
  meta["model.head_width"] = std::to_string(s.head_width);
  meta["model.context_width"] = std::to_string(s.context_width);
  meta["model.ordering"] = join(s.resolved_ordering());
  meta["model.tau_mode"] = to_string(s.tau_mode);
  meta["model.autoregressive"] = s.autoregressive ? "true" : "false";
  meta["optimizer.step"] = std::to_string(ckpt.optimizer.step);
  meta["step"] = std::to_string(ckpt.step);
  meta["seed"] = std::to_string(c.seed);
  for (const auto& [k, v] : ckpt.extra) meta["extra." + k] = v;

  std::string text;
  for (const auto& [k, v] : meta) {
    if (k.find('\n') != std::string::npos || v.find('\n') != std::string::npos || k.find('=') != std::string::npos) {
      throw DomainError("checkpoint metadata may not contain newlines or '=' in keys");
    }
    text += k + "=" + v + "\n";
  }

  const AiqnModel model = ckpt.raw_model();
  const auto& names = model.param_names();
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  std::vector<Tensor> degree_tensors;
  degree_tensors.reserve(ckpt.masks.degrees.size());
  for (std::size_t k = 0; k < ckpt.masks.degrees.size(); ++k) {
    const auto& d = ckpt.masks.degrees[k];
    degree_tensors.push_back(Tensor::vector(std::vector<double>(d.begin(), d.end())));
  }
  for (std::size_t k = 0; k < ckpt.masks.degrees.size(); ++k) {
    tensors.emplace_back("mask.degrees." + std::to_string(k), &degree_tensors[k]);
    tensors.emplace_back("mask.trunk." + std::to_string(k), &ckpt.masks.trunk[k]);
  }
  for (std::size_t i = 0; i < names.size(); ++i) tensors.emplace_back("param." + names[i], &ckpt.params[i]);
  for (std::size_t i = 0; i < names.size(); ++i) tensors.emplace_back("polyak." + names[i], &ckpt.polyak[i]);
  if (!ckpt.optimizer.first.empty()) {
    for (std::size_t i = 0; i < names.size(); ++i)
      tensors.emplace_back("opt.first." + names[i], &ckpt.optimizer.first[i]);
    for (std::size_t i = 0; i < names.size(); ++i)
      tensors.emplace_back("opt.second." + names[i], &ckpt.optimizer.second[i]);
  }

  ByteWriter w;
  w.text("AIQN");
  w.u32(kCheckpointVersion);
  w.u64(text.size());
  w.text(text);
  w.u64(tensors.size());
  for (const auto& [name, t] : tensors) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.text(name);
    write_tensor_body(w, *t);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("AIQN");
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), version_at);
  }
  const std::size_t meta_at = r.offset();
  const std::uint64_t meta_len = r.u64();
  if (meta_len > r.remaining()) throw FormatError("metadata longer than file", meta_at);
  const std::string text = r.text(meta_len);
  std::map<std::string, std::string> kv;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("malformed metadata line '" + line + "'", meta_at);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }

  std::map<std::string, Tensor> tensors;
  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t name_at = r.offset();
    const std::uint32_t len = r.u32();
    if (len > r.remaining()) throw FormatError("tensor name longer than file", name_at);
    std::string name = r.text(len);
    tensors.emplace(std::move(name), read_tensor_body(r));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint", r.offset());

  Checkpoint ck;
  try {
    const Metadata m(kv);
    ck.config.optimizer = parse_optimizer(m.get("config.optimizer"));
    ck.config.learning_rate = m.real("config.learning_rate");
    ck.config.kappa = m.real("config.kappa");
    ck.config.batch_size = m.size("config.batch_size");
    ck.config.steps = m.size("config.steps");
    ck.config.polyak = m.real("config.polyak");
    ck.config.eval_interval = m.size("config.eval_interval");
    ck.config.seed = m.size("config.seed");
    ck.config.tau_samples = m.size("config.tau_samples");
    ck.config.lr_schedule = parse_lr_schedule(m.get("config.lr_schedule"));
    ck.spec.n = m.size("model.n");
    ck.spec.hidden = split_sizes(m.get("model.hidden"));
    ck.spec.head_width = m.size("model.head_width");
    ck.spec.context_width = m.size("model.context_width");
    ck.spec.ordering = split_sizes(m.get("model.ordering"));
    ck.spec.tau_mode = parse_tau_mode(m.get("model.tau_mode"));
    ck.spec.autoregressive = m.get("model.autoregressive") == "true";
    ck.optimizer.step = m.size("optimizer.step");
    ck.step = m.size("step");
    for (const auto& [k, v] : kv) {
      if (k.rfind("extra.", 0) == 0) ck.extra[k.substr(6)] = v;
    }
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(std::string("bad checkpoint metadata: ") + e.what(), meta_at);
  }

  auto take = [&](const std::string& name) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("checkpoint lacks tensor '" + name + "'", bytes.size());
    return it->second;
  };
  for (std::size_t k = 0; k < ck.spec.hidden.size(); ++k) {
    const Tensor d = take("mask.degrees." + std::to_string(k));
    std::vector<std::size_t> deg;
    for (double v : d.values()) deg.push_back(static_cast<std::size_t>(v));
    ck.masks.degrees.push_back(std::move(deg));
    ck.masks.trunk.push_back(take("mask.trunk." + std::to_string(k)));
  }
  std::vector<std::string> names;
  try {
    names = AiqnModel::parameter_names(ck.spec);
  } catch (const DomainError& e) {
    throw FormatError(std::string("bad model description: ") + e.what(), meta_at);
  }
  for (const auto& name : names) {
    ck.params.push_back(take("param." + name));
    ck.polyak.push_back(take("polyak." + name));
  }
  if (tensors.count("opt.first." + names.front())) {
    for (const auto& name : names) {
      ck.optimizer.first.push_back(take("opt.first." + name));
      ck.optimizer.second.push_back(take("opt.second." + name));
    }
  }
  try {
    (void)ck.raw_model();
    (void)ck.eval_model();
  } catch (const DomainError& e) {
    throw FormatError(std::string("inconsistent checkpoint: ") + e.what(), bytes.size());
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_bytes(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path));
}

}  // namespace aiqn
