#include "smooth/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "smooth/csv.hpp"
#include "smooth/error.hpp"

namespace smooth {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

KvConfig KvConfig::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  KvConfig kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config: line " + std::to_string(line_no) + " in " + path +
                       " is not key=value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw ParseError("config: empty key at line " + std::to_string(line_no) + " in " + path);
    kv.set(key, trim(line.substr(eq + 1)));
  }
  return kv;
}

KvConfig KvConfig::parse_overrides(const std::vector<std::string>& items) {
  KvConfig kv;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override '" + item + "' is not key=value");
    kv.set(trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
  }
  return kv;
}

void KvConfig::set(const std::string& key, const std::string& value) { values_[key] = value; }

bool KvConfig::has(const std::string& key) const {
  consumed_[key] = true;
  return values_.count(key) > 0;
}

void KvConfig::merge(const KvConfig& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::string KvConfig::get_string(const std::string& key, const std::string& def) const {
  consumed_[key] = true;
  const auto it = values_.find(key);
  return it == values_.end() ? def : it->second;
}

double KvConfig::get_double(const std::string& key, double def) const {
  consumed_[key] = true;
  const auto it = values_.find(key);
  if (it == values_.end()) return def;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + it->second + "'");
  }
}

std::int64_t KvConfig::get_int(const std::string& key, std::int64_t def) const {
  consumed_[key] = true;
  const auto it = values_.find(key);
  if (it == values_.end()) return def;
  try {
    return std::stoll(it->second);
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + it->second + "'");
  }
}

std::uint64_t KvConfig::get_u64(const std::string& key, std::uint64_t def) const {
  consumed_[key] = true;
  const auto it = values_.find(key);
  if (it == values_.end()) return def;
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an unsigned integer, got '" +
                      it->second + "'");
  }
}

bool KvConfig::get_bool(const std::string& key, bool def) const {
  consumed_[key] = true;
  const auto it = values_.find(key);
  if (it == values_.end()) return def;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError("config: key '" + key + "' expects true/false, got '" + it->second + "'");
}

std::vector<double> KvConfig::get_double_list(const std::string& key,
                                              const std::vector<double>& def) const {
  consumed_[key] = true;
  const auto it = values_.find(key);
  if (it == values_.end()) return def;
  std::vector<double> out;
  for (const auto& item : split_list(it->second)) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "' has non-numeric item '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("config: key '" + key + "' is an empty list");
  return out;
}

std::vector<std::uint64_t> KvConfig::get_u64_list(
    const std::string& key, const std::vector<std::uint64_t>& def) const {
  consumed_[key] = true;
  const auto it = values_.find(key);
  if (it == values_.end()) return def;
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(it->second)) {
    try {
      out.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "' has non-integer item '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("config: key '" + key + "' is an empty list");
  return out;
}

std::vector<std::string> KvConfig::get_string_list(
    const std::string& key, const std::vector<std::string>& def) const {
  consumed_[key] = true;
  const auto it = values_.find(key);
  if (it == values_.end()) return def;
  const auto out = split_list(it->second);
  if (out.empty()) throw ConfigError("config: key '" + key + "' is an empty list");
  return out;
}

std::vector<std::string> KvConfig::unconsumed_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (!consumed_.count(k)) out.push_back(k);
  }
  return out;
}

ExperimentConfig ExperimentConfig::from_kv(const KvConfig& kv) {
  ExperimentConfig c;
  c.master_seed = kv.get_u64("seed", c.master_seed);

  c.dataset.source = data_source_from_name(
      kv.get_string("dataset.source", data_source_name(c.dataset.source)));
  c.dataset.n = kv.get_u64("dataset.n", c.dataset.n);
  c.dataset.classes = kv.get_u64("dataset.classes", c.dataset.classes);
  c.dataset.dim = kv.get_u64("dataset.dim", c.dataset.dim);
  c.dataset.separation = kv.get_double("dataset.separation", c.dataset.separation);
  c.dataset.noise = kv.get_double("dataset.noise", c.dataset.noise);
  c.dataset.csv_path = kv.get_string("dataset.csv_path", c.dataset.csv_path);
  c.dataset.label_col = static_cast<int>(kv.get_int("dataset.label_col", c.dataset.label_col));
  c.dataset.idx_images = kv.get_string("dataset.idx_images", c.dataset.idx_images);
  c.dataset.idx_labels = kv.get_string("dataset.idx_labels", c.dataset.idx_labels);
  c.dataset.seed = kv.get_u64("dataset.seed", c.master_seed);
  c.dataset.test_fraction = kv.get_double("dataset.test_fraction", c.dataset.test_fraction);

  c.model_arch = kv.get_string("model.arch", c.model_arch);
  c.model_init_seed = kv.get_u64("model.init_seed", c.model_init_seed);
  c.model_checkpoint = kv.get_string("model.checkpoint", c.model_checkpoint);
  c.model_noise_target = kv.get_string("model.noise.target", c.model_noise_target);
  c.model_noise_alpha = kv.get_double("model.noise.alpha", c.model_noise_alpha);
  c.model_noise_base_sigma = kv.get_double("model.noise.base_sigma", c.model_noise_base_sigma);
  c.model_noise_learnable = kv.get_bool("model.noise.learnable", c.model_noise_learnable);

  c.train.mode = train_mode_from_name(kv.get_string("train.mode", train_mode_name(c.train.mode)));
  c.train.adv_weight = kv.get_double("train.w", c.train.adv_weight);
  c.train.bernoulli_q = kv.get_double("train.q", c.train.bernoulli_q);
  c.train.sigma_train = kv.get_double("train.sigma", c.train.sigma_train);
  c.train.trades_inv_lambda = kv.get_double("train.inv_lambda", c.train.trades_inv_lambda);
  c.train.epochs = kv.get_u64("train.epochs", c.train.epochs);
  c.train.batch_size = kv.get_u64("train.batch_size", c.train.batch_size);
  c.train.lr = kv.get_double("train.lr", c.train.lr);
  c.train.momentum = kv.get_double("train.momentum", c.train.momentum);
  c.train.weight_decay = kv.get_double("train.weight_decay", c.train.weight_decay);
  c.train.val_fraction = kv.get_double("train.val_fraction", c.train.val_fraction);
  c.train.selection =
      selection_from_name(kv.get_string("train.selection", selection_name(c.train.selection)));
  c.train.seed = kv.get_u64("train.seed", c.master_seed);
  c.train.attack = parse_attack_spec(
      kv.get_string("train.attack", "family:pgd,eps:0.1,k:5"));

  const std::string eval_attack = kv.get_string("attack.spec", "");
  if (!eval_attack.empty() && eval_attack != "none") {
    c.attack = parse_attack_spec(eval_attack);
    c.has_attack = c.attack.family != AttackFamily::None;
  }

  c.smoothing.samples = kv.get_u64("smooth.m", c.smoothing.samples);
  c.smoothing.sigma = kv.get_double("smooth.sigma", c.smoothing.sigma);
  c.smoothing.voting =
      voting_from_name(kv.get_string("smooth.voting", voting_name(c.smoothing.voting)));
  c.smoothing.top_c = kv.get_double("smooth.c", c.smoothing.top_c);
  c.smoothing.base_seed = kv.get_u64("smooth.base_seed", c.master_seed);

  c.sweep_sigmas = kv.get_double_list("sweep.sigmas", c.sweep_sigmas);
  c.sweep_ms = kv.get_u64_list("sweep.ms", c.sweep_ms);
  c.sweep_eps = kv.get_double_list("sweep.eps", c.sweep_eps);
  c.sweep_ks = kv.get_u64_list("sweep.ks", c.sweep_ks);
  c.sweep_mbs = kv.get_u64_list("sweep.mbs", c.sweep_mbs);
  c.sweep_families = kv.get_string_list("sweep.families", c.sweep_families);

  c.eval_seeds = kv.get_u64("eval.seeds", c.eval_seeds);
  c.eval_seed = kv.get_u64("eval.seed", c.master_seed);
  c.out_dir = kv.get_string("out.dir", c.out_dir);
  c.threads = kv.get_u64("threads", c.threads);

  c.svm_dim = kv.get_u64("svm.dim", c.svm_dim);
  c.svm_n = kv.get_u64("svm.n", c.svm_n);
  c.svm_sigma = kv.get_double("svm.sigma", c.svm_sigma);
  c.svm_trials = kv.get_u64("svm.trials", c.svm_trials);
  c.svm_reps = kv.get_u64("svm.reps", c.svm_reps);
  c.svm_epsilon = kv.get_double("svm.epsilon", c.svm_epsilon);

  const auto unknown = kv.unconsumed_keys();
  if (!unknown.empty()) {
    throw ConfigError("config: unknown key '" + unknown.front() + "'");
  }
  if (c.eval_seeds == 0) throw ConfigError("config: eval.seeds must be >= 1");
  return c;
}

std::string ExperimentConfig::dump() const {
  std::map<std::string, std::string> kv;
  kv["seed"] = std::to_string(master_seed);
  kv["dataset.source"] = data_source_name(dataset.source);
  kv["dataset.n"] = std::to_string(dataset.n);
  kv["dataset.classes"] = std::to_string(dataset.classes);
  kv["dataset.dim"] = std::to_string(dataset.dim);
  kv["dataset.separation"] = format_double(dataset.separation);
  kv["dataset.noise"] = format_double(dataset.noise);
  kv["dataset.csv_path"] = dataset.csv_path;
  kv["dataset.label_col"] = std::to_string(dataset.label_col);
  kv["dataset.idx_images"] = dataset.idx_images;
  kv["dataset.idx_labels"] = dataset.idx_labels;
  kv["dataset.seed"] = std::to_string(dataset.seed);
  kv["dataset.test_fraction"] = format_double(dataset.test_fraction);
  kv["model.arch"] = model_arch;
  kv["model.init_seed"] = std::to_string(model_init_seed);
  kv["model.checkpoint"] = model_checkpoint;
  kv["model.noise.target"] = model_noise_target;
  kv["model.noise.alpha"] = format_double(model_noise_alpha);
  kv["model.noise.base_sigma"] = format_double(model_noise_base_sigma);
  kv["model.noise.learnable"] = model_noise_learnable ? "true" : "false";
  kv["train.mode"] = train_mode_name(train.mode);
  kv["train.w"] = format_double(train.adv_weight);
  kv["train.q"] = format_double(train.bernoulli_q);
  kv["train.sigma"] = format_double(train.sigma_train);
  kv["train.inv_lambda"] = format_double(train.trades_inv_lambda);
  kv["train.epochs"] = std::to_string(train.epochs);
  kv["train.batch_size"] = std::to_string(train.batch_size);
  kv["train.lr"] = format_double(train.lr);
  kv["train.momentum"] = format_double(train.momentum);
  kv["train.weight_decay"] = format_double(train.weight_decay);
  kv["train.val_fraction"] = format_double(train.val_fraction);
  kv["train.selection"] = selection_name(train.selection);
  kv["train.seed"] = std::to_string(train.seed);
  kv["train.attack"] = format_attack_spec(train.attack);
  kv["attack.spec"] = has_attack ? format_attack_spec(attack) : "none";
  kv["smooth.m"] = std::to_string(smoothing.samples);
  kv["smooth.sigma"] = format_double(smoothing.sigma);
  kv["smooth.voting"] = voting_name(smoothing.voting);
  kv["smooth.c"] = format_double(smoothing.top_c);
  kv["smooth.base_seed"] = std::to_string(smoothing.base_seed);
  auto join_d = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += format_double(v[i]);
    }
    return s;
  };
  auto join_u = [](const std::vector<std::uint64_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(v[i]);
    }
    return s;
  };
  auto join_s = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += v[i];
    }
    return s;
  };
  kv["sweep.sigmas"] = join_d(sweep_sigmas);
  kv["sweep.ms"] = join_u(sweep_ms);
  kv["sweep.eps"] = join_d(sweep_eps);
  kv["sweep.ks"] = join_u(sweep_ks);
  kv["sweep.mbs"] = join_u(sweep_mbs);
  kv["sweep.families"] = join_s(sweep_families);
  kv["eval.seeds"] = std::to_string(eval_seeds);
  kv["eval.seed"] = std::to_string(eval_seed);
  kv["out.dir"] = out_dir;
  kv["threads"] = std::to_string(threads);
  kv["svm.dim"] = std::to_string(svm_dim);
  kv["svm.n"] = std::to_string(svm_n);
  kv["svm.sigma"] = format_double(svm_sigma);
  kv["svm.trials"] = std::to_string(svm_trials);
  kv["svm.reps"] = std::to_string(svm_reps);
  kv["svm.epsilon"] = format_double(svm_epsilon);

  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

Model build_model(const std::string& arch, const std::vector<std::size_t>& input_shape,
                  std::size_t classes, std::uint64_t init_seed) {
  Model m;
  m.input_shape = input_shape;
  const std::size_t flat_in = shape_numel(input_shape);

  auto parse_dims = [&](const std::string& spec) {
    std::vector<std::size_t> dims;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, '-')) {
      try {
        dims.push_back(std::stoul(item));
      } catch (const std::exception&) {
        throw ConfigError("model: bad architecture dim '" + item + "' in '" + arch + "'");
      }
    }
    if (dims.empty()) throw ConfigError("model: empty architecture spec '" + arch + "'");
    return dims;
  };

  if (arch == "linear") {
    if (input_shape.size() > 1) m.layers.push_back(LayerSpec::flatten());
    m.layers.push_back(LayerSpec::dense(flat_in, classes));
  } else if (arch.rfind("mlp:", 0) == 0) {
    const auto hidden = parse_dims(arch.substr(4));
    if (input_shape.size() > 1) m.layers.push_back(LayerSpec::flatten());
    std::size_t prev = flat_in;
    for (std::size_t h : hidden) {
      m.layers.push_back(LayerSpec::dense(prev, h));
      m.layers.push_back(LayerSpec::relu());
      prev = h;
    }
    m.layers.push_back(LayerSpec::dense(prev, classes));
  } else if (arch.rfind("cnn:", 0) == 0) {
    if (input_shape.size() != 3)
      throw ConfigError("model: cnn architecture needs (C,H,W) input");
    const auto channels = parse_dims(arch.substr(4));
    std::size_t ch = input_shape[0], h = input_shape[1], w = input_shape[2];
    for (std::size_t oc : channels) {
      m.layers.push_back(LayerSpec::conv2d(ch, oc, 3, 1, 1));
      m.layers.push_back(LayerSpec::relu());
      if (h % 2 != 0 || w % 2 != 0)
        throw ConfigError("model: cnn spatial dims must halve cleanly");
      m.layers.push_back(LayerSpec::avg_pool(2));
      ch = oc;
      h /= 2;
      w /= 2;
    }
    m.layers.push_back(LayerSpec::flatten());
    m.layers.push_back(LayerSpec::dense(ch * h * w, classes));
  } else {
    throw ConfigError("model: unknown architecture '" + arch + "'");
  }
  init_params(m, init_seed);
  m.validate();
  return m;
}

void apply_model_noise(Model& m, const std::string& target, double alpha, double base_sigma,
                       bool learnable) {
  m.sync_noise();
  if (target == "none" || target.empty()) return;
  NoiseSpec spec;
  spec.alpha = alpha;
  spec.base_sigma = base_sigma;
  spec.learnable = learnable;
  spec.enabled = true;
  if (target == "weight") {
    spec.target = NoiseTarget::Weight;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      if (m.layers[i].has_params()) m.noise[i] = spec;
    }
  } else if (target == "input") {
    spec.target = NoiseTarget::Input;
    m.noise[0] = spec;
  } else if (target == "activation") {
    spec.target = NoiseTarget::Activation;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      if (m.layers[i].has_params()) m.noise[i] = spec;
    }
  } else {
    throw ConfigError("model: unknown noise target '" + target + "'");
  }
  m.validate();
}

}  // namespace smooth
