#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "smooth/attack.hpp"
#include "smooth/data.hpp"
#include "smooth/smoothing.hpp"
#include "smooth/train.hpp"

namespace smooth {

/// Flat key=value store with dotted section prefixes (train.lr=0.01).
/// '#' starts a comment; blank lines are ignored.
class KvConfig {
 public:
  static KvConfig parse_file(const std::string& path);
  static KvConfig parse_overrides(const std::vector<std::string>& items);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  /// Overlays `other` on top of this config.
  void merge(const KvConfig& other);

  std::string get_string(const std::string& key, const std::string& def) const;
  double get_double(const std::string& key, double def) const;
  std::int64_t get_int(const std::string& key, std::int64_t def) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& def) const;
  std::vector<std::uint64_t> get_u64_list(const std::string& key,
                                          const std::vector<std::uint64_t>& def) const;
  std::vector<std::string> get_string_list(const std::string& key,
                                           const std::vector<std::string>& def) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  /// Keys read so far; used to reject unknown keys after resolution.
  std::vector<std::string> unconsumed_keys() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> consumed_;
};

/// Everything one experiment needs, resolved with defaults.
struct ExperimentConfig {
  DatasetSpec dataset;
  std::string model_arch = "mlp:48";
  std::uint64_t model_init_seed = 7;
  std::string model_checkpoint;  // load instead of building when set
  // Noise applied when building a fresh model.
  std::string model_noise_target = "none";  // none|input|weight|activation
  double model_noise_alpha = 0.25;
  double model_noise_base_sigma = 1.0;
  bool model_noise_learnable = true;

  TrainConfig train;
  AttackConfig attack;       // evaluation-time attack
  bool has_attack = false;
  SmoothingConfig smoothing;

  std::vector<double> sweep_sigmas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<std::uint64_t> sweep_ms{1, 4, 16, 64};
  std::vector<double> sweep_eps{0.0, 2.0 / 255, 4.0 / 255, 8.0 / 255, 16.0 / 255};
  std::vector<std::uint64_t> sweep_ks{1, 2, 4, 8};
  std::vector<std::uint64_t> sweep_mbs{1, 2, 4, 8};
  std::vector<std::string> sweep_families{"pgd", "epgd", "smoothadv"};

  std::size_t eval_seeds = 1;
  std::uint64_t eval_seed = 9;
  std::string out_dir = "out";
  std::size_t threads = 1;
  std::uint64_t master_seed = 1;

  // Appendix-style SVM noise experiment.
  std::size_t svm_dim = 8;
  std::size_t svm_n = 200;
  double svm_sigma = 0.5;
  std::size_t svm_trials = 10000;
  std::size_t svm_reps = 20;
  double svm_epsilon = 0.1;

  /// Resolves from key=value pairs; throws ConfigError on unknown keys.
  static ExperimentConfig from_kv(const KvConfig& kv);
  /// Sorted key=value dump of the fully resolved config (defaults included).
  std::string dump() const;
};

/// Builds a model from an architecture id: "linear", "mlp:H1-H2-...",
/// "cnn:C1-C2-...". Image inputs get a leading Flatten for dense stacks.
Model build_model(const std::string& arch, const std::vector<std::size_t>& input_shape,
                  std::size_t classes, std::uint64_t init_seed);

/// Applies a noise target from config to the appropriate layers.
void apply_model_noise(Model& m, const std::string& target, double alpha, double base_sigma,
                       bool learnable);

}  // namespace smooth
