#include "smooth/eval.hpp"

#include <chrono>
#include <memory>

#include "smooth/attack.hpp"
#include "smooth/error.hpp"
#include "smooth/util.hpp"

namespace smooth {

namespace {

constexpr std::uint64_t kSeedTag = 0xE7A1;
constexpr std::uint64_t kCleanTag = 0xC1EA;
constexpr std::uint64_t kAttackTag = 0xA77A;
constexpr std::uint64_t kAdvEvalTag = 0xADE1;
constexpr std::uint64_t kExampleTag = 0x5A4D;
constexpr std::uint64_t kNesQueryTag = 0x9E5B;

Tensor slice_example(const Tensor& x, std::size_t i) {
  const std::size_t b = x.shape[0];
  const std::size_t per = x.numel() / b;
  std::vector<std::size_t> s = x.shape;
  s[0] = 1;
  Tensor t(s);
  std::copy(x.data.begin() + i * per, x.data.begin() + (i + 1) * per, t.data.begin());
  return t;
}

std::size_t white_box_grad_evals(const AttackConfig& a) {
  switch (a.family) {
    case AttackFamily::Fgsm: return 1;
    case AttackFamily::Pgd: return a.steps;
    case AttackFamily::Epgd:
    case AttackFamily::SmoothAdvPgd: return a.steps * a.backward_samples;
    default: return 0;
  }
}

// Attackers face the pipeline as deployed: layer noise always, plus the
// defense's input noise at the smoothing sigma. fgsm/pgd therefore read
// gradients through fresh noise draws, and NES queries noisy probabilities.
Tensor craft_attack(const Model& m, const Dataset& test, AttackConfig a,
                    double deployed_sigma, std::uint64_t seed) {
  a.seed = seed;
  if (a.family == AttackFamily::Fgsm || a.family == AttackFamily::Pgd) {
    a.sigma_attack = deployed_sigma;
  }
  if (a.family == AttackFamily::Nes) {
    auto counter = std::make_shared<std::uint64_t>(0);
    const std::uint64_t qseed = rng::derive(seed, kNesQueryTag);
    PredictFn predict = [&m, counter, qseed, deployed_sigma](const Tensor& batch) {
      const NoiseDraw draw{rng::derive(qseed, (*counter)++), 1, 0};
      return softmax(noisy_forward(m, batch, deployed_sigma, draw));
    };
    return nes_blackbox(predict, test.x, test.y, a, m.domain_lo, m.domain_hi).x_hat;
  }
  return run_attack(m, test.x, test.y, a);
}

}  // namespace

double smoothed_accuracy(const Model& m, const Tensor& x, const std::vector<int>& y,
                         const SmoothingConfig& smoothing, std::uint64_t seed,
                         std::size_t threads) {
  const std::size_t n = y.size();
  if (n == 0) return 0.0;
  std::vector<char> correct(n, 0);
  parallel_for(n, threads, [&](std::size_t i) {
    SmoothingConfig cfg = smoothing;
    cfg.base_seed = rng::derive(seed, kExampleTag, i);
    const VoteTally t = smooth_predict(m, slice_example(x, i), cfg);
    correct[i] = t.winner == y[i] ? 1 : 0;
  });
  std::size_t hits = 0;
  for (char c : correct) hits += static_cast<std::size_t>(c);
  return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

EvalRow evaluate(const Model& m, const Dataset& test,
                 const std::optional<AttackConfig>& attack, const SmoothingConfig& smoothing,
                 std::size_t num_seeds, std::uint64_t eval_seed, const std::string& model_id,
                 std::size_t threads) {
  if (num_seeds == 0) throw ConfigError("evaluate: need at least one seed");
  smoothing.validate();
  const auto t0 = std::chrono::steady_clock::now();

  EvalRow row;
  row.model_id = model_id;
  row.scheme = voting_name(smoothing.voting);
  row.samples = smoothing.samples;
  row.sigma = smoothing.sigma;
  if (attack) {
    AttackConfig effective = *attack;
    if (effective.family == AttackFamily::Fgsm || effective.family == AttackFamily::Pgd) {
      effective.sigma_attack = smoothing.sigma;
    }
    row.attack_spec = format_attack_spec(effective);
    row.grad_evals = white_box_grad_evals(effective);
  }

  for (std::size_t s = 0; s < num_seeds; ++s) {
    const std::uint64_t seed_s = rng::derive(eval_seed, kSeedTag, s);
    row.per_seed_clean.push_back(
        smoothed_accuracy(m, test.x, test.y, smoothing, rng::derive(seed_s, kCleanTag), threads));
    if (attack && attack->family != AttackFamily::None) {
      const Tensor xh = craft_attack(m, test, *attack, smoothing.sigma,
                                     rng::derive(seed_s, kAttackTag));
      row.per_seed_adv.push_back(smoothed_accuracy(m, xh, test.y, smoothing,
                                                   rng::derive(seed_s, kAdvEvalTag), threads));
    }
  }

  row.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return row;
}

EvalReport sweep_sigma_M(const Model& m, const Dataset& test, const ExperimentConfig& cfg,
                         const std::string& model_id) {
  EvalReport report;
  std::optional<AttackConfig> attack;
  if (cfg.has_attack) attack = cfg.attack;
  for (double sigma : cfg.sweep_sigmas) {
    for (std::uint64_t samples : cfg.sweep_ms) {
      SmoothingConfig sm = cfg.smoothing;
      sm.sigma = sigma;
      sm.samples = samples;
      report.rows.push_back(
          evaluate(m, test, attack, sm, cfg.eval_seeds, cfg.eval_seed, model_id, cfg.threads));
    }
  }
  return report;
}

EvalReport sweep_kM(const Model& m, const Dataset& test, const ExperimentConfig& cfg,
                    const std::string& model_id) {
  EvalReport report;
  AttackConfig base = cfg.has_attack ? cfg.attack : AttackConfig{};
  for (const std::string& family_name : cfg.sweep_families) {
    const AttackFamily family = attack_family_from_name(family_name);
    for (std::uint64_t k : cfg.sweep_ks) {
      const bool smoothing_aware =
          family == AttackFamily::Epgd || family == AttackFamily::SmoothAdvPgd;
      const std::vector<std::uint64_t> mbs =
          smoothing_aware ? cfg.sweep_mbs : std::vector<std::uint64_t>{1};
      for (std::uint64_t mb : mbs) {
        AttackConfig a = base;
        a.family = family;
        a.steps = k;
        a.backward_samples = mb;
        report.rows.push_back(evaluate(m, test, a, cfg.smoothing, cfg.eval_seeds,
                                       cfg.eval_seed, model_id, cfg.threads));
      }
    }
  }
  return report;
}

EvalReport sweep_epsilon(const Model& m, const Dataset& test, const ExperimentConfig& cfg,
                         const std::string& model_id) {
  if (cfg.sweep_eps.empty()) throw ConfigError("sweep-eps: empty epsilon list");
  EvalReport report;
  AttackConfig base = cfg.has_attack ? cfg.attack : AttackConfig{};
  if (base.family == AttackFamily::None) base.family = AttackFamily::Pgd;
  for (double eps : cfg.sweep_eps) {
    AttackConfig a = base;
    a.epsilon = eps;
    report.rows.push_back(evaluate(m, test, a, cfg.smoothing, cfg.eval_seeds, cfg.eval_seed,
                                   model_id, cfg.threads));
  }
  return report;
}

std::vector<std::string> report_csv_header() {
  return {"model",     "scheme",     "samples",  "sigma",   "attack",
          "grad_evals", "clean_mean", "clean_std", "adv_mean", "adv_std",
          "seeds",     "per_seed_clean", "per_seed_adv"};
}

namespace {

std::string join_values(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ";";
    s += format_double(v[i]);
  }
  return s;
}

}  // namespace

CsvWriter report_to_csv(const EvalReport& report) {
  CsvWriter csv(report_csv_header());
  for (const EvalRow& r : report.rows) {
    const MeanStd clean = mean_std(r.per_seed_clean);
    const MeanStd adv = mean_std(r.per_seed_adv);
    csv.add_row({
        r.model_id,
        r.scheme,
        std::to_string(r.samples),
        format_double(r.sigma),
        r.attack_spec,
        r.grad_evals ? std::to_string(r.grad_evals) : "",
        r.per_seed_clean.empty() ? "" : format_double(clean.mean),
        clean.std_dev ? format_double(*clean.std_dev) : "",
        r.per_seed_adv.empty() ? "" : format_double(adv.mean),
        adv.std_dev ? format_double(*adv.std_dev) : "",
        std::to_string(r.per_seed_clean.size()),
        join_values(r.per_seed_clean),
        join_values(r.per_seed_adv),
    });
  }
  return csv;
}

CsvWriter tally_to_csv(const VoteTally& tally) {
  CsvWriter csv({"sample_index", "class", "probability", "rank"});
  const std::size_t m = tally.probs.shape[0], c = tally.probs.shape[1];
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      csv.add_row({std::to_string(i + 1), std::to_string(k),
                   format_double(tally.probs.at(i, k)),
                   std::to_string(tally.ranks[i * c + k])});
    }
  }
  return csv;
}

}  // namespace smooth
