#include "smooth/attack.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "smooth/error.hpp"
#include "smooth/smoothing.hpp"

namespace smooth {

namespace {

constexpr std::uint64_t kIterTag = 0x17E2;
constexpr std::uint64_t kRandStartTag = 0x25BD;
constexpr std::uint64_t kNesDirTag = 0x93C4;

std::string fmt_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

}  // namespace

std::string attack_family_name(AttackFamily f) {
  switch (f) {
    case AttackFamily::None: return "none";
    case AttackFamily::Fgsm: return "fgsm";
    case AttackFamily::Pgd: return "pgd";
    case AttackFamily::Epgd: return "epgd";
    case AttackFamily::SmoothAdvPgd: return "smoothadv";
    case AttackFamily::Nes: return "nes";
  }
  return "?";
}

AttackFamily attack_family_from_name(const std::string& name) {
  if (name == "none") return AttackFamily::None;
  if (name == "fgsm") return AttackFamily::Fgsm;
  if (name == "pgd") return AttackFamily::Pgd;
  if (name == "epgd") return AttackFamily::Epgd;
  if (name == "smoothadv" || name == "smoothadv_pgd") return AttackFamily::SmoothAdvPgd;
  if (name == "nes") return AttackFamily::Nes;
  throw ParseError("unknown attack family '" + name + "'");
}

double AttackConfig::alpha_or_default() const {
  if (step_alpha > 0.0) return step_alpha;
  return 2.5 * epsilon / static_cast<double>(steps);
}

void AttackConfig::validate() const {
  if (epsilon < 0.0) throw ConfigError("attack: epsilon must be >= 0");
  if (steps < 1) throw ConfigError("attack: k must be >= 1");
  if (backward_samples < 1) throw ConfigError("attack: M_b must be >= 1");
  if (sigma_attack < 0.0) throw ConfigError("attack: sigma must be >= 0");
  if (step_alpha < 0.0) throw ConfigError("attack: alpha must be >= 0");
  if (family == AttackFamily::Nes) {
    if (nes_population < 2 || nes_population % 2 != 0)
      throw ConfigError("attack: nes population must be even and >= 2");
    if (nes_sigma <= 0.0) throw ConfigError("attack: nes sigma must be > 0");
  }
}

AttackConfig parse_attack_spec(const std::string& spec) {
  AttackConfig cfg;
  cfg.family = AttackFamily::None;
  if (spec.empty() || spec == "none") return cfg;
  bool saw_family = false;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw ParseError("attack spec: expected key:value, got '" + item + "'");
    const std::string key = item.substr(0, colon);
    const std::string val = item.substr(colon + 1);
    try {
      if (key == "family") {
        cfg.family = attack_family_from_name(val);
        saw_family = true;
      } else if (key == "eps" || key == "epsilon") {
        cfg.epsilon = std::stod(val);
      } else if (key == "alpha" || key == "step_alpha") {
        cfg.step_alpha = std::stod(val);
      } else if (key == "k" || key == "steps") {
        cfg.steps = std::stoul(val);
      } else if (key == "mb" || key == "m_b" || key == "backward_samples") {
        cfg.backward_samples = std::stoul(val);
      } else if (key == "sigma" || key == "sigma_attack") {
        cfg.sigma_attack = std::stod(val);
      } else if (key == "random_start") {
        cfg.random_start = (val == "1" || val == "true");
      } else if (key == "pop" || key == "nes_population") {
        cfg.nes_population = std::stoul(val);
      } else if (key == "nes_sigma") {
        cfg.nes_sigma = std::stod(val);
      } else if (key == "budget" || key == "nes_query_budget") {
        cfg.nes_query_budget = std::stoul(val);
      } else if (key == "seed") {
        cfg.seed = std::stoull(val);
      } else {
        throw ParseError("attack spec: unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw ParseError("attack spec: bad value for '" + key + "': '" + val + "'");
    } catch (const std::out_of_range&) {
      throw ParseError("attack spec: value out of range for '" + key + "'");
    }
  }
  if (!saw_family) throw ParseError("attack spec: missing family");
  return cfg;
}

std::string format_attack_spec(const AttackConfig& cfg) {
  std::string s = "family:" + attack_family_name(cfg.family);
  if (cfg.family == AttackFamily::None) return s;
  s += ",eps:" + fmt_double(cfg.epsilon);
  s += ",k:" + std::to_string(cfg.steps);
  s += ",alpha:" + fmt_double(cfg.alpha_or_default());
  if (cfg.family == AttackFamily::Epgd || cfg.family == AttackFamily::SmoothAdvPgd) {
    s += ",mb:" + std::to_string(cfg.backward_samples);
  }
  if (cfg.family != AttackFamily::Nes) {
    s += ",sigma:" + fmt_double(cfg.sigma_attack);
  }
  if (cfg.family == AttackFamily::Nes) {
    s += ",pop:" + std::to_string(cfg.nes_population);
    s += ",nes_sigma:" + fmt_double(cfg.nes_sigma);
    if (cfg.nes_query_budget) s += ",budget:" + std::to_string(cfg.nes_query_budget);
  }
  s += ",random_start:" + std::string(cfg.random_start ? "1" : "0");
  s += ",seed:" + std::to_string(cfg.seed);
  return s;
}

void linf_ball_bounds(const Tensor& x, double epsilon, double domain_lo, double domain_hi,
                      Tensor& lo, Tensor& hi) {
  lo = Tensor(x.shape);
  hi = Tensor(x.shape);
  for (std::size_t j = 0; j < x.data.size(); ++j) {
    lo.data[j] = std::max(x.data[j] - epsilon, domain_lo);
    hi.data[j] = std::min(x.data[j] + epsilon, domain_hi);
  }
}

std::uint64_t attack_iter_seed(std::uint64_t seed, std::size_t iter) {
  return rng::derive(seed, kIterTag, iter);
}

namespace {

// Per-iteration loss gradient w.r.t. the current iterate. Plain families use
// the fused cross-entropy gradient; smoothing-aware families differentiate
// through the smoothed forward. Streams are shared so that epgd/smoothadv at
// M_b=1 consume exactly pgd's draw.
//
// When sigma_attack > 0, fgsm/pgd gradients also pass through fresh input
// noise each iteration: the attacker only ever sees the deployed noisy
// pipeline, never a denoised copy of it.
Tensor attack_loss_grad(const Model& m, const Tensor& xh, const std::vector<int>& y,
                        const AttackConfig& cfg, std::size_t iter) {
  const std::uint64_t iter_seed = attack_iter_seed(cfg.seed, iter);
  switch (cfg.family) {
    case AttackFamily::Fgsm:
    case AttackFamily::Pgd: {
      if (cfg.sigma_attack > 0.0) {
        const NoiseDraw draw{iter_seed, 0, 0};
        return smooth_soft_loss_grad(m, xh, y, 1, cfg.sigma_attack, draw).input;
      }
      const NoiseDraw draw{iter_seed, 1, 0};
      return grad_input(m, xh, y, &draw);
    }
    case AttackFamily::Epgd: {
      const NoiseDraw draw{iter_seed, 0, 0};
      return smooth_soft_loss_grad(m, xh, y, cfg.backward_samples, cfg.sigma_attack, draw)
          .input;
    }
    case AttackFamily::SmoothAdvPgd: {
      const NoiseDraw draw{iter_seed, 0, 0};
      return smooth_logit_loss_grad(m, xh, y, cfg.backward_samples, cfg.sigma_attack, draw)
          .input;
    }
    default:
      throw ConfigError("attack: family has no white-box gradient");
  }
}

Tensor pgd_driver(const Model& m, const Tensor& x, const std::vector<int>& y,
                  const AttackConfig& cfg) {
  cfg.validate();
  Tensor lo, hi;
  linf_ball_bounds(x, cfg.epsilon, m.domain_lo, m.domain_hi, lo, hi);
  const double alpha = cfg.alpha_or_default();

  Tensor xh = x;
  if (cfg.random_start) {
    const std::uint64_t key = rng::derive(cfg.seed, kRandStartTag);
    for (std::size_t j = 0; j < xh.data.size(); ++j) {
      const double v = x.data[j] + rng::uniform(key, j, -cfg.epsilon, cfg.epsilon);
      xh.data[j] = std::clamp(v, lo.data[j], hi.data[j]);
    }
  }
  for (std::size_t iter = 0; iter < cfg.steps; ++iter) {
    const Tensor g = attack_loss_grad(m, xh, y, cfg, iter);
    for (std::size_t j = 0; j < xh.data.size(); ++j) {
      const double v = xh.data[j] + alpha * sign_of(g.data[j]);
      xh.data[j] = std::clamp(v, lo.data[j], hi.data[j]);
    }
  }
  return xh;
}

}  // namespace

Tensor fgsm(const Model& m, const Tensor& x, const std::vector<int>& y,
            const AttackConfig& cfg) {
  AttackConfig one = cfg;
  one.family = AttackFamily::Fgsm;
  one.steps = 1;
  one.step_alpha = cfg.epsilon;
  one.random_start = false;
  return pgd_driver(m, x, y, one);
}

Tensor pgd(const Model& m, const Tensor& x, const std::vector<int>& y,
           const AttackConfig& cfg) {
  AttackConfig c = cfg;
  c.family = AttackFamily::Pgd;
  return pgd_driver(m, x, y, c);
}

Tensor epgd(const Model& m, const Tensor& x, const std::vector<int>& y,
            const AttackConfig& cfg) {
  AttackConfig c = cfg;
  c.family = AttackFamily::Epgd;
  return pgd_driver(m, x, y, c);
}

Tensor smoothadv_pgd(const Model& m, const Tensor& x, const std::vector<int>& y,
                     const AttackConfig& cfg) {
  AttackConfig c = cfg;
  c.family = AttackFamily::SmoothAdvPgd;
  return pgd_driver(m, x, y, c);
}

Tensor run_attack(const Model& m, const Tensor& x, const std::vector<int>& y,
                  const AttackConfig& cfg) {
  switch (cfg.family) {
    case AttackFamily::None: return x;
    case AttackFamily::Fgsm: return fgsm(m, x, y, cfg);
    case AttackFamily::Pgd: return pgd(m, x, y, cfg);
    case AttackFamily::Epgd: return epgd(m, x, y, cfg);
    case AttackFamily::SmoothAdvPgd: return smoothadv_pgd(m, x, y, cfg);
    case AttackFamily::Nes:
      throw ConfigError("run_attack: NES needs a black-box predict function");
  }
  throw ConfigError("run_attack: unknown family");
}

TransferResult transfer_attack(const Model& source, const PredictFn& target_predict,
                               const Tensor& x, const std::vector<int>& y,
                               const AttackConfig& cfg) {
  TransferResult res;
  res.x_hat = run_attack(source, x, y, cfg);
  const Tensor probs = target_predict(res.x_hat);
  const std::size_t b = x.shape[0], c = probs.shape.back();
  res.target_correct.resize(b);
  for (std::size_t r = 0; r < b; ++r) {
    const double* row = probs.data.data() + r * c;
    std::size_t top = 0;
    for (std::size_t k = 1; k < c; ++k)
      if (row[k] > row[top]) top = k;
    res.target_correct[r] = (static_cast<int>(top) == y[r]);
  }
  return res;
}

namespace {

std::vector<double> blackbox_losses(const PredictFn& predict, const Tensor& xh,
                                    const std::vector<int>& y) {
  const Tensor probs = predict(xh);
  const std::size_t b = xh.shape[0], c = probs.shape.back();
  std::vector<double> losses(b);
  for (std::size_t r = 0; r < b; ++r) {
    const double p = std::max(probs.data[r * c + static_cast<std::size_t>(y[r])], 1e-12);
    losses[r] = -std::log(p);
  }
  return losses;
}

}  // namespace

Tensor nes_gradient_estimate(const PredictFn& predict_probs, const Tensor& x,
                             const std::vector<int>& y, const AttackConfig& cfg,
                             std::size_t iter) {
  const std::size_t b = x.shape[0];
  const std::size_t per_example = x.numel() / std::max<std::size_t>(b, 1);
  const std::size_t pairs = cfg.nes_population / 2;

  Tensor grad_est(x.shape);
  Tensor probe(x.shape);
  for (std::size_t j = 0; j < pairs; ++j) {
    const std::uint64_t ukey = rng::derive(cfg.seed, kNesDirTag, iter, j);
    const Tensor u = standard_gaussian(x.shape, ukey);
    for (std::size_t e = 0; e < x.data.size(); ++e)
      probe.data[e] = x.data[e] + cfg.nes_sigma * u.data[e];
    const std::vector<double> lp = blackbox_losses(predict_probs, probe, y);
    for (std::size_t e = 0; e < x.data.size(); ++e)
      probe.data[e] = x.data[e] - cfg.nes_sigma * u.data[e];
    const std::vector<double> lm = blackbox_losses(predict_probs, probe, y);
    for (std::size_t r = 0; r < b; ++r) {
      const double d = lp[r] - lm[r];
      for (std::size_t e = 0; e < per_example; ++e)
        grad_est.data[r * per_example + e] += d * u.data[r * per_example + e];
    }
  }
  const double norm = 1.0 / (static_cast<double>(cfg.nes_population) * cfg.nes_sigma);
  for (double& v : grad_est.data) v *= norm;
  return grad_est;
}

NesResult nes_blackbox(const PredictFn& predict_probs, const Tensor& x,
                       const std::vector<int>& y, const AttackConfig& cfg,
                       double domain_lo, double domain_hi) {
  cfg.validate();
  const std::size_t b = x.shape[0];
  const std::size_t per_example = x.numel() / std::max<std::size_t>(b, 1);
  Tensor lo, hi;
  linf_ball_bounds(x, cfg.epsilon, domain_lo, domain_hi, lo, hi);
  const double alpha = cfg.alpha_or_default();
  const std::size_t pairs = cfg.nes_population / 2;
  const auto budget = cfg.nes_query_budget;

  NesResult res;
  Tensor xh = x;
  if (cfg.random_start) {
    const std::uint64_t key = rng::derive(cfg.seed, kRandStartTag);
    for (std::size_t j = 0; j < xh.data.size(); ++j)
      xh.data[j] = std::clamp(x.data[j] + rng::uniform(key, j, -cfg.epsilon, cfg.epsilon),
                              lo.data[j], hi.data[j]);
  }
  res.x_hat = xh;
  std::vector<double> best_loss(b, -std::numeric_limits<double>::infinity());
  std::size_t queries = 0;

  for (std::size_t iter = 0; iter <= cfg.steps; ++iter) {
    if (budget && queries + 1 > budget) {
      res.budget_exhausted = true;
      break;
    }
    const std::vector<double> cur = blackbox_losses(predict_probs, xh, y);
    ++queries;
    for (std::size_t r = 0; r < b; ++r) {
      if (cur[r] > best_loss[r]) {
        best_loss[r] = cur[r];
        for (std::size_t j = 0; j < per_example; ++j)
          res.x_hat.data[r * per_example + j] = xh.data[r * per_example + j];
      }
    }
    if (iter == cfg.steps) break;
    if (budget && queries + cfg.nes_population > budget) {
      res.budget_exhausted = true;
      break;
    }

    const Tensor grad_est = nes_gradient_estimate(predict_probs, xh, y, cfg, iter);
    queries += 2 * pairs;
    for (std::size_t e = 0; e < xh.data.size(); ++e) {
      const double v = xh.data[e] + alpha * sign_of(grad_est.data[e]);
      xh.data[e] = std::clamp(v, lo.data[e], hi.data[e]);
    }
  }
  return res;
}

}  // namespace smooth
