#include "smooth/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "smooth/error.hpp"

namespace smooth {

namespace {

constexpr std::uint64_t kStepNoiseTag = 0x57E9;
constexpr std::uint64_t kAttackSeedTag = 0xA77C;
constexpr std::uint64_t kBernoulliTag = 0xBE27;
constexpr std::uint64_t kCniNoiseTag = 0xC419;
constexpr std::uint64_t kSplitTag = 0x5917;
constexpr std::uint64_t kShuffleTag = 0x5FF1;
constexpr std::uint64_t kValAttackTag = 0x7A1A;

void add_scaled(Gradients& acc, const Gradients& g, double w) {
  for (std::size_t i = 0; i < acc.weight.size(); ++i) {
    for (std::size_t j = 0; j < acc.weight[i].data.size(); ++j)
      acc.weight[i].data[j] += w * g.weight[i].data[j];
    for (std::size_t j = 0; j < acc.bias[i].data.size(); ++j)
      acc.bias[i].data[j] += w * g.bias[i].data[j];
    acc.alpha[i] += w * g.alpha[i];
  }
}

Gradients scaled(const Gradients& g, double w) {
  Gradients out = g;
  if (w == 1.0) return out;
  for (auto& t : out.weight)
    for (double& v : t.data) v *= w;
  for (auto& t : out.bias)
    for (double& v : t.data) v *= w;
  for (double& v : out.alpha) v *= w;
  return out;
}

}  // namespace

NoiseDraw train_step_draw(const TrainConfig& cfg, std::uint64_t step_index) {
  return NoiseDraw{rng::derive(cfg.seed, kStepNoiseTag, step_index), 1, 0};
}

AttackConfig train_step_attack(const TrainConfig& cfg, std::uint64_t step_index) {
  AttackConfig a = cfg.attack;
  a.seed = rng::derive(cfg.seed, kAttackSeedTag, step_index);
  return a;
}

std::string train_mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::Clean: return "clean";
    case TrainMode::Adversarial: return "adversarial";
    case TrainMode::CniIW: return "cni_iw";
    case TrainMode::Trades: return "trades";
    case TrainMode::EpgdAdv: return "epgd_adv";
  }
  return "?";
}

TrainMode train_mode_from_name(const std::string& name) {
  if (name == "clean") return TrainMode::Clean;
  if (name == "adversarial") return TrainMode::Adversarial;
  if (name == "cni_iw") return TrainMode::CniIW;
  if (name == "trades") return TrainMode::Trades;
  if (name == "epgd_adv") return TrainMode::EpgdAdv;
  throw ConfigError("unknown train mode '" + name + "'");
}

std::string selection_name(Selection s) {
  return s == Selection::Best ? "best" : "diverged";
}

Selection selection_from_name(const std::string& name) {
  if (name == "best") return Selection::Best;
  if (name == "diverged") return Selection::Diverged;
  throw ConfigError("unknown selection '" + name + "'");
}

void TrainConfig::validate() const {
  if (adv_weight < 0.0 || adv_weight > 1.0) throw ConfigError("train: w must be in [0,1]");
  if (bernoulli_q < 0.0 || bernoulli_q > 1.0) throw ConfigError("train: q must be in [0,1]");
  if (sigma_train < 0.0) throw ConfigError("train: sigma must be >= 0");
  if (trades_inv_lambda < 0.0) throw ConfigError("train: 1/lambda must be >= 0");
  if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  if (lr < 0.0) throw ConfigError("train: lr must be >= 0");
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw ConfigError("train: val_fraction must be in [0,1)");
  if (mode == TrainMode::Adversarial || mode == TrainMode::CniIW ||
      mode == TrainMode::Trades || mode == TrainMode::EpgdAdv) {
    if (attack.family == AttackFamily::None && attack.epsilon > 0.0)
      throw ConfigError("train: mode '" + train_mode_name(mode) + "' requires attack.family");
  }
}

double clean_step(Model& m, SgdState& opt, const Tensor& xb, const std::vector<int>& yb,
                  const TrainConfig& cfg, std::uint64_t step_index) {
  const NoiseDraw draw = train_step_draw(cfg, step_index);
  double loss = 0.0;
  const Gradients g = grad_params(m, xb, yb, &draw, &loss);
  sgd_step(m, g, cfg.lr, cfg.momentum, cfg.weight_decay, &opt);
  return loss;
}

StepResult adversarial_training_step(Model& m, SgdState& opt, const Tensor& xb,
                                     const std::vector<int>& yb, const TrainConfig& cfg,
                                     std::uint64_t step_index) {
  const NoiseDraw draw = train_step_draw(cfg, step_index);
  const double w = cfg.adv_weight;
  StepResult res;

  Gradients total;
  bool have_total = false;
  if (w < 1.0) {
    Gradients gc = grad_params(m, xb, yb, &draw, &res.clean_loss);
    total = (w == 0.0) ? std::move(gc) : scaled(gc, 1.0 - w);
    have_total = true;
  }
  if (w > 0.0) {
    const Tensor xh = run_attack(m, xb, yb, train_step_attack(cfg, step_index));
    Gradients ga = grad_params(m, xh, yb, &draw, &res.adv_loss);
    if (!have_total) {
      total = (w == 1.0) ? std::move(ga) : scaled(ga, w);
    } else {
      add_scaled(total, ga, w);
    }
  }
  res.total = (1.0 - w) * res.clean_loss + w * res.adv_loss;
  sgd_step(m, total, cfg.lr, cfg.momentum, cfg.weight_decay, &opt);
  return res;
}

double cni_iw_step(Model& m, SgdState& opt, const Tensor& xb, const std::vector<int>& yb,
                   const TrainConfig& cfg, std::uint64_t step_index) {
  const NoiseDraw draw = train_step_draw(cfg, step_index);
  const std::size_t b = xb.shape[0];
  const std::size_t per = b ? xb.numel() / b : 0;

  Tensor xh;
  if (cfg.bernoulli_q > 0.0) {
    xh = run_attack(m, xb, yb, train_step_attack(cfg, step_index));
  }
  const std::uint64_t bkey = rng::derive(cfg.seed, kBernoulliTag, step_index);
  const std::uint64_t gkey = rng::derive(cfg.seed, kCniNoiseTag, step_index);

  // x' = (B ? xh : x) + gaussian, written without x + (xh - x) cancellation
  // so the q=1, sigma=0 case reduces bit-exactly to adversarial training.
  Tensor xp = xb;
  for (std::size_t r = 0; r < b; ++r) {
    const bool hit =
        cfg.bernoulli_q > 0.0 && rng::uniform(bkey, r, 0.0, 1.0) < cfg.bernoulli_q;
    for (std::size_t j = 0; j < per; ++j) {
      double v = hit ? xh.data[r * per + j] : xb.data[r * per + j];
      if (cfg.sigma_train > 0.0)
        v += cfg.sigma_train * rng::gaussian(gkey, r * per + j);
      xp.data[r * per + j] = v;
    }
  }

  double loss = 0.0;
  const Gradients g = grad_params(m, xp, yb, &draw, &loss);
  sgd_step(m, g, cfg.lr, cfg.momentum, cfg.weight_decay, &opt);
  return loss;
}

namespace {

// Soft-target cross-entropy: -(1/B) sum_b sum_k t[k] * log softmax(z)[k].
double soft_cross_entropy_grad(const Tensor& logits, const Tensor& targets, Tensor* dlogits) {
  const std::size_t b = logits.shape[0], c = logits.shape[1];
  const Tensor p = softmax(logits);
  const double invb = b ? 1.0 / static_cast<double>(b) : 0.0;
  double loss = 0.0;
  if (dlogits) *dlogits = Tensor(logits.shape);
  for (std::size_t r = 0; r < b; ++r) {
    const double* z = logits.data.data() + r * c;
    const double* t = targets.data.data() + r * c;
    double mx = z[0];
    for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, z[k]);
    double se = 0.0;
    for (std::size_t k = 0; k < c; ++k) se += std::exp(z[k] - mx);
    const double lse = mx + std::log(se);
    for (std::size_t k = 0; k < c; ++k) {
      loss -= t[k] * (z[k] - lse);
      if (dlogits)
        dlogits->data[r * c + k] = (p.data[r * c + k] - t[k]) * invb;
    }
  }
  return loss * invb;
}

// Inner maximization of the soft-target CE within the epsilon-ball.
Tensor trades_attack(const Model& m, const Tensor& xb, const Tensor& targets,
                     const AttackConfig& cfg) {
  cfg.validate();
  Tensor lo, hi;
  linf_ball_bounds(xb, cfg.epsilon, m.domain_lo, m.domain_hi, lo, hi);
  const double alpha = cfg.alpha_or_default();
  Tensor xh = xb;
  if (cfg.random_start) {
    const std::uint64_t key = rng::derive(cfg.seed, 0x25BD);
    for (std::size_t j = 0; j < xh.data.size(); ++j)
      xh.data[j] = std::clamp(xb.data[j] + rng::uniform(key, j, -cfg.epsilon, cfg.epsilon),
                              lo.data[j], hi.data[j]);
  }
  for (std::size_t iter = 0; iter < cfg.steps; ++iter) {
    const NoiseDraw draw{rng::derive(cfg.seed, 0x17E2, iter), 1, 0};
    ForwardTrace trace;
    forward(m, xh, &draw, &trace);
    Tensor dlogits;
    soft_cross_entropy_grad(trace.logits, targets, &dlogits);
    const Gradients g = backward(m, trace, dlogits);
    for (std::size_t j = 0; j < xh.data.size(); ++j) {
      const double v = xh.data[j] + alpha * sign_of(g.input.data[j]);
      xh.data[j] = std::clamp(v, lo.data[j], hi.data[j]);
    }
  }
  return xh;
}

}  // namespace

StepResult trades_step(Model& m, SgdState& opt, const Tensor& xb, const std::vector<int>& yb,
                       const TrainConfig& cfg, std::uint64_t step_index) {
  const NoiseDraw draw = train_step_draw(cfg, step_index);
  StepResult res;

  ForwardTrace clean_trace;
  forward(m, xb, &draw, &clean_trace);
  Tensor dclean;
  res.clean_loss = cross_entropy_grad(clean_trace.logits, yb, &dclean);
  Gradients total = backward(m, clean_trace, dclean);

  if (cfg.trades_inv_lambda > 0.0) {
    const Tensor targets = softmax(clean_trace.logits);  // stop-gradient
    const Tensor xh = trades_attack(m, xb, targets, train_step_attack(cfg, step_index));
    ForwardTrace adv_trace;
    forward(m, xh, &draw, &adv_trace);
    Tensor dadv;
    res.adv_loss = soft_cross_entropy_grad(adv_trace.logits, targets, &dadv);
    const Gradients ga = backward(m, adv_trace, dadv);
    add_scaled(total, ga, cfg.trades_inv_lambda);
  }
  res.total = res.clean_loss + cfg.trades_inv_lambda * res.adv_loss;
  sgd_step(m, total, cfg.lr, cfg.momentum, cfg.weight_decay, &opt);
  return res;
}

double clean_accuracy(const Model& m, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  const Tensor logits = forward(m, data.x);
  const std::size_t c = logits.shape[1];
  std::size_t correct = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    const double* row = logits.data.data() + r * c;
    std::size_t top = 0;
    for (std::size_t k = 1; k < c; ++k)
      if (row[k] > row[top]) top = k;
    if (static_cast<int>(top) == data.y[r]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
}

FinetuneResult finetune(const Model& start, const Dataset& train_data, const TrainConfig& cfg) {
  cfg.validate();
  if (train_data.size() == 0) throw ConfigError("finetune: empty dataset");

  FinetuneResult out;
  out.model = start;
  out.final = start;
  if (cfg.epochs == 0) return out;

  // Carve the validation split off the front of a seeded shuffle.
  const auto idx = shuffled_indices(train_data.size(), rng::derive(cfg.seed, kSplitTag));
  const std::size_t nval =
      static_cast<std::size_t>(cfg.val_fraction * static_cast<double>(train_data.size()));
  const std::vector<std::size_t> val_idx(idx.begin(), idx.begin() + nval);
  const std::vector<std::size_t> fit_idx(idx.begin() + nval, idx.end());
  const Dataset val = nval ? train_data.subset(val_idx) : Dataset{};
  const Dataset fit = train_data.subset(fit_idx);
  if (fit.size() == 0) throw ConfigError("finetune: no training examples after val split");

  Model model = start;
  SgdState opt;
  Model best_model = start;
  double best_metric = -std::numeric_limits<double>::infinity();
  Model worst_model = start;
  double worst_metric = std::numeric_limits<double>::infinity();

  const std::size_t steps_per_epoch = (fit.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t decay1 = cfg.epochs / 2, decay2 = (3 * cfg.epochs) / 4;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    TrainConfig ecfg = cfg;
    ecfg.lr = cfg.lr * (epoch >= decay1 ? 0.1 : 1.0) * (epoch >= decay2 ? 0.1 : 1.0);

    const auto order = shuffled_indices(fit.size(), rng::derive(cfg.seed, kShuffleTag, epoch));
    double loss_sum = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const std::size_t beg = s * cfg.batch_size;
      const std::size_t end = std::min(beg + cfg.batch_size, fit.size());
      const std::vector<std::size_t> bidx(order.begin() + beg, order.begin() + end);
      const Dataset batch = fit.subset(bidx);
      const std::uint64_t step_index = epoch * steps_per_epoch + s;

      double loss = 0.0;
      switch (cfg.mode) {
        case TrainMode::Clean:
          loss = clean_step(model, opt, batch.x, batch.y, ecfg, step_index);
          break;
        case TrainMode::Adversarial:
        case TrainMode::EpgdAdv: {
          if (cfg.mode == TrainMode::EpgdAdv) ecfg.attack.family = AttackFamily::Epgd;
          const StepResult r =
              adversarial_training_step(model, opt, batch.x, batch.y, ecfg, step_index);
          loss = r.total;
          break;
        }
        case TrainMode::CniIW:
          loss = cni_iw_step(model, opt, batch.x, batch.y, ecfg, step_index);
          break;
        case TrainMode::Trades: {
          const StepResult r = trades_step(model, opt, batch.x, batch.y, ecfg, step_index);
          loss = r.total;
          break;
        }
      }
      loss_sum += loss;
    }

    const Dataset& val_ref = nval ? val : fit;
    TrainLogRow row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(steps_per_epoch);
    row.val_clean_acc = clean_accuracy(model, val_ref);
    if (cfg.attack.family != AttackFamily::None && cfg.attack.epsilon > 0.0) {
      AttackConfig va = cfg.attack;
      va.seed = rng::derive(cfg.seed, kValAttackTag, epoch);
      const Tensor xh = run_attack(model, val_ref.x, val_ref.y, va);
      Dataset attacked = val_ref;
      attacked.x = xh;
      row.val_adv_acc = clean_accuracy(model, attacked);
    } else {
      row.val_adv_acc = row.val_clean_acc;
    }
    row.lr = ecfg.lr;
    row.alphas = model.alphas();
    out.log.rows.push_back(row);

    if (row.val_clean_acc > best_metric) {
      best_metric = row.val_clean_acc;
      best_model = model;
    }
    if (row.val_clean_acc < worst_metric) {
      worst_metric = row.val_clean_acc;
      worst_model = model;
    }
  }

  out.final = model;
  out.model = cfg.selection == Selection::Best ? best_model : worst_model;
  return out;
}

}  // namespace smooth
