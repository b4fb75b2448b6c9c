#include "smooth/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "smooth/error.hpp"

namespace smooth {

std::string voting_name(Voting v) {
  switch (v) {
    case Voting::Prediction: return "prediction";
    case Voting::WeightedExp: return "weighted_exp";
    case Voting::WeightedTopC: return "weighted_topc";
    case Voting::Soft: return "soft";
  }
  return "?";
}

Voting voting_from_name(const std::string& name) {
  if (name == "prediction") return Voting::Prediction;
  if (name == "weighted_exp") return Voting::WeightedExp;
  if (name == "weighted_topc") return Voting::WeightedTopC;
  if (name == "soft") return Voting::Soft;
  throw ConfigError("unknown voting scheme '" + name + "'");
}

void SmoothingConfig::validate() const {
  if (samples == 0) throw ConfigError("smoothing: sample count M must be >= 1");
  if (sigma < 0.0) throw ConfigError("smoothing: sigma must be >= 0");
  if (voting == Voting::WeightedTopC && (top_c < 0.0 || top_c > 1.0))
    throw ConfigError("smoothing: WeightedTopC requires C in [0,1]");
}

std::vector<int> compute_ranks(const Tensor& probs) {
  const std::size_t m = probs.shape[0], c = probs.shape[1];
  std::vector<int> ranks(m * c);
  std::vector<std::size_t> order(c);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = probs.data.data() + i * c;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [row](std::size_t a, std::size_t b) { return row[a] > row[b]; });
    for (std::size_t pos = 0; pos < c; ++pos) {
      ranks[i * c + order[pos]] = static_cast<int>(pos + 1);
    }
  }
  return ranks;
}

int argmax_class(const std::vector<double>& aggregate) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < aggregate.size(); ++k) {
    if (aggregate[k] > aggregate[best]) best = k;
  }
  return static_cast<int>(best);
}

std::vector<double> vote_prediction(const Tensor& probs) {
  const std::size_t m = probs.shape[0], c = probs.shape[1];
  std::vector<double> agg(c, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = probs.data.data() + i * c;
    std::size_t top = 0;
    for (std::size_t k = 1; k < c; ++k) {
      if (row[k] > row[top]) top = k;
    }
    agg[top] += 1.0;
  }
  return agg;
}

std::vector<double> vote_weighted_exp(const Tensor& probs) {
  const std::size_t m = probs.shape[0], c = probs.shape[1];
  const std::vector<int> ranks = compute_ranks(probs);
  std::vector<double> agg(c, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      agg[k] += std::ldexp(1.0, 1 - ranks[i * c + k]);  // 2^(1-rank)
    }
  }
  return agg;
}

std::vector<double> vote_weighted_topc(const Tensor& probs, double c_weight) {
  const std::size_t m = probs.shape[0], c = probs.shape[1];
  const std::vector<int> ranks = compute_ranks(probs);
  std::vector<double> agg(c, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      const int r = ranks[i * c + k];
      if (r == 1) agg[k] += 1.0;
      else if (r == 2) agg[k] += c_weight;
    }
  }
  return agg;
}

std::vector<double> vote_soft(const Tensor& probs) {
  const std::size_t m = probs.shape[0], c = probs.shape[1];
  std::vector<double> agg(c, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = probs.data.data() + i * c;
    for (std::size_t k = 0; k < c; ++k) agg[k] += row[k];
  }
  return agg;
}

namespace {

Tensor as_batch_of_one(const Model& m, const Tensor& x) {
  if (x.shape == m.input_shape) {
    std::vector<std::size_t> s{1};
    s.insert(s.end(), x.shape.begin(), x.shape.end());
    return x.reshaped(s);
  }
  return x;
}

std::vector<double> apply_voting(const SmoothingConfig& cfg, const Tensor& probs) {
  switch (cfg.voting) {
    case Voting::Prediction: return vote_prediction(probs);
    case Voting::WeightedExp: return vote_weighted_exp(probs);
    case Voting::WeightedTopC: return vote_weighted_topc(probs, cfg.top_c);
    case Voting::Soft: return vote_soft(probs);
  }
  throw ConfigError("smoothing: unknown voting scheme");
}

}  // namespace

VoteTally smooth_predict(const Model& m, const Tensor& x, const SmoothingConfig& cfg) {
  cfg.validate();
  const Tensor xb = as_batch_of_one(m, x);
  if (xb.shape[0] != 1) throw ConfigError("smooth_predict expects a single example");
  const std::size_t c = m.num_classes();

  VoteTally tally;
  tally.probs = Tensor({cfg.samples, c});
  for (std::size_t i = 0; i < cfg.samples; ++i) {
    const NoiseDraw draw{cfg.base_seed, i + 1, 0};
    const Tensor logits = noisy_forward(m, xb, cfg.sigma, draw);
    const Tensor p = softmax(logits);
    std::copy(p.data.begin(), p.data.end(), tally.probs.data.begin() + i * c);
  }
  tally.ranks = compute_ranks(tally.probs);
  tally.aggregate = apply_voting(cfg, tally.probs);
  tally.winner = argmax_class(tally.aggregate);
  return tally;
}

namespace {

// Shared Monte Carlo loop. `logit_average` selects softmax(mean logits)
// (SmoothAdv order) vs mean softmax (expectation order).
struct McForward {
  std::vector<ForwardTrace> traces;  // kept only when needed for backward
  std::vector<Tensor> sample_probs;  // per-sample softmax (soft mode)
  Tensor mean_logits;
  Tensor probs;
};

McForward mc_forward(const Model& m, const Tensor& batch, std::size_t samples, double sigma,
                     const NoiseDraw& draw, bool logit_average, bool keep_traces) {
  if (samples == 0) throw ConfigError("smoothed forward: M must be >= 1");
  McForward out;
  const double inv_m = 1.0 / static_cast<double>(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const NoiseDraw d{draw.seed, draw.sample + i + 1, 0};
    ForwardTrace trace;
    const Tensor logits =
        noisy_forward(m, batch, sigma, d, keep_traces ? &trace : nullptr);
    if (keep_traces) out.traces.push_back(std::move(trace));
    if (logit_average) {
      if (out.mean_logits.empty()) out.mean_logits = Tensor(logits.shape);
      for (std::size_t j = 0; j < logits.data.size(); ++j)
        out.mean_logits.data[j] += logits.data[j];
    } else {
      Tensor p = softmax(logits);
      if (out.probs.empty()) out.probs = Tensor(p.shape);
      for (std::size_t j = 0; j < p.data.size(); ++j) out.probs.data[j] += p.data[j];
      if (keep_traces) out.sample_probs.push_back(std::move(p));
    }
  }
  if (logit_average) {
    for (double& v : out.mean_logits.data) v *= inv_m;
    out.probs = softmax(out.mean_logits);
  } else {
    for (double& v : out.probs.data) v *= inv_m;
  }
  return out;
}

}  // namespace

Tensor smooth_soft_forward(const Model& m, const Tensor& batch, std::size_t samples,
                           double sigma, const NoiseDraw& draw) {
  return mc_forward(m, batch, samples, sigma, draw, false, false).probs;
}

Tensor smooth_logit_forward(const Model& m, const Tensor& batch, std::size_t samples,
                            double sigma, const NoiseDraw& draw) {
  return mc_forward(m, batch, samples, sigma, draw, true, false).probs;
}

SmoothLossGrad smooth_soft_loss_grad(const Model& m, const Tensor& batch,
                                     const std::vector<int>& labels, std::size_t samples,
                                     double sigma, const NoiseDraw& draw) {
  McForward mc = mc_forward(m, batch, samples, sigma, draw, false, true);
  const std::size_t b = batch.shape[0], c = mc.probs.shape[1];
  if (labels.size() != b) throw InputError("smooth_soft_loss_grad: label count mismatch");

  SmoothLossGrad out;
  out.probs = mc.probs;
  const double invb = b > 0 ? 1.0 / static_cast<double>(b) : 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    out.loss -= std::log(mc.probs.at(r, static_cast<std::size_t>(labels[r])));
  }
  out.loss *= invb;

  // d loss / d z_i = (p_iy / (M * mean_y)) * (p_i - onehot) / B.
  // At M=1 the weight is exactly 1, reducing bit-for-bit to the plain
  // cross-entropy gradient.
  out.input = Tensor(batch.shape);
  for (std::size_t i = 0; i < samples; ++i) {
    const Tensor& p = mc.sample_probs[i];
    Tensor dlogits({b, c});
    for (std::size_t r = 0; r < b; ++r) {
      const std::size_t y = static_cast<std::size_t>(labels[r]);
      const double w = p.at(r, y) / (static_cast<double>(samples) * mc.probs.at(r, y));
      const double scale = w * invb;
      double* d = dlogits.data.data() + r * c;
      const double* q = p.data.data() + r * c;
      for (std::size_t k = 0; k < c; ++k) d[k] = q[k] * scale;
      d[y] -= scale;
    }
    const Gradients g = backward(m, mc.traces[i], dlogits);
    for (std::size_t j = 0; j < out.input.data.size(); ++j)
      out.input.data[j] += g.input.data[j];
  }
  return out;
}

SmoothLossGrad smooth_logit_loss_grad(const Model& m, const Tensor& batch,
                                      const std::vector<int>& labels, std::size_t samples,
                                      double sigma, const NoiseDraw& draw) {
  McForward mc = mc_forward(m, batch, samples, sigma, draw, true, true);
  SmoothLossGrad out;
  out.probs = mc.probs;

  Tensor dmean;
  out.loss = cross_entropy_grad(mc.mean_logits, labels, &dmean);

  const double inv_m = 1.0 / static_cast<double>(samples);
  Tensor dlogits(dmean.shape);
  for (std::size_t j = 0; j < dmean.data.size(); ++j) dlogits.data[j] = dmean.data[j] * inv_m;

  out.input = Tensor(batch.shape);
  for (std::size_t i = 0; i < samples; ++i) {
    const Gradients g = backward(m, mc.traces[i], dlogits);
    for (std::size_t j = 0; j < out.input.data.size(); ++j)
      out.input.data[j] += g.input.data[j];
  }
  return out;
}

}  // namespace smooth
