#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smooth/model.hpp"

namespace smooth {

enum class Voting { Prediction, WeightedExp, WeightedTopC, Soft };

std::string voting_name(Voting v);
Voting voting_from_name(const std::string& name);

/// Fully determines the smoothed classifier given a base model.
struct SmoothingConfig {
  std::size_t samples = 1;   // M
  double sigma = 0.0;        // input noise scale at inference
  Voting voting = Voting::Prediction;
  double top_c = 0.0;        // C for WeightedTopC, in [0,1]
  std::uint64_t base_seed = 0;

  void validate() const;
};

/// Per-sample probabilities, ranks and the aggregated vote.
struct VoteTally {
  Tensor probs;              // (M, classes) softmax rows per Monte Carlo sample
  std::vector<int> ranks;    // (M, classes) row-major, 1-based rank of each class
  std::vector<double> aggregate;
  int winner = -1;
};

/// 1-based ranks by descending probability; ties go to the lower class index.
std::vector<int> compute_ranks(const Tensor& probs);

/// Argmax with ties broken by lowest class index.
int argmax_class(const std::vector<double>& aggregate);

// Voting functions: (M, classes) per-sample probabilities -> per-class mass.
std::vector<double> vote_prediction(const Tensor& probs);
std::vector<double> vote_weighted_exp(const Tensor& probs);
std::vector<double> vote_weighted_topc(const Tensor& probs, double c);
std::vector<double> vote_soft(const Tensor& probs);

/// Smoothed prediction over cfg.samples noisy evaluations with stream ids
/// (base_seed, 1..M). `x` is one example (with or without leading batch-1).
VoteTally smooth_predict(const Model& m, const Tensor& x, const SmoothingConfig& cfg);

/// (1/M) * sum_i softmax(f(x + eta_i)): probability averaging, the
/// differentiable smoothed forward. Sample i uses stream (draw.seed,
/// draw.sample + i). Returns (B, classes).
Tensor smooth_soft_forward(const Model& m, const Tensor& batch, std::size_t samples,
                           double sigma, const NoiseDraw& draw);

/// softmax((1/M) * sum_i f(x + eta_i)): logit averaging before the softmax.
Tensor smooth_logit_forward(const Model& m, const Tensor& batch, std::size_t samples,
                            double sigma, const NoiseDraw& draw);

/// Smoothed probabilities plus the input gradient of the mean cross-entropy
/// loss through them; the gradient source for smoothing-aware attacks.
struct SmoothLossGrad {
  Tensor probs;
  double loss = 0.0;
  Tensor input;
};

SmoothLossGrad smooth_soft_loss_grad(const Model& m, const Tensor& batch,
                                     const std::vector<int>& labels, std::size_t samples,
                                     double sigma, const NoiseDraw& draw);

SmoothLossGrad smooth_logit_loss_grad(const Model& m, const Tensor& batch,
                                      const std::vector<int>& labels, std::size_t samples,
                                      double sigma, const NoiseDraw& draw);

}  // namespace smooth
