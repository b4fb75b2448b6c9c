#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "smooth/model.hpp"

namespace smooth {

enum class AttackFamily { None, Fgsm, Pgd, Epgd, SmoothAdvPgd, Nes };

std::string attack_family_name(AttackFamily f);
AttackFamily attack_family_from_name(const std::string& name);

struct AttackConfig {
  AttackFamily family = AttackFamily::Pgd;
  double epsilon = 8.0 / 255.0;      // l-inf budget in input units
  double step_alpha = 0.0;           // 0 -> default 2.5*eps/k
  std::size_t steps = 7;             // k
  std::size_t backward_samples = 1;  // M_b for smoothing-aware gradients
  double sigma_attack = 0.0;
  bool random_start = false;
  std::size_t nes_population = 32;   // antithetic directions per step, even
  double nes_sigma = 0.01;
  std::size_t nes_query_budget = 0;  // 0 = unlimited, per-example count
  std::uint64_t seed = 0;

  double alpha_or_default() const;
  void validate() const;
};

/// "family:pgd,eps:0.031,k:7,alpha:0.011" (comma-separated key:value).
AttackConfig parse_attack_spec(const std::string& spec);
/// Canonical round-trippable spec string; stable field order.
std::string format_attack_spec(const AttackConfig& cfg);

// White-box attacks. All outputs satisfy ||xh - x||inf <= epsilon and stay
// inside the model's input domain.
Tensor fgsm(const Model& m, const Tensor& x, const std::vector<int>& y,
            const AttackConfig& cfg);
Tensor pgd(const Model& m, const Tensor& x, const std::vector<int>& y,
           const AttackConfig& cfg);
Tensor epgd(const Model& m, const Tensor& x, const std::vector<int>& y,
            const AttackConfig& cfg);
Tensor smoothadv_pgd(const Model& m, const Tensor& x, const std::vector<int>& y,
                     const AttackConfig& cfg);

/// Dispatch on cfg.family (white-box families only).
Tensor run_attack(const Model& m, const Tensor& x, const std::vector<int>& y,
                  const AttackConfig& cfg);

/// Black-box probe: probabilities for a batch. Deliberately the only
/// capability transfer/NES attacks get -- no gradient entry point exists.
using PredictFn = std::function<Tensor(const Tensor& batch)>;

struct TransferResult {
  Tensor x_hat;
  std::vector<bool> target_correct;  // per example, evaluated once on x_hat
};

/// Crafts x_hat on the source model (per cfg.family), then queries the
/// black-box target exactly once per example.
TransferResult transfer_attack(const Model& source, const PredictFn& target_predict,
                               const Tensor& x, const std::vector<int>& y,
                               const AttackConfig& cfg);

struct NesResult {
  Tensor x_hat;
  bool budget_exhausted = false;
};

/// Gradient-free ascent with antithetic NES gradient estimates
/// (1/(P*sigma)) * sum_j L(x + sigma*u_j) * u_j; projection as pgd.
NesResult nes_blackbox(const PredictFn& predict_probs, const Tensor& x,
                       const std::vector<int>& y, const AttackConfig& cfg,
                       double domain_lo = 0.0, double domain_hi = 1.0);

/// One raw NES estimate at iteration `iter` (the attack's inner formula,
/// exposed so its statistics can be checked directly).
Tensor nes_gradient_estimate(const PredictFn& predict_probs, const Tensor& x,
                             const std::vector<int>& y, const AttackConfig& cfg,
                             std::size_t iter);

/// Stream seed used by one attack iteration's gradient evaluation.
std::uint64_t attack_iter_seed(std::uint64_t seed, std::size_t iter);

// Shared projection/step helpers (also used by training-time inner attacks).
inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }
void linf_ball_bounds(const Tensor& x, double epsilon, double domain_lo, double domain_hi,
                      Tensor& lo, Tensor& hi);

}  // namespace smooth
