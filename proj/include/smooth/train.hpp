#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smooth/attack.hpp"
#include "smooth/data.hpp"
#include "smooth/model.hpp"

namespace smooth {

enum class TrainMode { Clean, Adversarial, CniIW, Trades, EpgdAdv };
enum class Selection { Best, Diverged };

std::string train_mode_name(TrainMode m);
TrainMode train_mode_from_name(const std::string& name);
std::string selection_name(Selection s);
Selection selection_from_name(const std::string& name);

struct TrainConfig {
  TrainMode mode = TrainMode::Clean;
  double adv_weight = 0.5;        // w in the convex combination loss
  double bernoulli_q = 0.5;       // q: probability the adversarial delta is applied
  double sigma_train = 0.0;       // Gaussian input noise during cni_iw training
  double trades_inv_lambda = 1.0; // 1/lambda weight on the robust term
  AttackConfig attack;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double val_fraction = 0.1;
  Selection selection = Selection::Best;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainLogRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_clean_acc = 0.0;
  double val_adv_acc = 0.0;
  double lr = 0.0;
  std::vector<double> alphas;  // one per layer
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
};

struct StepResult {
  double clean_loss = 0.0;
  double adv_loss = 0.0;
  double total = 0.0;
};

// One optimizer step each. `step_index` seeds the per-step noise, attack and
// Bernoulli streams, so whole runs replay exactly from (config, seed).

/// Layer-noise draw shared by every forward inside one training step.
NoiseDraw train_step_draw(const TrainConfig& cfg, std::uint64_t step_index);
/// The attack configuration (with derived seed) used inside one step.
AttackConfig train_step_attack(const TrainConfig& cfg, std::uint64_t step_index);

/// (1-w)*CE(f(x),y) + w*CE(f(xh),y) with xh from cfg.attack on the
/// current model.
StepResult adversarial_training_step(Model& m, SgdState& opt, const Tensor& xb,
                                     const std::vector<int>& yb, const TrainConfig& cfg,
                                     std::uint64_t step_index);

/// Single CE loss on x + N(0, sigma_train^2) + Ber(q) * delta.
double cni_iw_step(Model& m, SgdState& opt, const Tensor& xb, const std::vector<int>& yb,
                   const TrainConfig& cfg, std::uint64_t step_index);

/// CE(f(x),y) + (1/lambda)*CE(f(xh), stopgrad softmax f(x)), with xh
/// maximizing the soft-target term inside the epsilon-ball.
StepResult trades_step(Model& m, SgdState& opt, const Tensor& xb, const std::vector<int>& yb,
                       const TrainConfig& cfg, std::uint64_t step_index);

/// Plain cross-entropy step; the w=0 / q=0+sigma=0 reduction target.
double clean_step(Model& m, SgdState& opt, const Tensor& xb, const std::vector<int>& yb,
                  const TrainConfig& cfg, std::uint64_t step_index);

struct FinetuneResult {
  Model model;    // best epoch (or worst for Selection::Diverged)
  Model final;    // last epoch, for reference
  TrainLog log;
};

/// Runs cfg.epochs of the mode's step over seeded shuffled batches, logging
/// per-epoch validation accuracy; picks the best (or worst) epoch snapshot
/// by clean validation accuracy.
FinetuneResult finetune(const Model& start, const Dataset& train_data, const TrainConfig& cfg);

/// Deterministic clean accuracy (noise off), percent.
double clean_accuracy(const Model& m, const Dataset& data);

}  // namespace smooth
