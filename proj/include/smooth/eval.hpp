#pragma once

#include <optional>
#include <string>
#include <vector>

#include "smooth/config.hpp"
#include "smooth/csv.hpp"
#include "smooth/data.hpp"
#include "smooth/model.hpp"
#include "smooth/smoothing.hpp"

namespace smooth {

/// One evaluated configuration with per-seed accuracies retained.
struct EvalRow {
  std::string model_id;
  std::string scheme;
  std::size_t samples = 1;
  double sigma = 0.0;
  std::string attack_spec = "none";
  std::size_t grad_evals = 0;  // k * M_b for white-box attacks
  std::vector<double> per_seed_clean;
  std::vector<double> per_seed_adv;
  double wall_ms = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
};

/// Smoothed accuracy (percent) of the model on (X, y); per-example noise
/// streams derive from (seed, example index).
double smoothed_accuracy(const Model& m, const Tensor& x, const std::vector<int>& y,
                         const SmoothingConfig& smoothing, std::uint64_t seed,
                         std::size_t threads);

/// Clean and (optionally) attacked accuracy over num_seeds independent runs.
/// White-box families attack the base model; the smoothed classifier is then
/// evaluated on the crafted inputs. NES queries base-model probabilities.
EvalRow evaluate(const Model& m, const Dataset& test,
                 const std::optional<AttackConfig>& attack, const SmoothingConfig& smoothing,
                 std::size_t num_seeds, std::uint64_t eval_seed, const std::string& model_id,
                 std::size_t threads);

EvalReport sweep_sigma_M(const Model& m, const Dataset& test, const ExperimentConfig& cfg,
                         const std::string& model_id);
EvalReport sweep_kM(const Model& m, const Dataset& test, const ExperimentConfig& cfg,
                    const std::string& model_id);
EvalReport sweep_epsilon(const Model& m, const Dataset& test, const ExperimentConfig& cfg,
                         const std::string& model_id);

std::vector<std::string> report_csv_header();
CsvWriter report_to_csv(const EvalReport& report);

/// Per-sample vote dump: sample_index, class, probability, rank.
CsvWriter tally_to_csv(const VoteTally& tally);

}  // namespace smooth
