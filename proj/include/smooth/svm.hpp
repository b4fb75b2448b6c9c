#pragma once

#include <cstdint>
#include <vector>

#include "smooth/data.hpp"

namespace smooth {

struct SvmModel {
  std::vector<double> w;
  double b = 0.0;

  double decision(const double* x) const;
};

/// Hinge-loss subgradient training of a linear SVM on {0,1}-labeled data.
SvmModel train_linear_svm(const Dataset& data, std::size_t iterations = 400,
                          double lr = 0.5, double reg = 1e-3);

/// Fraction of correctly signed margins, percent.
double svm_accuracy(const SvmModel& svm, const Dataset& data);

struct SvmNoiseReport {
  double noiseless_objective = 0.0;  // mean hinge + eps*||w||_1
  double noisy_mc_mean = 0.0;        // Monte Carlo mean over noise trials
  double clt_half_width = 0.0;       // 3 * sd / sqrt(trials)
  double train_accuracy = 0.0;
  bool separable = false;
  std::size_t trials = 0;
  double sigma = 0.0;
  double epsilon = 0.0;
};

/// Monte Carlo check that zero-mean input noise leaves the expected
/// adversarial hinge objective unchanged: the per-trial objective is
/// eps*||w||_1 - y*(w . eta) + hinge(x), whose mean is the noiseless
/// adversarial objective.
SvmNoiseReport svm_noise_experiment(std::size_t dim, std::size_t n, double sigma,
                                    std::size_t trials, std::uint64_t seed,
                                    double epsilon = 0.1, double separation = 8.0);

}  // namespace smooth
