#include "smooth/svm.hpp"

#include <cmath>

#include "smooth/error.hpp"
#include "smooth/rng.hpp"
#include "smooth/util.hpp"

namespace smooth {

double SvmModel::decision(const double* x) const {
  double acc = b;
  for (std::size_t d = 0; d < w.size(); ++d) acc += w[d] * x[d];
  return acc;
}

SvmModel train_linear_svm(const Dataset& data, std::size_t iterations, double lr, double reg) {
  if (data.size() == 0) throw InputError("svm: empty dataset");
  if (data.classes != 2) throw InputError("svm: needs exactly two classes");
  const std::size_t n = data.size();
  const std::size_t dim = data.x.numel() / n;

  SvmModel svm;
  svm.w.assign(dim, 0.0);
  std::vector<double> gw(dim);
  const double invn = 1.0 / static_cast<double>(n);
  for (std::size_t it = 0; it < iterations; ++it) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double y = data.y[i] == 1 ? 1.0 : -1.0;
      const double* x = data.x.data.data() + i * dim;
      if (y * svm.decision(x) < 1.0) {
        for (std::size_t d = 0; d < dim; ++d) gw[d] -= y * x[d];
        gb -= y;
      }
    }
    const double step = lr / (1.0 + 0.01 * static_cast<double>(it));
    for (std::size_t d = 0; d < dim; ++d)
      svm.w[d] -= step * (reg * svm.w[d] + gw[d] * invn);
    svm.b -= step * gb * invn;
  }
  return svm;
}

double svm_accuracy(const SvmModel& svm, const Dataset& data) {
  const std::size_t n = data.size();
  if (n == 0) return 0.0;
  const std::size_t dim = data.x.numel() / n;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = data.y[i] == 1 ? 1.0 : -1.0;
    if (y * svm.decision(data.x.data.data() + i * dim) > 0.0) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

SvmNoiseReport svm_noise_experiment(std::size_t dim, std::size_t n, double sigma,
                                    std::size_t trials, std::uint64_t seed, double epsilon,
                                    double separation) {
  if (trials < 1) throw ConfigError("svm experiment: trials must be >= 1");
  if (sigma < 0.0) throw ConfigError("svm experiment: sigma must be >= 0");

  const Dataset data = make_blobs(2, dim, separation, n, seed);
  const SvmModel svm = train_linear_svm(data);

  SvmNoiseReport rep;
  rep.trials = trials;
  rep.sigma = sigma;
  rep.epsilon = epsilon;
  rep.train_accuracy = svm_accuracy(svm, data);
  rep.separable = rep.train_accuracy == 100.0;

  double l1 = 0.0;
  for (double v : svm.w) l1 += std::abs(v);
  const double invn = 1.0 / static_cast<double>(n);

  double hinge_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = data.y[i] == 1 ? 1.0 : -1.0;
    const double margin = 1.0 - y * svm.decision(data.x.data.data() + i * dim);
    hinge_mean += margin > 0.0 ? margin : 0.0;
  }
  hinge_mean *= invn;
  rep.noiseless_objective = hinge_mean + epsilon * l1;

  // Per trial: noiseless objective plus the attacker-visible zero-mean term
  // -(1/n) sum_i y_i * (w . eta_i). At sigma=0 every trial IS the noiseless
  // objective, so no sampling is needed.
  if (sigma == 0.0) {
    rep.noisy_mc_mean = rep.noiseless_objective;
    rep.clt_half_width = 0.0;
    return rep;
  }

  const std::uint64_t key = rng::derive(seed, 0x57A7);
  std::vector<double> trial_vals(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    double noise_term = 0.0;
    const std::uint64_t tkey = rng::derive(key, t);
    for (std::size_t i = 0; i < n; ++i) {
      const double y = data.y[i] == 1 ? 1.0 : -1.0;
      double dot = 0.0;
      for (std::size_t d = 0; d < dim; ++d)
        dot += svm.w[d] * sigma * rng::gaussian(tkey, i * dim + d);
      noise_term -= y * dot;
    }
    trial_vals[t] = rep.noiseless_objective + noise_term * invn;
  }

  const MeanStd stats = mean_std(trial_vals);
  rep.noisy_mc_mean = stats.mean;
  rep.clt_half_width =
      stats.std_dev ? 3.0 * *stats.std_dev / std::sqrt(static_cast<double>(trials)) : 0.0;
  return rep;
}

}  // namespace smooth
