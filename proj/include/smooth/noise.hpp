#pragma once

#include <cstdint>

#include "smooth/rng.hpp"
#include "smooth/tensor.hpp"

namespace smooth {

enum class NoiseTarget { Input, Weight, Activation };

/// Gaussian noise attached to one layer. For Weight targets the injected
/// perturbation is alpha * base_sigma * std(W) * xi, so alpha stays
/// dimensionless; Input/Activation targets use alpha * base_sigma directly.
struct NoiseSpec {
  NoiseTarget target = NoiseTarget::Weight;
  double base_sigma = 1.0;
  double alpha = 0.0;
  bool learnable = false;
  bool enabled = false;

  double effective_scale() const { return alpha * base_sigma; }
};

/// Addresses one reproducible noise stream: (seed, Monte Carlo sample
/// index, layer slot). Same triple always reproduces the same vector.
struct NoiseDraw {
  std::uint64_t seed = 0;
  std::uint64_t sample = 0;
  std::uint64_t layer = 0;

  std::uint64_t stream_key() const { return rng::derive(seed, sample, layer); }
  NoiseDraw with_layer(std::uint64_t l) const { return {seed, sample, l}; }
};

/// i.i.d. N(0, (alpha*base_sigma)^2) tensor for an enabled spec.
/// Exact zero tensor when the effective scale is 0.
Tensor draw_gaussian(const NoiseSpec& spec, const std::vector<std::size_t>& shape,
                     const NoiseDraw& draw);

/// N(0,1) tensor from a raw stream key.
Tensor standard_gaussian(const std::vector<std::size_t>& shape, std::uint64_t key);

}  // namespace smooth
