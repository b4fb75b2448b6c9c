#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "smooth/tensor.hpp"

namespace smooth {

enum class LayerKind { Dense, Conv2D, ReLU, Flatten, AvgPool };

std::string layer_kind_name(LayerKind k);

/// One layer of a feed-forward classifier. Parameter tensors live inline;
/// only Dense and Conv2D carry any.
struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;

  // Dense
  std::size_t in = 0, out = 0;
  // Conv2D
  std::size_t in_ch = 0, out_ch = 0, kernel = 0, stride = 1, pad = 0;
  // AvgPool
  std::size_t window = 0;

  Tensor weight;  // Dense: (in,out); Conv2D: (out_ch,in_ch,k,k)
  Tensor bias;    // (out) / (out_ch)

  bool has_params() const { return kind == LayerKind::Dense || kind == LayerKind::Conv2D; }

  static LayerSpec dense(std::size_t in, std::size_t out);
  static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                          std::size_t stride = 1, std::size_t pad = 0);
  static LayerSpec relu();
  static LayerSpec flatten();
  static LayerSpec avg_pool(std::size_t window);

  /// Throws ConfigError when parameter shapes disagree with the declared dims.
  void validate(std::size_t index) const;
};

/// Per-example output shape of `layer` applied to per-example `in_shape`.
/// Throws ConfigError when the shapes do not compose.
std::vector<std::size_t> layer_output_shape(const LayerSpec& layer,
                                            const std::vector<std::size_t>& in_shape,
                                            std::size_t index);

}  // namespace smooth
