#include "smooth/layers.hpp"

#include "smooth/error.hpp"

namespace smooth {

std::string layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "Dense";
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::Flatten: return "Flatten";
    case LayerKind::AvgPool: return "AvgPool";
  }
  return "?";
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  LayerSpec l;
  l.kind = LayerKind::Dense;
  l.in = in;
  l.out = out;
  l.weight = Tensor({in, out});
  l.bias = Tensor({out});
  return l;
}

LayerSpec LayerSpec::conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                            std::size_t stride, std::size_t pad) {
  LayerSpec l;
  l.kind = LayerKind::Conv2D;
  l.in_ch = in_ch;
  l.out_ch = out_ch;
  l.kernel = kernel;
  l.stride = stride;
  l.pad = pad;
  l.weight = Tensor({out_ch, in_ch, kernel, kernel});
  l.bias = Tensor({out_ch});
  return l;
}

LayerSpec LayerSpec::relu() {
  LayerSpec l;
  l.kind = LayerKind::ReLU;
  return l;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec l;
  l.kind = LayerKind::Flatten;
  return l;
}

LayerSpec LayerSpec::avg_pool(std::size_t window) {
  LayerSpec l;
  l.kind = LayerKind::AvgPool;
  l.window = window;
  return l;
}

namespace {
[[noreturn]] void bad_layer(std::size_t index, const std::string& what) {
  throw ConfigError("layer " + std::to_string(index) + ": " + what);
}
}  // namespace

void LayerSpec::validate(std::size_t index) const {
  switch (kind) {
    case LayerKind::Dense:
      if (in == 0 || out == 0) bad_layer(index, "Dense dims must be positive");
      if (weight.shape != std::vector<std::size_t>{in, out})
        bad_layer(index, "Dense weight shape " + weight.shape_str() + " != (in,out)");
      if (bias.shape != std::vector<std::size_t>{out})
        bad_layer(index, "Dense bias shape " + bias.shape_str() + " != (out)");
      break;
    case LayerKind::Conv2D:
      if (in_ch == 0 || out_ch == 0 || kernel == 0 || stride == 0)
        bad_layer(index, "Conv2D dims must be positive");
      if (weight.shape != std::vector<std::size_t>{out_ch, in_ch, kernel, kernel})
        bad_layer(index, "Conv2D weight shape " + weight.shape_str() + " mismatch");
      if (bias.shape != std::vector<std::size_t>{out_ch})
        bad_layer(index, "Conv2D bias shape " + bias.shape_str() + " != (out_ch)");
      break;
    case LayerKind::AvgPool:
      if (window == 0) bad_layer(index, "AvgPool window must be positive");
      break;
    case LayerKind::ReLU:
    case LayerKind::Flatten:
      break;
  }
}

std::vector<std::size_t> layer_output_shape(const LayerSpec& layer,
                                            const std::vector<std::size_t>& in_shape,
                                            std::size_t index) {
  switch (layer.kind) {
    case LayerKind::Dense: {
      if (in_shape.size() != 1 || in_shape[0] != layer.in)
        bad_layer(index, "Dense expects flat input of size " + std::to_string(layer.in));
      return {layer.out};
    }
    case LayerKind::Conv2D: {
      if (in_shape.size() != 3 || in_shape[0] != layer.in_ch)
        bad_layer(index, "Conv2D expects (in_ch,H,W) input with in_ch=" +
                             std::to_string(layer.in_ch));
      const std::size_t h = in_shape[1], w = in_shape[2];
      if (h + 2 * layer.pad < layer.kernel || w + 2 * layer.pad < layer.kernel)
        bad_layer(index, "Conv2D kernel larger than padded input");
      const std::size_t oh = (h + 2 * layer.pad - layer.kernel) / layer.stride + 1;
      const std::size_t ow = (w + 2 * layer.pad - layer.kernel) / layer.stride + 1;
      return {layer.out_ch, oh, ow};
    }
    case LayerKind::ReLU:
      return in_shape;
    case LayerKind::Flatten:
      return {shape_numel(in_shape)};
    case LayerKind::AvgPool: {
      if (in_shape.size() != 3) bad_layer(index, "AvgPool expects (C,H,W) input");
      if (in_shape[1] % layer.window != 0 || in_shape[2] % layer.window != 0)
        bad_layer(index, "AvgPool window must divide spatial dims");
      return {in_shape[0], in_shape[1] / layer.window, in_shape[2] / layer.window};
    }
  }
  bad_layer(index, "unknown layer kind");
}

}  // namespace smooth
