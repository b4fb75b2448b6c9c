#include "smooth/noise.hpp"

#include "smooth/error.hpp"

namespace smooth {

Tensor standard_gaussian(const std::vector<std::size_t>& shape, std::uint64_t key) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    t.data[i] = rng::gaussian(key, i);
  }
  return t;
}

Tensor draw_gaussian(const NoiseSpec& spec, const std::vector<std::size_t>& shape,
                     const NoiseDraw& draw) {
  if (!spec.enabled) {
    throw ConfigError("draw_gaussian: noise spec is disabled");
  }
  const double scale = spec.effective_scale();
  if (scale < 0.0) {
    throw ConfigError("draw_gaussian: negative effective noise scale");
  }
  if (scale == 0.0) {
    return Tensor(shape);  // exact zeros, no stream consumed
  }
  Tensor t = standard_gaussian(shape, draw.stream_key());
  for (double& v : t.data) v *= scale;
  return t;
}

}  // namespace smooth
