#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "smooth/layers.hpp"
#include "smooth/noise.hpp"
#include "smooth/tensor.hpp"

namespace smooth {

/// Feed-forward classifier: ordered layers, optional per-layer noise,
/// and the closed input interval the data lives in.
struct Model {
  std::vector<LayerSpec> layers;
  std::vector<NoiseSpec> noise;  // parallel to layers; default-disabled
  std::vector<std::size_t> input_shape;  // per-example, e.g. {64} or {1,8,8}
  double domain_lo = 0.0;
  double domain_hi = 1.0;

  std::size_t num_classes() const;
  /// Shape checks across consecutive layers plus parameter validation.
  void validate() const;
  /// Ensures noise.size()==layers.size(), padding with disabled specs.
  void sync_noise();
  bool any_noise_enabled() const;
  std::vector<double> alphas() const;
};

/// Everything backward() needs from one forward pass.
struct ForwardTrace {
  std::vector<Tensor> inputs;        // input actually seen by each layer
  std::vector<Tensor> used_weights;  // effective (possibly perturbed) weights
  std::vector<Tensor> weight_xi;     // N(0,1) draw behind weight noise, per layer
  std::vector<double> weight_std;    // std(W) used by weight noise, per layer
  std::vector<Tensor> add_xi;        // N(0,1) draw behind input/activation noise
  Tensor logits;
};

/// Gradient of a scalar loss w.r.t. everything trainable plus the input.
struct Gradients {
  std::vector<Tensor> weight;  // per layer; empty tensor when layer has none
  std::vector<Tensor> bias;
  std::vector<double> alpha;   // per layer; 0 unless learnable noise enabled
  Tensor input;                // same shape as the batch
};

constexpr std::uint64_t kInputNoiseSlot = 0;  // layer slots start at 1

/// Runs the model on a batch (leading dim = batch size). When `draw` is
/// given, enabled layer noise is injected from its streams; when null, the
/// pass is deterministic. `trace` captures what backward() needs.
Tensor forward(const Model& m, const Tensor& batch, const NoiseDraw* draw = nullptr,
               ForwardTrace* trace = nullptr);

/// forward() on batch + eta with input noise eta ~ N(0, sigma_input^2)
/// drawn from slot 0 of `draw`. Bit-identical to forward() when
/// sigma_input==0 and all layer noise is disabled.
Tensor noisy_forward(const Model& m, const Tensor& batch, double sigma_input,
                     const NoiseDraw& draw, ForwardTrace* trace = nullptr);

/// Reverse pass from d(loss)/d(logits). Pure given the trace.
Gradients backward(const Model& m, const ForwardTrace& trace, const Tensor& dlogits);

/// Row-wise softmax over the last axis.
Tensor softmax(const Tensor& logits);

/// Mean negative log-likelihood of integer labels under softmax(logits).
double cross_entropy(const Tensor& logits, const std::vector<int>& labels);

/// Fused loss + d(loss)/d(logits) = (softmax - onehot)/batch.
double cross_entropy_grad(const Tensor& logits, const std::vector<int>& labels,
                          Tensor* dlogits);

/// Parameter (and alpha) gradients of the mean cross-entropy loss.
Gradients grad_params(const Model& m, const Tensor& batch, const std::vector<int>& labels,
                      const NoiseDraw* draw = nullptr, double* loss_out = nullptr);

/// Input gradient of the mean cross-entropy loss.
Tensor grad_input(const Model& m, const Tensor& batch, const std::vector<int>& labels,
                  const NoiseDraw* draw = nullptr, double* loss_out = nullptr);

/// Pathwise d(loss)/d(alpha) per layer with the Gaussian draw held fixed.
std::vector<double> grad_alpha(const Model& m, const Tensor& batch,
                               const std::vector<int>& labels, const NoiseDraw& draw);

/// Momentum buffers for sgd_step; zero-initialized lazily.
struct SgdState {
  std::vector<Tensor> vel_weight, vel_bias;
  std::vector<double> vel_alpha;
};

/// SGD with classical momentum and L2 weight decay (decay skips alphas).
/// With momentum=0 and weight_decay=0: p' = p - lr*g exactly.
void sgd_step(Model& m, const Gradients& g, double lr, double momentum,
              double weight_decay, SgdState* state = nullptr);

/// Kaiming-uniform style initialization of all parameter tensors.
void init_params(Model& m, std::uint64_t seed);

}  // namespace smooth
