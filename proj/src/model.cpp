#include "smooth/model.hpp"

#include <algorithm>
#include <cmath>

#include "smooth/error.hpp"

namespace smooth {

namespace {

std::string layer_label(const Model& m, std::size_t i) {
  return "layer " + std::to_string(i) + " (" + layer_kind_name(m.layers[i].kind) + ")";
}

std::vector<std::size_t> with_batch(std::size_t b, const std::vector<std::size_t>& per_example) {
  std::vector<std::size_t> s;
  s.reserve(per_example.size() + 1);
  s.push_back(b);
  s.insert(s.end(), per_example.begin(), per_example.end());
  return s;
}

std::vector<std::size_t> drop_batch(const Tensor& t) {
  return std::vector<std::size_t>(t.shape.begin() + 1, t.shape.end());
}

// ---- layer forward kernels (batch-leading tensors) ----

Tensor dense_forward(const LayerSpec& l, const Tensor& x, const Tensor& w) {
  const std::size_t b = x.shape[0];
  Tensor y({b, l.out});
  for (std::size_t r = 0; r < b; ++r) {
    const double* xr = x.data.data() + r * l.in;
    double* yr = y.data.data() + r * l.out;
    for (std::size_t o = 0; o < l.out; ++o) yr[o] = l.bias[o];
    for (std::size_t i = 0; i < l.in; ++i) {
      const double xi = xr[i];
      const double* wrow = w.data.data() + i * l.out;
      for (std::size_t o = 0; o < l.out; ++o) yr[o] += xi * wrow[o];
    }
  }
  return y;
}

void dense_backward(const LayerSpec& l, const Tensor& x, const Tensor& w, const Tensor& dy,
                    Tensor& dx, Tensor& dw, Tensor& db) {
  const std::size_t b = x.shape[0];
  dx = Tensor({b, l.in});
  dw = Tensor(w.shape);
  db = Tensor({l.out});
  for (std::size_t r = 0; r < b; ++r) {
    const double* xr = x.data.data() + r * l.in;
    const double* dyr = dy.data.data() + r * l.out;
    double* dxr = dx.data.data() + r * l.in;
    for (std::size_t o = 0; o < l.out; ++o) db[o] += dyr[o];
    for (std::size_t i = 0; i < l.in; ++i) {
      const double* wrow = w.data.data() + i * l.out;
      double* dwrow = dw.data.data() + i * l.out;
      double acc = 0.0;
      for (std::size_t o = 0; o < l.out; ++o) {
        acc += dyr[o] * wrow[o];
        dwrow[o] += xr[i] * dyr[o];
      }
      dxr[i] = acc;
    }
  }
}

Tensor conv_forward(const LayerSpec& l, const Tensor& x, const Tensor& w) {
  const std::size_t b = x.shape[0], h = x.shape[2], wd = x.shape[3];
  const std::size_t oh = (h + 2 * l.pad - l.kernel) / l.stride + 1;
  const std::size_t ow = (wd + 2 * l.pad - l.kernel) / l.stride + 1;
  Tensor y({b, l.out_ch, oh, ow});
  const std::size_t in_plane = h * wd, out_plane = oh * ow;
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t oc = 0; oc < l.out_ch; ++oc) {
      double* yp = y.data.data() + (r * l.out_ch + oc) * out_plane;
      for (std::size_t i = 0; i < out_plane; ++i) yp[i] = l.bias[oc];
      for (std::size_t ic = 0; ic < l.in_ch; ++ic) {
        const double* xp = x.data.data() + (r * l.in_ch + ic) * in_plane;
        const double* wp = w.data.data() + (oc * l.in_ch + ic) * l.kernel * l.kernel;
        for (std::size_t yy = 0; yy < oh; ++yy) {
          for (std::size_t xx = 0; xx < ow; ++xx) {
            double acc = 0.0;
            for (std::size_t kh = 0; kh < l.kernel; ++kh) {
              const std::ptrdiff_t ih =
                  static_cast<std::ptrdiff_t>(yy * l.stride + kh) -
                  static_cast<std::ptrdiff_t>(l.pad);
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t kw = 0; kw < l.kernel; ++kw) {
                const std::ptrdiff_t iw =
                    static_cast<std::ptrdiff_t>(xx * l.stride + kw) -
                    static_cast<std::ptrdiff_t>(l.pad);
                if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(wd)) continue;
                acc += xp[ih * wd + iw] * wp[kh * l.kernel + kw];
              }
            }
            yp[yy * ow + xx] += acc;
          }
        }
      }
    }
  }
  return y;
}

void conv_backward(const LayerSpec& l, const Tensor& x, const Tensor& w, const Tensor& dy,
                   Tensor& dx, Tensor& dw, Tensor& db) {
  const std::size_t b = x.shape[0], h = x.shape[2], wd = x.shape[3];
  const std::size_t oh = dy.shape[2], ow = dy.shape[3];
  dx = Tensor(x.shape);
  dw = Tensor(w.shape);
  db = Tensor({l.out_ch});
  const std::size_t in_plane = h * wd, out_plane = oh * ow;
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t oc = 0; oc < l.out_ch; ++oc) {
      const double* dyp = dy.data.data() + (r * l.out_ch + oc) * out_plane;
      for (std::size_t i = 0; i < out_plane; ++i) db[oc] += dyp[i];
      for (std::size_t ic = 0; ic < l.in_ch; ++ic) {
        const double* xp = x.data.data() + (r * l.in_ch + ic) * in_plane;
        double* dxp = dx.data.data() + (r * l.in_ch + ic) * in_plane;
        const double* wp = w.data.data() + (oc * l.in_ch + ic) * l.kernel * l.kernel;
        double* dwp = dw.data.data() + (oc * l.in_ch + ic) * l.kernel * l.kernel;
        for (std::size_t yy = 0; yy < oh; ++yy) {
          for (std::size_t xx = 0; xx < ow; ++xx) {
            const double g = dyp[yy * ow + xx];
            if (g == 0.0) continue;
            for (std::size_t kh = 0; kh < l.kernel; ++kh) {
              const std::ptrdiff_t ih =
                  static_cast<std::ptrdiff_t>(yy * l.stride + kh) -
                  static_cast<std::ptrdiff_t>(l.pad);
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t kw = 0; kw < l.kernel; ++kw) {
                const std::ptrdiff_t iw =
                    static_cast<std::ptrdiff_t>(xx * l.stride + kw) -
                    static_cast<std::ptrdiff_t>(l.pad);
                if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(wd)) continue;
                dxp[ih * wd + iw] += g * wp[kh * l.kernel + kw];
                dwp[kh * l.kernel + kw] += g * xp[ih * wd + iw];
              }
            }
          }
        }
      }
    }
  }
}

Tensor avgpool_forward(const LayerSpec& l, const Tensor& x) {
  const std::size_t b = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
  const std::size_t oh = h / l.window, ow = w / l.window;
  const double inv = 1.0 / static_cast<double>(l.window * l.window);
  Tensor y({b, c, oh, ow});
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* xp = x.data.data() + (r * c + ch) * h * w;
      double* yp = y.data.data() + (r * c + ch) * oh * ow;
      for (std::size_t yy = 0; yy < oh; ++yy) {
        for (std::size_t xx = 0; xx < ow; ++xx) {
          double acc = 0.0;
          for (std::size_t kh = 0; kh < l.window; ++kh)
            for (std::size_t kw = 0; kw < l.window; ++kw)
              acc += xp[(yy * l.window + kh) * w + xx * l.window + kw];
          yp[yy * ow + xx] = acc * inv;
        }
      }
    }
  }
  return y;
}

Tensor avgpool_backward(const LayerSpec& l, const Tensor& x, const Tensor& dy) {
  const std::size_t b = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
  const std::size_t oh = h / l.window, ow = w / l.window;
  const double inv = 1.0 / static_cast<double>(l.window * l.window);
  Tensor dx(x.shape);
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* dyp = dy.data.data() + (r * c + ch) * oh * ow;
      double* dxp = dx.data.data() + (r * c + ch) * h * w;
      for (std::size_t yy = 0; yy < oh; ++yy)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          const double g = dyp[yy * ow + xx] * inv;
          for (std::size_t kh = 0; kh < l.window; ++kh)
            for (std::size_t kw = 0; kw < l.window; ++kw)
              dxp[(yy * l.window + kh) * w + xx * l.window + kw] = g;
        }
    }
  }
  return dx;
}

double population_std(const Tensor& w) {
  if (w.data.empty()) return 0.0;
  double mean = 0.0;
  for (double v : w.data) mean += v;
  mean /= static_cast<double>(w.data.size());
  double var = 0.0;
  for (double v : w.data) var += (v - mean) * (v - mean);
  var /= static_cast<double>(w.data.size());
  return std::sqrt(var);
}

double tensor_dot(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) acc += a.data[i] * b.data[i];
  return acc;
}

}  // namespace

std::size_t Model::num_classes() const {
  std::vector<std::size_t> s = input_shape;
  for (std::size_t i = 0; i < layers.size(); ++i) s = layer_output_shape(layers[i], s, i);
  if (s.size() != 1) throw ConfigError("model: final layer output is not a class vector");
  return s[0];
}

void Model::validate() const {
  if (layers.empty()) throw ConfigError("model: no layers");
  if (input_shape.empty()) throw ConfigError("model: input_shape not set");
  if (!(domain_lo < domain_hi)) throw ConfigError("model: empty input domain");
  if (!noise.empty() && noise.size() != layers.size())
    throw ConfigError("model: noise spec count != layer count");
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].validate(i);
  for (std::size_t i = 0; i < noise.size(); ++i) {
    if (noise[i].enabled && noise[i].effective_scale() < 0.0)
      throw ConfigError("model: negative noise scale at layer " + std::to_string(i));
    if (noise[i].enabled && noise[i].target == NoiseTarget::Weight && !layers[i].has_params())
      throw ConfigError("model: weight noise on parameterless layer " + std::to_string(i));
  }
  (void)num_classes();  // also checks shape composition
}

void Model::sync_noise() { noise.resize(layers.size()); }

bool Model::any_noise_enabled() const {
  for (const auto& n : noise)
    if (n.enabled && n.effective_scale() != 0.0) return true;
  return false;
}

std::vector<double> Model::alphas() const {
  std::vector<double> a;
  a.reserve(noise.size());
  for (const auto& n : noise) a.push_back(n.alpha);
  return a;
}

Tensor forward(const Model& m, const Tensor& batch, const NoiseDraw* draw,
               ForwardTrace* trace) {
  if (batch.ndim() != m.input_shape.size() + 1 || drop_batch(batch) != m.input_shape) {
    throw ConfigError("forward: batch shape " + batch.shape_str() +
                      " does not match model input shape");
  }
  require_finite(batch, "forward input batch");
  const std::size_t nl = m.layers.size();
  const bool has_noise = !m.noise.empty();
  if (trace) {
    trace->inputs.assign(nl, Tensor{});
    trace->used_weights.assign(nl, Tensor{});
    trace->weight_xi.assign(nl, Tensor{});
    trace->weight_std.assign(nl, 0.0);
    trace->add_xi.assign(nl, Tensor{});
  }

  Tensor cur = batch;
  for (std::size_t i = 0; i < nl; ++i) {
    const LayerSpec& l = m.layers[i];
    const NoiseSpec* ns = (has_noise && m.noise[i].enabled) ? &m.noise[i] : nullptr;
    const NoiseDraw ld = draw ? draw->with_layer(1 + i) : NoiseDraw{};

    // A learnable alpha needs its xi recorded even while alpha==0, or the
    // pathwise gradient could never move it off zero.
    const bool want_xi = ns && draw && (ns->effective_scale() != 0.0 ||
                                        (trace && ns->learnable));
    if (ns && ns->target == NoiseTarget::Input && want_xi) {
      Tensor xi = standard_gaussian(cur.shape, ld.stream_key());
      const double s = ns->effective_scale();
      if (s != 0.0) {
        for (std::size_t j = 0; j < cur.data.size(); ++j) cur.data[j] += s * xi.data[j];
      }
      if (trace) trace->add_xi[i] = std::move(xi);
    }
    if (trace) trace->inputs[i] = cur;

    Tensor y;
    switch (l.kind) {
      case LayerKind::Dense:
      case LayerKind::Conv2D: {
        const Tensor* w = &l.weight;
        Tensor perturbed;
        if (ns && ns->target == NoiseTarget::Weight && want_xi) {
          const double wstd = population_std(l.weight);
          Tensor xi = standard_gaussian(l.weight.shape, ld.stream_key());
          const double s = ns->effective_scale() * wstd;
          if (s != 0.0) {
            perturbed = l.weight;
            for (std::size_t j = 0; j < perturbed.data.size(); ++j)
              perturbed.data[j] += s * xi.data[j];
            w = &perturbed;
          }
          if (trace) {
            trace->weight_xi[i] = std::move(xi);
            trace->weight_std[i] = wstd;
          }
        }
        y = (l.kind == LayerKind::Dense) ? dense_forward(l, cur, *w) : conv_forward(l, cur, *w);
        if (trace && w == &perturbed) trace->used_weights[i] = std::move(perturbed);
        break;
      }
      case LayerKind::ReLU: {
        y = cur;
        for (double& v : y.data) v = v > 0.0 ? v : 0.0;
        break;
      }
      case LayerKind::Flatten: {
        y = cur.reshaped(with_batch(cur.shape[0], {shape_numel(drop_batch(cur))}));
        break;
      }
      case LayerKind::AvgPool: {
        if (cur.ndim() != 4) throw ConfigError("forward: AvgPool needs (B,C,H,W) input");
        y = avgpool_forward(l, cur);
        break;
      }
    }

    if (ns && ns->target == NoiseTarget::Activation && want_xi) {
      Tensor xi = standard_gaussian(y.shape, ld.stream_key());
      const double s = ns->effective_scale();
      if (s != 0.0) {
        for (std::size_t j = 0; j < y.data.size(); ++j) y.data[j] += s * xi.data[j];
      }
      if (trace) trace->add_xi[i] = std::move(xi);
    }

    if (!y.all_finite()) throw NumericError("non-finite output at " + layer_label(m, i));
    cur = std::move(y);
  }

  if (cur.ndim() != 2) {
    throw ConfigError("forward: logits are not (batch, classes); add a Flatten/Dense head");
  }
  if (trace) trace->logits = cur;
  return cur;
}

Tensor noisy_forward(const Model& m, const Tensor& batch, double sigma_input,
                     const NoiseDraw& draw, ForwardTrace* trace) {
  if (sigma_input < 0.0) throw ConfigError("noisy_forward: negative input sigma");
  if (sigma_input == 0.0) return forward(m, batch, &draw, trace);
  Tensor noised = batch;
  const std::uint64_t key = draw.with_layer(kInputNoiseSlot).stream_key();
  for (std::size_t i = 0; i < noised.data.size(); ++i) {
    noised.data[i] += sigma_input * rng::gaussian(key, i);
  }
  return forward(m, noised, &draw, trace);
}

Gradients backward(const Model& m, const ForwardTrace& trace, const Tensor& dlogits) {
  const std::size_t nl = m.layers.size();
  Gradients g;
  g.weight.assign(nl, Tensor{});
  g.bias.assign(nl, Tensor{});
  g.alpha.assign(nl, 0.0);

  Tensor dy = dlogits;
  for (std::size_t ri = 0; ri < nl; ++ri) {
    const std::size_t i = nl - 1 - ri;
    const LayerSpec& l = m.layers[i];
    const Tensor& x = trace.inputs[i];
    const NoiseSpec* ns = (!m.noise.empty() && m.noise[i].enabled) ? &m.noise[i] : nullptr;

    // Activation noise is additive on the output: gradient passes through,
    // alpha picks up base_sigma * <dy, xi>.
    if (ns && ns->target == NoiseTarget::Activation && !trace.add_xi[i].empty()) {
      g.alpha[i] = ns->base_sigma * tensor_dot(dy, trace.add_xi[i]);
    }

    Tensor dx;
    switch (l.kind) {
      case LayerKind::Dense:
      case LayerKind::Conv2D: {
        const Tensor& w = trace.used_weights[i].empty() ? l.weight : trace.used_weights[i];
        Tensor dw, db;
        if (l.kind == LayerKind::Dense) {
          dense_backward(l, x, w, dy, dx, dw, db);
        } else {
          conv_backward(l, x, w, dy, dx, dw, db);
        }
        // Weight noise: W' = W + c*std(W)*xi with c = alpha*base_sigma.
        // d/dW picks up the std(W) path; d/dalpha is the pathwise term.
        if (ns && ns->target == NoiseTarget::Weight && !trace.weight_xi[i].empty()) {
          const double dot = tensor_dot(dw, trace.weight_xi[i]);
          g.alpha[i] = ns->base_sigma * trace.weight_std[i] * dot;
          const double wstd = trace.weight_std[i];
          if (wstd > 0.0) {
            double mean = 0.0;
            for (double v : l.weight.data) mean += v;
            mean /= static_cast<double>(l.weight.data.size());
            const double coef = ns->effective_scale() * dot /
                                (static_cast<double>(l.weight.data.size()) * wstd);
            for (std::size_t j = 0; j < dw.data.size(); ++j) {
              dw.data[j] += coef * (l.weight.data[j] - mean);
            }
          }
        }
        g.weight[i] = std::move(dw);
        g.bias[i] = std::move(db);
        break;
      }
      case LayerKind::ReLU: {
        dx = dy;
        for (std::size_t j = 0; j < dx.data.size(); ++j) {
          if (!(x.data[j] > 0.0)) dx.data[j] = 0.0;  // subgradient 0 at the kink
        }
        break;
      }
      case LayerKind::Flatten: {
        dx = dy.reshaped(x.shape);
        break;
      }
      case LayerKind::AvgPool: {
        dx = avgpool_backward(l, x, dy);
        break;
      }
    }

    if (ns && ns->target == NoiseTarget::Input && !trace.add_xi[i].empty()) {
      g.alpha[i] = ns->base_sigma * tensor_dot(dx, trace.add_xi[i]);
    }
    dy = std::move(dx);
  }
  g.input = std::move(dy);
  return g;
}

Tensor softmax(const Tensor& logits) {
  if (logits.ndim() == 0 || logits.shape.back() == 0)
    throw ConfigError("softmax: empty class axis");
  const std::size_t c = logits.shape.back();
  const std::size_t rows = logits.numel() / std::max<std::size_t>(c, 1);
  Tensor p(logits.shape);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* z = logits.data.data() + r * c;
    double* q = p.data.data() + r * c;
    double mx = z[0];
    for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, z[k]);
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      q[k] = std::exp(z[k] - mx);
      sum += q[k];
    }
    for (std::size_t k = 0; k < c; ++k) q[k] /= sum;
  }
  return p;
}

double cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  return cross_entropy_grad(logits, labels, nullptr);
}

double cross_entropy_grad(const Tensor& logits, const std::vector<int>& labels,
                          Tensor* dlogits) {
  if (logits.ndim() != 2) throw ConfigError("cross_entropy: logits must be (batch, classes)");
  const std::size_t b = logits.shape[0], c = logits.shape[1];
  if (labels.size() != b) throw InputError("cross_entropy: label count != batch size");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= c)
      throw InputError("cross_entropy: label " + std::to_string(y) + " out of range");
  }
  if (dlogits) *dlogits = Tensor(logits.shape);
  if (b == 0) return 0.0;

  const Tensor p = softmax(logits);
  const double invb = 1.0 / static_cast<double>(b);
  double loss = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    const double* z = logits.data.data() + r * c;
    double mx = z[0];
    for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, z[k]);
    double se = 0.0;
    for (std::size_t k = 0; k < c; ++k) se += std::exp(z[k] - mx);
    loss += (mx + std::log(se)) - z[labels[r]];
    if (dlogits) {
      double* d = dlogits->data.data() + r * c;
      const double* q = p.data.data() + r * c;
      for (std::size_t k = 0; k < c; ++k) d[k] = q[k] * invb;
      d[labels[r]] -= invb;
    }
  }
  return loss * invb;
}

Gradients grad_params(const Model& m, const Tensor& batch, const std::vector<int>& labels,
                      const NoiseDraw* draw, double* loss_out) {
  ForwardTrace trace;
  forward(m, batch, draw, &trace);
  Tensor dlogits;
  const double loss = cross_entropy_grad(trace.logits, labels, &dlogits);
  if (loss_out) *loss_out = loss;
  return backward(m, trace, dlogits);
}

Tensor grad_input(const Model& m, const Tensor& batch, const std::vector<int>& labels,
                  const NoiseDraw* draw, double* loss_out) {
  return grad_params(m, batch, labels, draw, loss_out).input;
}

std::vector<double> grad_alpha(const Model& m, const Tensor& batch,
                               const std::vector<int>& labels, const NoiseDraw& draw) {
  return grad_params(m, batch, labels, &draw).alpha;
}

void sgd_step(Model& m, const Gradients& g, double lr, double momentum, double weight_decay,
              SgdState* state) {
  if (lr < 0.0) throw ConfigError("sgd_step: negative learning rate");
  if (momentum != 0.0 && !state) throw ConfigError("sgd_step: momentum requires SgdState");
  const std::size_t nl = m.layers.size();
  if (state) {
    state->vel_weight.resize(nl);
    state->vel_bias.resize(nl);
    state->vel_alpha.resize(nl, 0.0);
  }
  m.sync_noise();

  auto update = [&](Tensor& p, const Tensor& grad, Tensor* vel, bool decay) {
    if (grad.empty()) return;
    if (vel && vel->empty()) *vel = Tensor(p.shape);
    for (std::size_t j = 0; j < p.data.size(); ++j) {
      double eff = grad.data[j];
      if (decay && weight_decay != 0.0) eff += weight_decay * p.data[j];
      if (momentum != 0.0) {
        vel->data[j] = momentum * vel->data[j] + eff;
        eff = vel->data[j];
      }
      p.data[j] -= lr * eff;
    }
  };

  for (std::size_t i = 0; i < nl; ++i) {
    if (!m.layers[i].has_params()) continue;
    update(m.layers[i].weight, g.weight[i], state ? &state->vel_weight[i] : nullptr, true);
    update(m.layers[i].bias, g.bias[i], state ? &state->vel_bias[i] : nullptr, true);
  }
  for (std::size_t i = 0; i < nl; ++i) {
    if (!m.noise[i].enabled || !m.noise[i].learnable) continue;
    double eff = g.alpha[i];
    if (momentum != 0.0) {
      state->vel_alpha[i] = momentum * state->vel_alpha[i] + eff;
      eff = state->vel_alpha[i];
    }
    // projected update: the noise scale invariant requires alpha >= 0
    m.noise[i].alpha = std::max(m.noise[i].alpha - lr * eff, 0.0);
  }
}

void init_params(Model& m, std::uint64_t seed) {
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    LayerSpec& l = m.layers[i];
    if (!l.has_params()) continue;
    const std::size_t fan_in =
        l.kind == LayerKind::Dense ? l.in : l.in_ch * l.kernel * l.kernel;
    const double wb = std::sqrt(6.0 / static_cast<double>(fan_in));
    const double bb = 1.0 / std::sqrt(static_cast<double>(fan_in));
    const std::uint64_t wkey = rng::derive(seed, 0x11, i);
    const std::uint64_t bkey = rng::derive(seed, 0x22, i);
    for (std::size_t j = 0; j < l.weight.data.size(); ++j)
      l.weight.data[j] = rng::uniform(wkey, j, -wb, wb);
    for (std::size_t j = 0; j < l.bias.data.size(); ++j)
      l.bias.data[j] = rng::uniform(bkey, j, -bb, bb);
  }
  m.sync_noise();
}

}  // namespace smooth
