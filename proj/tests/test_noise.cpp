#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "smooth/error.hpp"
#include "smooth/model.hpp"
#include "smooth/noise.hpp"
#include "testutil.hpp"

using namespace smooth;
using namespace testutil;

namespace {

NoiseSpec enabled_spec(NoiseTarget target, double alpha, bool learnable = false) {
  NoiseSpec s;
  s.target = target;
  s.alpha = alpha;
  s.base_sigma = 1.0;
  s.learnable = learnable;
  s.enabled = true;
  return s;
}

}  // namespace

TEST_CASE("draw_gaussian basics") {
  const NoiseDraw draw{42, 3, 1};
  SUBCASE("zero effective scale yields an exact zero tensor") {
    const Tensor t = draw_gaussian(enabled_spec(NoiseTarget::Input, 0.0), {4, 4}, draw);
    for (double v : t.data) CHECK(v == 0.0);
  }
  SUBCASE("disabled spec is a configuration error") {
    NoiseSpec s = enabled_spec(NoiseTarget::Input, 0.5);
    s.enabled = false;
    CHECK_THROWS_AS(draw_gaussian(s, {2}, draw), ConfigError);
  }
  SUBCASE("negative effective scale is a configuration error") {
    CHECK_THROWS_AS(draw_gaussian(enabled_spec(NoiseTarget::Input, -0.5), {2}, draw),
                    ConfigError);
  }
  SUBCASE("same (seed, stream) reproduces bit-identical tensors") {
    const Tensor a = draw_gaussian(enabled_spec(NoiseTarget::Weight, 0.7), {8, 3}, draw);
    const Tensor b = draw_gaussian(enabled_spec(NoiseTarget::Weight, 0.7), {8, 3}, draw);
    CHECK(a.data == b.data);
    const Tensor c = draw_gaussian(enabled_spec(NoiseTarget::Weight, 0.7), {8, 3},
                                   NoiseDraw{42, 4, 1});
    CHECK(a.data != c.data);
  }
}

TEST_CASE("a million draws at scale 1 match N(0,1) moments") {
  const std::size_t n = 1000000;
  const Tensor t = draw_gaussian(enabled_spec(NoiseTarget::Input, 1.0), {n}, {7, 1, 0});
  double mean = 0.0;
  for (double v : t.data) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : t.data) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) < 0.01);
}

TEST_CASE("distinct streams are empirically uncorrelated") {
  const std::size_t n = 100000;
  const NoiseSpec spec = enabled_spec(NoiseTarget::Input, 1.0);
  const Tensor a = draw_gaussian(spec, {n}, {11, 1, 2});
  const Tensor b = draw_gaussian(spec, {n}, {11, 2, 2});
  const Tensor c = draw_gaussian(spec, {n}, {11, 1, 3});
  auto corr = [n](const Tensor& u, const Tensor& v) {
    double mu = 0.0, mv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mu += u.data[i];
      mv += v.data[i];
    }
    mu /= static_cast<double>(n);
    mv /= static_cast<double>(n);
    double suv = 0.0, su = 0.0, sv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      suv += (u.data[i] - mu) * (v.data[i] - mv);
      su += (u.data[i] - mu) * (u.data[i] - mu);
      sv += (v.data[i] - mv) * (v.data[i] - mv);
    }
    return suv / std::sqrt(su * sv);
  };
  CHECK(std::abs(corr(a, b)) < 0.05);  // different sample index
  CHECK(std::abs(corr(a, c)) < 0.05);  // different layer slot
}

TEST_CASE("noisy_forward with everything off equals plain forward bit-exactly") {
  Model m = mlp({4, 6, 3}, 5);
  m.noise[0] = enabled_spec(NoiseTarget::Weight, 0.5);
  m.noise[0].enabled = false;  // present but disabled
  const Tensor x = random_batch(m, 3, 6);
  const Tensor base = forward(m, x);
  const Tensor noisy = noisy_forward(m, x, 0.0, {99, 1, 0});
  CHECK(base.data == noisy.data);
}

TEST_CASE("identity at zero: disabled pipeline matches noiseless model bit-exactly") {
  Model noisy_model = small_cnn(31);
  noisy_model.noise[0] = enabled_spec(NoiseTarget::Weight, 0.4);
  noisy_model.noise[4] = enabled_spec(NoiseTarget::Activation, 0.2);
  Model plain_model = noisy_model;
  for (auto& n : plain_model.noise) n = NoiseSpec{};
  for (auto& n : noisy_model.noise) n.enabled = false;

  const Tensor x = random_batch(noisy_model, 2, 8);
  const NoiseDraw draw{3, 2, 0};
  CHECK(forward(noisy_model, x, &draw).data == forward(plain_model, x, &draw).data);
  CHECK(forward(noisy_model, x, &draw).data == forward(plain_model, x).data);
}

TEST_CASE("linear model: Monte Carlo mean of noisy logits is unbiased") {
  // E[W(x+eta)] = Wx; the empirical mean over M draws must sit inside a
  // CLT band of width 4*sigma_logit/sqrt(M).
  Model m;
  m.input_shape = {3};
  m.layers.push_back(LayerSpec::dense(3, 2));
  init_params(m, 17);
  m.sync_noise();

  const Tensor x({1, 3}, {0.3, 0.6, 0.9});
  const Tensor clean = forward(m, x);
  const double sigma = 0.5;
  const std::size_t samples = 10000;

  std::vector<double> mean(2, 0.0);
  for (std::size_t i = 0; i < samples; ++i) {
    const Tensor logits = noisy_forward(m, x, sigma, {1234, i + 1, 0});
    mean[0] += logits.data[0];
    mean[1] += logits.data[1];
  }
  for (std::size_t k = 0; k < 2; ++k) {
    mean[k] /= static_cast<double>(samples);
    double wnorm2 = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      wnorm2 += m.layers[0].weight.at(i, k) * m.layers[0].weight.at(i, k);
    const double band = 4.0 * sigma * std::sqrt(wnorm2 / static_cast<double>(samples));
    CHECK(std::abs(mean[k] - clean.data[k]) < band);
  }
}

TEST_CASE("fixed draw keeps noisy logits repeatable") {
  Model m = mlp({4, 5, 3}, 21);
  m.noise[0] = enabled_spec(NoiseTarget::Weight, 0.3);
  const Tensor x = random_batch(m, 2, 9);
  const NoiseDraw draw{77, 5, 0};
  CHECK(noisy_forward(m, x, 0.25, draw).data == noisy_forward(m, x, 0.25, draw).data);
  CHECK(noisy_forward(m, x, 0.25, draw).data !=
        noisy_forward(m, x, 0.25, NoiseDraw{77, 6, 0}).data);
}

TEST_CASE("grad_alpha is zero when noise is disabled") {
  Model m = mlp({3, 4, 2}, 2);
  const Tensor x = random_batch(m, 2, 3);
  const auto alphas = grad_alpha(m, x, {0, 1}, {5, 1, 0});
  for (double a : alphas) CHECK(a == 0.0);
}

TEST_CASE("grad_alpha on a linear model matches the hand-derived pathwise form") {
  // W' = W + a*s*std(W)*xi, so dL/da = s*std(W) * <dL/dW', xi> with
  // dL/dW'[i,o] = x[i] * (softmax - onehot)[o] / B.
  Model m;
  m.input_shape = {3};
  m.layers.push_back(LayerSpec::dense(3, 2));
  init_params(m, 40);
  m.noise[0] = enabled_spec(NoiseTarget::Weight, 0.6, true);

  const Tensor x({1, 3}, {0.2, 0.8, 0.5});
  const std::vector<int> y{1};
  const NoiseDraw draw{321, 2, 0};
  const double got = grad_alpha(m, x, y, draw)[0];

  // independent recomputation
  const Tensor xi = standard_gaussian({3, 2}, draw.with_layer(1).stream_key());
  double wmean = 0.0;
  for (double v : m.layers[0].weight.data) wmean += v;
  wmean /= 6.0;
  double wvar = 0.0;
  for (double v : m.layers[0].weight.data) wvar += (v - wmean) * (v - wmean);
  const double wstd = std::sqrt(wvar / 6.0);

  Tensor wp = m.layers[0].weight;
  for (std::size_t j = 0; j < 6; ++j)
    wp.data[j] += m.noise[0].alpha * m.noise[0].base_sigma * wstd * xi.data[j];
  double z[2] = {m.layers[0].bias[0], m.layers[0].bias[1]};
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t i = 0; i < 3; ++i) z[o] += x.data[i] * wp.at(i, o);
  const double mx = std::max(z[0], z[1]);
  const double e0 = std::exp(z[0] - mx), e1 = std::exp(z[1] - mx);
  const double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
  const double d[2] = {p0 - 0.0, p1 - 1.0};
  double expect = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t o = 0; o < 2; ++o) expect += x.data[i] * d[o] * xi.at(i, o);
  expect *= m.noise[0].base_sigma * wstd;

  CHECK(got == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("grad_alpha agrees with finite differences across targets and draws") {
  const NoiseTarget targets[3] = {NoiseTarget::Weight, NoiseTarget::Input,
                                  NoiseTarget::Activation};
  for (int ti = 0; ti < 3; ++ti) {
    CAPTURE(ti);
    Model m = mlp({4, 6, 3}, 60 + ti);
    m.noise[0] = enabled_spec(targets[ti], 0.35, true);
    const Tensor x = kink_free_batch(m, 2, 61 + ti);
    const std::vector<int> y = random_labels(2, 3, 62 + ti);

    for (std::uint64_t d = 0; d < 20; ++d) {
      const NoiseDraw draw{500 + d, 1, 0};
      const double got = grad_alpha(m, x, y, draw)[0];
      auto loss_at = [&](double alpha) {
        Model mm = m;
        mm.noise[0].alpha = alpha;
        return cross_entropy(forward(mm, x, &draw), y);
      };
      const double h = 1e-5;
      const double fd = (loss_at(m.noise[0].alpha + h) - loss_at(m.noise[0].alpha - h)) / (2 * h);
      CHECK(rel_err(got, fd, 1e-5) < 1e-3);
    }
  }
}

TEST_CASE("weight-noise parameter gradients still pass finite differences") {
  // The std(W) inside the perturbation depends on W; the backward pass must
  // account for that path.
  Model m = mlp({4, 5, 3}, 80);
  m.noise[0] = enabled_spec(NoiseTarget::Weight, 0.4, true);
  Tensor x = kink_free_batch(m, 3, 81);
  const std::vector<int> y = random_labels(3, 3, 82);
  const NoiseDraw draw{700, 1, 0};

  auto loss = [&]() { return cross_entropy(forward(m, x, &draw), y); };
  const Gradients g = grad_params(m, x, y, &draw);
  const std::uint64_t key = rng::derive(83, 0);
  for (int c = 0; c < 30; ++c) {
    const std::size_t idx = rng::below(key, c, m.layers[0].weight.numel());
    const double fd = fd_loss(loss, &m.layers[0].weight.data[idx]);
    CHECK(rel_err(g.weight[0].data[idx], fd) < 1e-3);
  }
}
