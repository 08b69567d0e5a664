#include <doctest.h>

#include <cmath>

#include "ssc/gradcheck.hpp"
#include "ssc/ops.hpp"
#include "ssc/rng.hpp"

using namespace ssc;
using nn::Tensor;

namespace {

Tensor randt(std::vector<std::int64_t> shape, Rng& rng, bool grad = true, double scale = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape), grad);
  for (auto& v : t.values()) v = scale * rng.normal();
  return t;
}

double dot(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) acc += a.data()[i] * b.data()[i];
  return acc;
}

}  // namespace

TEST_SUITE("tensor_ops") {

TEST_CASE("conv3d: 1x1x1 identity kernel reproduces the input") {
  Rng rng(1);
  Tensor x = randt({1, 2, 3, 3, 3}, rng, false);
  Tensor w = Tensor::zeros({2, 2, 1, 1, 1});
  w.data()[0] = 1.0;  // out0 <- in0
  w.data()[3] = 1.0;  // out1 <- in1
  Tensor y = nn::conv3d(x, w, Tensor{});
  REQUIRE(y.shape() == x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]));
}

TEST_CASE("conv3d: all-ones 3^3 kernel on constant input sums to 27 inside") {
  Tensor x = Tensor::full({1, 1, 5, 5, 5}, 1.0);
  Tensor w = Tensor::full({1, 1, 3, 3, 3}, 1.0);
  Tensor y = nn::conv3d(x, w, Tensor{}, nn::ConvOpts::iso(1, 1, 1));
  REQUIRE(y.shape() == std::vector<std::int64_t>{1, 1, 5, 5, 5});
  // interior voxel: full 27-tap support
  const std::int64_t n = 5 * 5 * 5;
  (void)n;
  const std::int64_t center = (2 * 5 + 2) * 5 + 2;
  CHECK(y.data()[center] == doctest::Approx(27.0));
  // corner voxel: 8-tap support under zero padding
  CHECK(y.data()[0] == doctest::Approx(8.0));
}

TEST_CASE("conv3d output dims follow the stride/dilation/padding formula") {
  Rng rng(2);
  Tensor x = randt({1, 1, 8, 9, 10}, rng, false);
  Tensor w = randt({2, 1, 3, 3, 3}, rng, false);
  nn::ConvOpts opts;
  opts.stride = {2, 1, 2};
  opts.dilation = {1, 2, 1};
  opts.padding = {1, 2, 0};
  Tensor y = nn::conv3d(x, w, Tensor{}, opts);
  CHECK(y.shape() == std::vector<std::int64_t>{1, 2, 4, 9, 4});
}

TEST_CASE("conv3d gradient matches central finite differences") {
  Rng rng(3);
  Tensor x = randt({1, 2, 4, 4, 4}, rng);
  Tensor w = randt({3, 2, 3, 3, 3}, rng, true, 0.4);
  Tensor b = randt({3}, rng, true, 0.2);
  auto fwd = [&] { return nn::sum(nn::conv3d(x, w, b, nn::ConvOpts::iso(1, 1, 1))); };
  CHECK(finite_diff_max_rel_err(fwd, {x, w, b}) < 1e-4);
}

TEST_CASE("deconv3d: rate 1 identity kernel is the identity") {
  Rng rng(4);
  Tensor x = randt({1, 2, 3, 4, 3}, rng, false);
  Tensor w = Tensor::zeros({2, 2, 1, 1, 1});
  w.data()[0] = 1.0;
  w.data()[3] = 1.0;
  Tensor y = nn::deconv3d(x, w, Tensor{});
  REQUIRE(y.shape() == x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]));
}

TEST_CASE("deconv3d doubles spatial dims with (kernel 4, rate 2, pad 1)") {
  Rng rng(5);
  Tensor x = randt({1, 3, 4, 3, 5}, rng, false);
  Tensor w = randt({3, 2, 4, 4, 4}, rng, false);
  nn::ConvOpts opts;
  opts.stride = {2, 2, 2};
  opts.padding = {1, 1, 1};
  Tensor y = nn::deconv3d(x, w, Tensor{}, opts);
  CHECK(y.shape() == std::vector<std::int64_t>{1, 2, 8, 6, 10});
}

TEST_CASE("deconv3d is the exact adjoint of conv3d") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::int64_t ci = rng.uniform_int(1, 3);
    const std::int64_t co = rng.uniform_int(1, 3);
    const std::int64_t k = rng.uniform_int(1, 4);
    const std::int64_t s = rng.uniform_int(1, 3);
    const std::int64_t p = rng.uniform_int(0, k > 1 ? k - 1 : 0);
    const std::int64_t dil = rng.uniform_int(1, 2);
    const std::int64_t nin = rng.uniform_int(3, 6);

    nn::ConvOpts opts;
    opts.stride = {s, s, s};
    opts.padding = {p, p, p};
    opts.dilation = {dil, dil, dil};

    Tensor x = randt({1, ci, nin, nin, nin}, rng, false);
    Tensor w = randt({ci, co, k, k, k}, rng, false);
    Tensor y_shape_probe = nn::deconv3d(x, w, Tensor{}, opts);
    Tensor y = randt(y_shape_probe.shape(), rng, false);

    // <deconv(x, w), y> == <x, conv(y, w)> with identical opts; the
    // [Ci,Co,k] deconv weight reads as the conv weight [Cout,Cin,k].
    const double lhs = dot(nn::deconv3d(x, w, Tensor{}, opts), y);
    const double rhs = dot(x, nn::conv3d(y, w, Tensor{}, opts));
    CHECK(std::abs(lhs - rhs) < 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("deconv3d gradient matches central finite differences") {
  Rng rng(7);
  Tensor x = randt({1, 3, 3, 3, 3}, rng);
  Tensor w = randt({3, 2, 4, 4, 4}, rng, true, 0.3);
  Tensor b = randt({2}, rng, true, 0.2);
  nn::ConvOpts opts;
  opts.stride = {2, 2, 2};
  opts.padding = {1, 1, 1};
  auto fwd = [&] { return nn::sum(nn::deconv3d(x, w, b, opts)); };
  CHECK(finite_diff_max_rel_err(fwd, {x, w, b}) < 1e-4);
}

TEST_CASE("conv2d gradient and anisotropic options") {
  Rng rng(8);
  Tensor x = randt({2, 2, 5, 6}, rng);
  Tensor w = randt({3, 2, 3, 3}, rng, true, 0.4);
  Tensor b = randt({3}, rng, true, 0.2);
  nn::Conv2dOpts opts;
  opts.stride = {2, 1};
  opts.padding = {1, 1};
  auto fwd = [&] { return nn::sum(nn::conv2d(x, w, b, opts)); };
  CHECK(finite_diff_max_rel_err(fwd, {x, w, b}) < 1e-4);
}

TEST_CASE("batch_norm: training mode normalizes, eval mode is affine") {
  Rng rng(9);
  Tensor x = randt({2, 3, 4, 4}, rng, false, 2.0);
  Tensor gamma = Tensor::full({3}, 1.0);
  Tensor beta = Tensor::zeros({3});
  std::vector<double> rm(3, 0.0), rv(3, 1.0);
  Tensor y = nn::batch_norm(x, gamma, beta, rm, rv, true);

  const std::int64_t spatial = 16, n_b = 2, c_n = 3;
  for (std::int64_t c = 0; c < c_n; ++c) {
    double mean = 0.0, var = 0.0;
    for (std::int64_t n = 0; n < n_b; ++n)
      for (std::int64_t s = 0; s < spatial; ++s) mean += y.data()[(n * c_n + c) * spatial + s];
    mean /= static_cast<double>(n_b * spatial);
    for (std::int64_t n = 0; n < n_b; ++n)
      for (std::int64_t s = 0; s < spatial; ++s) {
        const double d = y.data()[(n * c_n + c) * spatial + s] - mean;
        var += d * d;
      }
    var /= static_cast<double>(n_b * spatial);
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(rm[static_cast<std::size_t>(c)] != 0.0);  // running stats moved
  }

  // eval mode: y = a*x + b per channel (linearity probe)
  Tensor x1 = randt({1, 3, 2, 2}, rng, false);
  Tensor x2 = randt({1, 3, 2, 2}, rng, false);
  Tensor x_sum = nn::add(x1, x2);
  Tensor y1 = nn::batch_norm(x1, gamma, beta, rm, rv, false);
  Tensor y2 = nn::batch_norm(x2, gamma, beta, rm, rv, false);
  Tensor y12 = nn::batch_norm(x_sum, gamma, beta, rm, rv, false);
  Tensor y0 = nn::batch_norm(nn::mul_scalar(x1, 0.0), gamma, beta, rm, rv, false);
  for (std::int64_t i = 0; i < y12.numel(); ++i)
    CHECK(y12.data()[i] - y0.data()[i] ==
          doctest::Approx((y1.data()[i] - y0.data()[i]) + (y2.data()[i] - y0.data()[i]))
              .epsilon(1e-9));
}

TEST_CASE("batch_norm gradients in both modes") {
  Rng rng(10);
  Tensor x = randt({2, 2, 3, 3}, rng);
  Tensor gamma = randt({2}, rng, true, 0.5);
  Tensor beta = randt({2}, rng, true, 0.5);
  Tensor probe = randt({2, 2, 3, 3}, rng, false);
  std::vector<double> rm = {0.1, -0.2}, rv = {1.3, 0.7};

  SUBCASE("training") {
    auto fwd = [&] {
      std::vector<double> rm_c = rm, rv_c = rv;
      return nn::sum(nn::mul(nn::batch_norm(x, gamma, beta, rm_c, rv_c, true),
                             Tensor::from_values(probe.shape(), probe.values())));
    };
    CHECK(finite_diff_max_rel_err(fwd, {x, gamma, beta}) < 1e-4);
  }
  SUBCASE("eval") {
    auto fwd = [&] {
      return nn::sum(nn::mul(nn::batch_norm(x, gamma, beta, rm, rv, false),
                             Tensor::from_values(probe.shape(), probe.values())));
    };
    CHECK(finite_diff_max_rel_err(fwd, {x, gamma, beta}) < 1e-4);
  }
}

TEST_CASE("softmax_cross_entropy: uniform logits over 2 classes give ln 2") {
  Tensor logits = Tensor::zeros({1, 2, 2, 2, 2});
  std::vector<std::int32_t> targets(8, 1);
  Tensor loss = nn::softmax_cross_entropy(logits, targets, kIgnoreTarget);
  CHECK(loss.item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("softmax_cross_entropy: all-ignored targets give zero loss and grad") {
  Rng rng(11);
  Tensor logits = randt({1, 3, 2, 2, 2}, rng);
  std::vector<std::int32_t> targets(8, kIgnoreTarget);
  Tensor loss = nn::softmax_cross_entropy(logits, targets, kIgnoreTarget);
  CHECK(loss.item() == 0.0);
  loss.backward();
  for (double g : logits.grad()) CHECK(g == 0.0);
}

TEST_CASE("softmax_cross_entropy matches an independent log-sum-exp recomputation") {
  Rng rng(12);
  Tensor logits = randt({2, 4, 3}, rng, true, 2.0);
  std::vector<std::int32_t> targets = {0, 3, kIgnoreTarget, 2, 1, 2};
  const Tensor loss = nn::softmax_cross_entropy(logits, targets, kIgnoreTarget);

  double expected = 0.0;
  std::int64_t count = 0;
  for (std::int64_t n = 0; n < 2; ++n)
    for (std::int64_t s = 0; s < 3; ++s) {
      const std::int32_t t = targets[static_cast<std::size_t>(n * 3 + s)];
      if (t == kIgnoreTarget) continue;
      double z = 0.0;
      for (std::int64_t c = 0; c < 4; ++c) z += std::exp(logits.data()[(n * 4 + c) * 3 + s]);
      expected += std::log(z) - logits.data()[(n * 4 + t) * 3 + s];
      ++count;
    }
  expected /= static_cast<double>(count);
  CHECK(loss.item() == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("softmax_cross_entropy rejects out-of-range targets") {
  Tensor logits = Tensor::zeros({1, 2, 2});
  std::vector<std::int32_t> targets = {0, 5};
  CHECK_THROWS_AS(nn::softmax_cross_entropy(logits, targets, kIgnoreTarget), ValidationError);
}

TEST_CASE("softmax_channel: probabilities normalize and differentiate") {
  Rng rng(13);
  Tensor x = randt({1, 3, 2, 2, 2}, rng);
  Tensor p = nn::softmax_channel(x);
  const std::int64_t spatial = 8;
  for (std::int64_t s = 0; s < spatial; ++s) {
    double total = 0.0;
    for (std::int64_t c = 0; c < 3; ++c) {
      const double v = p.data()[c * spatial + s];
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      total += v;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  Tensor probe = randt({1, 3, 2, 2, 2}, rng, false);
  auto fwd = [&] {
    return nn::sum(nn::mul(nn::softmax_channel(x), Tensor::from_values(x.shape(), probe.values())));
  };
  CHECK(finite_diff_max_rel_err(fwd, {x}) < 1e-4);
}

TEST_CASE("linear, pooling, broadcast and concat gradients") {
  Rng rng(14);
  Tensor x = randt({2, 4}, rng);
  Tensor w = randt({3, 4}, rng, true, 0.5);
  Tensor b = randt({3}, rng, true, 0.2);
  auto fwd_linear = [&] { return nn::sum(nn::linear(x, w, b)); };
  CHECK(finite_diff_max_rel_err(fwd_linear, {x, w, b}) < 1e-4);

  Tensor vol = randt({1, 3, 2, 3, 2}, rng);
  auto fwd_pool = [&] { return nn::sum(nn::global_avg_pool(vol)); };
  CHECK(finite_diff_max_rel_err(fwd_pool, {vol}) < 1e-4);

  Tensor z = randt({1, 4}, rng);
  Tensor probe = randt({1, 4, 2, 2, 2}, rng, false);
  auto fwd_bcast = [&] {
    return nn::sum(nn::mul(nn::broadcast_volume(z, 2, 2, 2),
                           Tensor::from_values(probe.shape(), probe.values())));
  };
  CHECK(finite_diff_max_rel_err(fwd_bcast, {z}) < 1e-4);

  Tensor a1 = randt({1, 2, 2, 2, 2}, rng);
  Tensor a2 = randt({1, 3, 2, 2, 2}, rng);
  Tensor probe2 = randt({1, 5, 2, 2, 2}, rng, false);
  auto fwd_concat = [&] {
    return nn::sum(nn::mul(nn::concat_channels({a1, a2}),
                           Tensor::from_values(probe2.shape(), probe2.values())));
  };
  CHECK(finite_diff_max_rel_err(fwd_concat, {a1, a2}) < 1e-4);
}

TEST_CASE("kl_standard_normal: zero params give zero divergence") {
  Tensor mean = Tensor::zeros({1, 3});
  Tensor logvar = Tensor::zeros({1, 3});
  CHECK(nn::kl_standard_normal(mean, logvar).item() == 0.0);
}

TEST_CASE("kl_standard_normal: unit mean in one dim gives 0.5") {
  Tensor mean = Tensor::from_values({1, 2}, {1.0, 0.0});
  Tensor logvar = Tensor::zeros({1, 2});
  CHECK(nn::kl_standard_normal(mean, logvar).item() == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("kl_standard_normal is non-negative and zero only at the prior") {
  Rng rng(15);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor mean = randt({1, 4}, rng, false);
    Tensor logvar = randt({1, 4}, rng, false, 0.7);
    const double kl = nn::kl_standard_normal(mean, logvar).item();
    CHECK(kl >= 0.0);
    double magnitude = 0.0;
    for (double v : mean.values()) magnitude += std::abs(v);
    for (double v : logvar.values()) magnitude += std::abs(v);
    if (magnitude > 0.1) CHECK(kl > 0.0);
  }
}

TEST_CASE("kl_standard_normal gradient") {
  Rng rng(16);
  Tensor mean = randt({2, 3}, rng);
  Tensor logvar = randt({2, 3}, rng, true, 0.5);
  auto fwd = [&] { return nn::kl_standard_normal(mean, logvar); };
  CHECK(finite_diff_max_rel_err(fwd, {mean, logvar}) < 1e-4);
}

TEST_CASE("backward accumulates across shared subexpressions") {
  Tensor x = Tensor::from_values({1}, {3.0}, true);
  Tensor y = nn::mul(x, x);  // x^2; dy/dx = 2x = 6
  y.backward();
  CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("detach blocks gradient flow") {
  Tensor x = Tensor::from_values({1}, {2.0}, true);
  Tensor d = nn::mul(x, x).detach();
  Tensor y = nn::mul(d, d);
  y.backward();
  CHECK(x.grad().empty() == false);  // grad() allocates
  CHECK(x.grad()[0] == 0.0);
}

}  // TEST_SUITE
