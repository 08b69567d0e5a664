#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ssc/rng.hpp"
#include "ssc/tensor.hpp"

namespace ssc {
// Target value excluded from cross-entropy losses (mirrors kIgnoreLabel on
// the uint8 label side).
inline constexpr std::int32_t kIgnoreTarget = -1;
}  // namespace ssc

namespace ssc::nn {

// ---- elementwise / reductions -------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor exp(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// ---- shape ----------------------------------------------------------------

// Concatenates along dim 1; all other dims must agree.
Tensor concat_channels(const std::vector<Tensor>& parts);

// [N,L] -> [N,L,d0,d1,d2], replicating each latent entry over the volume.
Tensor broadcast_volume(const Tensor& z, std::int64_t d0, std::int64_t d1, std::int64_t d2);

// [N,C,spatial...] -> [N,C] mean over all spatial dims.
Tensor global_avg_pool(const Tensor& x);

// ---- dense / conv ----------------------------------------------------------

// y = x w^T + b;  x: [N,F], w: [O,F], b: [O] (optional, pass undefined).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

struct ConvOpts {
  std::array<std::int64_t, 3> stride{1, 1, 1};
  std::array<std::int64_t, 3> dilation{1, 1, 1};
  std::array<std::int64_t, 3> padding{0, 0, 0};

  static ConvOpts iso(std::int64_t stride, std::int64_t dilation, std::int64_t padding) {
    return {{stride, stride, stride}, {dilation, dilation, dilation}, {padding, padding, padding}};
  }
};

// Dilated cross-correlation. x: [N,Ci,D,H,W], w: [Co,Ci,kd,kh,kw], b: [Co]
// (optional). Zero padding. out = (in + 2p - dil*(k-1) - 1)/stride + 1.
Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& b, const ConvOpts& opts = {});

// Transposed convolution. x: [N,Ci,D,H,W], w: [Ci,Co,kd,kh,kw]; out dim =
// (in-1)*stride - 2p + dil*(k-1) + 1. Exact adjoint of conv3d under the
// same stride/padding/dilation and the same weight tensor (the [Ci,Co,k]
// layout reads as conv's [Cout,Cin,k]).
Tensor deconv3d(const Tensor& x, const Tensor& w, const Tensor& b, const ConvOpts& opts = {});

struct Conv2dOpts {
  std::array<std::int64_t, 2> stride{1, 1};
  std::array<std::int64_t, 2> dilation{1, 1};
  std::array<std::int64_t, 2> padding{0, 0};
};

// x: [N,Ci,H,W], w: [Co,Ci,kh,kw], b: [Co] (optional).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, const Conv2dOpts& opts = {});

// ---- normalization / activations over channel dim --------------------------

// Channel dim is dim 1; statistics reduce over every other dim. Training
// mode uses batch statistics and updates the running buffers in place
// (momentum 0.1 by default); eval mode is a frozen affine map.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::vector<double>& running_mean, std::vector<double>& running_var,
                  bool training, double momentum = 0.1, double eps = 1e-5);

// Softmax over dim 1, per position.
Tensor softmax_channel(const Tensor& x);

// ---- losses -----------------------------------------------------------------

// Mean negative log-softmax over positions whose target != ignore_label.
// logits: [N,C,spatial...]; targets length N*prod(spatial) in the tensor's
// linear order. All-ignored input gives loss 0 with zero gradient.
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<std::int32_t>& targets,
                             std::int32_t ignore_label);

// KL(N(mean, diag exp(logvar)) || N(0, I)), summed over latent dims and
// averaged over the batch: 0.5 * sum(mean^2 + exp(logvar) - 1 - logvar).
Tensor kl_standard_normal(const Tensor& mean, const Tensor& logvar);

// ---- init -------------------------------------------------------------------

// Uniform(-bound, bound) with bound = sqrt(6 / fan_in) (He-style).
Tensor kaiming_uniform(std::vector<std::int64_t> shape, std::int64_t fan_in, Rng& rng,
                       bool requires_grad = true);

Tensor randn(std::vector<std::int64_t> shape, Rng& rng, bool requires_grad = false);

}  // namespace ssc::nn
