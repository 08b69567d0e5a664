#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ssc/ops.hpp"

namespace ssc::nn {

// Named handles onto every learnable tensor and persistent buffer of a
// model. Tensors are shared, so the optimizer and checkpoint code mutate
// the same storage the layers read.
struct ParamRegistry {
  std::vector<std::pair<std::string, Tensor>> params;
  std::vector<std::pair<std::string, std::shared_ptr<std::vector<double>>>> buffers;

  void add_param(const std::string& name, const Tensor& t) { params.emplace_back(name, t); }
  void add_buffer(const std::string& name, std::shared_ptr<std::vector<double>> b) {
    buffers.emplace_back(name, std::move(b));
  }
  void zero_grad() {
    for (auto& [name, t] : params) t.zero_grad();
  }
  std::int64_t num_values() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : params) n += t.numel();
    return n;
  }
};

struct Conv3dLayer {
  Tensor weight;  // [Co,Ci,kd,kh,kw]
  Tensor bias;    // [Co]
  ConvOpts opts;

  static Conv3dLayer create(std::int64_t in_c, std::int64_t out_c,
                            std::array<std::int64_t, 3> kernel, const ConvOpts& opts, Rng& rng);
  Tensor forward(const Tensor& x) const { return conv3d(x, weight, bias, opts); }
  void register_params(ParamRegistry& reg, const std::string& prefix) const {
    reg.add_param(prefix + ".weight", weight);
    reg.add_param(prefix + ".bias", bias);
  }
};

struct Deconv3dLayer {
  Tensor weight;  // [Ci,Co,kd,kh,kw]
  Tensor bias;
  ConvOpts opts;

  static Deconv3dLayer create(std::int64_t in_c, std::int64_t out_c,
                              std::array<std::int64_t, 3> kernel, const ConvOpts& opts, Rng& rng);
  Tensor forward(const Tensor& x) const { return deconv3d(x, weight, bias, opts); }
  void register_params(ParamRegistry& reg, const std::string& prefix) const {
    reg.add_param(prefix + ".weight", weight);
    reg.add_param(prefix + ".bias", bias);
  }
};

struct Conv2dLayer {
  Tensor weight;  // [Co,Ci,kh,kw]
  Tensor bias;
  Conv2dOpts opts;

  static Conv2dLayer create(std::int64_t in_c, std::int64_t out_c,
                            std::array<std::int64_t, 2> kernel, const Conv2dOpts& opts, Rng& rng);
  Tensor forward(const Tensor& x) const { return conv2d(x, weight, bias, opts); }
  void register_params(ParamRegistry& reg, const std::string& prefix) const {
    reg.add_param(prefix + ".weight", weight);
    reg.add_param(prefix + ".bias", bias);
  }
};

struct LinearLayer {
  Tensor weight;  // [O,F]
  Tensor bias;    // [O]

  static LinearLayer create(std::int64_t in_f, std::int64_t out_f, Rng& rng);
  Tensor forward(const Tensor& x) const { return linear(x, weight, bias); }
  void register_params(ParamRegistry& reg, const std::string& prefix) const {
    reg.add_param(prefix + ".weight", weight);
    reg.add_param(prefix + ".bias", bias);
  }
};

struct BatchNormLayer {
  Tensor gamma;
  Tensor beta;
  std::shared_ptr<std::vector<double>> running_mean;
  std::shared_ptr<std::vector<double>> running_var;
  double momentum = 0.1;

  static BatchNormLayer create(std::int64_t channels);
  Tensor forward(const Tensor& x, bool training) const {
    return batch_norm(x, gamma, beta, *running_mean, *running_var, training, momentum);
  }
  void register_params(ParamRegistry& reg, const std::string& prefix) const {
    reg.add_param(prefix + ".gamma", gamma);
    reg.add_param(prefix + ".beta", beta);
    reg.add_buffer(prefix + ".running_mean", running_mean);
    reg.add_buffer(prefix + ".running_var", running_var);
  }
};

struct DdrBlockConfig {
  std::int64_t in_channels = 0;
  std::int64_t out_channels = 0;
  std::int64_t bottleneck = 0;
  std::int64_t dilation = 1;
  std::int64_t downsample = 1;

  void validate() const;
};

// Dimensional-decomposition residual block: 1x1x1 reduce (strided when
// downsampling) -> dilated (1,1,3), (1,3,1), (3,1,1) convs with ReLU after
// each -> 1x1x1 expand -> residual add. The shortcut projects with a
// strided 1x1x1 conv when channels or resolution change.
class DdrBlock {
 public:
  static DdrBlock create(const DdrBlockConfig& cfg, Rng& rng);

  Tensor forward(const Tensor& x) const;
  void register_params(ParamRegistry& reg, const std::string& prefix) const;
  const DdrBlockConfig& config() const { return cfg_; }

 private:
  DdrBlockConfig cfg_;
  Conv3dLayer reduce_;
  Conv3dLayer conv_z_;
  Conv3dLayer conv_y_;
  Conv3dLayer conv_x_;
  Conv3dLayer expand_;
  std::optional<Conv3dLayer> shortcut_;
};

}  // namespace ssc::nn
