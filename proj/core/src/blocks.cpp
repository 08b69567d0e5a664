#include "ssc/blocks.hpp"

namespace ssc::nn {

Conv3dLayer Conv3dLayer::create(std::int64_t in_c, std::int64_t out_c,
                                std::array<std::int64_t, 3> kernel, const ConvOpts& opts,
                                Rng& rng) {
  Conv3dLayer layer;
  const std::int64_t fan_in = in_c * kernel[0] * kernel[1] * kernel[2];
  layer.weight = kaiming_uniform({out_c, in_c, kernel[0], kernel[1], kernel[2]}, fan_in, rng);
  layer.bias = Tensor::zeros({out_c}, true);
  layer.opts = opts;
  return layer;
}

Deconv3dLayer Deconv3dLayer::create(std::int64_t in_c, std::int64_t out_c,
                                    std::array<std::int64_t, 3> kernel, const ConvOpts& opts,
                                    Rng& rng) {
  Deconv3dLayer layer;
  const std::int64_t fan_in = in_c * kernel[0] * kernel[1] * kernel[2];
  layer.weight = kaiming_uniform({in_c, out_c, kernel[0], kernel[1], kernel[2]}, fan_in, rng);
  layer.bias = Tensor::zeros({out_c}, true);
  layer.opts = opts;
  return layer;
}

Conv2dLayer Conv2dLayer::create(std::int64_t in_c, std::int64_t out_c,
                                std::array<std::int64_t, 2> kernel, const Conv2dOpts& opts,
                                Rng& rng) {
  Conv2dLayer layer;
  const std::int64_t fan_in = in_c * kernel[0] * kernel[1];
  layer.weight = kaiming_uniform({out_c, in_c, kernel[0], kernel[1]}, fan_in, rng);
  layer.bias = Tensor::zeros({out_c}, true);
  layer.opts = opts;
  return layer;
}

LinearLayer LinearLayer::create(std::int64_t in_f, std::int64_t out_f, Rng& rng) {
  LinearLayer layer;
  layer.weight = kaiming_uniform({out_f, in_f}, in_f, rng);
  layer.bias = Tensor::zeros({out_f}, true);
  return layer;
}

BatchNormLayer BatchNormLayer::create(std::int64_t channels) {
  BatchNormLayer layer;
  layer.gamma = Tensor::full({channels}, 1.0, true);
  layer.beta = Tensor::zeros({channels}, true);
  layer.running_mean = std::make_shared<std::vector<double>>(channels, 0.0);
  layer.running_var = std::make_shared<std::vector<double>>(channels, 1.0);
  return layer;
}

void DdrBlockConfig::validate() const {
  if (in_channels < 1 || out_channels < 1 || bottleneck < 1)
    throw ValidationError("DDR block channel counts must be >= 1");
  if (dilation < 1) throw ValidationError("DDR block dilation must be >= 1");
  if (downsample < 1) throw ValidationError("DDR block downsample rate must be >= 1");
}

DdrBlock DdrBlock::create(const DdrBlockConfig& cfg, Rng& rng) {
  cfg.validate();
  DdrBlock block;
  block.cfg_ = cfg;
  ConvOpts reduce_opts;
  reduce_opts.stride = {cfg.downsample, cfg.downsample, cfg.downsample};
  block.reduce_ = Conv3dLayer::create(cfg.in_channels, cfg.bottleneck, {1, 1, 1}, reduce_opts, rng);

  const std::int64_t d = cfg.dilation;
  ConvOpts z_opts;
  z_opts.dilation = {1, 1, d};
  z_opts.padding = {0, 0, d};
  block.conv_z_ = Conv3dLayer::create(cfg.bottleneck, cfg.bottleneck, {1, 1, 3}, z_opts, rng);
  ConvOpts y_opts;
  y_opts.dilation = {1, d, 1};
  y_opts.padding = {0, d, 0};
  block.conv_y_ = Conv3dLayer::create(cfg.bottleneck, cfg.bottleneck, {1, 3, 1}, y_opts, rng);
  ConvOpts x_opts;
  x_opts.dilation = {d, 1, 1};
  x_opts.padding = {d, 0, 0};
  block.conv_x_ = Conv3dLayer::create(cfg.bottleneck, cfg.bottleneck, {3, 1, 1}, x_opts, rng);

  block.expand_ = Conv3dLayer::create(cfg.bottleneck, cfg.out_channels, {1, 1, 1}, ConvOpts{}, rng);

  if (cfg.in_channels != cfg.out_channels || cfg.downsample != 1) {
    ConvOpts sc_opts;
    sc_opts.stride = {cfg.downsample, cfg.downsample, cfg.downsample};
    block.shortcut_ = Conv3dLayer::create(cfg.in_channels, cfg.out_channels, {1, 1, 1}, sc_opts, rng);
  }
  return block;
}

Tensor DdrBlock::forward(const Tensor& x) const {
  if (cfg_.downsample > 1) {
    for (int d = 2; d < 5; ++d)
      if (x.dim(static_cast<std::size_t>(d)) % cfg_.downsample)
        throw ValidationError("DDR block: spatial dims not divisible by downsample rate");
  }
  Tensor h = relu(reduce_.forward(x));
  h = relu(conv_z_.forward(h));
  h = relu(conv_y_.forward(h));
  h = relu(conv_x_.forward(h));
  h = expand_.forward(h);
  const Tensor res = shortcut_ ? shortcut_->forward(x) : x;
  return add(h, res);
}

void DdrBlock::register_params(ParamRegistry& reg, const std::string& prefix) const {
  reduce_.register_params(reg, prefix + ".reduce");
  conv_z_.register_params(reg, prefix + ".conv_z");
  conv_y_.register_params(reg, prefix + ".conv_y");
  conv_x_.register_params(reg, prefix + ".conv_x");
  expand_.register_params(reg, prefix + ".expand");
  if (shortcut_) shortcut_->register_params(reg, prefix + ".shortcut");
}

}  // namespace ssc::nn
