#include "ssc/model.hpp"

#include <algorithm>

namespace ssc {

using nn::Tensor;

void TrunkConfig::validate() const {
  if (convs.empty()) throw ValidationError("trunk needs at least one stem conv");
  for (const auto& c : convs) {
    if (c.kernel < 1 || c.kernel % 2 == 0)
      throw ValidationError("stem conv kernels must be odd");
    if (c.dilation < 1) throw ValidationError("conv dilation must be >= 1");
  }
  for (const auto& d : ddr) {
    if (d.dilation < 1 || d.downsample < 1)
      throw ValidationError("DDR entries need dilation >= 1 and downsample >= 1");
  }
  for (const auto& d : deconvs) {
    if (d.rate < 1) throw ValidationError("deconv rate must be >= 1");
    const std::int64_t pad2 = d.kernel - 1 + 1 - d.rate;  // 2 * padding
    if (pad2 < 0 || pad2 % 2)
      throw ValidationError("deconv (kernel, rate) must admit exact rate-x upsampling");
  }
  if (skip_from >= static_cast<std::int64_t>(convs.size()))
    throw ValidationError("skip_from out of range");
  if (skip_to >= static_cast<std::int64_t>(deconvs.size()))
    throw ValidationError("skip_to out of range");
  if ((skip_from >= 0) != (skip_to >= 0))
    throw ValidationError("skip endpoints must both be set or both disabled");
}

std::string to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::OneStage: return "one_stage";
    case ModelVariant::TwoStage: return "two_stage";
    case ModelVariant::Full: return "full";
  }
  return "full";
}

ModelVariant variant_from_string(const std::string& s) {
  if (s == "one_stage") return ModelVariant::OneStage;
  if (s == "two_stage") return ModelVariant::TwoStage;
  if (s == "full") return ModelVariant::Full;
  throw ValidationError("unknown model variant '" + s + "'");
}

void ModelConfig::validate() const {
  if (num_classes < 2) throw ValidationError("num_classes must be >= 2");
  if (feature_channels < 1) throw ValidationError("feature_channels must be >= 1");
  stage1.validate();
  stage2.validate();
  for (auto h : encoder2d.hidden)
    if (h < 1) throw ValidationError("2d encoder hidden channels must be >= 1");
  if (encoder2d.kernel < 1 || encoder2d.kernel % 2 == 0)
    throw ValidationError("2d encoder kernel must be odd");
  hallucination.validate();
}

// ---- TrunkNet -----------------------------------------------------------------

TrunkNet TrunkNet::create(const TrunkConfig& cfg, std::int64_t in_channels, std::int64_t width,
                          Rng& rng) {
  cfg.validate();
  TrunkNet net;
  net.cfg_ = cfg;
  std::int64_t c_in = in_channels;
  for (const auto& spec : cfg.convs) {
    const std::int64_t pad = spec.dilation * (spec.kernel - 1) / 2;
    nn::ConvOpts opts = nn::ConvOpts::iso(1, spec.dilation, pad);
    net.convs_.push_back(
        nn::Conv3dLayer::create(c_in, width, {spec.kernel, spec.kernel, spec.kernel}, opts, rng));
    net.conv_bns_.push_back(nn::BatchNormLayer::create(width));
    c_in = width;
  }
  for (const auto& spec : cfg.ddr) {
    nn::DdrBlockConfig bc;
    bc.in_channels = width;
    bc.out_channels = width;
    bc.bottleneck = std::max<std::int64_t>(1, width / 2);
    bc.dilation = spec.dilation;
    bc.downsample = spec.downsample;
    net.blocks_.push_back(nn::DdrBlock::create(bc, rng));
  }
  for (const auto& spec : cfg.deconvs) {
    const std::int64_t pad = (spec.kernel - 1 + 1 - spec.rate) / 2;
    nn::ConvOpts opts;
    opts.stride = {spec.rate, spec.rate, spec.rate};
    opts.padding = {pad, pad, pad};
    net.deconvs_.push_back(
        nn::Deconv3dLayer::create(width, width, {spec.kernel, spec.kernel, spec.kernel}, opts, rng));
    net.deconv_bns_.push_back(nn::BatchNormLayer::create(width));
  }
  return net;
}

Tensor TrunkNet::forward(const Tensor& x, bool training) const {
  Tensor h = x;
  Tensor skip;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    h = nn::relu(conv_bns_[i].forward(convs_[i].forward(h), training));
    if (static_cast<std::int64_t>(i) == cfg_.skip_from) skip = h;
  }
  for (const auto& block : blocks_) h = block.forward(h);
  for (std::size_t j = 0; j < deconvs_.size(); ++j) {
    h = nn::relu(deconv_bns_[j].forward(deconvs_[j].forward(h), training));
    if (static_cast<std::int64_t>(j) == cfg_.skip_to && skip.defined()) h = nn::add(h, skip);
  }
  return h;
}

void TrunkNet::register_params(nn::ParamRegistry& reg, const std::string& prefix) const {
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    convs_[i].register_params(reg, prefix + ".conv" + std::to_string(i));
    conv_bns_[i].register_params(reg, prefix + ".conv" + std::to_string(i) + ".bn");
  }
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].register_params(reg, prefix + ".ddr" + std::to_string(i));
  for (std::size_t j = 0; j < deconvs_.size(); ++j) {
    deconvs_[j].register_params(reg, prefix + ".deconv" + std::to_string(j));
    deconv_bns_[j].register_params(reg, prefix + ".deconv" + std::to_string(j) + ".bn");
  }
}

// ---- Encoder2D ------------------------------------------------------------------

Encoder2D Encoder2D::create(const Encoder2dConfig& cfg, std::int64_t out_channels, Rng& rng) {
  Encoder2D enc;
  enc.trainable_ = cfg.trainable;
  std::int64_t c_in = 3;
  const std::int64_t pad = (cfg.kernel - 1) / 2;
  nn::Conv2dOpts opts;
  opts.padding = {pad, pad};
  for (std::int64_t h : cfg.hidden) {
    enc.convs_.push_back(nn::Conv2dLayer::create(c_in, h, {cfg.kernel, cfg.kernel}, opts, rng));
    enc.bns_.push_back(nn::BatchNormLayer::create(h));
    c_in = h;
  }
  // channel reduction to the 3D feature width
  enc.convs_.push_back(nn::Conv2dLayer::create(c_in, out_channels, {1, 1}, nn::Conv2dOpts{}, rng));
  enc.bns_.push_back(nn::BatchNormLayer::create(out_channels));
  if (!cfg.trainable) {
    for (auto& c : enc.convs_) {
      c.weight.set_requires_grad(false);
      c.bias.set_requires_grad(false);
    }
    for (auto& b : enc.bns_) {
      b.gamma.set_requires_grad(false);
      b.beta.set_requires_grad(false);
    }
  }
  return enc;
}

Tensor Encoder2D::forward(const Tensor& rgb, bool training) const {
  // Frozen encoder also freezes its normalization statistics.
  const bool bn_training = trainable_ && training;
  Tensor h = rgb;
  for (std::size_t i = 0; i < convs_.size(); ++i)
    h = nn::relu(bns_[i].forward(convs_[i].forward(h), bn_training));
  return h;
}

void Encoder2D::register_params(nn::ParamRegistry& reg, const std::string& prefix) const {
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    convs_[i].register_params(reg, prefix + ".conv" + std::to_string(i));
    bns_[i].register_params(reg, prefix + ".conv" + std::to_string(i) + ".bn");
  }
}

// ---- SscModel -------------------------------------------------------------------

SscModel::SscModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const std::int64_t width = cfg_.feature_channels;

  if (cfg_.variant != ModelVariant::OneStage) {
    stage1_trunk_ = TrunkNet::create(cfg_.stage1, 1, width, rng);
    stage1_trunk_->register_params(registry_, "stage1");
  }
  if (cfg_.variant == ModelVariant::Full) {
    sketch_head_ = nn::Conv3dLayer::create(width, 2, {1, 1, 1}, nn::ConvOpts{}, rng);
    sketch_head_->register_params(registry_, "stage1.head");
    cvae_ = SketchHallucination::create(cfg_.hallucination, rng);
    cvae_->register_params(registry_, "cvae");
  }
  if (cfg_.variant != ModelVariant::OneStage) {
    encoder2d_ = Encoder2D::create(cfg_.encoder2d, width, rng);
    encoder2d_->register_params(registry_, "encoder2d");
  }
  if (cfg_.variant == ModelVariant::Full) {
    prior_raw_ = nn::Conv3dLayer::create(2, width, {3, 3, 3}, nn::ConvOpts::iso(1, 1, 1), rng);
    prior_raw_->register_params(registry_, "prior_raw");
    prior_refined_ = nn::Conv3dLayer::create(2, width, {3, 3, 3}, nn::ConvOpts::iso(1, 1, 1), rng);
    prior_refined_->register_params(registry_, "prior_refined");
  } else if (cfg_.variant == ModelVariant::TwoStage) {
    prior_implicit_ =
        nn::Conv3dLayer::create(width, width, {3, 3, 3}, nn::ConvOpts::iso(1, 1, 1), rng);
    prior_implicit_->register_params(registry_, "prior_implicit");
  }

  const std::int64_t stage2_in = cfg_.variant == ModelVariant::OneStage ? 1 : width;
  stage2_trunk_ = TrunkNet::create(cfg_.stage2, stage2_in, width, rng);
  stage2_trunk_.register_params(registry_, "stage2");
  semantic_head_ =
      nn::Conv3dLayer::create(width, cfg_.num_classes, {1, 1, 1}, nn::ConvOpts{}, rng);
  semantic_head_.register_params(registry_, "stage2.head");
}

Tensor SscModel::stage1_forward(const Tensor& tsdf, bool training, Tensor* trunk_feature) const {
  if (!stage1_trunk_) throw ValidationError("this model variant has no sketch stage");
  const Tensor feat = stage1_trunk_->forward(tsdf, training);
  if (trunk_feature) *trunk_feature = feat;
  if (!sketch_head_) return feat;
  return sketch_head_->forward(feat);
}

Tensor SscModel::project_rgb(const FeatureMap2D& rgb, const DepthMap& depth,
                             const CameraModel& camera, const GridSpec& spec,
                             bool training) const {
  if (!encoder2d_) throw ValidationError("this model variant has no RGB branch");
  nn::NoGradGuard guard;  // the projection is a gradient boundary
  const Tensor feat2d = encoder2d_->forward(rgb_to_tensor(rgb), training);
  const FeatureMap2D raster = tensor_to_feature_map(feat2d);
  const FeatureVolume fv = project_features(raster, depth, camera, spec);
  return feature_volume_to_tensor(fv);
}

Tensor SscModel::fuse_priors(const Tensor& f_proj, const Tensor& g_raw,
                             const Tensor& g_refined) const {
  if (!prior_raw_ || !prior_refined_)
    throw ValidationError("this model variant has no sketch prior mappings");
  const Tensor f_raw = prior_raw_->forward(g_raw);
  const Tensor f_refined = prior_refined_->forward(g_refined);
  return nn::add(nn::add(f_proj, f_raw), f_refined);
}

Tensor SscModel::fuse_implicit(const Tensor& f_proj, const Tensor& trunk_feature) const {
  if (!prior_implicit_) throw ValidationError("this model variant has no implicit mapping");
  return nn::add(f_proj, prior_implicit_->forward(trunk_feature));
}

Tensor SscModel::stage2_forward(const Tensor& volume_features, bool training) const {
  const Tensor feat = stage2_trunk_.forward(volume_features, training);
  return semantic_head_.forward(feat);
}

const SketchHallucination& SscModel::hallucination() const {
  if (!cvae_) throw ValidationError("this model variant has no hallucination module");
  return *cvae_;
}

// ---- conversions -----------------------------------------------------------------

Tensor tsdf_to_tensor(const TsdfVolume& vol) {
  const auto& spec = vol.grid.spec;
  Tensor t = Tensor::zeros({1, 1, spec.dims.x, spec.dims.y, spec.dims.z});
  std::copy(vol.grid.values.begin(), vol.grid.values.end(), t.data());
  return t;
}

Tensor sketch_to_tensor(const SketchGrid& sketch) {
  const auto& spec = sketch.grid.spec;
  Tensor t = Tensor::zeros({1, 1, spec.dims.x, spec.dims.y, spec.dims.z});
  for (std::size_t i = 0; i < sketch.grid.values.size(); ++i)
    t.data()[i] = sketch.grid.values[i] ? 1.0 : 0.0;
  return t;
}

Tensor sketch_to_prob_tensor(const SketchGrid& sketch) {
  const auto& spec = sketch.grid.spec;
  const std::int64_t n = spec.num_voxels();
  Tensor t = Tensor::zeros({1, 2, spec.dims.x, spec.dims.y, spec.dims.z});
  for (std::int64_t i = 0; i < n; ++i) {
    const bool on = sketch.grid.values[static_cast<std::size_t>(i)] != 0;
    t.data()[i] = on ? 0.0 : 1.0;
    t.data()[n + i] = on ? 1.0 : 0.0;
  }
  return t;
}

Tensor feature_volume_to_tensor(const FeatureVolume& fv) {
  const auto& spec = fv.spec;
  const std::int64_t n = spec.num_voxels();
  Tensor t = Tensor::zeros({1, fv.channels, spec.dims.x, spec.dims.y, spec.dims.z});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t c = 0; c < fv.channels; ++c)
      t.data()[c * n + i] = fv.data[static_cast<std::size_t>(i * fv.channels + c)];
  return t;
}

Tensor rgb_to_tensor(const FeatureMap2D& rgb) {
  const std::int64_t hw = rgb.width * rgb.height;
  Tensor t = Tensor::zeros({1, rgb.channels, rgb.height, rgb.width});
  for (std::int64_t row = 0; row < rgb.height; ++row)
    for (std::int64_t col = 0; col < rgb.width; ++col)
      for (std::int64_t c = 0; c < rgb.channels; ++c)
        t.data()[c * hw + row * rgb.width + col] = rgb.at(col, row, c);
  return t;
}

FeatureMap2D tensor_to_feature_map(const Tensor& t) {
  if (t.ndim() != 4 || t.dim(0) != 1)
    throw ValidationError("tensor_to_feature_map expects [1,C,H,W]");
  const std::int64_t c_n = t.dim(1), h = t.dim(2), w = t.dim(3);
  FeatureMap2D out(w, h, c_n);
  for (std::int64_t row = 0; row < h; ++row)
    for (std::int64_t col = 0; col < w; ++col)
      for (std::int64_t c = 0; c < c_n; ++c)
        out.at(col, row, c) = t.data()[(c * h + row) * w + col];
  return out;
}

std::vector<std::int32_t> labels_to_targets(const SemanticLabelGrid& labels) {
  std::vector<std::int32_t> t(labels.labels.size());
  for (std::size_t i = 0; i < labels.labels.size(); ++i)
    t[i] = labels.labels[i] == kIgnoreLabel ? kIgnoreTarget
                                            : static_cast<std::int32_t>(labels.labels[i]);
  return t;
}

std::vector<std::int32_t> sketch_to_targets(const SketchGrid& sketch,
                                            const SemanticLabelGrid& labels) {
  if (sketch.grid.spec.dims.x != labels.spec.dims.x ||
      sketch.grid.spec.dims.y != labels.spec.dims.y ||
      sketch.grid.spec.dims.z != labels.spec.dims.z)
    throw ValidationError("sketch_to_targets: grid dims differ");
  std::vector<std::int32_t> t(sketch.grid.values.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = labels.labels[i] == kIgnoreLabel ? kIgnoreTarget
                                            : (sketch.grid.values[i] ? 1 : 0);
  return t;
}

SemanticLabelGrid argmax_to_labels(const nn::Tensor& logits, const GridSpec& spec) {
  if (logits.ndim() != 5 || logits.dim(0) != 1)
    throw ValidationError("argmax_to_labels expects [1,C,D,H,W]");
  const std::int64_t c_n = logits.dim(1);
  const std::int64_t n = spec.num_voxels();
  if (logits.numel() != c_n * n)
    throw ValidationError("argmax_to_labels: logit volume does not match grid");
  SemanticLabelGrid out(spec, c_n);
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t best = 0;
    double best_v = logits.data()[i];
    for (std::int64_t c = 1; c < c_n; ++c) {
      const double v = logits.data()[c * n + i];
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    out.labels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(best);
  }
  return out;
}

}  // namespace ssc
