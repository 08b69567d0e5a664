#include "ssc/cvae.hpp"

namespace ssc {

using nn::Tensor;

void HallucinationConfig::validate() const {
  if (latent_dim < 1) throw ValidationError("hallucination latent_dim must be >= 1");
  if (num_samples < 1) throw ValidationError("hallucination sample count K must be >= 1");
  if (!(lambda_kl > 0.0) || !(lambda_recon > 0.0) || !(alpha > 0.0))
    throw ValidationError("hallucination loss weights must be positive");
  if (hidden_channels < 1) throw ValidationError("hallucination hidden_channels must be >= 1");
}

SketchHallucination SketchHallucination::create(const HallucinationConfig& cfg, Rng& rng) {
  cfg.validate();
  SketchHallucination m;
  m.cfg_ = cfg;
  const std::int64_t h = cfg.hidden_channels;
  m.enc1_ = nn::Conv3dLayer::create(3, h, {3, 3, 3}, nn::ConvOpts::iso(1, 1, 1), rng);
  m.enc2_ = nn::Conv3dLayer::create(h, h, {3, 3, 3}, nn::ConvOpts::iso(1, 1, 1), rng);
  m.head_mean_ = nn::LinearLayer::create(h, cfg.latent_dim, rng);
  m.head_logvar_ = nn::LinearLayer::create(h, cfg.latent_dim, rng);
  m.dec1_ = nn::Conv3dLayer::create(2 + cfg.latent_dim, h, {3, 3, 3}, nn::ConvOpts::iso(1, 1, 1), rng);
  m.dec2_ = nn::Conv3dLayer::create(h, 2, {3, 3, 3}, nn::ConvOpts::iso(1, 1, 1), rng);
  return m;
}

GaussianParams SketchHallucination::encode_posterior(const Tensor& g_gt,
                                                     const Tensor& g_raw) const {
  if (g_gt.ndim() != 5 || g_raw.ndim() != 5 || g_gt.shape()[2] != g_raw.shape()[2] ||
      g_gt.shape()[3] != g_raw.shape()[3] || g_gt.shape()[4] != g_raw.shape()[4])
    throw ValidationError("encode_posterior: gt and raw sketch dims differ");
  Tensor h = nn::concat_channels({g_gt, g_raw});
  h = nn::relu(enc1_.forward(h));
  h = nn::relu(enc2_.forward(h));
  const Tensor pooled = nn::global_avg_pool(h);
  return {head_mean_.forward(pooled), head_logvar_.forward(pooled)};
}

Tensor SketchHallucination::decode(const Tensor& z, const Tensor& g_raw) const {
  if (z.ndim() != 2 || z.dim(1) != cfg_.latent_dim)
    throw ValidationError("decode: latent shape mismatch");
  const Tensor zvol = nn::broadcast_volume(z, g_raw.dim(2), g_raw.dim(3), g_raw.dim(4));
  Tensor h = nn::concat_channels({g_raw, zvol});
  h = nn::relu(dec1_.forward(h));
  return dec2_.forward(h);
}

void SketchHallucination::register_params(nn::ParamRegistry& reg, const std::string& prefix) const {
  enc1_.register_params(reg, prefix + ".enc1");
  enc2_.register_params(reg, prefix + ".enc2");
  head_mean_.register_params(reg, prefix + ".head_mean");
  head_logvar_.register_params(reg, prefix + ".head_logvar");
  dec1_.register_params(reg, prefix + ".dec1");
  dec2_.register_params(reg, prefix + ".dec2");
}

Tensor sample_latent(const GaussianParams& p, const Tensor& noise) {
  if (noise.shape() != p.mean.shape())
    throw ValidationError("sample_latent: noise shape must match latent shape");
  const Tensor std_dev = nn::exp(nn::mul_scalar(p.logvar, 0.5));
  return nn::add(p.mean, nn::mul(std_dev, noise));
}

Tensor loss_cvae(const Tensor& g_gt, const std::vector<std::int32_t>& gt_targets,
                 const Tensor& g_raw, const SketchHallucination& module, Rng& rng) {
  const auto& cfg = module.config();
  const GaussianParams post = module.encode_posterior(g_gt, g_raw);
  const Tensor kl = nn::kl_standard_normal(post.mean, post.logvar);

  Tensor recon;
  for (std::int64_t k = 0; k < cfg.num_samples; ++k) {
    const Tensor noise = nn::randn({1, cfg.latent_dim}, rng);
    const Tensor z = sample_latent(post, noise);
    const Tensor logits = module.decode(z, g_raw);
    const Tensor ce = nn::softmax_cross_entropy(logits, gt_targets, kIgnoreTarget);
    recon = recon.defined() ? nn::add(recon, ce) : ce;
  }
  recon = nn::mul_scalar(recon, 1.0 / static_cast<double>(cfg.num_samples));
  return nn::add(nn::mul_scalar(kl, cfg.lambda_kl), nn::mul_scalar(recon, cfg.lambda_recon));
}

Tensor loss_gsnn(const std::vector<std::int32_t>& gt_targets, const Tensor& g_raw,
                 const SketchHallucination& module, Rng& rng, std::vector<Tensor>* prior_probs) {
  const auto& cfg = module.config();
  Tensor acc;
  for (std::int64_t k = 0; k < cfg.num_samples; ++k) {
    const Tensor z = nn::randn({1, cfg.latent_dim}, rng);
    const Tensor logits = module.decode(z, g_raw);
    if (prior_probs) prior_probs->push_back(nn::softmax_channel(logits));
    const Tensor ce = nn::softmax_cross_entropy(logits, gt_targets, kIgnoreTarget);
    acc = acc.defined() ? nn::add(acc, ce) : ce;
  }
  return nn::mul_scalar(acc, 1.0 / static_cast<double>(cfg.num_samples));
}

CvaeLosses loss_hybrid(const Tensor& g_gt, const std::vector<std::int32_t>& gt_targets,
                       const Tensor& g_raw, const SketchHallucination& module, Rng& rng,
                       std::vector<Tensor>* prior_probs) {
  CvaeLosses out;
  out.cvae = loss_cvae(g_gt, gt_targets, g_raw, module, rng);
  out.gsnn = loss_gsnn(gt_targets, g_raw, module, rng, prior_probs);
  out.hybrid = nn::add(out.cvae, nn::mul_scalar(out.gsnn, module.config().alpha));
  return out;
}

RefinedSketch refined_from_probs(const std::vector<Tensor>& probs, const GridSpec& spec,
                                 double threshold) {
  if (probs.empty()) throw ValidationError("refined_from_probs: no samples");
  Tensor avg = probs.front();
  for (std::size_t i = 1; i < probs.size(); ++i) avg = nn::add(avg, probs[i]);
  avg = nn::mul_scalar(avg, 1.0 / static_cast<double>(probs.size()));

  RefinedSketch out;
  out.probabilities = avg;
  out.binary.grid = VoxelGrid<std::uint8_t>(spec);
  const std::int64_t n = spec.num_voxels();
  const double* p1 = avg.data() + n;  // channel 1 = sketch
  for (std::int64_t i = 0; i < n; ++i)
    out.binary.grid.values[static_cast<std::size_t>(i)] = p1[i] > threshold ? 1 : 0;
  return out;
}

RefinedSketch infer_refined(const Tensor& g_raw, const SketchHallucination& module,
                            const GridSpec& spec, Rng& rng) {
  const auto& cfg = module.config();
  std::vector<Tensor> probs;
  probs.reserve(static_cast<std::size_t>(cfg.num_samples));
  for (std::int64_t k = 0; k < cfg.num_samples; ++k) {
    const Tensor z = nn::randn({1, cfg.latent_dim}, rng);
    probs.push_back(nn::softmax_channel(module.decode(z, g_raw)));
  }
  return refined_from_probs(probs, spec, cfg.threshold);
}

}  // namespace ssc
