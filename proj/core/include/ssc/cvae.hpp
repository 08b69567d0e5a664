#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssc/blocks.hpp"
#include "ssc/grid.hpp"
#include "ssc/sketch.hpp"

namespace ssc {

// Diagonal Gaussian over the latent code, one row per scene: [N, latent].
struct GaussianParams {
  nn::Tensor mean;
  nn::Tensor logvar;
};

struct HallucinationConfig {
  std::int64_t latent_dim = 16;
  std::int64_t num_samples = 4;  // K
  double lambda_kl = 2.0;        // lambda_1
  double lambda_recon = 1.0;     // lambda_2
  double alpha = 1.5;
  double threshold = 0.5;        // binary sketch decision
  std::int64_t hidden_channels = 8;

  void validate() const;
};

// Sketch hallucination module: a posterior encoder over (gt sketch,
// predicted raw sketch) and a conditional decoder that reconstructs a
// two-class sketch volume from a latent draw and the raw sketch.
class SketchHallucination {
 public:
  static SketchHallucination create(const HallucinationConfig& cfg, Rng& rng);

  // g_gt: [1,1,D,H,W] binary; g_raw: [1,2,D,H,W] probabilities.
  GaussianParams encode_posterior(const nn::Tensor& g_gt, const nn::Tensor& g_raw) const;

  // z: [1,latent]; returns two-class logits [1,2,D,H,W]. z is broadcast
  // over the volume and concatenated to g_raw as constant channels.
  nn::Tensor decode(const nn::Tensor& z, const nn::Tensor& g_raw) const;

  void register_params(nn::ParamRegistry& reg, const std::string& prefix) const;
  const HallucinationConfig& config() const { return cfg_; }

 private:
  HallucinationConfig cfg_;
  nn::Conv3dLayer enc1_, enc2_;
  nn::LinearLayer head_mean_, head_logvar_;
  nn::Conv3dLayer dec1_, dec2_;
};

// Reparameterization: z = mean + exp(logvar/2) * noise.
nn::Tensor sample_latent(const GaussianParams& p, const nn::Tensor& noise);

// lambda_1 * KL(q || N(0,I)) + lambda_2 * mean_k CE(gt, decode(z_k, g_raw))
// with z_k drawn from the posterior by reparameterization.
nn::Tensor loss_cvae(const nn::Tensor& g_gt, const std::vector<std::int32_t>& gt_targets,
                     const nn::Tensor& g_raw, const SketchHallucination& module, Rng& rng);

// mean_k CE(gt, decode(z_k, g_raw)) with z_k from the standard normal
// prior. When prior_probs is given, the per-sample softmax outputs are
// collected there (they double as the refined-sketch sample set).
nn::Tensor loss_gsnn(const std::vector<std::int32_t>& gt_targets, const nn::Tensor& g_raw,
                     const SketchHallucination& module, Rng& rng,
                     std::vector<nn::Tensor>* prior_probs = nullptr);

struct CvaeLosses {
  nn::Tensor cvae;
  nn::Tensor gsnn;
  nn::Tensor hybrid;  // cvae + alpha * gsnn
};

CvaeLosses loss_hybrid(const nn::Tensor& g_gt, const std::vector<std::int32_t>& gt_targets,
                       const nn::Tensor& g_raw, const SketchHallucination& module, Rng& rng,
                       std::vector<nn::Tensor>* prior_probs = nullptr);

struct RefinedSketch {
  nn::Tensor probabilities;  // [1,2,D,H,W], per-voxel class probabilities
  SketchGrid binary;
};

// Averages the post-softmax probabilities of the given decoded samples and
// thresholds channel 1 into a binary sketch.
RefinedSketch refined_from_probs(const std::vector<nn::Tensor>& probs, const GridSpec& spec,
                                 double threshold);

// K prior draws -> decode -> softmax -> average -> threshold.
RefinedSketch infer_refined(const nn::Tensor& g_raw, const SketchHallucination& module,
                            const GridSpec& spec, Rng& rng);

}  // namespace ssc
