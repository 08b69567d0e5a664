#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ssc/cvae.hpp"
#include "ssc/projection.hpp"
#include "ssc/tsdf.hpp"

namespace ssc {

struct ConvSpecEntry {
  std::int64_t kernel = 3;
  std::int64_t dilation = 1;
};
struct DdrSpecEntry {
  std::int64_t dilation = 1;
  std::int64_t downsample = 1;
};
struct DeconvSpecEntry {
  std::int64_t kernel = 4;
  std::int64_t rate = 2;
};

// Encoder-decoder 3D trunk: stem convs -> DDR blocks -> deconvs, with an
// optional additive skip from a stem output to a deconv output. Channel
// width is constant through the trunk.
struct TrunkConfig {
  std::vector<ConvSpecEntry> convs{{3, 1}, {3, 1}};
  std::vector<DdrSpecEntry> ddr{{1, 2}, {2, 2}, {3, 1}};
  std::vector<DeconvSpecEntry> deconvs{{4, 2}, {4, 2}};
  std::int64_t skip_from = 1;  // stem conv index; -1 disables
  std::int64_t skip_to = 1;    // deconv index

  void validate() const;
};

struct Encoder2dConfig {
  std::vector<std::int64_t> hidden{8, 8};
  std::int64_t kernel = 3;
  bool trainable = false;
};

enum class ModelVariant { OneStage, TwoStage, Full };

std::string to_string(ModelVariant v);
ModelVariant variant_from_string(const std::string& s);

struct ModelConfig {
  ModelVariant variant = ModelVariant::Full;
  std::int64_t num_classes = 5;       // N+1, class 0 = empty
  std::int64_t feature_channels = 16;  // C
  TrunkConfig stage1;
  TrunkConfig stage2;
  Encoder2dConfig encoder2d;
  HallucinationConfig hallucination;

  void validate() const;
};

class TrunkNet {
 public:
  static TrunkNet create(const TrunkConfig& cfg, std::int64_t in_channels, std::int64_t width,
                         Rng& rng);
  nn::Tensor forward(const nn::Tensor& x, bool training) const;
  void register_params(nn::ParamRegistry& reg, const std::string& prefix) const;

 private:
  TrunkConfig cfg_;
  std::vector<nn::Conv3dLayer> convs_;
  std::vector<nn::BatchNormLayer> conv_bns_;
  std::vector<nn::DdrBlock> blocks_;
  std::vector<nn::Deconv3dLayer> deconvs_;
  std::vector<nn::BatchNormLayer> deconv_bns_;
};

// Small resolution-preserving 2D stack standing in for a pretrained
// backbone plus the channel-reduction conv; frozen after random init
// unless configured trainable.
class Encoder2D {
 public:
  static Encoder2D create(const Encoder2dConfig& cfg, std::int64_t out_channels, Rng& rng);
  nn::Tensor forward(const nn::Tensor& rgb, bool training) const;
  bool trainable() const { return trainable_; }
  void register_params(nn::ParamRegistry& reg, const std::string& prefix) const;

 private:
  std::vector<nn::Conv2dLayer> convs_;
  std::vector<nn::BatchNormLayer> bns_;
  bool trainable_ = false;
};

// The two-stage completion network. Which components exist depends on the
// variant: OneStage runs only the semantic trunk on TSDF; TwoStage adds
// the TSDF branch whose implicit feature joins the projected RGB features;
// Full adds sketch supervision, the hallucination module and the explicit
// sketch prior mappings.
class SscModel {
 public:
  SscModel(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  nn::ParamRegistry& params() { return registry_; }
  const nn::ParamRegistry& params() const { return registry_; }

  // TSDF [1,1,D,H,W] -> two-class sketch logits; trunk_feature (optional
  // out) receives the pre-head full-resolution feature.
  nn::Tensor stage1_forward(const nn::Tensor& tsdf, bool training,
                            nn::Tensor* trunk_feature = nullptr) const;

  // RGB -> frozen 2D features -> depth-guided projection. The result is a
  // constant volume tensor: no gradient crosses the projection.
  nn::Tensor project_rgb(const FeatureMap2D& rgb, const DepthMap& depth,
                         const CameraModel& camera, const GridSpec& spec, bool training) const;

  // F_proj + Conv_raw(g_raw) + Conv_refined(g_refined), both priors mapped
  // 2 -> C channels by 3x3x3 convs.
  nn::Tensor fuse_priors(const nn::Tensor& f_proj, const nn::Tensor& g_raw,
                         const nn::Tensor& g_refined) const;

  // TwoStage fusion: F_proj + Conv_implicit(stage-1 trunk feature).
  nn::Tensor fuse_implicit(const nn::Tensor& f_proj, const nn::Tensor& trunk_feature) const;

  // Fused volume -> (N+1)-class logits at full grid resolution.
  nn::Tensor stage2_forward(const nn::Tensor& volume_features, bool training) const;

  const SketchHallucination& hallucination() const;
  bool has_stage1() const { return stage1_trunk_.has_value(); }
  bool has_sketch_head() const { return sketch_head_.has_value(); }
  bool has_priors() const { return prior_raw_.has_value(); }

 private:
  ModelConfig cfg_;
  nn::ParamRegistry registry_;
  std::optional<TrunkNet> stage1_trunk_;
  std::optional<nn::Conv3dLayer> sketch_head_;
  std::optional<SketchHallucination> cvae_;
  std::optional<Encoder2D> encoder2d_;
  std::optional<nn::Conv3dLayer> prior_raw_;
  std::optional<nn::Conv3dLayer> prior_refined_;
  std::optional<nn::Conv3dLayer> prior_implicit_;
  TrunkNet stage2_trunk_;
  nn::Conv3dLayer semantic_head_;
};

// ---- tensor/grid conversions -------------------------------------------------

nn::Tensor tsdf_to_tensor(const TsdfVolume& vol);
nn::Tensor sketch_to_tensor(const SketchGrid& sketch);                  // [1,1,D,H,W] 0/1
nn::Tensor sketch_to_prob_tensor(const SketchGrid& sketch);             // [1,2,D,H,W] one-hot
nn::Tensor feature_volume_to_tensor(const FeatureVolume& fv);           // [1,C,D,H,W]
nn::Tensor rgb_to_tensor(const FeatureMap2D& rgb);                      // [1,C,H,W]
FeatureMap2D tensor_to_feature_map(const nn::Tensor& t);                // [1,C,H,W] -> raster

// Targets in tensor linear order; IGNORE labels map to kIgnoreTarget.
std::vector<std::int32_t> labels_to_targets(const SemanticLabelGrid& labels);
std::vector<std::int32_t> sketch_to_targets(const SketchGrid& sketch,
                                            const SemanticLabelGrid& labels);

SemanticLabelGrid argmax_to_labels(const nn::Tensor& logits, const GridSpec& spec);

}  // namespace ssc
