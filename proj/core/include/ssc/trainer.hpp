#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ssc/metrics.hpp"
#include "ssc/model.hpp"
#include "ssc/optim.hpp"
#include "ssc/scene.hpp"

namespace ssc {

struct TrainConfig {
  std::int64_t batch_size = 4;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double base_lr = 0.1;
  std::int64_t epochs = 10;
  std::uint64_t seed = 1;
  std::string mode = "joint";  // joint | stagewise

  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;
  double semantic = 0.0;
  double sketch = 0.0;
  double cvae = 0.0;
  double gsnn = 0.0;
  double hybrid = 0.0;
};

// Which losses participate; stagewise training alternates the last two.
enum class LossScope { All, SketchOnly, SemanticOnly };

struct SampleLoss {
  nn::Tensor total;  // scalar graph output
  LossBreakdown values;
};

// Builds the full loss graph for one sample: semantic + hybrid + sketch
// for the Full variant, semantic only for the ablated variants.
SampleLoss total_loss(const SceneSample& sample, SscModel& model, Rng& rng, bool training,
                      LossScope scope = LossScope::All);

// Inference path: argmax semantic labels for one sample.
SemanticLabelGrid predict_labels(const SceneSample& sample, SscModel& model, Rng& rng);

EvalReport evaluate_model(SscModel& model, const std::vector<SceneSample>& samples,
                          std::uint64_t eval_seed);

struct EpochRecord {
  std::int64_t epoch = 0;
  double lr = 0.0;
  LossBreakdown mean_loss;
  EvalReport val;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  EvalReport final_val;
};

// SGD + poly schedule over all epochs; deterministic under the config
// seed. Throws ValidationError on an empty dataset or a non-finite loss.
// on_epoch (optional) observes each epoch record as it is produced.
TrainResult train(SscModel& model, const std::vector<SceneSample>& train_set,
                  const std::vector<SceneSample>& val_set, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// Replaces the sketch-stage outputs with the ground-truth sketch whose
// positive voxels are independently dropped with probability drop_rate,
// then evaluates stage 2. Requires the Full variant.
EvalReport run_oracle_ablation(SscModel& model, const std::vector<SceneSample>& samples,
                               double drop_rate, Rng& rng);

}  // namespace ssc
