#include "ssc/trainer.hpp"

#include <algorithm>
#include <cmath>

namespace ssc {

using nn::Tensor;

void TrainConfig::validate() const {
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (!(base_lr > 0.0)) throw ValidationError("base_lr must be > 0");
  if (mode != "joint" && mode != "stagewise")
    throw ValidationError("train mode must be 'joint' or 'stagewise'");
}

SampleLoss total_loss(const SceneSample& sample, SscModel& model, Rng& rng, bool training,
                      LossScope scope) {
  const GridSpec& spec = sample.labels.spec;
  const ModelVariant variant = model.config().variant;
  SampleLoss out;

  const Tensor tsdf_t = tsdf_to_tensor(sample.tsdf);

  if (variant == ModelVariant::OneStage) {
    const Tensor sem_logits = model.stage2_forward(tsdf_t, training);
    out.total = nn::softmax_cross_entropy(sem_logits, labels_to_targets(sample.labels),
                                          kIgnoreTarget);
    out.values.semantic = out.total.item();
    out.values.total = out.values.semantic;
    return out;
  }

  if (variant == ModelVariant::TwoStage) {
    Tensor trunk_feature;
    model.stage1_forward(tsdf_t, training, &trunk_feature);
    const Tensor f_proj =
        model.project_rgb(sample.rgb, sample.depth, sample.camera, spec, training);
    const Tensor fused = model.fuse_implicit(f_proj, trunk_feature);
    const Tensor sem_logits = model.stage2_forward(fused, training);
    out.total = nn::softmax_cross_entropy(sem_logits, labels_to_targets(sample.labels),
                                          kIgnoreTarget);
    out.values.semantic = out.total.item();
    out.values.total = out.values.semantic;
    return out;
  }

  // Full variant: semantic + hybrid + sketch.
  const bool sketch_part = scope != LossScope::SemanticOnly;
  const bool semantic_part = scope != LossScope::SketchOnly;

  const Tensor sketch_logits = model.stage1_forward(tsdf_t, training);
  const auto sketch_targets = sketch_to_targets(sample.sketch, sample.labels);
  const Tensor l_sketch = nn::softmax_cross_entropy(sketch_logits, sketch_targets, kIgnoreTarget);

  Tensor g_raw = nn::softmax_channel(sketch_logits);
  if (scope == LossScope::SemanticOnly) g_raw = g_raw.detach();

  const Tensor g_gt = sketch_to_tensor(sample.sketch);
  std::vector<Tensor> prior_probs;
  const CvaeLosses cvae =
      loss_hybrid(g_gt, sketch_targets, g_raw, model.hallucination(), rng, &prior_probs);

  // The prior-sample decodes double as the refined sketch fed to stage 2,
  // matching the inference-time averaging.
  RefinedSketch refined =
      refined_from_probs(prior_probs, spec, model.config().hallucination.threshold);
  Tensor g_refined = refined.probabilities;
  if (scope == LossScope::SemanticOnly) g_refined = g_refined.detach();

  Tensor total;
  if (sketch_part) {
    total = nn::add(l_sketch, cvae.hybrid);
  }
  if (semantic_part) {
    const Tensor f_proj =
        model.project_rgb(sample.rgb, sample.depth, sample.camera, spec, training);
    const Tensor fused = model.fuse_priors(f_proj, g_raw, g_refined);
    const Tensor sem_logits = model.stage2_forward(fused, training);
    const Tensor l_semantic = nn::softmax_cross_entropy(
        sem_logits, labels_to_targets(sample.labels), kIgnoreTarget);
    total = total.defined() ? nn::add(l_semantic, total) : l_semantic;
    out.values.semantic = l_semantic.item();
  }

  out.total = total;
  out.values.sketch = l_sketch.item();
  out.values.cvae = cvae.cvae.item();
  out.values.gsnn = cvae.gsnn.item();
  out.values.hybrid = cvae.hybrid.item();
  out.values.total = total.item();
  return out;
}

SemanticLabelGrid predict_labels(const SceneSample& sample, SscModel& model, Rng& rng) {
  nn::NoGradGuard guard;
  const GridSpec& spec = sample.labels.spec;
  const ModelVariant variant = model.config().variant;
  const Tensor tsdf_t = tsdf_to_tensor(sample.tsdf);

  if (variant == ModelVariant::OneStage) {
    return argmax_to_labels(model.stage2_forward(tsdf_t, false), spec);
  }
  if (variant == ModelVariant::TwoStage) {
    Tensor trunk_feature;
    model.stage1_forward(tsdf_t, false, &trunk_feature);
    const Tensor f_proj = model.project_rgb(sample.rgb, sample.depth, sample.camera, spec, false);
    const Tensor fused = model.fuse_implicit(f_proj, trunk_feature);
    return argmax_to_labels(model.stage2_forward(fused, false), spec);
  }

  const Tensor sketch_logits = model.stage1_forward(tsdf_t, false);
  const Tensor g_raw = nn::softmax_channel(sketch_logits);
  const RefinedSketch refined = infer_refined(g_raw, model.hallucination(), spec, rng);
  const Tensor f_proj = model.project_rgb(sample.rgb, sample.depth, sample.camera, spec, false);
  const Tensor fused = model.fuse_priors(f_proj, g_raw, refined.probabilities);
  return argmax_to_labels(model.stage2_forward(fused, false), spec);
}

EvalReport evaluate_model(SscModel& model, const std::vector<SceneSample>& samples,
                          std::uint64_t eval_seed) {
  std::vector<EvalReport> reports;
  reports.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Rng rng(eval_seed + 0x9e3779b97f4a7c15ULL * (i + 1));
    const SemanticLabelGrid pred = predict_labels(samples[i], model, rng);
    reports.push_back(evaluate(pred, samples[i].labels, samples[i].tsdf.masks));
  }
  return mean_report(reports);
}

TrainResult train(SscModel& model, const std::vector<SceneSample>& train_set,
                  const std::vector<SceneSample>& val_set, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw ValidationError("training set is empty");

  const std::int64_t batches_per_epoch =
      (static_cast<std::int64_t>(train_set.size()) + cfg.batch_size - 1) / cfg.batch_size;
  const std::int64_t max_iter = cfg.epochs * batches_per_epoch;
  nn::PolySchedule schedule{cfg.base_lr, max_iter, 0.9};
  nn::SgdOptimizer opt(model.params(), cfg.momentum, cfg.weight_decay);
  Rng rng(cfg.seed);

  const bool stagewise = cfg.mode == "stagewise" && model.config().variant == ModelVariant::Full;
  const std::int64_t switch_epoch = stagewise ? (cfg.epochs + 1) / 2 : 0;

  TrainResult result;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::int64_t iter = 0;
  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates on the deterministic stream.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    const LossScope scope = !stagewise          ? LossScope::All
                            : epoch < switch_epoch ? LossScope::SketchOnly
                                                   : LossScope::SemanticOnly;

    LossBreakdown epoch_loss;
    double epoch_lr = 0.0;
    std::int64_t seen = 0;
    for (std::int64_t b = 0; b < batches_per_epoch; ++b) {
      const std::int64_t lo = b * cfg.batch_size;
      const std::int64_t hi = std::min<std::int64_t>(lo + cfg.batch_size,
                                                     static_cast<std::int64_t>(train_set.size()));
      if (lo >= hi) break;
      opt.zero_grad();
      Tensor batch_total;
      for (std::int64_t s = lo; s < hi; ++s) {
        SampleLoss item = total_loss(train_set[order[static_cast<std::size_t>(s)]], model, rng,
                                     true, scope);
        if (!std::isfinite(item.values.total))
          throw ValidationError("training diverged: non-finite loss at iteration " +
                                std::to_string(iter));
        batch_total = batch_total.defined() ? nn::add(batch_total, item.total) : item.total;
        epoch_loss.total += item.values.total;
        epoch_loss.semantic += item.values.semantic;
        epoch_loss.sketch += item.values.sketch;
        epoch_loss.cvae += item.values.cvae;
        epoch_loss.gsnn += item.values.gsnn;
        epoch_loss.hybrid += item.values.hybrid;
        ++seen;
      }
      batch_total = nn::mul_scalar(batch_total, 1.0 / static_cast<double>(hi - lo));
      batch_total.backward();
      epoch_lr = schedule.lr(iter);
      opt.step(epoch_lr);
      ++iter;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.lr = epoch_lr;
    const double inv = seen > 0 ? 1.0 / static_cast<double>(seen) : 0.0;
    record.mean_loss = {epoch_loss.total * inv,  epoch_loss.semantic * inv,
                        epoch_loss.sketch * inv, epoch_loss.cvae * inv,
                        epoch_loss.gsnn * inv,   epoch_loss.hybrid * inv};
    if (!val_set.empty())
      record.val =
          evaluate_model(model, val_set, cfg.seed ^ (0xe7a1ULL + static_cast<std::uint64_t>(epoch)));
    result.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  result.final_val = result.epochs.empty() ? EvalReport{} : result.epochs.back().val;
  return result;
}

EvalReport run_oracle_ablation(SscModel& model, const std::vector<SceneSample>& samples,
                               double drop_rate, Rng& rng) {
  if (model.config().variant != ModelVariant::Full)
    throw ValidationError("oracle ablation requires the full model variant");
  if (drop_rate < 0.0 || drop_rate > 1.0)
    throw ValidationError("drop_rate must lie in [0, 1]");

  nn::NoGradGuard guard;
  std::vector<EvalReport> reports;
  reports.reserve(samples.size());
  for (const SceneSample& sample : samples) {
    SketchGrid dropped = sample.sketch;
    for (auto& v : dropped.grid.values)
      if (v != 0 && rng.uniform() < drop_rate) v = 0;

    const Tensor prior = sketch_to_prob_tensor(dropped);
    const GridSpec& spec = sample.labels.spec;
    const Tensor f_proj = model.project_rgb(sample.rgb, sample.depth, sample.camera, spec, false);
    const Tensor fused = model.fuse_priors(f_proj, prior, prior);
    const SemanticLabelGrid pred = argmax_to_labels(model.stage2_forward(fused, false), spec);
    reports.push_back(evaluate(pred, sample.labels, sample.tsdf.masks));
  }
  return mean_report(reports);
}

}  // namespace ssc
