#include "ssc/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ssc/cvae.hpp"
#include "ssc/model.hpp"
#include "ssc/scene.hpp"
#include "ssc/trainer.hpp"

namespace ssc {

using nn::Tensor;

double finite_diff_max_rel_err(const std::function<Tensor()>& forward,
                               const std::vector<Tensor>& leaves, double step,
                               std::int64_t max_coords, double fault_offset) {
  for (Tensor leaf : leaves) leaf.zero_grad();  // handles alias shared storage
  const Tensor out = forward();
  out.backward();

  double worst = 0.0;
  for (const Tensor& leaf : leaves) {
    Tensor l = leaf;
    const std::int64_t n = l.numel();
    const std::int64_t probes = (max_coords > 0 && max_coords < n) ? max_coords : n;
    for (std::int64_t k = 0; k < probes; ++k) {
      const std::int64_t i = probes == n ? k : (k * n) / probes;
      const double analytic = l.grad()[static_cast<std::size_t>(i)] + fault_offset;
      const double saved = l.data()[i];
      l.data()[i] = saved + step;
      const double fp = forward().item();
      l.data()[i] = saved - step;
      const double fm = forward().item();
      l.data()[i] = saved;
      const double numeric = (fp - fm) / (2.0 * step);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-2});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

namespace {

struct NamedCheck {
  std::string name;
  std::function<double(Rng&, double)> run;  // (rng, fault_offset) -> max rel err
};

Tensor rand_tensor(std::vector<std::int64_t> shape, Rng& rng, bool requires_grad = true,
                   double scale = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  for (auto& v : t.values()) v = scale * rng.normal();
  return t;
}

std::vector<std::int32_t> rand_targets(std::int64_t count, std::int64_t classes, Rng& rng,
                                       double ignore_prob = 0.1) {
  std::vector<std::int32_t> t(static_cast<std::size_t>(count));
  for (auto& v : t)
    v = rng.uniform() < ignore_prob ? kIgnoreTarget
                                    : static_cast<std::int32_t>(rng.uniform_int(0, classes - 1));
  return t;
}

// Small scene + model for the composite checks. Probing every parameter is
// too slow; a spread of leaves per component still exercises the complete
// graph, because the loss gradient must flow through every layer to reach
// the stem weights.
struct ToySetup {
  GridSpec spec;
  SceneSample sample;
  ModelConfig cfg;
};

ToySetup make_toy(Rng& rng) {
  ToySetup t;
  t.spec.dims = {8, 8, 8};
  t.spec.voxel_size = 0.05;
  t.spec.origin = {0, 0, 0};
  SceneOptions opts;
  opts.image_width = 16;
  opts.image_height = 12;
  t.sample = generate_synthetic_scene(rng.next_u64(), t.spec, 4, opts);

  t.cfg.variant = ModelVariant::Full;
  t.cfg.num_classes = 4;
  t.cfg.feature_channels = 4;
  t.cfg.stage1 = TrunkConfig{{{3, 1}}, {{1, 2}, {2, 1}}, {{4, 2}}, 0, 0};
  t.cfg.stage2 = t.cfg.stage1;
  t.cfg.encoder2d.hidden = {4};
  t.cfg.hallucination.latent_dim = 3;
  t.cfg.hallucination.num_samples = 2;
  t.cfg.hallucination.hidden_channels = 4;
  return t;
}

std::vector<Tensor> spread_params(nn::ParamRegistry& reg, std::size_t stride) {
  std::vector<Tensor> leaves;
  for (std::size_t i = 0; i < reg.params.size(); i += stride)
    if (reg.params[i].second.requires_grad()) leaves.push_back(reg.params[i].second);
  return leaves;
}

std::vector<NamedCheck> build_checks() {
  std::vector<NamedCheck> checks;

  checks.push_back({"conv3d", [](Rng& rng, double fault) {
    Tensor x = rand_tensor({1, 2, 4, 4, 4}, rng);
    Tensor w = rand_tensor({3, 2, 3, 3, 3}, rng, true, 0.4);
    Tensor b = rand_tensor({3}, rng, true, 0.2);
    auto fwd = [&] { return nn::sum(nn::conv3d(x, w, b, nn::ConvOpts::iso(2, 2, 2))); };
    return finite_diff_max_rel_err(fwd, {x, w, b}, 1e-5, 0, fault);
  }});

  checks.push_back({"deconv3d", [](Rng& rng, double fault) {
    Tensor x = rand_tensor({1, 3, 3, 3, 3}, rng);
    Tensor w = rand_tensor({3, 2, 4, 4, 4}, rng, true, 0.4);
    Tensor b = rand_tensor({2}, rng, true, 0.2);
    nn::ConvOpts opts;
    opts.stride = {2, 2, 2};
    opts.padding = {1, 1, 1};
    auto fwd = [&] { return nn::sum(nn::deconv3d(x, w, b, opts)); };
    return finite_diff_max_rel_err(fwd, {x, w, b}, 1e-5, 0, fault);
  }});

  checks.push_back({"conv2d", [](Rng& rng, double fault) {
    Tensor x = rand_tensor({1, 2, 6, 5}, rng);
    Tensor w = rand_tensor({3, 2, 3, 3}, rng, true, 0.4);
    Tensor b = rand_tensor({3}, rng, true, 0.2);
    nn::Conv2dOpts opts;
    opts.padding = {1, 1};
    auto fwd = [&] { return nn::sum(nn::conv2d(x, w, b, opts)); };
    return finite_diff_max_rel_err(fwd, {x, w, b}, 1e-5, 0, fault);
  }});

  checks.push_back({"batch_norm", [](Rng& rng, double fault) {
    Tensor x = rand_tensor({2, 3, 4, 4}, rng);
    Tensor gamma = rand_tensor({3}, rng, true, 0.5);
    Tensor beta = rand_tensor({3}, rng, true, 0.5);
    std::vector<double> rm(3, 0.0), rv(3, 1.0);
    // Weighted sum makes the check sensitive to the normalization coupling.
    Tensor probe = rand_tensor({2, 3, 4, 4}, rng, false);
    auto fwd = [&] {
      std::vector<double> rm_copy = rm, rv_copy = rv;
      Tensor y = nn::batch_norm(x, gamma, beta, rm_copy, rv_copy, true);
      return nn::sum(nn::mul(y, Tensor::from_values(y.shape(), probe.values())));
    };
    return finite_diff_max_rel_err(fwd, {x, gamma, beta}, 1e-5, 0, fault);
  }});

  checks.push_back({"relu", [](Rng& rng, double fault) {
    Tensor x = rand_tensor({40}, rng);
    // keep away from the kink
    for (auto& v : x.values())
      if (std::abs(v) < 1e-3) v = 0.5;
    Tensor probe = rand_tensor({40}, rng, false);
    auto fwd = [&] { return nn::sum(nn::mul(nn::relu(x), Tensor::from_values(x.shape(), probe.values()))); };
    return finite_diff_max_rel_err(fwd, {x}, 1e-5, 0, fault);
  }});

  checks.push_back({"linear", [](Rng& rng, double fault) {
    Tensor x = rand_tensor({3, 5}, rng);
    Tensor w = rand_tensor({4, 5}, rng, true, 0.5);
    Tensor b = rand_tensor({4}, rng, true, 0.2);
    auto fwd = [&] { return nn::sum(nn::linear(x, w, b)); };
    return finite_diff_max_rel_err(fwd, {x, w, b}, 1e-5, 0, fault);
  }});

  checks.push_back({"softmax_channel", [](Rng& rng, double fault) {
    Tensor x = rand_tensor({1, 3, 2, 2, 2}, rng);
    Tensor probe = rand_tensor({1, 3, 2, 2, 2}, rng, false);
    auto fwd = [&] {
      return nn::sum(nn::mul(nn::softmax_channel(x), Tensor::from_values(x.shape(), probe.values())));
    };
    return finite_diff_max_rel_err(fwd, {x}, 1e-5, 0, fault);
  }});

  checks.push_back({"softmax_cross_entropy", [](Rng& rng, double fault) {
    Tensor logits = rand_tensor({1, 4, 3, 3, 3}, rng);
    const auto targets = rand_targets(27, 4, rng);
    auto fwd = [&] { return nn::softmax_cross_entropy(logits, targets, kIgnoreTarget); };
    return finite_diff_max_rel_err(fwd, {logits}, 1e-5, 0, fault);
  }});

  checks.push_back({"kl_standard_normal", [](Rng& rng, double fault) {
    Tensor mean = rand_tensor({2, 5}, rng);
    Tensor logvar = rand_tensor({2, 5}, rng, true, 0.5);
    auto fwd = [&] { return nn::kl_standard_normal(mean, logvar); };
    return finite_diff_max_rel_err(fwd, {mean, logvar}, 1e-5, 0, fault);
  }});

  checks.push_back({"ddr_block", [](Rng& rng, double fault) {
    nn::DdrBlockConfig cfg;
    cfg.in_channels = 3;
    cfg.out_channels = 4;
    cfg.bottleneck = 2;
    cfg.dilation = 2;
    cfg.downsample = 2;
    nn::DdrBlock block = nn::DdrBlock::create(cfg, rng);
    nn::ParamRegistry reg;
    block.register_params(reg, "ddr");
    Tensor x = rand_tensor({1, 3, 4, 4, 4}, rng);
    std::vector<Tensor> leaves{x};
    for (auto& [name, p] : reg.params) leaves.push_back(p);
    auto fwd = [&] { return nn::sum(block.forward(x)); };
    return finite_diff_max_rel_err(fwd, leaves, 1e-5, 12, fault);
  }});

  checks.push_back({"encode_posterior", [](Rng& rng, double fault) {
    HallucinationConfig cfg;
    cfg.latent_dim = 3;
    cfg.num_samples = 2;
    cfg.hidden_channels = 3;
    SketchHallucination module = SketchHallucination::create(cfg, rng);
    nn::ParamRegistry reg;
    module.register_params(reg, "cvae");
    Tensor g_gt = rand_tensor({1, 1, 3, 3, 3}, rng, true, 0.5);
    Tensor g_raw = rand_tensor({1, 2, 3, 3, 3}, rng, true, 0.5);
    auto fwd = [&] {
      const GaussianParams p = module.encode_posterior(g_gt, g_raw);
      return nn::add(nn::sum(p.mean), nn::mul_scalar(nn::sum(p.logvar), 0.7));
    };
    std::vector<Tensor> leaves{g_gt, g_raw};
    for (auto& [name, p] : reg.params) leaves.push_back(p);
    return finite_diff_max_rel_err(fwd, leaves, 1e-5, 10, fault);
  }});

  checks.push_back({"sample_latent", [](Rng& rng, double fault) {
    Tensor mean = rand_tensor({1, 4}, rng);
    Tensor logvar = rand_tensor({1, 4}, rng, true, 0.5);
    Tensor noise = rand_tensor({1, 4}, rng, false);
    auto fwd = [&] { return nn::sum(sample_latent({mean, logvar}, noise)); };
    return finite_diff_max_rel_err(fwd, {mean, logvar}, 1e-5, 0, fault);
  }});

  auto cvae_setup = [](Rng& rng, auto&& loss_builder, double fault) {
    HallucinationConfig cfg;
    cfg.latent_dim = 2;
    cfg.num_samples = 2;
    cfg.hidden_channels = 3;
    SketchHallucination module = SketchHallucination::create(cfg, rng);
    nn::ParamRegistry reg;
    module.register_params(reg, "cvae");
    Tensor g_gt = Tensor::zeros({1, 1, 3, 3, 3});
    for (auto& v : g_gt.values()) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
    Tensor g_raw_logits = rand_tensor({1, 2, 3, 3, 3}, rng, true, 0.5);
    std::vector<std::int32_t> targets(27);
    for (std::size_t i = 0; i < targets.size(); ++i)
      targets[i] = g_gt.values()[i] > 0.5 ? 1 : 0;
    const std::uint64_t noise_seed = rng.next_u64();
    auto fwd = [&, noise_seed] {
      Rng noise_rng(noise_seed);  // frozen noise: same draws every evaluation
      Tensor g_raw = nn::softmax_channel(g_raw_logits);
      return loss_builder(module, g_gt, targets, g_raw, noise_rng);
    };
    std::vector<Tensor> leaves{g_raw_logits};
    for (auto& [name, p] : reg.params) leaves.push_back(p);
    return finite_diff_max_rel_err(fwd, leaves, 1e-5, 8, fault);
  };

  checks.push_back({"loss_cvae", [cvae_setup](Rng& rng, double fault) {
    return cvae_setup(rng, [](const SketchHallucination& m, const Tensor& g_gt,
                              const std::vector<std::int32_t>& t, const Tensor& g_raw, Rng& nr) {
      return loss_cvae(g_gt, t, g_raw, m, nr);
    }, fault);
  }});

  checks.push_back({"loss_gsnn", [cvae_setup](Rng& rng, double fault) {
    return cvae_setup(rng, [](const SketchHallucination& m, const Tensor& g_gt,
                              const std::vector<std::int32_t>& t, const Tensor& g_raw, Rng& nr) {
      return loss_gsnn(t, g_raw, m, nr);
    }, fault);
  }});

  checks.push_back({"loss_hybrid", [cvae_setup](Rng& rng, double fault) {
    return cvae_setup(rng, [](const SketchHallucination& m, const Tensor& g_gt,
                              const std::vector<std::int32_t>& t, const Tensor& g_raw, Rng& nr) {
      return loss_hybrid(g_gt, t, g_raw, m, nr).hybrid;
    }, fault);
  }});

  checks.push_back({"fuse_priors", [](Rng& rng, double fault) {
    ToySetup toy = make_toy(rng);
    SscModel model(toy.cfg, rng.next_u64());
    Tensor f_proj = rand_tensor({1, 4, 8, 8, 8}, rng, false, 0.5);
    Tensor g_raw = rand_tensor({1, 2, 8, 8, 8}, rng, true, 0.5);
    Tensor g_refined = rand_tensor({1, 2, 8, 8, 8}, rng, true, 0.5);
    std::vector<Tensor> leaves{g_raw, g_refined};
    for (auto& [name, p] : model.params().params)
      if (name.rfind("prior_", 0) == 0) leaves.push_back(p);
    auto fwd = [&] { return nn::sum(model.fuse_priors(f_proj, g_raw, g_refined)); };
    return finite_diff_max_rel_err(fwd, leaves, 1e-5, 6, fault);
  }});

  checks.push_back({"stage1_forward", [](Rng& rng, double fault) {
    ToySetup toy = make_toy(rng);
    SscModel model(toy.cfg, rng.next_u64());
    const Tensor tsdf = tsdf_to_tensor(toy.sample.tsdf);
    Tensor probe = rand_tensor({1, 2, 8, 8, 8}, rng, false);
    auto fwd = [&] {
      Tensor logits = model.stage1_forward(tsdf, true);
      return nn::sum(nn::mul(logits, Tensor::from_values(logits.shape(), probe.values())));
    };
    auto leaves = spread_params(model.params(), 9);
    return finite_diff_max_rel_err(fwd, leaves, 1e-5, 4, fault);
  }});

  checks.push_back({"stage2_forward", [](Rng& rng, double fault) {
    ToySetup toy = make_toy(rng);
    SscModel model(toy.cfg, rng.next_u64());
    Tensor fused = rand_tensor({1, 4, 8, 8, 8}, rng, true, 0.5);
    Tensor probe = rand_tensor({1, 4, 8, 8, 8}, rng, false);
    auto fwd = [&] {
      Tensor logits = model.stage2_forward(fused, true);
      return nn::sum(nn::mul(logits, Tensor::from_values(logits.shape(), probe.values())));
    };
    std::vector<Tensor> leaves{fused};
    for (auto& [name, p] : model.params().params)
      if (name.rfind("stage2", 0) == 0 && p.requires_grad()) leaves.push_back(p);
    std::vector<Tensor> pruned;
    for (std::size_t i = 0; i < leaves.size(); i += 7) pruned.push_back(leaves[i]);
    return finite_diff_max_rel_err(fwd, pruned, 1e-5, 4, fault);
  }});

  checks.push_back({"total_loss", [](Rng& rng, double fault) {
    ToySetup toy = make_toy(rng);
    SscModel model(toy.cfg, rng.next_u64());
    const std::uint64_t noise_seed = rng.next_u64();
    auto fwd = [&, noise_seed] {
      Rng noise_rng(noise_seed);
      return total_loss(toy.sample, model, noise_rng, true).total;
    };
    auto leaves = spread_params(model.params(), 11);
    return finite_diff_max_rel_err(fwd, leaves, 1e-5, 3, fault);
  }});

  return checks;
}

}  // namespace

std::vector<std::string> grad_check_names() {
  std::vector<std::string> names;
  for (const auto& c : build_checks()) names.push_back(c.name);
  return names;
}

std::vector<GradCheckReport> run_grad_checks(std::uint64_t seed, double tolerance,
                                             const std::string& corrupt_op) {
  std::vector<GradCheckReport> reports;
  const auto checks = build_checks();
  for (std::size_t i = 0; i < checks.size(); ++i) {
    Rng rng(seed + 1000003ULL * i);
    const double fault = checks[i].name == corrupt_op ? 1.0 : 0.0;
    GradCheckReport rep;
    rep.op = checks[i].name;
    rep.max_rel_err = checks[i].run(rng, fault);
    rep.pass = rep.max_rel_err < tolerance;
    reports.push_back(rep);
  }
  return reports;
}

}  // namespace ssc
