#include "ssc/optim.hpp"

#include <cmath>

#include "ssc/errors.hpp"

namespace ssc::nn {

double PolySchedule::lr(std::int64_t iter) const {
  if (max_iter < 1) throw ValidationError("poly schedule needs max_iter >= 1");
  if (iter < 0 || iter > max_iter) throw ValidationError("poly schedule iteration out of range");
  const double frac = 1.0 - static_cast<double>(iter) / static_cast<double>(max_iter);
  return base_lr * std::pow(frac, power);
}

SgdOptimizer::SgdOptimizer(ParamRegistry& registry, double momentum, double weight_decay)
    : registry_(registry), momentum_(momentum), weight_decay_(weight_decay) {
  velocity_.resize(registry_.params.size());
  for (std::size_t i = 0; i < registry_.params.size(); ++i)
    velocity_[i].assign(static_cast<std::size_t>(registry_.params[i].second.numel()), 0.0);
}

void SgdOptimizer::step(double lr) {
  for (std::size_t i = 0; i < registry_.params.size(); ++i) {
    Tensor& p = registry_.params[i].second;
    if (!p.requires_grad()) continue;
    auto& g = p.grad();
    auto& v = velocity_[i];
    double* pd = p.data();
    const std::int64_t n = p.numel();
    for (std::int64_t j = 0; j < n; ++j) {
      v[static_cast<std::size_t>(j)] =
          momentum_ * v[static_cast<std::size_t>(j)] + (g[static_cast<std::size_t>(j)] + weight_decay_ * pd[j]);
      pd[j] -= lr * v[static_cast<std::size_t>(j)];
    }
  }
}

void SgdOptimizer::zero_grad() { registry_.zero_grad(); }

}  // namespace ssc::nn
