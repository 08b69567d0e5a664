#pragma once

#include <cstdint>
#include <vector>

#include "ssc/blocks.hpp"

namespace ssc::nn {

// lr(iter) = base_lr * (1 - iter/max_iter)^power.
struct PolySchedule {
  double base_lr = 0.1;
  std::int64_t max_iter = 1;
  double power = 0.9;

  double lr(std::int64_t iter) const;
};

// Mini-batch SGD with momentum and decoupled-from-nothing classic weight
// decay folded into the gradient: v <- m*v + (g + wd*p); p <- p - lr*v.
class SgdOptimizer {
 public:
  SgdOptimizer(ParamRegistry& registry, double momentum = 0.9, double weight_decay = 0.0005);

  void step(double lr);
  void zero_grad();

 private:
  ParamRegistry& registry_;
  double momentum_;
  double weight_decay_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace ssc::nn
