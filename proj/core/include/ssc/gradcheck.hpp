#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ssc/tensor.hpp"

namespace ssc {

struct GradCheckReport {
  std::string op;
  double max_rel_err = 0.0;
  bool pass = false;
};

// Central finite differences (step h) against one reverse pass. Relative
// error uses max(|analytic|, |numeric|, 0.01) as the denominator; at most
// max_coords evenly spaced coordinates per leaf are probed. fault_offset
// shifts every analytic gradient before comparison (harness test hook).
double finite_diff_max_rel_err(const std::function<nn::Tensor()>& forward,
                               const std::vector<nn::Tensor>& leaves, double step = 1e-5,
                               std::int64_t max_coords = 0 /* 0 = all */,
                               double fault_offset = 0.0);

// One named finite-difference check per registered differentiable
// operation and composite loss. corrupt_op (when non-empty) injects a
// gradient fault into that op's check so the harness must flag it.
std::vector<GradCheckReport> run_grad_checks(std::uint64_t seed, double tolerance = 1e-4,
                                             const std::string& corrupt_op = "");

std::vector<std::string> grad_check_names();

}  // namespace ssc
