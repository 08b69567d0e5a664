#pragma once

#include <map>
#include <vector>

#include "ssc/grid.hpp"

namespace ssc {

// SC metrics are binary empty/non-empty over occluded in-frustum voxels;
// SSC per-class IoU covers observed (surface) plus occluded in-frustum
// voxels. IGNORE ground-truth voxels never count. Classes absent from both
// prediction and ground truth are left out of ssc_iou and the mIoU mean.
struct EvalReport {
  double sc_precision = 0.0;
  double sc_recall = 0.0;
  double sc_iou = 0.0;
  std::map<int, double> ssc_iou;  // class index 1..N -> IoU
  double ssc_miou = 0.0;
};

EvalReport evaluate(const SemanticLabelGrid& pred, const SemanticLabelGrid& gt,
                    const VisibilityMasks& masks);

// Field-wise arithmetic mean; per-class entries average over the reports
// that contain the class.
EvalReport mean_report(const std::vector<EvalReport>& reports);

}  // namespace ssc
