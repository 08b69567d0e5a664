#include "ssc/metrics.hpp"

namespace ssc {

namespace {

double ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return num == 0 ? 1.0 : 0.0;  // vacuously perfect when both sides are empty
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

EvalReport evaluate(const SemanticLabelGrid& pred, const SemanticLabelGrid& gt,
                    const VisibilityMasks& masks) {
  if (!(pred.spec.dims == gt.spec.dims) || !(gt.spec.dims == masks.spec.dims))
    throw ValidationError("evaluate: prediction, ground truth and masks dims differ");

  const std::int64_t n = gt.spec.num_voxels();
  std::int64_t sc_tp = 0, sc_pred = 0, sc_gt = 0, sc_union = 0;

  const std::int64_t num_classes = gt.num_classes;
  std::vector<std::int64_t> inter(static_cast<std::size_t>(num_classes), 0);
  std::vector<std::int64_t> uni(static_cast<std::size_t>(num_classes), 0);

  for (std::int64_t i = 0; i < n; ++i) {
    const std::size_t s = static_cast<std::size_t>(i);
    const std::uint8_t g = gt.labels[s];
    if (g == kIgnoreLabel || !masks.frustum[s]) continue;
    const std::uint8_t p = pred.labels[s];

    if (masks.occluded[s]) {
      const bool gp = g != 0, pp = p != 0;
      sc_tp += (gp && pp);
      sc_pred += pp;
      sc_gt += gp;
      sc_union += (gp || pp);
    }
    if (masks.occluded[s] || masks.surface[s]) {
      for (std::int64_t c = 1; c < num_classes; ++c) {
        const bool gc = g == c, pc = p == c;
        inter[static_cast<std::size_t>(c)] += (gc && pc);
        uni[static_cast<std::size_t>(c)] += (gc || pc);
      }
    }
  }

  EvalReport rep;
  rep.sc_precision = ratio(sc_tp, sc_pred);
  rep.sc_recall = ratio(sc_tp, sc_gt);
  rep.sc_iou = ratio(sc_tp, sc_union);

  double miou = 0.0;
  std::int64_t present = 0;
  for (std::int64_t c = 1; c < num_classes; ++c) {
    if (uni[static_cast<std::size_t>(c)] == 0) continue;  // absent from both
    const double iou = static_cast<double>(inter[static_cast<std::size_t>(c)]) /
                       static_cast<double>(uni[static_cast<std::size_t>(c)]);
    rep.ssc_iou[static_cast<int>(c)] = iou;
    miou += iou;
    ++present;
  }
  rep.ssc_miou = present > 0 ? miou / static_cast<double>(present) : 0.0;
  return rep;
}

EvalReport mean_report(const std::vector<EvalReport>& reports) {
  EvalReport out;
  if (reports.empty()) return out;
  const double inv = 1.0 / static_cast<double>(reports.size());
  std::map<int, std::pair<double, std::int64_t>> class_acc;
  for (const auto& r : reports) {
    out.sc_precision += r.sc_precision * inv;
    out.sc_recall += r.sc_recall * inv;
    out.sc_iou += r.sc_iou * inv;
    out.ssc_miou += r.ssc_miou * inv;
    for (const auto& [c, iou] : r.ssc_iou) {
      class_acc[c].first += iou;
      class_acc[c].second += 1;
    }
  }
  for (const auto& [c, acc] : class_acc)
    out.ssc_iou[c] = acc.first / static_cast<double>(acc.second);
  return out;
}

}  // namespace ssc
