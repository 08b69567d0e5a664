#pragma once

#include <cstdint>

#include "ssc/projection.hpp"
#include "ssc/sketch.hpp"
#include "ssc/tsdf.hpp"

namespace ssc {

// One training example: inputs, ground truth and the derived encodings.
struct SceneSample {
  std::uint64_t seed = 0;
  FeatureMap2D rgb;  // 3 channels in [0,1]
  DepthMap depth;
  CameraModel camera;
  SemanticLabelGrid labels;  // IGNORE outside the view frustum
  SketchGrid sketch;         // extract_sketch(labels)
  TsdfVolume tsdf;           // carries the visibility masks
};

struct SceneOptions {
  std::int64_t image_width = 40;
  std::int64_t image_height = 30;
  double truncation = kDefaultTruncation;
};

// Depth of the first occupied-voxel boundary along each pixel ray (exact
// grid traversal); 0 where the ray leaves the grid without a hit. Depth is
// the camera-frame z of the boundary point.
DepthMap render_depth(const SemanticLabelGrid& labels, const CameraModel& camera,
                      std::int64_t width, std::int64_t height);

// Procedural room: floor slab (class 1), two walls (class 2) and 1-3
// axis-aligned boxes (classes 3..N) resting on the floor, observed by a
// randomized interior camera. Voxels outside the rendered view frustum are
// marked IGNORE. Throws ValidationError when no camera placement yields a
// non-empty view.
SceneSample generate_synthetic_scene(std::uint64_t seed, const GridSpec& spec,
                                     std::int64_t num_classes, const SceneOptions& opts = {});

}  // namespace ssc
