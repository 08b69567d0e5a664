#include "ssc/projection.hpp"

#include <algorithm>

namespace ssc {

FeatureVolume project_features(const FeatureMap2D& features, const DepthMap& depth,
                               const CameraModel& camera, const GridSpec& spec) {
  if (features.width != depth.width || features.height != depth.height)
    throw ValidationError("feature map and depth map dimensions differ");
  camera.validate();
  spec.validate();

  FeatureVolume out(spec, features.channels);
  for (std::int64_t row = 0; row < depth.height; ++row)
    for (std::int64_t col = 0; col < depth.width; ++col) {
      const float d = depth.at(col, row);
      if (d <= 0.0f) continue;
      const Vec3 pw = back_project(static_cast<double>(col), static_cast<double>(row),
                                   static_cast<double>(d), camera);
      const auto v = world_to_voxel(pw, spec);
      if (!v) continue;
      const std::int64_t lin = spec.linear_index(*v);
      double* dst = out.data.data() + lin * out.channels;
      const double* src = features.values.data() + (row * features.width + col) * features.channels;
      if (!out.occupancy[static_cast<std::size_t>(lin)]) {
        out.occupancy[static_cast<std::size_t>(lin)] = 1;
        std::copy(src, src + features.channels, dst);
      } else {
        for (std::int64_t c = 0; c < features.channels; ++c) dst[c] = std::max(dst[c], src[c]);
      }
    }
  return out;
}

}  // namespace ssc
