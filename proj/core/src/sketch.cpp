#include "ssc/sketch.hpp"

#include <algorithm>

#include "ssc/parallel.hpp"

namespace ssc {

namespace {

inline std::int64_t clamp_i(std::int64_t v, std::int64_t lo, std::int64_t hi) {
  return std::min(std::max(v, lo), hi);
}

// Stencil read with replication padding and IGNORE substitution.
inline std::int64_t stencil_label(const SemanticLabelGrid& labels, const Index3& center,
                                  std::int64_t qx, std::int64_t qy, std::int64_t qz) {
  const Index3 q{clamp_i(qx, 0, labels.spec.dims.x - 1), clamp_i(qy, 0, labels.spec.dims.y - 1),
                 clamp_i(qz, 0, labels.spec.dims.z - 1)};
  const std::uint8_t l = labels.at(q);
  if (l == kIgnoreLabel) return labels.at(center);
  return l;
}

}  // namespace

VoxelGrid<std::int64_t> sobel3d_axis_response(const SemanticLabelGrid& labels, Axis axis) {
  labels.spec.validate();
  static const std::int64_t kDeriv[3] = {-1, 0, 1};
  static const std::int64_t kSmooth[3] = {1, 2, 1};

  VoxelGrid<std::int64_t> out(labels.spec);
  const GridSpec& spec = labels.spec;
  parallel_for(spec.num_voxels(), [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t lin = begin; lin < end; ++lin) {
      const Index3 v = spec.index_at(lin);
      if (labels.at(v) == kIgnoreLabel) {
        out.values[static_cast<std::size_t>(lin)] = 0;
        continue;
      }
      std::int64_t acc = 0;
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dz = -1; dz <= 1; ++dz) {
            std::int64_t w = 1;
            switch (axis) {
              case Axis::X: w = kDeriv[dx + 1] * kSmooth[dy + 1] * kSmooth[dz + 1]; break;
              case Axis::Y: w = kSmooth[dx + 1] * kDeriv[dy + 1] * kSmooth[dz + 1]; break;
              case Axis::Z: w = kSmooth[dx + 1] * kSmooth[dy + 1] * kDeriv[dz + 1]; break;
            }
            if (w == 0) continue;
            acc += w * stencil_label(labels, v, v.x + dx, v.y + dy, v.z + dz);
          }
      out.values[static_cast<std::size_t>(lin)] = acc;
    }
  });
  return out;
}

SketchGrid extract_sketch(const SemanticLabelGrid& labels, int min_active_axes) {
  const auto gx = sobel3d_axis_response(labels, Axis::X);
  const auto gy = sobel3d_axis_response(labels, Axis::Y);
  const auto gz = sobel3d_axis_response(labels, Axis::Z);

  SketchGrid sketch;
  sketch.grid = VoxelGrid<std::uint8_t>(labels.spec);
  const std::int64_t n = labels.spec.num_voxels();
  for (std::int64_t i = 0; i < n; ++i) {
    const std::size_t s = static_cast<std::size_t>(i);
    const int active = (gx.values[s] != 0) + (gy.values[s] != 0) + (gz.values[s] != 0);
    sketch.grid.values[s] = active > min_active_axes ? 1 : 0;
  }
  return sketch;
}

}  // namespace ssc
