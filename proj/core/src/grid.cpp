#include "ssc/grid.hpp"

#include <array>
#include <cmath>
#include <string>

#include "ssc/camera.hpp"
#include "ssc/parallel.hpp"

namespace ssc {

void GridSpec::validate() const {
  if (dims.x < 1 || dims.y < 1 || dims.z < 1)
    throw ValidationError("grid dims must all be >= 1");
  if (!(voxel_size > 0.0)) throw ValidationError("voxel_size must be > 0");
}

void SemanticLabelGrid::validate() const {
  spec.validate();
  if (static_cast<std::int64_t>(labels.size()) != spec.num_voxels())
    throw ValidationError("label payload size does not match grid dims");
  for (std::uint8_t l : labels) {
    if (l != kIgnoreLabel && l >= num_classes)
      throw ValidationError("label " + std::to_string(l) + " out of range for " +
                            std::to_string(num_classes) + " classes");
  }
}

std::optional<Index3> world_to_voxel(const Vec3& p, const GridSpec& spec) {
  const Vec3 rel = (p - spec.origin) * (1.0 / spec.voxel_size);
  const Index3 v{static_cast<std::int64_t>(std::floor(rel.x)),
                 static_cast<std::int64_t>(std::floor(rel.y)),
                 static_cast<std::int64_t>(std::floor(rel.z))};
  if (!spec.in_bounds(v)) return std::nullopt;
  return v;
}

Vec3 voxel_to_world_center(const Index3& v, const GridSpec& spec) {
  return spec.origin + Vec3{(static_cast<double>(v.x) + 0.5) * spec.voxel_size,
                            (static_cast<double>(v.y) + 0.5) * spec.voxel_size,
                            (static_cast<double>(v.z) + 0.5) * spec.voxel_size};
}

SemanticLabelGrid downsample_labels(const SemanticLabelGrid& labels, std::int64_t rate) {
  if (rate < 1) throw ValidationError("downsample rate must be >= 1");
  const GridSpec& in = labels.spec;
  if (in.dims.x % rate || in.dims.y % rate || in.dims.z % rate)
    throw ValidationError("grid dims not divisible by downsample rate " + std::to_string(rate));

  GridSpec out_spec;
  out_spec.dims = {in.dims.x / rate, in.dims.y / rate, in.dims.z / rate};
  out_spec.voxel_size = in.voxel_size * static_cast<double>(rate);
  out_spec.origin = in.origin;

  SemanticLabelGrid out(out_spec, labels.num_classes);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(labels.num_classes), 0);
  for (std::int64_t x = 0; x < out_spec.dims.x; ++x)
    for (std::int64_t y = 0; y < out_spec.dims.y; ++y)
      for (std::int64_t z = 0; z < out_spec.dims.z; ++z) {
        std::fill(counts.begin(), counts.end(), 0);
        bool any_annotated = false;
        for (std::int64_t dx = 0; dx < rate; ++dx)
          for (std::int64_t dy = 0; dy < rate; ++dy)
            for (std::int64_t dz = 0; dz < rate; ++dz) {
              const std::uint8_t l = labels.at({x * rate + dx, y * rate + dy, z * rate + dz});
              if (l == kIgnoreLabel) continue;
              any_annotated = true;
              ++counts[l];
            }
        if (!any_annotated) {
          out.at({x, y, z}) = kIgnoreLabel;
          continue;
        }
        std::int64_t best = 0;
        for (std::int64_t c = 1; c < labels.num_classes; ++c)
          if (counts[static_cast<std::size_t>(c)] > counts[static_cast<std::size_t>(best)]) best = c;
        out.at({x, y, z}) = static_cast<std::uint8_t>(best);
      }
  return out;
}

namespace {

// Observed depth governing the ray through continuous image point (u,v):
// the nearest valid sample among the four bilinear neighbors. Returns 0
// when none of them is valid.
float observed_depth(const DepthMap& depth, double u, double v) {
  const std::int64_t c0 = static_cast<std::int64_t>(std::floor(u - 0.5));
  const std::int64_t r0 = static_cast<std::int64_t>(std::floor(v - 0.5));
  float best = 0.0f;
  double best_d2 = 0.0;
  for (int dr = 0; dr < 2; ++dr)
    for (int dc = 0; dc < 2; ++dc) {
      const std::int64_t c = c0 + dc;
      const std::int64_t r = r0 + dr;
      if (c < 0 || r < 0 || c >= depth.width || r >= depth.height) continue;
      const float d = depth.at(c, r);
      if (d <= 0.0f) continue;
      const double du = (static_cast<double>(c) + 0.5) - u;
      const double dv = (static_cast<double>(r) + 0.5) - v;
      const double d2 = du * du + dv * dv;
      if (best == 0.0f || d2 < best_d2) {
        best = d;
        best_d2 = d2;
      }
    }
  return best;
}

}  // namespace

VisibilityMasks compute_visibility_masks(const DepthMap& depth, const CameraModel& camera,
                                         const GridSpec& spec) {
  camera.validate();
  spec.validate();
  const std::int64_t n = spec.num_voxels();
  VisibilityMasks masks;
  masks.spec = spec;
  masks.frustum.assign(static_cast<std::size_t>(n), 0);
  masks.surface.assign(static_cast<std::size_t>(n), 0);
  masks.free.assign(static_cast<std::size_t>(n), 0);
  masks.occluded.assign(static_cast<std::size_t>(n), 0);

  // Voxels containing a back-projected depth point.
  std::vector<std::uint8_t> has_point(static_cast<std::size_t>(n), 0);
  for (std::int64_t row = 0; row < depth.height; ++row)
    for (std::int64_t col = 0; col < depth.width; ++col) {
      const float d = depth.at(col, row);
      if (d <= 0.0f) continue;
      const Vec3 pw = back_project(static_cast<double>(col), static_cast<double>(row),
                                   static_cast<double>(d), camera);
      if (auto v = world_to_voxel(pw, spec))
        has_point[static_cast<std::size_t>(spec.linear_index(*v))] = 1;
    }

  parallel_for(n, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t lin = begin; lin < end; ++lin) {
      const Index3 v = spec.index_at(lin);
      const Vec3 pc = camera.world_to_camera(voxel_to_world_center(v, spec));
      const auto img = camera.project(pc);
      if (!img) continue;
      const double u = img->x, vv = img->y;
      if (u < 0.0 || vv < 0.0 || u >= static_cast<double>(depth.width) ||
          vv >= static_cast<double>(depth.height))
        continue;
      const float d_obs = observed_depth(depth, u, vv);
      if (d_obs <= 0.0f) continue;  // in view but unobserved: outside the evaluation domain
      const std::size_t i = static_cast<std::size_t>(lin);
      masks.frustum[i] = 1;
      if (has_point[i]) {
        masks.surface[i] = 1;
      } else if (pc.z < static_cast<double>(d_obs)) {
        masks.free[i] = 1;
      } else {
        masks.occluded[i] = 1;
      }
    }
  });
  return masks;
}

}  // namespace ssc
