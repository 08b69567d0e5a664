#include "ssc/tsdf.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "ssc/parallel.hpp"

namespace ssc {

TsdfVolume encode_tsdf(const DepthMap& depth, const CameraModel& camera, const GridSpec& spec,
                       double truncation) {
  if (!(truncation > 0.0)) throw ValidationError("truncation must be > 0");
  camera.validate();
  spec.validate();

  std::vector<Vec3> surface_points;
  surface_points.reserve(static_cast<std::size_t>(depth.width * depth.height));
  for (std::int64_t row = 0; row < depth.height; ++row)
    for (std::int64_t col = 0; col < depth.width; ++col) {
      const float d = depth.at(col, row);
      if (d <= 0.0f) continue;
      surface_points.push_back(back_project(static_cast<double>(col), static_cast<double>(row),
                                            static_cast<double>(d), camera));
    }
  if (surface_points.empty())
    throw ValidationError("cannot encode TSDF: depth map has no valid pixel");

  TsdfVolume vol;
  vol.truncation = truncation;
  vol.masks = compute_visibility_masks(depth, camera, spec);
  vol.grid = VoxelGrid<double>(spec);

  parallel_for(spec.num_voxels(), [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t lin = begin; lin < end; ++lin) {
      const std::size_t i = static_cast<std::size_t>(lin);
      if (!vol.masks.frustum[i]) {
        vol.grid.values[i] = -1.0;
        continue;
      }
      const Vec3 c = voxel_to_world_center(spec.index_at(lin), spec);
      double best2 = std::numeric_limits<double>::infinity();
      for (const Vec3& s : surface_points) {
        const Vec3 d = c - s;
        const double d2 = d.dot(d);
        if (d2 < best2) best2 = d2;
      }
      const double dist = std::min(std::sqrt(best2), truncation);
      const double sign = vol.masks.occluded[i] ? -1.0 : 1.0;
      vol.grid.values[i] = sign * dist / truncation;
    }
  });
  return vol;
}

TsdfVolume downsample_tsdf(const TsdfVolume& vol, std::int64_t rate) {
  if (rate < 1) throw ValidationError("downsample rate must be >= 1");
  const GridSpec& in = vol.grid.spec;
  if (in.dims.x % rate || in.dims.y % rate || in.dims.z % rate)
    throw ValidationError("grid dims not divisible by downsample rate " + std::to_string(rate));

  GridSpec out_spec;
  out_spec.dims = {in.dims.x / rate, in.dims.y / rate, in.dims.z / rate};
  out_spec.voxel_size = in.voxel_size * static_cast<double>(rate);
  out_spec.origin = in.origin;

  TsdfVolume out;
  out.truncation = vol.truncation;
  out.grid = VoxelGrid<double>(out_spec);
  out.masks.spec = out_spec;
  const std::size_t n = static_cast<std::size_t>(out_spec.num_voxels());
  out.masks.frustum.assign(n, 0);
  out.masks.surface.assign(n, 0);
  out.masks.free.assign(n, 0);
  out.masks.occluded.assign(n, 0);

  const double inv_block = 1.0 / static_cast<double>(rate * rate * rate);
  for (std::int64_t x = 0; x < out_spec.dims.x; ++x)
    for (std::int64_t y = 0; y < out_spec.dims.y; ++y)
      for (std::int64_t z = 0; z < out_spec.dims.z; ++z) {
        double sum = 0.0;
        std::int64_t n_frustum = 0, n_surface = 0, n_free = 0, n_occluded = 0;
        for (std::int64_t dx = 0; dx < rate; ++dx)
          for (std::int64_t dy = 0; dy < rate; ++dy)
            for (std::int64_t dz = 0; dz < rate; ++dz) {
              const Index3 v{x * rate + dx, y * rate + dy, z * rate + dz};
              const std::size_t i = static_cast<std::size_t>(in.linear_index(v));
              sum += vol.grid.values[i];
              n_frustum += vol.masks.frustum[i];
              n_surface += vol.masks.surface[i];
              n_free += vol.masks.free[i];
              n_occluded += vol.masks.occluded[i];
            }
        const std::size_t o = static_cast<std::size_t>(out_spec.linear_index({x, y, z}));
        out.grid.values[o] = sum * inv_block;
        // Mask reduction: in-frustum if any member voxel was; surface wins,
        // otherwise the free/occluded majority with ties to occluded.
        if (n_frustum > 0) {
          out.masks.frustum[o] = 1;
          if (n_surface > 0)
            out.masks.surface[o] = 1;
          else if (n_free > n_occluded)
            out.masks.free[o] = 1;
          else
            out.masks.occluded[o] = 1;
        }
      }
  return out;
}

}  // namespace ssc
