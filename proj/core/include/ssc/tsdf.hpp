#pragma once

#include "ssc/camera.hpp"
#include "ssc/grid.hpp"

namespace ssc {

inline constexpr double kDefaultTruncation = 0.24;  // meters

// Truncated signed distance volume. Values live in [-1, +1] (distance to
// the nearest observed surface point, clipped at the truncation and
// normalized by it). Positive side = free/visible space, negative side =
// occluded space; out-of-frustum voxels carry -1.
struct TsdfVolume {
  VoxelGrid<double> grid;
  double truncation = kDefaultTruncation;
  VisibilityMasks masks;
};

// Encodes one depth observation into a TSDF over the given grid. Distance
// is measured voxel-center to back-projected point cloud; the sign comes
// from the visibility classification. Throws ValidationError when the
// depth map has no valid pixel.
TsdfVolume encode_tsdf(const DepthMap& depth, const CameraModel& camera, const GridSpec& spec,
                       double truncation = kDefaultTruncation);

// Block-average over rate^3 cells; the spec rescales accordingly.
TsdfVolume downsample_tsdf(const TsdfVolume& vol, std::int64_t rate);

}  // namespace ssc
