#pragma once

#include <cstdint>
#include <vector>

#include "ssc/camera.hpp"
#include "ssc/grid.hpp"

namespace ssc {

// Row-major image raster with channels innermost. Also used for RGB input
// (channels = 3, values in [0,1]).
struct FeatureMap2D {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::int64_t channels = 0;
  std::vector<double> values;

  FeatureMap2D() = default;
  FeatureMap2D(std::int64_t w, std::int64_t h, std::int64_t c, double fill = 0.0)
      : width(w), height(h), channels(c),
        values(static_cast<std::size_t>(w * h * c), fill) {}

  double& at(std::int64_t col, std::int64_t row, std::int64_t c) {
    return values[static_cast<std::size_t>((row * width + col) * channels + c)];
  }
  double at(std::int64_t col, std::int64_t row, std::int64_t c) const {
    return values[static_cast<std::size_t>((row * width + col) * channels + c)];
  }
};

// Per-voxel feature vectors produced by 2D-to-3D projection. Voxels that
// never received a pixel hold the zero vector and a cleared occupancy bit.
struct FeatureVolume {
  GridSpec spec;
  std::int64_t channels = 0;
  std::vector<double> data;            // voxel-major, channel innermost
  std::vector<std::uint8_t> occupancy;

  FeatureVolume() = default;
  FeatureVolume(const GridSpec& s, std::int64_t c)
      : spec(s), channels(c), data(static_cast<std::size_t>(s.num_voxels() * c), 0.0),
        occupancy(static_cast<std::size_t>(s.num_voxels()), 0) {}

  double at(const Index3& v, std::int64_t c) const {
    return data[static_cast<std::size_t>(spec.linear_index(v) * channels + c)];
  }
};

// Routes every valid pixel's feature vector to the voxel containing its
// back-projection. Colliding pixels reduce channel-wise by maximum (the
// first contribution seeds the accumulator, so negative features survive).
// Back-projections outside the grid are dropped. Throws ValidationError on
// a feature/depth shape mismatch.
FeatureVolume project_features(const FeatureMap2D& features, const DepthMap& depth,
                               const CameraModel& camera, const GridSpec& spec);

}  // namespace ssc
