#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ssc/errors.hpp"
#include "ssc/geometry.hpp"

namespace ssc {

// Row-major f32 depth in meters; 0 marks an invalid pixel.
struct DepthMap {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<float> values;

  DepthMap() = default;
  DepthMap(std::int64_t w, std::int64_t h, float fill = 0.0f)
      : width(w), height(h), values(static_cast<std::size_t>(w * h), fill) {}

  float at(std::int64_t col, std::int64_t row) const {
    return values[static_cast<std::size_t>(row * width + col)];
  }
  float& at(std::int64_t col, std::int64_t row) {
    return values[static_cast<std::size_t>(row * width + col)];
  }
  bool valid(std::int64_t col, std::int64_t row) const { return at(col, row) > 0.0f; }
};

// Pinhole camera: intrinsic K (pixels) and extrinsic world-to-camera [R|t].
struct CameraModel {
  Mat3 intrinsics = Mat3::identity();
  Mat34 extrinsics = Mat34::identity();

  Vec3 world_to_camera(const Vec3& p) const { return extrinsics.transform(p); }
  Vec3 camera_to_world(const Vec3& pc) const {
    const Mat3 rt = extrinsics.rotation().transposed();
    return rt * (pc - extrinsics.translation());
  }
  Vec3 camera_center() const { return camera_to_world({0, 0, 0}); }

  // Continuous image coordinates of a camera-frame point; absent when the
  // point is not strictly in front of the camera. Pixel (c,r) covers
  // [c,c+1) x [r,r+1), so its center sits at (c+0.5, r+0.5).
  std::optional<Vec3> project(const Vec3& pc) const {
    if (pc.z <= 0.0) return std::nullopt;
    const Vec3 h = intrinsics * pc;
    return Vec3{h.x / pc.z, h.y / pc.z, pc.z};
  }

  void validate() const;
};

// Lifts pixel (u,v) observed at depth d (camera-frame z, meters) to the
// world frame through the pixel center: d * K^-1 * (u+0.5, v+0.5, 1).
// Throws ValidationError for non-positive depth.
Vec3 back_project(double u, double v, double d, const CameraModel& camera);

}  // namespace ssc
