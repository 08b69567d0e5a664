#include "ssc/camera.hpp"

#include <cmath>

namespace ssc {

Mat3 Mat3::inverse() const {
  const double d = det();
  if (std::abs(d) < 1e-12) throw ValidationError("singular 3x3 matrix");
  Mat3 r;
  r.m[0] = (m[4] * m[8] - m[5] * m[7]) / d;
  r.m[1] = (m[2] * m[7] - m[1] * m[8]) / d;
  r.m[2] = (m[1] * m[5] - m[2] * m[4]) / d;
  r.m[3] = (m[5] * m[6] - m[3] * m[8]) / d;
  r.m[4] = (m[0] * m[8] - m[2] * m[6]) / d;
  r.m[5] = (m[2] * m[3] - m[0] * m[5]) / d;
  r.m[6] = (m[3] * m[7] - m[4] * m[6]) / d;
  r.m[7] = (m[1] * m[6] - m[0] * m[7]) / d;
  r.m[8] = (m[0] * m[4] - m[1] * m[3]) / d;
  return r;
}

void CameraModel::validate() const {
  if (std::abs(intrinsics.det()) < 1e-12) throw ValidationError("camera intrinsics are singular");
  if (std::abs(intrinsics(2, 2) - 1.0) > 1e-9)
    throw ValidationError("camera intrinsics must have K[2][2] = 1");
}

Vec3 back_project(double u, double v, double d, const CameraModel& camera) {
  if (d <= 0.0) throw ValidationError("back_project requires positive depth");
  const Mat3 kinv = camera.intrinsics.inverse();
  const Vec3 pc = (kinv * Vec3{u + 0.5, v + 0.5, 1.0}) * d;
  return camera.camera_to_world(pc);
}

}  // namespace ssc
