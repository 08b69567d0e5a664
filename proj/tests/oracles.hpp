// Test-only brute-force oracles, kept independent of the library
// implementations they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ssc/camera.hpp"
#include "ssc/grid.hpp"

namespace oracle {

// 3D Sobel response via an explicit 27-entry kernel table. Reads clamp to
// the grid edge; an IGNORE tap falls back to the center label; an IGNORE
// center reports 0.
inline std::int64_t sobel_response(const ssc::SemanticLabelGrid& labels, const ssc::Index3& v,
                                   int axis) {
  if (labels.at(v) == ssc::kIgnoreLabel) return 0;
  static const int deriv[3] = {-1, 0, 1};
  static const int smooth[3] = {1, 2, 1};
  std::int64_t acc = 0;
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dz = -1; dz <= 1; ++dz) {
        const int fx = axis == 0 ? deriv[dx + 1] : smooth[dx + 1];
        const int fy = axis == 1 ? deriv[dy + 1] : smooth[dy + 1];
        const int fz = axis == 2 ? deriv[dz + 1] : smooth[dz + 1];
        const std::int64_t w = fx * fy * fz;
        if (w == 0) continue;
        ssc::Index3 q{std::clamp<std::int64_t>(v.x + dx, 0, labels.spec.dims.x - 1),
                      std::clamp<std::int64_t>(v.y + dy, 0, labels.spec.dims.y - 1),
                      std::clamp<std::int64_t>(v.z + dz, 0, labels.spec.dims.z - 1)};
        std::uint8_t l = labels.at(q);
        if (l == ssc::kIgnoreLabel) l = labels.at(v);
        acc += w * static_cast<std::int64_t>(l);
      }
  return acc;
}

inline std::vector<std::uint8_t> extract_sketch_bits(const ssc::SemanticLabelGrid& labels,
                                                     int threshold = 1) {
  const std::int64_t n = labels.spec.num_voxels();
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(n), 0);
  for (std::int64_t lin = 0; lin < n; ++lin) {
    const ssc::Index3 v = labels.spec.index_at(lin);
    int active = 0;
    for (int axis = 0; axis < 3; ++axis) active += sobel_response(labels, v, axis) != 0;
    bits[static_cast<std::size_t>(lin)] = active > threshold ? 1 : 0;
  }
  return bits;
}

// Pinhole math written out long-hand (no Mat3::inverse) for independence.
struct SimpleCamera {
  double fx, fy, cx, cy;
  double r[3][3];  // world-to-camera rotation rows
  double t[3];

  static SimpleCamera from(const ssc::CameraModel& cam) {
    SimpleCamera s{};
    s.fx = cam.intrinsics(0, 0);
    s.fy = cam.intrinsics(1, 1);
    s.cx = cam.intrinsics(0, 2);
    s.cy = cam.intrinsics(1, 2);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) s.r[i][j] = cam.extrinsics(i, j);
      s.t[i] = cam.extrinsics(i, 3);
    }
    return s;
  }

  // Pixel (col,row) at camera-depth d -> world, through the pixel center.
  ssc::Vec3 lift(double col, double row, double d) const {
    const double xc = (col + 0.5 - cx) / fx * d;
    const double yc = (row + 0.5 - cy) / fy * d;
    const double zc = d;
    const double px = xc - t[0], py = yc - t[1], pz = zc - t[2];
    return {r[0][0] * px + r[1][0] * py + r[2][0] * pz,
            r[0][1] * px + r[1][1] * py + r[2][1] * pz,
            r[0][2] * px + r[1][2] * py + r[2][2] * pz};
  }

  // World -> (u, v, camera z).
  ssc::Vec3 project(const ssc::Vec3& p) const {
    const double xc = r[0][0] * p.x + r[0][1] * p.y + r[0][2] * p.z + t[0];
    const double yc = r[1][0] * p.x + r[1][1] * p.y + r[1][2] * p.z + t[1];
    const double zc = r[2][0] * p.x + r[2][1] * p.y + r[2][2] * p.z + t[2];
    return {fx * xc / zc + cx, fy * yc / zc + cy, zc};
  }
};

// Exhaustive nearest-surface TSDF with sign from a long-hand visibility
// classification (same conventions, independent code).
struct TsdfOracle {
  std::vector<double> values;
  std::vector<int> state;  // 0 outside, 1 free, 2 surface, 3 occluded
};

inline TsdfOracle tsdf_reference(const ssc::DepthMap& depth, const ssc::CameraModel& camera,
                                 const ssc::GridSpec& spec, double truncation) {
  const SimpleCamera cam = SimpleCamera::from(camera);
  std::vector<ssc::Vec3> points;
  for (std::int64_t row = 0; row < depth.height; ++row)
    for (std::int64_t col = 0; col < depth.width; ++col) {
      const float d = depth.at(col, row);
      if (d > 0.0f)
        points.push_back(cam.lift(static_cast<double>(col), static_cast<double>(row),
                                  static_cast<double>(d)));
    }

  std::vector<std::uint8_t> contains_point(static_cast<std::size_t>(spec.num_voxels()), 0);
  for (const auto& p : points) {
    const double gx = std::floor((p.x - spec.origin.x) / spec.voxel_size);
    const double gy = std::floor((p.y - spec.origin.y) / spec.voxel_size);
    const double gz = std::floor((p.z - spec.origin.z) / spec.voxel_size);
    if (gx < 0 || gy < 0 || gz < 0 || gx >= static_cast<double>(spec.dims.x) ||
        gy >= static_cast<double>(spec.dims.y) || gz >= static_cast<double>(spec.dims.z))
      continue;
    const std::int64_t lin =
        (static_cast<std::int64_t>(gx) * spec.dims.y + static_cast<std::int64_t>(gy)) *
            spec.dims.z +
        static_cast<std::int64_t>(gz);
    contains_point[static_cast<std::size_t>(lin)] = 1;
  }

  TsdfOracle out;
  const std::int64_t n = spec.num_voxels();
  out.values.assign(static_cast<std::size_t>(n), -1.0);
  out.state.assign(static_cast<std::size_t>(n), 0);
  for (std::int64_t lin = 0; lin < n; ++lin) {
    const ssc::Index3 v = spec.index_at(lin);
    const ssc::Vec3 c = ssc::voxel_to_world_center(v, spec);
    const ssc::Vec3 img = cam.project(c);
    if (img.z <= 0.0 || img.x < 0.0 || img.y < 0.0 ||
        img.x >= static_cast<double>(depth.width) || img.y >= static_cast<double>(depth.height))
      continue;
    // nearest valid of the four bilinear neighbors
    const std::int64_t c0 = static_cast<std::int64_t>(std::floor(img.x - 0.5));
    const std::int64_t r0 = static_cast<std::int64_t>(std::floor(img.y - 0.5));
    float d_obs = 0.0f;
    double best = 1e300;
    for (int dr = 0; dr < 2; ++dr)
      for (int dc = 0; dc < 2; ++dc) {
        const std::int64_t cc = c0 + dc, rr = r0 + dr;
        if (cc < 0 || rr < 0 || cc >= depth.width || rr >= depth.height) continue;
        const float d = depth.at(cc, rr);
        if (d <= 0.0f) continue;
        const double du = static_cast<double>(cc) + 0.5 - img.x;
        const double dv = static_cast<double>(rr) + 0.5 - img.y;
        if (du * du + dv * dv < best) {
          best = du * du + dv * dv;
          d_obs = d;
        }
      }
    if (d_obs <= 0.0f) continue;

    double min_d2 = 1e300;
    for (const auto& p : points) {
      const double dx = c.x - p.x, dy = c.y - p.y, dz = c.z - p.z;
      min_d2 = std::min(min_d2, dx * dx + dy * dy + dz * dz);
    }
    const double dist = std::min(std::sqrt(min_d2), truncation);
    const std::size_t i = static_cast<std::size_t>(lin);
    if (contains_point[i]) {
      out.state[i] = 2;
      out.values[i] = dist / truncation;
    } else if (img.z < static_cast<double>(d_obs)) {
      out.state[i] = 1;
      out.values[i] = dist / truncation;
    } else {
      out.state[i] = 3;
      out.values[i] = -dist / truncation;
    }
  }
  return out;
}

// First ray/occupied-voxel boundary hit by brute force: slab-test every
// occupied voxel and take the smallest positive entry parameter.
inline double first_hit_depth(const ssc::SemanticLabelGrid& labels, const ssc::Vec3& origin,
                              const ssc::Vec3& dir) {
  const ssc::GridSpec& spec = labels.spec;
  double best = 0.0;
  bool found = false;
  for (std::int64_t lin = 0; lin < spec.num_voxels(); ++lin) {
    const std::uint8_t l = labels.labels[static_cast<std::size_t>(lin)];
    if (l == 0 || l == ssc::kIgnoreLabel) continue;
    const ssc::Index3 v = spec.index_at(lin);
    const double lo[3] = {spec.origin.x + static_cast<double>(v.x) * spec.voxel_size,
                          spec.origin.y + static_cast<double>(v.y) * spec.voxel_size,
                          spec.origin.z + static_cast<double>(v.z) * spec.voxel_size};
    const double o[3] = {origin.x, origin.y, origin.z};
    const double d[3] = {dir.x, dir.y, dir.z};
    double t_enter = 0.0, t_exit = 1e300;
    bool miss = false;
    for (int a = 0; a < 3; ++a) {
      const double hi = lo[a] + spec.voxel_size;
      if (std::abs(d[a]) < 1e-300) {
        if (o[a] < lo[a] || o[a] > hi) miss = true;
        continue;
      }
      double t0 = (lo[a] - o[a]) / d[a];
      double t1 = (hi - o[a]) / d[a];
      if (t0 > t1) std::swap(t0, t1);
      t_enter = std::max(t_enter, t0);
      t_exit = std::min(t_exit, t1);
    }
    if (miss || t_exit <= t_enter || t_enter <= 0.0) continue;
    if (!found || t_enter < best) {
      best = t_enter;
      found = true;
    }
  }
  return found ? best : 0.0;
}

}  // namespace oracle
