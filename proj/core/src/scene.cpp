#include "ssc/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ssc/rng.hpp"

namespace ssc {

namespace {

struct RayHit {
  bool hit = false;
  double t = 0.0;  // entry parameter of the hit voxel along the ray
  Index3 voxel;
  int face_axis = 0;  // axis of the boundary plane crossed on entry
};

// Amanatides-Woo traversal to the first occupied voxel. dir need not be
// unit length; t is measured in multiples of dir.
RayHit raycast_first_hit(const SemanticLabelGrid& labels, const Vec3& origin, const Vec3& dir) {
  const GridSpec& spec = labels.spec;
  const Vec3 lo = spec.origin;
  const Vec3 hi = spec.origin + Vec3{static_cast<double>(spec.dims.x),
                                     static_cast<double>(spec.dims.y),
                                     static_cast<double>(spec.dims.z)} *
                                    spec.voxel_size;

  // Slab clip against the grid box.
  double t_enter = 0.0, t_exit = std::numeric_limits<double>::infinity();
  int enter_axis = 0;
  const double o[3] = {origin.x, origin.y, origin.z};
  const double d[3] = {dir.x, dir.y, dir.z};
  const double lob[3] = {lo.x, lo.y, lo.z};
  const double hib[3] = {hi.x, hi.y, hi.z};
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-300) {
      if (o[a] < lob[a] || o[a] > hib[a]) return {};
      continue;
    }
    double t0 = (lob[a] - o[a]) / d[a];
    double t1 = (hib[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_enter) {
      t_enter = t0;
      enter_axis = a;
    }
    t_exit = std::min(t_exit, t1);
  }
  if (t_exit <= t_enter) return {};

  const double t_start = t_enter + 1e-12;
  const Vec3 p = origin + dir * t_start;
  Index3 v{static_cast<std::int64_t>(std::floor((p.x - lo.x) / spec.voxel_size)),
           static_cast<std::int64_t>(std::floor((p.y - lo.y) / spec.voxel_size)),
           static_cast<std::int64_t>(std::floor((p.z - lo.z) / spec.voxel_size))};
  v.x = std::clamp<std::int64_t>(v.x, 0, spec.dims.x - 1);
  v.y = std::clamp<std::int64_t>(v.y, 0, spec.dims.y - 1);
  v.z = std::clamp<std::int64_t>(v.z, 0, spec.dims.z - 1);

  std::int64_t idx[3] = {v.x, v.y, v.z};
  const std::int64_t dims[3] = {spec.dims.x, spec.dims.y, spec.dims.z};
  std::int64_t step[3];
  double t_max[3], t_delta[3];
  for (int a = 0; a < 3; ++a) {
    if (d[a] > 0.0) {
      step[a] = 1;
      t_max[a] = (lob[a] + static_cast<double>(idx[a] + 1) * spec.voxel_size - o[a]) / d[a];
      t_delta[a] = spec.voxel_size / d[a];
    } else if (d[a] < 0.0) {
      step[a] = -1;
      t_max[a] = (lob[a] + static_cast<double>(idx[a]) * spec.voxel_size - o[a]) / d[a];
      t_delta[a] = -spec.voxel_size / d[a];
    } else {
      step[a] = 0;
      t_max[a] = std::numeric_limits<double>::infinity();
      t_delta[a] = std::numeric_limits<double>::infinity();
    }
  }

  double t_entry = t_enter;
  int face = enter_axis;
  while (true) {
    const std::uint8_t l = labels.at({idx[0], idx[1], idx[2]});
    if (l != 0 && l != kIgnoreLabel && t_entry > 0.0) {
      RayHit hit;
      hit.hit = true;
      hit.t = t_entry;
      hit.voxel = {idx[0], idx[1], idx[2]};
      hit.face_axis = face;
      return hit;
    }
    int a = 0;
    if (t_max[1] < t_max[a]) a = 1;
    if (t_max[2] < t_max[a]) a = 2;
    t_entry = t_max[a];
    face = a;
    idx[a] += step[a];
    if (idx[a] < 0 || idx[a] >= dims[a]) return {};
    t_max[a] += t_delta[a];
  }
}

Vec3 pixel_ray_dir(const CameraModel& camera, std::int64_t col, std::int64_t row) {
  // Camera-frame direction with z = 1, so the ray parameter equals the
  // camera-frame depth.
  const Mat3 kinv = camera.intrinsics.inverse();
  const Vec3 dir_cam = kinv * Vec3{static_cast<double>(col) + 0.5,
                                   static_cast<double>(row) + 0.5, 1.0};
  return camera.extrinsics.rotation().transposed() * dir_cam;
}

const double kPalette[][3] = {
    {0.05, 0.05, 0.08},  // 0 empty (background)
    {0.45, 0.33, 0.20},  // 1 floor
    {0.75, 0.75, 0.70},  // 2 wall
    {0.85, 0.20, 0.15},  // 3
    {0.15, 0.45, 0.85},  // 4
    {0.20, 0.70, 0.25},  // 5
    {0.85, 0.70, 0.15},  // 6
    {0.60, 0.25, 0.70},  // 7
    {0.20, 0.70, 0.70},  // 8
};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

}  // namespace

DepthMap render_depth(const SemanticLabelGrid& labels, const CameraModel& camera,
                      std::int64_t width, std::int64_t height) {
  camera.validate();
  DepthMap depth(width, height);
  const Vec3 eye = camera.camera_center();
  for (std::int64_t row = 0; row < height; ++row)
    for (std::int64_t col = 0; col < width; ++col) {
      const RayHit hit = raycast_first_hit(labels, eye, pixel_ray_dir(camera, col, row));
      depth.at(col, row) = hit.hit ? static_cast<float>(hit.t) : 0.0f;
    }
  return depth;
}

SceneSample generate_synthetic_scene(std::uint64_t seed, const GridSpec& spec,
                                     std::int64_t num_classes, const SceneOptions& opts) {
  spec.validate();
  if (spec.dims.x < 8 || spec.dims.y < 8 || spec.dims.z < 8)
    throw ValidationError("synthetic scenes need dims >= 8 on every axis");
  if (num_classes < 3) throw ValidationError("synthetic scenes need num_classes >= 3");

  Rng rng(seed);
  const std::int64_t nx = spec.dims.x, ny = spec.dims.y, nz = spec.dims.z;

  SemanticLabelGrid labels(spec, num_classes, 0);
  const std::int64_t floor_h = std::max<std::int64_t>(1, ny / 6);
  const std::int64_t wall_t = 1;
  for (std::int64_t x = 0; x < nx; ++x)
    for (std::int64_t y = 0; y < ny; ++y)
      for (std::int64_t z = 0; z < nz; ++z) {
        if (y < floor_h)
          labels.at({x, y, z}) = 1;
        else if (x < wall_t || z < wall_t)
          labels.at({x, y, z}) = 2;
      }

  // Boxes rest on the floor; classes 3..N when available.
  const std::int64_t n_boxes = rng.uniform_int(1, 3);
  for (std::int64_t b = 0; b < n_boxes; ++b) {
    if (num_classes < 4) break;
    const std::uint8_t cls = static_cast<std::uint8_t>(rng.uniform_int(3, num_classes - 1));
    const std::int64_t sx = rng.uniform_int(2, std::max<std::int64_t>(2, nx / 3));
    const std::int64_t sy = rng.uniform_int(2, std::max<std::int64_t>(2, (ny - floor_h) / 2 + 1));
    const std::int64_t sz = rng.uniform_int(2, std::max<std::int64_t>(2, nz / 3));
    const std::int64_t x_max = nx - sx - 1;
    const std::int64_t z_max = nz - sz - 1;
    if (x_max < wall_t + 1 || z_max < wall_t + 1) continue;
    const std::int64_t x0 = rng.uniform_int(wall_t + 1, x_max);
    const std::int64_t z0 = rng.uniform_int(wall_t + 1, z_max);
    for (std::int64_t x = x0; x < x0 + sx; ++x)
      for (std::int64_t y = floor_h; y < std::min(ny, floor_h + sy); ++y)
        for (std::int64_t z = z0; z < z0 + sz; ++z) labels.at({x, y, z}) = cls;
  }

  // Camera: eye in the open corner, aimed at the scene body.
  const double vs = spec.voxel_size;
  CameraModel camera;
  DepthMap depth;
  bool placed = false;
  for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
    const Vec3 eye = spec.origin + Vec3{rng.uniform(0.55, 0.92) * static_cast<double>(nx),
                                        rng.uniform(0.45, 0.88) * static_cast<double>(ny),
                                        rng.uniform(0.55, 0.92) * static_cast<double>(nz)} *
                                       vs;
    const auto eye_voxel = world_to_voxel(eye, spec);
    if (!eye_voxel || labels.at(*eye_voxel) != 0) continue;
    const Vec3 target = spec.origin + Vec3{rng.uniform(0.18, 0.45) * static_cast<double>(nx),
                                           rng.uniform(0.08, 0.35) * static_cast<double>(ny),
                                           rng.uniform(0.18, 0.45) * static_cast<double>(nz)} *
                                          vs;
    const Vec3 fwd = (target - eye).normalized();
    const Vec3 up{0.0, 1.0, 0.0};
    if (std::abs(fwd.dot(up)) > 0.97) continue;
    const Vec3 right = fwd.cross(up).normalized();
    const Vec3 down = fwd.cross(right);

    Mat34 ext;
    const Vec3 rows[3] = {right, down, fwd};
    for (int r = 0; r < 3; ++r) {
      ext(r, 0) = (r == 0 ? rows[0].x : r == 1 ? rows[1].x : rows[2].x);
      ext(r, 1) = (r == 0 ? rows[0].y : r == 1 ? rows[1].y : rows[2].y);
      ext(r, 2) = (r == 0 ? rows[0].z : r == 1 ? rows[1].z : rows[2].z);
      ext(r, 3) = -(rows[r].x * eye.x + rows[r].y * eye.y + rows[r].z * eye.z);
    }

    const double fov = rng.uniform(55.0, 70.0) * 3.141592653589793 / 180.0;
    const double f = 0.5 * static_cast<double>(opts.image_width) / std::tan(fov * 0.5);
    Mat3 k = Mat3::identity();
    k(0, 0) = f;
    k(1, 1) = f;
    k(0, 2) = 0.5 * static_cast<double>(opts.image_width);
    k(1, 2) = 0.5 * static_cast<double>(opts.image_height);

    camera.intrinsics = k;
    camera.extrinsics = ext;
    depth = render_depth(labels, camera, opts.image_width, opts.image_height);
    std::int64_t valid = 0;
    for (float d : depth.values) valid += (d > 0.0f);
    if (valid * 10 >= opts.image_width * opts.image_height) placed = true;
  }
  if (!placed)
    throw ValidationError("grid too small to place a camera with a non-empty view");

  // RGB: class color, face-dependent shading, mild pixel noise from an
  // independent stream.
  Rng noise_rng = rng.fork(0x52474200);
  FeatureMap2D rgb(opts.image_width, opts.image_height, 3, 0.0);
  const Vec3 eye = camera.camera_center();
  for (std::int64_t row = 0; row < opts.image_height; ++row)
    for (std::int64_t col = 0; col < opts.image_width; ++col) {
      const RayHit hit = raycast_first_hit(labels, eye, pixel_ray_dir(camera, col, row));
      double base[3];
      double shade = 1.0;
      if (hit.hit) {
        const std::uint8_t cls = labels.at(hit.voxel);
        const auto& c = kPalette[std::min<std::size_t>(cls, kPaletteSize - 1)];
        base[0] = c[0];
        base[1] = c[1];
        base[2] = c[2];
        shade = hit.face_axis == 1 ? 1.0 : hit.face_axis == 0 ? 0.78 : 0.88;
      } else {
        base[0] = kPalette[0][0];
        base[1] = kPalette[0][1];
        base[2] = kPalette[0][2];
      }
      for (int c = 0; c < 3; ++c) {
        const double v = base[c] * shade + 0.01 * noise_rng.normal();
        rgb.at(col, row, c) = std::clamp(v, 0.0, 1.0);
      }
    }

  SceneSample sample;
  sample.seed = seed;
  sample.camera = camera;
  sample.depth = depth;
  sample.rgb = rgb;
  sample.tsdf = encode_tsdf(depth, camera, spec, opts.truncation);

  // Unobserved space carries no annotation.
  sample.labels = labels;
  const std::int64_t n = spec.num_voxels();
  for (std::int64_t i = 0; i < n; ++i)
    if (!sample.tsdf.masks.frustum[static_cast<std::size_t>(i)])
      sample.labels.labels[static_cast<std::size_t>(i)] = kIgnoreLabel;

  sample.sketch = extract_sketch(sample.labels);
  return sample;
}

}  // namespace ssc
