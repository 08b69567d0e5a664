#include <doctest.h>

#include "oracles.hpp"
#include "ssc/grid.hpp"
#include "ssc/rng.hpp"

using namespace ssc;

namespace {

GridSpec make_spec(std::int64_t nx, std::int64_t ny, std::int64_t nz, double vs = 0.02,
                   Vec3 origin = {0, 0, 0}) {
  GridSpec s;
  s.dims = {nx, ny, nz};
  s.voxel_size = vs;
  s.origin = origin;
  return s;
}

CameraModel frontal_camera(double fx, double fy, double cx, double cy) {
  CameraModel cam;
  cam.intrinsics = Mat3::identity();
  cam.intrinsics(0, 0) = fx;
  cam.intrinsics(1, 1) = fy;
  cam.intrinsics(0, 2) = cx;
  cam.intrinsics(1, 2) = cy;
  cam.extrinsics = Mat34::identity();
  return cam;
}

}  // namespace

TEST_SUITE("voxel_core") {

TEST_CASE("world_to_voxel: min corner maps to (0,0,0)") {
  const GridSpec spec = make_spec(4, 4, 4, 0.02, {1.0, -2.0, 0.5});
  const auto v = world_to_voxel(spec.origin, spec);
  REQUIRE(v.has_value());
  CHECK(*v == Index3{0, 0, 0});
}

TEST_CASE("world_to_voxel: direct formula case") {
  const GridSpec spec = make_spec(8, 8, 8, 0.02);
  const auto v = world_to_voxel(Vec3{0.05, 0.01, 0.039}, spec);
  REQUIRE(v.has_value());
  CHECK(*v == Index3{2, 0, 1});
}

TEST_CASE("world_to_voxel: below origin is absent") {
  const GridSpec spec = make_spec(4, 4, 4, 0.02, {1.0, 1.0, 1.0});
  CHECK_FALSE(world_to_voxel(Vec3{0.99, 1.5, 1.5}, spec).has_value());
  CHECK_FALSE(world_to_voxel(Vec3{1.5, 1.5, 1.0 + 4 * 0.02 + 0.001}, spec).has_value());
}

TEST_CASE("voxel center round-trips for every in-bounds index") {
  const GridSpec spec = make_spec(5, 7, 3, 0.13, {-0.4, 2.0, 7.5});
  for (std::int64_t x = 0; x < 5; ++x)
    for (std::int64_t y = 0; y < 7; ++y)
      for (std::int64_t z = 0; z < 3; ++z) {
        const Index3 v{x, y, z};
        const auto back = world_to_voxel(voxel_to_world_center(v, spec), spec);
        REQUIRE(back.has_value());
        CHECK(*back == v);
      }
}

TEST_CASE("downsample_labels: constant grid stays constant") {
  SemanticLabelGrid labels(make_spec(8, 8, 8), 6, 3);
  const auto out = downsample_labels(labels, 4);
  CHECK(out.spec.dims == Index3{2, 2, 2});
  CHECK(out.spec.voxel_size == doctest::Approx(0.08));
  for (auto l : out.labels) CHECK(l == 3);
}

TEST_CASE("downsample_labels: majority vote 33 vs 31") {
  SemanticLabelGrid labels(make_spec(4, 4, 4), 6, 5);
  std::int64_t placed = 0;
  for (std::int64_t i = 0; i < labels.spec.num_voxels() && placed < 33; ++i, ++placed)
    labels.labels[static_cast<std::size_t>(i)] = 2;
  const auto out = downsample_labels(labels, 4);
  REQUIRE(out.spec.num_voxels() == 1);
  CHECK(out.labels[0] == 2);
}

TEST_CASE("downsample_labels: tie breaks to the smaller label") {
  SemanticLabelGrid labels(make_spec(2, 2, 2), 8, 7);
  for (std::int64_t i = 0; i < 4; ++i) labels.labels[static_cast<std::size_t>(i)] = 4;
  const auto out = downsample_labels(labels, 2);
  CHECK(out.labels[0] == 4);
}

TEST_CASE("downsample_labels: all-IGNORE block stays IGNORE, mixed block does not") {
  SemanticLabelGrid labels(make_spec(4, 4, 8), 6, kIgnoreLabel);
  for (std::int64_t z = 4; z < 8; ++z)
    for (std::int64_t x = 0; x < 4; ++x)
      for (std::int64_t y = 0; y < 4; ++y) labels.at({x, y, z}) = (z == 4) ? 1 : kIgnoreLabel;
  const auto out = downsample_labels(labels, 4);
  CHECK(out.labels[0] == kIgnoreLabel);
  CHECK(out.labels[1] == 1);  // one annotated slice dominates the ignore taps
}

TEST_CASE("downsample_labels: rate 1 is the identity") {
  Rng rng(7);
  SemanticLabelGrid labels(make_spec(5, 6, 7), 5);
  for (auto& l : labels.labels)
    l = rng.uniform() < 0.1 ? kIgnoreLabel : static_cast<std::uint8_t>(rng.uniform_int(0, 4));
  const auto out = downsample_labels(labels, 1);
  CHECK(out.labels == labels.labels);
  CHECK(out.spec == labels.spec);
}

TEST_CASE("downsample_labels: indivisible dims rejected") {
  SemanticLabelGrid labels(make_spec(6, 6, 6), 3, 1);
  CHECK_THROWS_AS(downsample_labels(labels, 4), ValidationError);
}

TEST_CASE("downsample_labels: random grids match brute-force majority") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    SemanticLabelGrid labels(make_spec(8, 8, 8), 5);
    for (auto& l : labels.labels)
      l = rng.uniform() < 0.05 ? kIgnoreLabel : static_cast<std::uint8_t>(rng.uniform_int(0, 4));
    const auto out = downsample_labels(labels, 2);
    for (std::int64_t x = 0; x < 4; ++x)
      for (std::int64_t y = 0; y < 4; ++y)
        for (std::int64_t z = 0; z < 4; ++z) {
          std::int64_t counts[5] = {0, 0, 0, 0, 0};
          bool any = false;
          for (std::int64_t dx = 0; dx < 2; ++dx)
            for (std::int64_t dy = 0; dy < 2; ++dy)
              for (std::int64_t dz = 0; dz < 2; ++dz) {
                const std::uint8_t l = labels.at({2 * x + dx, 2 * y + dy, 2 * z + dz});
                if (l == kIgnoreLabel) continue;
                any = true;
                ++counts[l];
              }
          std::uint8_t expected = kIgnoreLabel;
          if (any) {
            int best = 0;
            for (int c = 1; c < 5; ++c)
              if (counts[c] > counts[best]) best = c;
            expected = static_cast<std::uint8_t>(best);
          }
          CHECK(out.at({x, y, z}) == expected);
        }
  }
}

TEST_CASE("visibility: all-invalid depth leaves every mask empty") {
  const GridSpec spec = make_spec(8, 8, 8, 0.1);
  const DepthMap depth(16, 12, 0.0f);
  const CameraModel cam = frontal_camera(10, 10, 8, 6);
  const auto masks = compute_visibility_masks(depth, cam, spec);
  for (std::int64_t i = 0; i < spec.num_voxels(); ++i) {
    CHECK(masks.frustum[static_cast<std::size_t>(i)] == 0);
    CHECK(masks.surface[static_cast<std::size_t>(i)] == 0);
    CHECK(masks.free[static_cast<std::size_t>(i)] == 0);
    CHECK(masks.occluded[static_cast<std::size_t>(i)] == 0);
  }
}

TEST_CASE("visibility: frontal plane splits free/surface/occluded") {
  // Grid straddling the z axis in front of an identity-extrinsic camera;
  // a constant-depth plane at 0.45 m.
  const GridSpec spec = make_spec(8, 8, 8, 0.1, {-0.4, -0.4, 0.0});
  const double plane_d = 0.45;
  const std::int64_t w = 64, h = 64;
  const CameraModel cam = frontal_camera(40, 40, 32, 32);
  DepthMap depth(w, h, static_cast<float>(plane_d));

  const auto masks = compute_visibility_masks(depth, cam, spec);
  const oracle::SimpleCamera ocam = oracle::SimpleCamera::from(cam);

  std::int64_t checked = 0;
  for (std::int64_t lin = 0; lin < spec.num_voxels(); ++lin) {
    const Index3 v = spec.index_at(lin);
    const Vec3 c = voxel_to_world_center(v, spec);
    const Vec3 img = ocam.project(c);
    const bool in_view =
        c.z > 0.0 && img.x >= 0 && img.y >= 0 && img.x < static_cast<double>(w) &&
        img.y < static_cast<double>(h);
    const std::size_t i = static_cast<std::size_t>(lin);
    CHECK(masks.frustum[i] == (in_view ? 1 : 0));
    if (!in_view) continue;
    ++checked;
    // plane voxels: centers at z = 0.45 +- 0.05 -> the voxel layer [0.4, 0.5)
    const bool is_surface_layer = c.z > 0.4 && c.z < 0.5;
    if (is_surface_layer) {
      CHECK(masks.surface[i] == 1);
    } else if (c.z < plane_d) {
      CHECK(masks.free[i] == 1);
    } else {
      CHECK(masks.occluded[i] == 1);
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("visibility: voxels behind the camera are outside the frustum") {
  const GridSpec spec = make_spec(4, 4, 4, 0.1, {-0.2, -0.2, -1.0});
  const CameraModel cam = frontal_camera(20, 20, 10, 10);
  DepthMap depth(20, 20, 0.5f);
  const auto masks = compute_visibility_masks(depth, cam, spec);
  for (std::int64_t i = 0; i < spec.num_voxels(); ++i)
    CHECK(masks.frustum[static_cast<std::size_t>(i)] == 0);
}

TEST_CASE("visibility: partition invariant on random scenes") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const GridSpec spec = make_spec(8, 8, 8, 0.08, {-0.3, -0.3, 0.05});
    DepthMap depth(24, 18, 0.0f);
    for (auto& d : depth.values)
      d = rng.uniform() < 0.3 ? 0.0f : static_cast<float>(rng.uniform(0.1, 1.2));
    const CameraModel cam = frontal_camera(rng.uniform(10, 30), rng.uniform(10, 30), 12, 9);
    const auto masks = compute_visibility_masks(depth, cam, spec);
    for (std::int64_t i = 0; i < spec.num_voxels(); ++i) {
      const std::size_t s = static_cast<std::size_t>(i);
      const int members = masks.surface[s] + masks.free[s] + masks.occluded[s];
      if (masks.frustum[s]) {
        CHECK(members == 1);
      } else {
        CHECK(members == 0);
      }
    }
  }
}

TEST_CASE("visibility: singular intrinsics rejected") {
  const GridSpec spec = make_spec(4, 4, 4, 0.1);
  CameraModel cam;
  cam.intrinsics(0, 0) = 0.0;
  cam.intrinsics(1, 1) = 0.0;
  cam.intrinsics(2, 2) = 1.0;
  DepthMap depth(4, 4, 1.0f);
  CHECK_THROWS_AS(compute_visibility_masks(depth, cam, spec), ValidationError);
}

TEST_CASE("grid spec validation") {
  GridSpec bad;
  bad.dims = {0, 4, 4};
  bad.voxel_size = 0.1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad.dims = {4, 4, 4};
  bad.voxel_size = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

}  // TEST_SUITE
