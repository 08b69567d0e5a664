#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ssc/projection.hpp"
#include "ssc/rng.hpp"

using namespace ssc;

namespace {

CameraModel simple_camera(double fx, double fy, double cx, double cy) {
  CameraModel cam;
  cam.intrinsics = Mat3::identity();
  cam.intrinsics(0, 0) = fx;
  cam.intrinsics(1, 1) = fy;
  cam.intrinsics(0, 2) = cx;
  cam.intrinsics(1, 2) = cy;
  cam.extrinsics = Mat34::identity();
  return cam;
}

GridSpec front_spec(std::int64_t n, double vs) {
  GridSpec s;
  s.dims = {n, n, n};
  s.voxel_size = vs;
  const double half = 0.5 * vs * static_cast<double>(n);
  s.origin = {-half, -half, 0.0};
  return s;
}

}  // namespace

TEST_SUITE("projection") {

TEST_CASE("back_project: identity camera, pixel (0,0), depth 1") {
  const CameraModel cam = simple_camera(1, 1, 0, 0);
  const Vec3 p = back_project(0, 0, 1.0, cam);
  CHECK(p.x == doctest::Approx(0.5));
  CHECK(p.y == doctest::Approx(0.5));
  CHECK(p.z == doctest::Approx(1.0));
}

TEST_CASE("back_project: centered pixel under fx=fy=100") {
  const CameraModel cam = simple_camera(100, 100, 50, 50);
  const Vec3 p = back_project(50, 50, 2.0, cam);  // pixel center (50.5, 50.5)
  CHECK(p.x == doctest::Approx(0.01));
  CHECK(p.y == doctest::Approx(0.01));
  CHECK(p.z == doctest::Approx(2.0));
}

TEST_CASE("back_project: non-positive depth is an error") {
  const CameraModel cam = simple_camera(10, 10, 5, 5);
  CHECK_THROWS_AS(back_project(1, 1, 0.0, cam), ValidationError);
  CHECK_THROWS_AS(back_project(1, 1, -0.5, cam), ValidationError);
}

TEST_CASE("back_project round-trips through an arbitrary rigid camera") {
  Rng rng(5);
  CameraModel cam = simple_camera(33.7, 29.1, 10.2, 8.9);
  const double a = 0.4, b = 0.25;
  Mat34 e;
  e.m = {std::cos(a), 0, std::sin(a), 0.3,
         std::sin(a) * std::sin(b), std::cos(b), -std::cos(a) * std::sin(b), -0.1,
         -std::sin(a) * std::cos(b), std::sin(b), std::cos(a) * std::cos(b), 0.7};
  cam.extrinsics = e;
  for (int i = 0; i < 20; ++i) {
    const double u = rng.uniform(0, 20), v = rng.uniform(0, 15), d = rng.uniform(0.2, 3.0);
    const Vec3 world = back_project(u, v, d, cam);
    const Vec3 pc = cam.world_to_camera(world);
    const auto img = cam.project(pc);
    REQUIRE(img.has_value());
    CHECK(img->x == doctest::Approx(u + 0.5).epsilon(1e-9));
    CHECK(img->y == doctest::Approx(v + 0.5).epsilon(1e-9));
    CHECK(img->z == doctest::Approx(d).epsilon(1e-9));
  }
}

TEST_CASE("project_features: single valid pixel fills exactly one voxel") {
  const GridSpec spec = front_spec(8, 0.1);
  const CameraModel cam = simple_camera(20, 20, 12, 9);
  DepthMap depth(24, 18, 0.0f);
  depth.at(12, 9) = 0.35f;
  FeatureMap2D feat(24, 18, 3, 0.0);
  feat.at(12, 9, 0) = 1.5;
  feat.at(12, 9, 1) = -2.5;
  feat.at(12, 9, 2) = 0.25;

  const FeatureVolume fv = project_features(feat, depth, cam, spec);
  const Vec3 world = back_project(12, 9, depth.at(12, 9), cam);
  const auto target = world_to_voxel(world, spec);
  REQUIRE(target.has_value());

  std::int64_t occupied = 0;
  for (std::int64_t i = 0; i < spec.num_voxels(); ++i)
    occupied += fv.occupancy[static_cast<std::size_t>(i)];
  CHECK(occupied == 1);
  CHECK(fv.at(*target, 0) == doctest::Approx(1.5));
  CHECK(fv.at(*target, 1) == doctest::Approx(-2.5));
  CHECK(fv.at(*target, 2) == doctest::Approx(0.25));
  for (std::int64_t i = 0; i < spec.num_voxels(); ++i) {
    if (i == spec.linear_index(*target)) continue;
    for (std::int64_t c = 0; c < 3; ++c)
      CHECK(fv.data[static_cast<std::size_t>(i * 3 + c)] == 0.0);
  }
}

TEST_CASE("project_features: colliding pixels reduce channel-wise by max") {
  const GridSpec spec = front_spec(4, 0.4);
  const CameraModel cam = simple_camera(40, 40, 8, 8);
  DepthMap depth(16, 16, 0.0f);
  depth.at(7, 7) = 0.5f;
  depth.at(8, 7) = 0.5f;
  FeatureMap2D feat(16, 16, 2, 0.0);
  feat.at(7, 7, 0) = 1.0;
  feat.at(7, 7, 1) = -2.0;
  feat.at(8, 7, 0) = 0.0;
  feat.at(8, 7, 1) = 5.0;

  const FeatureVolume fv = project_features(feat, depth, cam, spec);
  const auto va = world_to_voxel(back_project(7, 7, 0.5, cam), spec);
  const auto vb = world_to_voxel(back_project(8, 7, 0.5, cam), spec);
  REQUIRE(va.has_value());
  REQUIRE(vb.has_value());
  REQUIRE(*va == *vb);
  CHECK(fv.at(*va, 0) == doctest::Approx(1.0));
  CHECK(fv.at(*va, 1) == doctest::Approx(5.0));
}

TEST_CASE("project_features: negative features survive a lone contribution") {
  const GridSpec spec = front_spec(8, 0.1);
  const CameraModel cam = simple_camera(20, 20, 12, 9);
  DepthMap depth(24, 18, 0.0f);
  depth.at(10, 8) = 0.4f;
  FeatureMap2D feat(24, 18, 1, 0.0);
  feat.at(10, 8, 0) = -3.75;
  const FeatureVolume fv = project_features(feat, depth, cam, spec);
  const auto v = world_to_voxel(back_project(10, 8, depth.at(10, 8), cam), spec);
  REQUIRE(v.has_value());
  CHECK(fv.at(*v, 0) == doctest::Approx(-3.75));
}

TEST_CASE("project_features: all pixels invalid leaves an all-zero volume") {
  const GridSpec spec = front_spec(4, 0.2);
  const CameraModel cam = simple_camera(20, 20, 8, 6);
  DepthMap depth(16, 12, 0.0f);
  FeatureMap2D feat(16, 12, 2, 3.0);
  const FeatureVolume fv = project_features(feat, depth, cam, spec);
  for (double v : fv.data) CHECK(v == 0.0);
  for (auto o : fv.occupancy) CHECK(o == 0);
}

TEST_CASE("project_features: shape mismatch rejected") {
  const GridSpec spec = front_spec(4, 0.2);
  const CameraModel cam = simple_camera(20, 20, 8, 6);
  DepthMap depth(16, 12, 0.5f);
  FeatureMap2D feat(15, 12, 2, 0.0);
  CHECK_THROWS_AS(project_features(feat, depth, cam, spec), ValidationError);
}

TEST_CASE("routing consistency and max dominance on random scenes") {
  Rng rng(77);
  const GridSpec spec = front_spec(8, 0.12);
  const CameraModel cam = simple_camera(23.3, 21.7, 14, 10);
  DepthMap depth(28, 20, 0.0f);
  FeatureMap2D feat(28, 20, 4, 0.0);
  for (std::int64_t r = 0; r < 20; ++r)
    for (std::int64_t c = 0; c < 28; ++c) {
      if (rng.uniform() < 0.35) continue;
      depth.at(c, r) = static_cast<float>(rng.uniform(0.1, 1.1));
      for (std::int64_t ch = 0; ch < 4; ++ch) feat.at(c, r, ch) = rng.normal();
    }
  const FeatureVolume fv = project_features(feat, depth, cam, spec);

  for (std::int64_t r = 0; r < 20; ++r)
    for (std::int64_t c = 0; c < 28; ++c) {
      if (!depth.valid(c, r)) continue;
      const auto v = world_to_voxel(
          back_project(static_cast<double>(c), static_cast<double>(r), depth.at(c, r), cam), spec);
      if (!v) continue;
      CHECK(fv.occupancy[static_cast<std::size_t>(spec.linear_index(*v))] == 1);
      for (std::int64_t ch = 0; ch < 4; ++ch) CHECK(fv.at(*v, ch) >= feat.at(c, r, ch) - 1e-12);
    }
}

TEST_CASE("pixel processing order never changes the output") {
  // Mirroring the image in u (with fx negated and cx reflected) yields the
  // same logical pixel set visited in a different order; the volumes must
  // agree exactly because the per-voxel max is order-free.
  Rng rng(123);
  const GridSpec spec = front_spec(6, 0.15);
  const CameraModel cam = simple_camera(19.3, 18.2, 10, 8);
  DepthMap depth(20, 16, 0.0f);
  FeatureMap2D feat(20, 16, 2, 0.0);
  for (auto& d : depth.values)
    d = rng.uniform() < 0.5 ? 0.0f : static_cast<float>(rng.uniform(0.1, 1.0));
  for (auto& f : feat.values) f = rng.normal();

  const FeatureVolume a = project_features(feat, depth, cam, spec);

  DepthMap depth_r(20, 16, 0.0f);
  FeatureMap2D feat_r(20, 16, 2, 0.0);
  CameraModel cam_r = cam;
  cam_r.intrinsics(0, 0) = -cam.intrinsics(0, 0);
  cam_r.intrinsics(0, 2) = 20.0 - cam.intrinsics(0, 2);
  for (std::int64_t r = 0; r < 16; ++r)
    for (std::int64_t c = 0; c < 20; ++c) {
      depth_r.at(19 - c, r) = depth.at(c, r);
      for (std::int64_t ch = 0; ch < 2; ++ch) feat_r.at(19 - c, r, ch) = feat.at(c, r, ch);
    }
  const FeatureVolume b = project_features(feat_r, depth_r, cam_r, spec);
  for (std::size_t i = 0; i < a.data.size(); ++i) CHECK(a.data[i] == b.data[i]);
  CHECK(a.occupancy == b.occupancy);
}

}  // TEST_SUITE
