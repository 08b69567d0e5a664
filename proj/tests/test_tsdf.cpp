#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "ssc/rng.hpp"
#include "ssc/tsdf.hpp"

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

DepthMap random_depth(std::int64_t w, std::int64_t h, Rng& rng, double invalid_prob = 0.2) {
  DepthMap d(w, h);
  for (auto& v : d.values)
    v = rng.uniform() < invalid_prob ? 0.0f : static_cast<float>(rng.uniform(0.15, 1.1));
  return d;
}

}  // namespace

TEST_SUITE("tsdf") {

TEST_CASE("surface voxels sit near zero, saturated free space at +1") {
  const GridSpec spec = front_spec(8, 0.1);
  const CameraModel cam = simple_camera(40, 40, 24, 24);
  DepthMap depth(48, 48, 0.65f);
  const double tau = 0.24;
  const TsdfVolume vol = encode_tsdf(depth, cam, spec, tau);

  const double half_diag = 0.5 * std::sqrt(3.0) * spec.voxel_size;
  bool saw_surface = false, saw_saturated = false;
  for (std::int64_t i = 0; i < spec.num_voxels(); ++i) {
    const std::size_t s = static_cast<std::size_t>(i);
    if (vol.masks.surface[s]) {
      saw_surface = true;
      CHECK(std::abs(vol.grid.values[s]) <= half_diag / tau + 1e-12);
    }
    if (vol.masks.free[s]) {
      const Vec3 c = voxel_to_world_center(spec.index_at(i), spec);
      if (c.z < 0.65 - tau - spec.voxel_size) {
        saw_saturated = true;
        CHECK(vol.grid.values[s] == doctest::Approx(1.0));
      }
    }
  }
  CHECK(saw_surface);
  CHECK(saw_saturated);
}

TEST_CASE("all pixels invalid is an error") {
  const GridSpec spec = front_spec(8, 0.1);
  const CameraModel cam = simple_camera(20, 20, 12, 12);
  DepthMap depth(24, 24, 0.0f);
  CHECK_THROWS_AS(encode_tsdf(depth, cam, spec, 0.24), ValidationError);
}

TEST_CASE("frontal plane matches the exhaustive nearest-point oracle") {
  const GridSpec spec = front_spec(8, 0.1);
  const CameraModel cam = simple_camera(40, 40, 24, 24);
  DepthMap depth(48, 48, 0.5f);
  const double tau = 0.24;
  const TsdfVolume vol = encode_tsdf(depth, cam, spec, tau);
  const auto ref = oracle::tsdf_reference(depth, cam, spec, tau);
  for (std::int64_t i = 0; i < spec.num_voxels(); ++i) {
    const std::size_t s = static_cast<std::size_t>(i);
    CHECK(std::abs(vol.grid.values[s] - ref.values[s]) < 1e-6);
  }
}

TEST_CASE("random depth maps match the oracle and the visibility signs") {
  Rng rng(42);
  for (int trial = 0; trial < 6; ++trial) {
    const std::int64_t n = 8 + 4 * (trial % 3);
    const GridSpec spec = front_spec(n, 0.08);
    const CameraModel cam = simple_camera(rng.uniform(18, 40), rng.uniform(18, 40), 16, 12);
    const DepthMap depth = random_depth(32, 24, rng);
    const double tau = 0.24;
    const TsdfVolume vol = encode_tsdf(depth, cam, spec, tau);
    const auto ref = oracle::tsdf_reference(depth, cam, spec, tau);
    for (std::int64_t i = 0; i < spec.num_voxels(); ++i) {
      const std::size_t s = static_cast<std::size_t>(i);
      CHECK(std::abs(vol.grid.values[s] - ref.values[s]) < 1e-6);
      if (vol.masks.free[s]) CHECK(vol.grid.values[s] >= 0.0);
      if (vol.masks.occluded[s]) CHECK(vol.grid.values[s] <= 0.0);
      if (!vol.masks.frustum[s]) CHECK(vol.grid.values[s] == -1.0);
    }
  }
}

TEST_CASE("monotonicity: shrinking tau never grows |distance| in meters") {
  Rng rng(7);
  const GridSpec spec = front_spec(8, 0.08);
  const CameraModel cam = simple_camera(25, 25, 16, 12);
  const DepthMap depth = random_depth(32, 24, rng);
  const TsdfVolume big = encode_tsdf(depth, cam, spec, 0.4);
  const TsdfVolume small = encode_tsdf(depth, cam, spec, 0.2);
  for (std::int64_t i = 0; i < spec.num_voxels(); ++i) {
    const std::size_t s = static_cast<std::size_t>(i);
    if (!big.masks.frustum[s]) continue;
    const double meters_big = std::abs(big.grid.values[s]) * 0.4;
    const double meters_small = std::abs(small.grid.values[s]) * 0.2;
    CHECK(meters_small <= meters_big + 1e-12);
  }
}

TEST_CASE("mirroring the scene about the image x-axis mirrors the volume") {
  // Camera centered on the grid; flipping the depth map vertically equals
  // flipping the volume in y when cy is symmetric.
  // Non-round focal lengths keep projections away from exact sample ties,
  // which would otherwise resolve asymmetrically between the two encodes.
  const std::int64_t n = 8;
  GridSpec spec = front_spec(n, 0.1);
  const CameraModel cam = simple_camera(30.11, 29.37, 16, 16);
  Rng rng(13);
  DepthMap depth(32, 32, 0.0f);
  for (auto& v : depth.values) v = static_cast<float>(rng.uniform(0.3, 0.9));

  DepthMap flipped(32, 32, 0.0f);
  for (std::int64_t r = 0; r < 32; ++r)
    for (std::int64_t c = 0; c < 32; ++c) flipped.at(c, 31 - r) = depth.at(c, r);

  const TsdfVolume a = encode_tsdf(depth, cam, spec, 0.24);
  const TsdfVolume b = encode_tsdf(flipped, cam, spec, 0.24);
  for (std::int64_t x = 0; x < n; ++x)
    for (std::int64_t y = 0; y < n; ++y)
      for (std::int64_t z = 0; z < n; ++z)
        CHECK(a.grid.at({x, y, z}) ==
              doctest::Approx(b.grid.at({x, n - 1 - y, z})).epsilon(1e-9));
}

TEST_CASE("downsample_tsdf: constants, identity and block means") {
  const GridSpec spec = front_spec(8, 0.1);
  const CameraModel cam = simple_camera(40, 40, 24, 24);
  DepthMap depth(48, 48, 0.5f);
  TsdfVolume vol = encode_tsdf(depth, cam, spec, 0.24);

  SUBCASE("rate 1 is the identity") {
    const TsdfVolume same = downsample_tsdf(vol, 1);
    CHECK(same.grid.values == vol.grid.values);
  }
  SUBCASE("constant volume stays constant") {
    std::fill(vol.grid.values.begin(), vol.grid.values.end(), 0.37);
    const TsdfVolume down = downsample_tsdf(vol, 2);
    for (double v : down.grid.values) CHECK(v == doctest::Approx(0.37));
    CHECK(down.grid.spec.voxel_size == doctest::Approx(0.2));
  }
  SUBCASE("4^3 block average matches direct summation") {
    const TsdfVolume down = downsample_tsdf(vol, 4);
    for (std::int64_t x = 0; x < 2; ++x)
      for (std::int64_t y = 0; y < 2; ++y)
        for (std::int64_t z = 0; z < 2; ++z) {
          double acc = 0.0;
          for (std::int64_t dx = 0; dx < 4; ++dx)
            for (std::int64_t dy = 0; dy < 4; ++dy)
              for (std::int64_t dz = 0; dz < 4; ++dz)
                acc += vol.grid.at({4 * x + dx, 4 * y + dy, 4 * z + dz});
          CHECK(down.grid.at({x, y, z}) == doctest::Approx(acc / 64.0));
        }
  }
  SUBCASE("indivisible dims rejected") {
    CHECK_THROWS_AS(downsample_tsdf(vol, 3), ValidationError);
  }
}

}  // TEST_SUITE
