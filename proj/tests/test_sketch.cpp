#include <doctest.h>

#include <map>

#include "oracles.hpp"
#include "ssc/rng.hpp"
#include "ssc/sketch.hpp"

using namespace ssc;

namespace {

GridSpec cube_spec(std::int64_t n) {
  GridSpec s;
  s.dims = {n, n, n};
  s.voxel_size = 0.02;
  s.origin = {0, 0, 0};
  return s;
}

SemanticLabelGrid half_space_x(std::int64_t n, std::uint8_t lo, std::uint8_t hi,
                               std::int64_t split) {
  SemanticLabelGrid labels(cube_spec(n), 16);
  for (std::int64_t x = 0; x < n; ++x)
    for (std::int64_t y = 0; y < n; ++y)
      for (std::int64_t z = 0; z < n; ++z) labels.at({x, y, z}) = x <= split ? lo : hi;
  return labels;
}

SemanticLabelGrid random_labels(std::int64_t n, std::int64_t classes, Rng& rng,
                                double ignore_prob = 0.0) {
  SemanticLabelGrid labels(cube_spec(n), classes);
  for (auto& l : labels.labels)
    l = rng.uniform() < ignore_prob ? kIgnoreLabel
                                    : static_cast<std::uint8_t>(rng.uniform_int(0, classes - 1));
  return labels;
}

}  // namespace

TEST_SUITE("sketch") {

TEST_CASE("sobel responses vanish on a constant grid") {
  SemanticLabelGrid labels(cube_spec(6), 4, 2);
  for (auto axis : {Axis::X, Axis::Y, Axis::Z}) {
    const auto resp = sobel3d_axis_response(labels, axis);
    for (auto v : resp.values) CHECK(v == 0);
  }
}

TEST_CASE("half-space split: x responses on the two interface layers only") {
  const auto labels = half_space_x(5, 1, 2, 2);
  const auto gx = sobel3d_axis_response(labels, Axis::X);
  const auto gy = sobel3d_axis_response(labels, Axis::Y);
  const auto gz = sobel3d_axis_response(labels, Axis::Z);
  for (std::int64_t lin = 0; lin < labels.spec.num_voxels(); ++lin) {
    const Index3 v = labels.spec.index_at(lin);
    const std::size_t i = static_cast<std::size_t>(lin);
    CHECK(gy.values[i] == 0);
    CHECK(gz.values[i] == 0);
    if (v.x == 2 || v.x == 3) {
      CHECK(gx.values[i] != 0);
    } else {
      CHECK(gx.values[i] == 0);
    }
    CHECK(gx.values[i] == oracle::sobel_response(labels, v, 0));
  }
}

TEST_CASE("relabeling scales responses but keeps the zero pattern") {
  const auto labels_a = half_space_x(5, 1, 2, 2);
  const auto labels_b = half_space_x(5, 7, 4, 2);
  const auto ga = sobel3d_axis_response(labels_a, Axis::X);
  const auto gb = sobel3d_axis_response(labels_b, Axis::X);
  for (std::size_t i = 0; i < ga.values.size(); ++i) {
    CHECK((ga.values[i] != 0) == (gb.values[i] != 0));
    CHECK(gb.values[i] == oracle::sobel_response(labels_b, labels_b.spec.index_at(
                                                               static_cast<std::int64_t>(i)), 0));
  }
}

TEST_CASE("constant grid has an empty sketch") {
  SemanticLabelGrid labels(cube_spec(6), 4, 3);
  CHECK(extract_sketch(labels).count() == 0);
}

TEST_CASE("single-axis half-space produces no sketch voxels") {
  const auto labels = half_space_x(5, 1, 2, 2);
  CHECK(extract_sketch(labels).count() == 0);
}

TEST_CASE("embedded box sketch matches the brute-force oracle exactly") {
  SemanticLabelGrid labels(cube_spec(6), 5, 1);
  for (std::int64_t x = 2; x < 4; ++x)
    for (std::int64_t y = 2; y < 4; ++y)
      for (std::int64_t z = 2; z < 4; ++z) labels.at({x, y, z}) = 3;
  const auto sketch = extract_sketch(labels);
  const auto expected = oracle::extract_sketch_bits(labels);
  CHECK(sketch.grid.values == expected);
  CHECK(sketch.count() > 0);
}

TEST_CASE("relabel invariance: two-label grids under arbitrary injective maps") {
  // With exactly two distinct labels any injection acts affinely on the
  // grid, so the response pattern is preserved. (Non-affine maps on 3+
  // labels can flip coincidental response cancellations; the post-Sobel
  // binarization is only affine-invariant.)
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const auto labels = random_labels(8, 2, rng);
    SemanticLabelGrid remapped = labels;
    const std::map<std::uint8_t, std::uint8_t> pi{{0, 13}, {1, 4}};
    remapped.num_classes = 16;
    for (auto& l : remapped.labels) l = pi.at(l);
    CHECK(extract_sketch(labels).grid.values == extract_sketch(remapped).grid.values);
  }
}

TEST_CASE("relabel invariance: multi-label grids under affine maps") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const auto labels = random_labels(8, 5, rng);
    SemanticLabelGrid remapped = labels;
    remapped.num_classes = 16;
    for (auto& l : remapped.labels) l = static_cast<std::uint8_t>(3 * l + 1);
    CHECK(extract_sketch(labels).grid.values == extract_sketch(remapped).grid.values);
  }
}

TEST_CASE("axis permutation equivariance") {
  Rng rng(5);
  const auto labels = random_labels(7, 3, rng);
  // swap x and z
  SemanticLabelGrid swapped(labels.spec, labels.num_classes);
  for (std::int64_t x = 0; x < 7; ++x)
    for (std::int64_t y = 0; y < 7; ++y)
      for (std::int64_t z = 0; z < 7; ++z) swapped.at({z, y, x}) = labels.at({x, y, z});
  const auto sketch = extract_sketch(labels);
  const auto sketch_swapped = extract_sketch(swapped);
  for (std::int64_t x = 0; x < 7; ++x)
    for (std::int64_t y = 0; y < 7; ++y)
      for (std::int64_t z = 0; z < 7; ++z)
        CHECK(sketch.at({x, y, z}) == sketch_swapped.at({z, y, x}));
}

TEST_CASE("100 random grids match the oracle bit for bit") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto labels = random_labels(8, 5, rng, trial % 4 == 0 ? 0.15 : 0.0);
    CHECK(extract_sketch(labels).grid.values == oracle::extract_sketch_bits(labels));
  }
}

TEST_CASE("threshold parameter: lowering it admits single-axis boundaries") {
  const auto labels = half_space_x(5, 1, 2, 2);
  CHECK(extract_sketch(labels, 0).count() > 0);
  CHECK(extract_sketch(labels, 1).count() == 0);
}

TEST_CASE("IGNORE voxels neither join the sketch nor leak responses") {
  SemanticLabelGrid labels(cube_spec(6), 4, 1);
  // annotation boundary: half the volume IGNORE
  for (std::int64_t x = 3; x < 6; ++x)
    for (std::int64_t y = 0; y < 6; ++y)
      for (std::int64_t z = 0; z < 6; ++z) labels.at({x, y, z}) = kIgnoreLabel;
  const auto sketch = extract_sketch(labels);
  CHECK(sketch.count() == 0);  // uniform annotated region, ignore must not fabricate edges
}

}  // TEST_SUITE
