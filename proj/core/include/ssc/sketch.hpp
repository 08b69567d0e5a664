#pragma once

#include <cstdint>

#include "ssc/grid.hpp"

namespace ssc {

enum class Axis { X = 0, Y = 1, Z = 2 };

// Binary structure prior over the label volume: true marks a sketch voxel.
struct SketchGrid {
  VoxelGrid<std::uint8_t> grid;

  bool at(const Index3& v) const { return grid.at(v) != 0; }
  std::int64_t count() const {
    std::int64_t c = 0;
    for (auto b : grid.values) c += (b != 0);
    return c;
  }
};

// Separable 3D Sobel response along one axis: derivative (-1,0,+1) on the
// axis, smoothing (1,2,1) on the other two. Borders use edge replication.
// A stencil tap landing on an IGNORE voxel reads the center label instead,
// so annotation boundaries do not produce responses; an IGNORE center
// yields 0.
VoxelGrid<std::int64_t> sobel3d_axis_response(const SemanticLabelGrid& labels, Axis axis);

// Per-axis responses binarized to 0/1; a voxel joins the sketch when more
// than min_active_axes of the three are active (default: at least two).
SketchGrid extract_sketch(const SemanticLabelGrid& labels, int min_active_axes = 1);

}  // namespace ssc
