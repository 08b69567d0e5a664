#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ssc/errors.hpp"
#include "ssc/geometry.hpp"

namespace ssc {

struct DepthMap;
struct CameraModel;

// Sentinel for voxels outside the annotated region. Excluded from every
// loss and every metric.
inline constexpr std::uint8_t kIgnoreLabel = 255;

// Placement of a dense voxel grid in the world frame. origin is the world
// position of the min corner of voxel (0,0,0); voxel (i,j,k) has its center
// at origin + (i+0.5, j+0.5, k+0.5) * voxel_size.
struct GridSpec {
  Index3 dims;
  double voxel_size = 0.0;
  Vec3 origin;

  std::int64_t num_voxels() const { return dims.x * dims.y * dims.z; }

  // Linear order: x is the slowest axis, z the fastest, i.e.
  // index = (x * ny + y) * nz + z. All payloads and file formats use it.
  std::int64_t linear_index(const Index3& v) const {
    return (v.x * dims.y + v.y) * dims.z + v.z;
  }
  Index3 index_at(std::int64_t lin) const {
    Index3 v;
    v.z = lin % dims.z;
    v.y = (lin / dims.z) % dims.y;
    v.x = lin / (dims.z * dims.y);
    return v;
  }
  bool in_bounds(const Index3& v) const {
    return v.x >= 0 && v.y >= 0 && v.z >= 0 && v.x < dims.x && v.y < dims.y && v.z < dims.z;
  }

  void validate() const;
  bool operator==(const GridSpec&) const = default;
};

// floor((p - origin) / voxel_size), absent when out of bounds.
std::optional<Index3> world_to_voxel(const Vec3& p, const GridSpec& spec);

Vec3 voxel_to_world_center(const Index3& v, const GridSpec& spec);

// Dense per-voxel payload in GridSpec linear order, channels innermost.
template <typename T>
struct VoxelGrid {
  GridSpec spec;
  std::int64_t channels = 1;
  std::vector<T> values;

  VoxelGrid() = default;
  explicit VoxelGrid(const GridSpec& s, std::int64_t ch = 1, T fill = T{})
      : spec(s), channels(ch), values(static_cast<std::size_t>(s.num_voxels() * ch), fill) {}

  T& at(const Index3& v, std::int64_t c = 0) {
    return values[static_cast<std::size_t>(spec.linear_index(v) * channels + c)];
  }
  const T& at(const Index3& v, std::int64_t c = 0) const {
    return values[static_cast<std::size_t>(spec.linear_index(v) * channels + c)];
  }
};

struct SemanticLabelGrid {
  GridSpec spec;
  std::int64_t num_classes = 0;  // N+1 including class 0 = empty
  std::vector<std::uint8_t> labels;

  SemanticLabelGrid() = default;
  SemanticLabelGrid(const GridSpec& s, std::int64_t nc, std::uint8_t fill = 0)
      : spec(s), num_classes(nc), labels(static_cast<std::size_t>(s.num_voxels()), fill) {}

  std::uint8_t& at(const Index3& v) { return labels[static_cast<std::size_t>(spec.linear_index(v))]; }
  std::uint8_t at(const Index3& v) const {
    return labels[static_cast<std::size_t>(spec.linear_index(v))];
  }

  // Every non-IGNORE label must be < num_classes.
  void validate() const;
};

// Per-voxel view classification, derived from one depth observation.
// surface, free and occluded are pairwise disjoint subsets of frustum and
// cover it: every in-frustum voxel falls in exactly one of the three.
struct VisibilityMasks {
  GridSpec spec;
  std::vector<std::uint8_t> frustum;
  std::vector<std::uint8_t> surface;
  std::vector<std::uint8_t> free;
  std::vector<std::uint8_t> occluded;
};

// Majority label per rate^3 block; IGNORE only when the whole block is
// IGNORE; ties go to the smallest label index. Output voxel_size scales by
// rate. Throws ValidationError when a dimension is not divisible by rate.
SemanticLabelGrid downsample_labels(const SemanticLabelGrid& labels, std::int64_t rate);

// Classifies every voxel against a single depth observation. A voxel is in
// the frustum when its center projects inside the image in front of the
// camera AND at least one of the four bilinear-neighbor depth samples at
// the projected position is valid; the nearest of those valid samples
// provides the observed depth. Voxels containing a back-projected depth
// point are surface; the rest of the frustum splits into free (strictly
// nearer than the observation) and occluded (at or beyond it).
VisibilityMasks compute_visibility_masks(const DepthMap& depth, const CameraModel& camera,
                                         const GridSpec& spec);

}  // namespace ssc
