#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssc/metrics.hpp"
#include "ssc/model.hpp"
#include "ssc/scene.hpp"
#include "ssc/trainer.hpp"

namespace ssc::io {

// ---- SVOX: binary voxel volumes ----------------------------------------------
// magic "SVOX" | version u32 | dims 3xu32 | voxel_size f64 | origin 3xf64 |
// dtype u8 (0 = u8 labels, 1 = f32 scalar, 2 = f32 vector + channels u32) |
// raw little-endian payload in linear order (x * ny + y) * nz + z,
// channels innermost for dtype 2.

inline constexpr std::uint32_t kSvoxVersion = 1;

enum class SvoxDtype : std::uint8_t { U8 = 0, F32Scalar = 1, F32Vector = 2 };

struct SvoxFile {
  GridSpec spec;
  SvoxDtype dtype = SvoxDtype::U8;
  std::int64_t channels = 1;
  std::vector<std::uint8_t> u8;
  std::vector<float> f32;
};

SvoxFile read_svox(const std::string& path);
void write_svox(const std::string& path, const SvoxFile& file);

void write_labels(const std::string& path, const SemanticLabelGrid& labels);
// num_classes is recovered as (max non-IGNORE label) + 1 unless a positive
// hint is given.
SemanticLabelGrid read_labels(const std::string& path, std::int64_t num_classes_hint = 0);
void write_sketch(const std::string& path, const SketchGrid& sketch);
SketchGrid read_sketch(const std::string& path);
void write_tsdf(const std::string& path, const TsdfVolume& vol);
VoxelGrid<double> read_tsdf_values(const std::string& path);

// ---- DPTH: depth maps ----------------------------------------------------------
// magic "DPTH" | width u32 | height u32 | row-major f32 meters, 0 invalid.
void write_depth(const std::string& path, const DepthMap& depth);
DepthMap read_depth(const std::string& path);

// ---- RGBF: float image rasters ---------------------------------------------------
// magic "RGBF" | width u32 | height u32 | channels u32 | row-major f32,
// channel innermost.
void write_rgb(const std::string& path, const FeatureMap2D& image);
FeatureMap2D read_rgb(const std::string& path);

// ---- camera text -------------------------------------------------------------------
// Lines fx=, fy=, cx=, cy= and e00=..e23= (world-to-camera), one per line.
void write_camera(const std::string& path, const CameraModel& camera);
CameraModel read_camera(const std::string& path);

// ---- SKPT checkpoints ---------------------------------------------------------------
// magic "SKPT" | version u32 | record count u32 | records of
// (name_len u32, name, ndim u32, dims i64 x ndim, f64 data). Parameters
// first, then buffers, in registry order.
void save_checkpoint(const std::string& path, const nn::ParamRegistry& registry);
// Shape-checks every record against the registry; throws ValidationError
// on any mismatch or missing/extra record.
void load_checkpoint(const std::string& path, nn::ParamRegistry& registry);

// ---- dataset manifest -------------------------------------------------------------------
struct ManifestEntry {
  std::uint64_t seed = 0;
  std::string labels, sketch, tsdf, depth, camera, rgb;  // relative to the manifest
};

struct DatasetManifest {
  std::int64_t num_classes = 0;
  double voxel_size = 0.0;
  double truncation = kDefaultTruncation;
  std::vector<ManifestEntry> entries;
};

void write_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::string& path);

// Reads every sample file; visibility masks are recomputed from the depth
// map and camera.
std::vector<SceneSample> load_dataset(const std::string& manifest_path);

// ---- reports and metric logs ------------------------------------------------------------
// JSON object with fixed keys sc_precision, sc_recall, sc_iou,
// ssc_iou.<class>, ssc_miou.
std::string report_to_json(const EvalReport& report);
void write_report(const std::string& path, const EvalReport& report);
EvalReport read_report(const std::string& path);

std::string epoch_record_to_json(const EpochRecord& record);

// ---- run configuration ---------------------------------------------------------------------
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
};

RunConfig parse_config_json(const std::string& text, const std::string& source_name = "<config>");
RunConfig read_config(const std::string& path);
std::string config_to_json(const RunConfig& config);

}  // namespace ssc::io
