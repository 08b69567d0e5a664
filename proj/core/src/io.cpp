#include "ssc/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace ssc::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---- low-level binary helpers ------------------------------------------------

std::vector<std::uint8_t> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open for reading");
  in.seekg(0, std::ios::end);
  const std::streamoff size = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> data(static_cast<std::size_t>(size));
  if (size > 0) in.read(reinterpret_cast<char*>(data.data()), size);
  if (!in) throw IoError(path + ": read failed");
  return data;
}

class ByteReader {
 public:
  ByteReader(const std::string& path, std::vector<std::uint8_t> data)
      : path_(path), data_(std::move(data)) {}

  template <typename T>
  T read(const char* what) {
    if (pos_ + sizeof(T) > data_.size())
      throw ValidationError(path_ + ": truncated at offset " + std::to_string(pos_) +
                            " while reading " + what);
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void read_bytes(void* dst, std::size_t n, const char* what) {
    if (pos_ + n > data_.size())
      throw ValidationError(path_ + ": truncated at offset " + std::to_string(pos_) +
                            " while reading " + what);
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }

  void expect_magic(const char magic[4]) {
    char m[4];
    read_bytes(m, 4, "magic");
    if (std::memcmp(m, magic, 4) != 0)
      throw ValidationError(path_ + ": bad magic, expected '" + std::string(magic, 4) + "'");
  }

  void expect_end() {
    if (pos_ != data_.size())
      throw ValidationError(path_ + ": " + std::to_string(data_.size() - pos_) +
                            " trailing bytes after offset " + std::to_string(pos_));
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::vector<std::uint8_t> data_;
  std::size_t pos_ = 0;
};

class ByteWriter {
 public:
  explicit ByteWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError(path + ": cannot open for writing");
  }

  template <typename T>
  void write(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void write_bytes(const void* src, std::size_t n) {
    out_.write(reinterpret_cast<const char*>(src), static_cast<std::streamsize>(n));
  }
  void close() {
    out_.close();
    if (!out_) throw IoError(path_ + ": write failed");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

// ---- SVOX ----------------------------------------------------------------------

SvoxFile read_svox(const std::string& path) {
  ByteReader r(path, read_all(path));
  r.expect_magic("SVOX");
  const auto version = r.read<std::uint32_t>("version");
  if (version != kSvoxVersion)
    throw ValidationError(path + ": unsupported SVOX version " + std::to_string(version));
  SvoxFile f;
  f.spec.dims.x = r.read<std::uint32_t>("dims.x");
  f.spec.dims.y = r.read<std::uint32_t>("dims.y");
  f.spec.dims.z = r.read<std::uint32_t>("dims.z");
  f.spec.voxel_size = r.read<double>("voxel_size");
  f.spec.origin.x = r.read<double>("origin.x");
  f.spec.origin.y = r.read<double>("origin.y");
  f.spec.origin.z = r.read<double>("origin.z");
  f.spec.validate();
  const auto dtype = r.read<std::uint8_t>("dtype");
  if (dtype > 2) throw ValidationError(path + ": unknown dtype tag " + std::to_string(dtype));
  f.dtype = static_cast<SvoxDtype>(dtype);
  f.channels = 1;
  if (f.dtype == SvoxDtype::F32Vector) {
    f.channels = r.read<std::uint32_t>("channels");
    if (f.channels < 1) throw ValidationError(path + ": vector payload needs channels >= 1");
  }
  const std::int64_t count = f.spec.num_voxels() * f.channels;
  if (f.dtype == SvoxDtype::U8) {
    f.u8.resize(static_cast<std::size_t>(count));
    r.read_bytes(f.u8.data(), static_cast<std::size_t>(count), "u8 payload");
  } else {
    f.f32.resize(static_cast<std::size_t>(count));
    r.read_bytes(f.f32.data(), static_cast<std::size_t>(count) * sizeof(float), "f32 payload");
  }
  r.expect_end();
  return f;
}

void write_svox(const std::string& path, const SvoxFile& file) {
  file.spec.validate();
  const std::int64_t count = file.spec.num_voxels() * file.channels;
  ByteWriter w(path);
  w.write_bytes("SVOX", 4);
  w.write<std::uint32_t>(kSvoxVersion);
  w.write<std::uint32_t>(static_cast<std::uint32_t>(file.spec.dims.x));
  w.write<std::uint32_t>(static_cast<std::uint32_t>(file.spec.dims.y));
  w.write<std::uint32_t>(static_cast<std::uint32_t>(file.spec.dims.z));
  w.write<double>(file.spec.voxel_size);
  w.write<double>(file.spec.origin.x);
  w.write<double>(file.spec.origin.y);
  w.write<double>(file.spec.origin.z);
  w.write<std::uint8_t>(static_cast<std::uint8_t>(file.dtype));
  if (file.dtype == SvoxDtype::F32Vector)
    w.write<std::uint32_t>(static_cast<std::uint32_t>(file.channels));
  if (file.dtype == SvoxDtype::U8) {
    if (static_cast<std::int64_t>(file.u8.size()) != count)
      throw ValidationError(path + ": u8 payload size mismatch");
    w.write_bytes(file.u8.data(), file.u8.size());
  } else {
    if (static_cast<std::int64_t>(file.f32.size()) != count)
      throw ValidationError(path + ": f32 payload size mismatch");
    w.write_bytes(file.f32.data(), file.f32.size() * sizeof(float));
  }
  w.close();
}

void write_labels(const std::string& path, const SemanticLabelGrid& labels) {
  labels.validate();
  SvoxFile f;
  f.spec = labels.spec;
  f.dtype = SvoxDtype::U8;
  f.u8 = labels.labels;
  write_svox(path, f);
}

SemanticLabelGrid read_labels(const std::string& path, std::int64_t num_classes_hint) {
  const SvoxFile f = read_svox(path);
  if (f.dtype != SvoxDtype::U8)
    throw ValidationError(path + ": expected a u8 label payload (dtype 0)");
  SemanticLabelGrid labels;
  labels.spec = f.spec;
  labels.labels = f.u8;
  std::int64_t max_label = -1;
  for (std::uint8_t l : labels.labels)
    if (l != kIgnoreLabel) max_label = std::max<std::int64_t>(max_label, l);
  labels.num_classes = num_classes_hint > 0 ? num_classes_hint : max_label + 1;
  labels.validate();
  return labels;
}

void write_sketch(const std::string& path, const SketchGrid& sketch) {
  SvoxFile f;
  f.spec = sketch.grid.spec;
  f.dtype = SvoxDtype::U8;
  f.u8 = sketch.grid.values;
  write_svox(path, f);
}

SketchGrid read_sketch(const std::string& path) {
  const SvoxFile f = read_svox(path);
  if (f.dtype != SvoxDtype::U8)
    throw ValidationError(path + ": expected a u8 sketch payload (dtype 0)");
  SketchGrid sketch;
  sketch.grid.spec = f.spec;
  sketch.grid.channels = 1;
  sketch.grid.values = f.u8;
  for (std::uint8_t v : sketch.grid.values)
    if (v > 1) throw ValidationError(path + ": sketch payload must be 0/1");
  return sketch;
}

void write_tsdf(const std::string& path, const TsdfVolume& vol) {
  SvoxFile f;
  f.spec = vol.grid.spec;
  f.dtype = SvoxDtype::F32Scalar;
  f.f32.reserve(vol.grid.values.size());
  for (double v : vol.grid.values) f.f32.push_back(static_cast<float>(v));
  write_svox(path, f);
}

VoxelGrid<double> read_tsdf_values(const std::string& path) {
  const SvoxFile f = read_svox(path);
  if (f.dtype != SvoxDtype::F32Scalar)
    throw ValidationError(path + ": expected an f32 scalar payload (dtype 1)");
  VoxelGrid<double> grid(f.spec);
  for (std::size_t i = 0; i < f.f32.size(); ++i) grid.values[i] = f.f32[i];
  return grid;
}

// ---- DPTH / RGBF -------------------------------------------------------------------

void write_depth(const std::string& path, const DepthMap& depth) {
  ByteWriter w(path);
  w.write_bytes("DPTH", 4);
  w.write<std::uint32_t>(static_cast<std::uint32_t>(depth.width));
  w.write<std::uint32_t>(static_cast<std::uint32_t>(depth.height));
  w.write_bytes(depth.values.data(), depth.values.size() * sizeof(float));
  w.close();
}

DepthMap read_depth(const std::string& path) {
  ByteReader r(path, read_all(path));
  r.expect_magic("DPTH");
  DepthMap d;
  d.width = r.read<std::uint32_t>("width");
  d.height = r.read<std::uint32_t>("height");
  if (d.width < 1 || d.height < 1) throw ValidationError(path + ": non-positive image dims");
  d.values.resize(static_cast<std::size_t>(d.width * d.height));
  r.read_bytes(d.values.data(), d.values.size() * sizeof(float), "depth payload");
  r.expect_end();
  return d;
}

void write_rgb(const std::string& path, const FeatureMap2D& image) {
  ByteWriter w(path);
  w.write_bytes("RGBF", 4);
  w.write<std::uint32_t>(static_cast<std::uint32_t>(image.width));
  w.write<std::uint32_t>(static_cast<std::uint32_t>(image.height));
  w.write<std::uint32_t>(static_cast<std::uint32_t>(image.channels));
  std::vector<float> f(image.values.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(image.values[i]);
  w.write_bytes(f.data(), f.size() * sizeof(float));
  w.close();
}

FeatureMap2D read_rgb(const std::string& path) {
  ByteReader r(path, read_all(path));
  r.expect_magic("RGBF");
  FeatureMap2D img;
  img.width = r.read<std::uint32_t>("width");
  img.height = r.read<std::uint32_t>("height");
  img.channels = r.read<std::uint32_t>("channels");
  if (img.width < 1 || img.height < 1 || img.channels < 1)
    throw ValidationError(path + ": non-positive image dims");
  std::vector<float> f(static_cast<std::size_t>(img.width * img.height * img.channels));
  r.read_bytes(f.data(), f.size() * sizeof(float), "image payload");
  r.expect_end();
  img.values.assign(f.begin(), f.end());
  return img;
}

// ---- camera text ---------------------------------------------------------------------

void write_camera(const std::string& path, const CameraModel& camera) {
  std::ofstream out(path);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << "fx=" << format_double(camera.intrinsics(0, 0)) << "\n";
  out << "fy=" << format_double(camera.intrinsics(1, 1)) << "\n";
  out << "cx=" << format_double(camera.intrinsics(0, 2)) << "\n";
  out << "cy=" << format_double(camera.intrinsics(1, 2)) << "\n";
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c)
      out << "e" << r << c << "=" << format_double(camera.extrinsics(r, c)) << "\n";
  out.close();
  if (!out) throw IoError(path + ": write failed");
}

CameraModel read_camera(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open for reading");
  std::map<std::string, double> kv;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError(path + ":" + std::to_string(line_no) + ": expected key=value");
    const std::string key = line.substr(0, eq);
    try {
      kv[key] = std::stod(line.substr(eq + 1));
    } catch (const std::exception&) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": bad number for '" + key + "'");
    }
  }
  auto need = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ValidationError(path + ": missing camera entry '" + key + "'");
    return it->second;
  };
  CameraModel cam;
  cam.intrinsics = Mat3::identity();
  cam.intrinsics(0, 0) = need("fx");
  cam.intrinsics(1, 1) = need("fy");
  cam.intrinsics(0, 2) = need("cx");
  cam.intrinsics(1, 2) = need("cy");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c)
      cam.extrinsics(r, c) = need("e" + std::to_string(r) + std::to_string(c));
  cam.validate();
  return cam;
}

// ---- SKPT ------------------------------------------------------------------------------

void save_checkpoint(const std::string& path, const nn::ParamRegistry& registry) {
  ByteWriter w(path);
  w.write_bytes("SKPT", 4);
  w.write<std::uint32_t>(1);
  w.write<std::uint32_t>(static_cast<std::uint32_t>(registry.params.size() + registry.buffers.size()));
  auto write_record = [&w](const std::string& name, const std::vector<std::int64_t>& shape,
                           const double* data, std::int64_t n) {
    w.write<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.write_bytes(name.data(), name.size());
    w.write<std::uint32_t>(static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) w.write<std::int64_t>(d);
    w.write_bytes(data, static_cast<std::size_t>(n) * sizeof(double));
  };
  for (const auto& [name, t] : registry.params)
    write_record(name, t.shape(), t.data(), t.numel());
  for (const auto& [name, b] : registry.buffers)
    write_record(name, {static_cast<std::int64_t>(b->size())}, b->data(),
                 static_cast<std::int64_t>(b->size()));
  w.close();
}

void load_checkpoint(const std::string& path, nn::ParamRegistry& registry) {
  ByteReader r(path, read_all(path));
  r.expect_magic("SKPT");
  const auto version = r.read<std::uint32_t>("version");
  if (version != 1)
    throw ValidationError(path + ": unsupported SKPT version " + std::to_string(version));
  const auto count = r.read<std::uint32_t>("record count");
  const std::size_t expected = registry.params.size() + registry.buffers.size();
  if (count != expected)
    throw ValidationError(path + ": checkpoint has " + std::to_string(count) +
                          " records, model expects " + std::to_string(expected));

  auto read_record = [&r, &path](const std::string& want_name,
                                 const std::vector<std::int64_t>& want_shape, double* dst,
                                 std::int64_t n) {
    const auto name_len = r.read<std::uint32_t>("name length");
    std::string name(name_len, '\0');
    r.read_bytes(name.data(), name_len, "record name");
    if (name != want_name)
      throw ValidationError(path + ": record '" + name + "' does not match model parameter '" +
                            want_name + "'");
    const auto ndim = r.read<std::uint32_t>("rank");
    std::vector<std::int64_t> shape(ndim);
    for (auto& d : shape) d = r.read<std::int64_t>("dim");
    if (shape != want_shape)
      throw ValidationError(path + ": shape mismatch for '" + name + "'");
    r.read_bytes(dst, static_cast<std::size_t>(n) * sizeof(double), "record data");
  };
  for (auto& [name, t] : registry.params) read_record(name, t.shape(), t.data(), t.numel());
  for (auto& [name, b] : registry.buffers)
    read_record(name, {static_cast<std::int64_t>(b->size())}, b->data(),
                static_cast<std::int64_t>(b->size()));
  r.expect_end();
}

// ---- manifest -----------------------------------------------------------------------------

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << "# sketch-ssc dataset manifest v1\n";
  out << "count=" << manifest.entries.size() << "\n";
  out << "classes=" << manifest.num_classes << "\n";
  out << "voxel_size=" << format_double(manifest.voxel_size) << "\n";
  out << "truncation=" << format_double(manifest.truncation) << "\n";
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    out << "sample " << i << " seed=" << e.seed << " labels=" << e.labels
        << " sketch=" << e.sketch << " tsdf=" << e.tsdf << " depth=" << e.depth
        << " camera=" << e.camera << " rgb=" << e.rgb << "\n";
  }
  out.close();
  if (!out) throw IoError(path + ": write failed");
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open for reading");
  DatasetManifest m;
  std::int64_t declared_count = -1;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    if (line.rfind("sample ", 0) == 0) {
      std::string word;
      std::int64_t index = 0;
      ss >> word >> index;
      ManifestEntry e;
      std::string field;
      while (ss >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos)
          throw ValidationError(path + ":" + std::to_string(line_no) + ": expected key=value");
        const std::string key = field.substr(0, eq);
        const std::string value = field.substr(eq + 1);
        if (key == "seed") e.seed = std::stoull(value);
        else if (key == "labels") e.labels = value;
        else if (key == "sketch") e.sketch = value;
        else if (key == "tsdf") e.tsdf = value;
        else if (key == "depth") e.depth = value;
        else if (key == "camera") e.camera = value;
        else if (key == "rgb") e.rgb = value;
        else
          throw ValidationError(path + ":" + std::to_string(line_no) + ": unknown field '" + key + "'");
      }
      if (e.labels.empty() || e.sketch.empty() || e.tsdf.empty() || e.depth.empty() ||
          e.camera.empty() || e.rgb.empty())
        throw ValidationError(path + ":" + std::to_string(line_no) + ": incomplete sample record");
      m.entries.push_back(e);
    } else {
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ValidationError(path + ":" + std::to_string(line_no) + ": expected key=value");
      const std::string key = line.substr(0, eq);
      const std::string value = line.substr(eq + 1);
      if (key == "count") declared_count = std::stoll(value);
      else if (key == "classes") m.num_classes = std::stoll(value);
      else if (key == "voxel_size") m.voxel_size = std::stod(value);
      else if (key == "truncation") m.truncation = std::stod(value);
      else
        throw ValidationError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (m.num_classes < 2) throw ValidationError(path + ": manifest missing a valid classes entry");
  if (declared_count >= 0 && declared_count != static_cast<std::int64_t>(m.entries.size()))
    throw ValidationError(path + ": count=" + std::to_string(declared_count) + " but " +
                          std::to_string(m.entries.size()) + " sample records present");
  return m;
}

std::vector<SceneSample> load_dataset(const std::string& manifest_path) {
  const DatasetManifest manifest = read_manifest(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  std::vector<SceneSample> samples;
  samples.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    SceneSample s;
    s.seed = e.seed;
    s.labels = read_labels((base / e.labels).string(), manifest.num_classes);
    s.sketch = read_sketch((base / e.sketch).string());
    s.depth = read_depth((base / e.depth).string());
    s.camera = read_camera((base / e.camera).string());
    s.rgb = read_rgb((base / e.rgb).string());
    s.tsdf.grid = read_tsdf_values((base / e.tsdf).string());
    s.tsdf.truncation = manifest.truncation;
    s.tsdf.masks = compute_visibility_masks(s.depth, s.camera, s.labels.spec);
    if (!(s.tsdf.grid.spec.dims == s.labels.spec.dims))
      throw ValidationError(manifest_path + ": tsdf and label grids disagree for seed " +
                            std::to_string(e.seed));
    samples.push_back(std::move(s));
  }
  return samples;
}

// ---- reports --------------------------------------------------------------------------------

std::string report_to_json(const EvalReport& report) {
  json j;
  j["sc_precision"] = report.sc_precision;
  j["sc_recall"] = report.sc_recall;
  j["sc_iou"] = report.sc_iou;
  for (const auto& [cls, iou] : report.ssc_iou) j["ssc_iou." + std::to_string(cls)] = iou;
  j["ssc_miou"] = report.ssc_miou;
  return j.dump(2) + "\n";
}

void write_report(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << report_to_json(report);
  out.close();
  if (!out) throw IoError(path + ": write failed");
}

EvalReport read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open for reading");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  EvalReport r;
  r.sc_precision = j.at("sc_precision").get<double>();
  r.sc_recall = j.at("sc_recall").get<double>();
  r.sc_iou = j.at("sc_iou").get<double>();
  r.ssc_miou = j.at("ssc_miou").get<double>();
  for (const auto& [key, value] : j.items()) {
    if (key.rfind("ssc_iou.", 0) == 0)
      r.ssc_iou[std::stoi(key.substr(8))] = value.get<double>();
  }
  return r;
}

std::string epoch_record_to_json(const EpochRecord& record) {
  json j;
  j["epoch"] = record.epoch;
  j["lr"] = record.lr;
  j["loss_total"] = record.mean_loss.total;
  j["loss_semantic"] = record.mean_loss.semantic;
  j["loss_sketch"] = record.mean_loss.sketch;
  j["loss_cvae"] = record.mean_loss.cvae;
  j["loss_gsnn"] = record.mean_loss.gsnn;
  j["loss_hybrid"] = record.mean_loss.hybrid;
  json val;
  val["sc_precision"] = record.val.sc_precision;
  val["sc_recall"] = record.val.sc_recall;
  val["sc_iou"] = record.val.sc_iou;
  for (const auto& [cls, iou] : record.val.ssc_iou) val["ssc_iou." + std::to_string(cls)] = iou;
  val["ssc_miou"] = record.val.ssc_miou;
  j["val"] = val;
  return j.dump();
}

// ---- config ----------------------------------------------------------------------------------

namespace {

TrunkConfig trunk_from_json(const json& j, const std::string& where) {
  TrunkConfig cfg;
  if (j.contains("convs")) {
    cfg.convs.clear();
    for (const auto& e : j.at("convs"))
      cfg.convs.push_back({e.at(0).get<std::int64_t>(), e.at(1).get<std::int64_t>()});
  }
  if (j.contains("ddr")) {
    cfg.ddr.clear();
    for (const auto& e : j.at("ddr"))
      cfg.ddr.push_back({e.at(0).get<std::int64_t>(), e.at(1).get<std::int64_t>()});
  }
  if (j.contains("deconvs")) {
    cfg.deconvs.clear();
    for (const auto& e : j.at("deconvs"))
      cfg.deconvs.push_back({e.at(0).get<std::int64_t>(), e.at(1).get<std::int64_t>()});
  }
  if (j.contains("skip")) {
    const auto& s = j.at("skip");
    if (!s.is_array() || s.size() != 2)
      throw ValidationError(where + ": skip must be [from_conv, to_deconv]");
    cfg.skip_from = s.at(0).get<std::int64_t>();
    cfg.skip_to = s.at(1).get<std::int64_t>();
  }
  return cfg;
}

json trunk_to_json(const TrunkConfig& cfg) {
  json j;
  j["convs"] = json::array();
  for (const auto& e : cfg.convs) j["convs"].push_back({e.kernel, e.dilation});
  j["ddr"] = json::array();
  for (const auto& e : cfg.ddr) j["ddr"].push_back({e.dilation, e.downsample});
  j["deconvs"] = json::array();
  for (const auto& e : cfg.deconvs) j["deconvs"].push_back({e.kernel, e.rate});
  j["skip"] = {cfg.skip_from, cfg.skip_to};
  return j;
}

}  // namespace

RunConfig parse_config_json(const std::string& text, const std::string& source_name) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(source_name + ": " + e.what());
  }
  RunConfig cfg;
  if (j.contains("model")) {
    const auto& m = j.at("model");
    if (m.contains("variant")) cfg.model.variant = variant_from_string(m.at("variant").get<std::string>());
    if (m.contains("num_classes")) cfg.model.num_classes = m.at("num_classes").get<std::int64_t>();
    if (m.contains("feature_channels"))
      cfg.model.feature_channels = m.at("feature_channels").get<std::int64_t>();
    if (m.contains("stage1")) cfg.model.stage1 = trunk_from_json(m.at("stage1"), source_name);
    if (m.contains("stage2")) cfg.model.stage2 = trunk_from_json(m.at("stage2"), source_name);
    if (m.contains("encoder2d")) {
      const auto& e = m.at("encoder2d");
      if (e.contains("hidden")) {
        cfg.model.encoder2d.hidden.clear();
        for (const auto& h : e.at("hidden"))
          cfg.model.encoder2d.hidden.push_back(h.get<std::int64_t>());
      }
      if (e.contains("kernel")) cfg.model.encoder2d.kernel = e.at("kernel").get<std::int64_t>();
      if (e.contains("trainable")) cfg.model.encoder2d.trainable = e.at("trainable").get<bool>();
    }
    if (m.contains("hallucination")) {
      const auto& h = m.at("hallucination");
      auto& hc = cfg.model.hallucination;
      if (h.contains("latent_dim")) hc.latent_dim = h.at("latent_dim").get<std::int64_t>();
      if (h.contains("samples")) hc.num_samples = h.at("samples").get<std::int64_t>();
      if (h.contains("lambda_kl")) hc.lambda_kl = h.at("lambda_kl").get<double>();
      if (h.contains("lambda_recon")) hc.lambda_recon = h.at("lambda_recon").get<double>();
      if (h.contains("alpha")) hc.alpha = h.at("alpha").get<double>();
      if (h.contains("threshold")) hc.threshold = h.at("threshold").get<double>();
      if (h.contains("hidden_channels"))
        hc.hidden_channels = h.at("hidden_channels").get<std::int64_t>();
    }
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    if (t.contains("batch_size")) cfg.train.batch_size = t.at("batch_size").get<std::int64_t>();
    if (t.contains("momentum")) cfg.train.momentum = t.at("momentum").get<double>();
    if (t.contains("weight_decay")) cfg.train.weight_decay = t.at("weight_decay").get<double>();
    if (t.contains("base_lr")) cfg.train.base_lr = t.at("base_lr").get<double>();
    if (t.contains("epochs")) cfg.train.epochs = t.at("epochs").get<std::int64_t>();
    if (t.contains("seed")) cfg.train.seed = t.at("seed").get<std::uint64_t>();
    if (t.contains("mode")) cfg.train.mode = t.at("mode").get<std::string>();
  }
  cfg.model.validate();
  cfg.train.validate();
  return cfg;
}

RunConfig read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open for reading");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_json(ss.str(), path);
}

std::string config_to_json(const RunConfig& config) {
  json j;
  json m;
  m["variant"] = to_string(config.model.variant);
  m["num_classes"] = config.model.num_classes;
  m["feature_channels"] = config.model.feature_channels;
  m["stage1"] = trunk_to_json(config.model.stage1);
  m["stage2"] = trunk_to_json(config.model.stage2);
  m["encoder2d"] = {{"hidden", config.model.encoder2d.hidden},
                    {"kernel", config.model.encoder2d.kernel},
                    {"trainable", config.model.encoder2d.trainable}};
  m["hallucination"] = {{"latent_dim", config.model.hallucination.latent_dim},
                        {"samples", config.model.hallucination.num_samples},
                        {"lambda_kl", config.model.hallucination.lambda_kl},
                        {"lambda_recon", config.model.hallucination.lambda_recon},
                        {"alpha", config.model.hallucination.alpha},
                        {"threshold", config.model.hallucination.threshold},
                        {"hidden_channels", config.model.hallucination.hidden_channels}};
  j["model"] = m;
  j["train"] = {{"batch_size", config.train.batch_size}, {"momentum", config.train.momentum},
                {"weight_decay", config.train.weight_decay}, {"base_lr", config.train.base_lr},
                {"epochs", config.train.epochs},           {"seed", config.train.seed},
                {"mode", config.train.mode}};
  return j.dump(2) + "\n";
}

}  // namespace ssc::io
