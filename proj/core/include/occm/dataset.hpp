#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "occm/geometry.hpp"
#include "occm/image_io.hpp"
#include "occm/mesh.hpp"
#include "occm/render.hpp"

namespace occm {

// The five fixed questions, in instruction-id order 1..5.
const std::array<std::string, 5>& instruction_set();

extern const std::array<const char*, 6> kCategories;  // ball, rod, plate, box, can, bowl
int category_index(const std::string& name);

struct AttributeSet {
  bool round = false;
  bool is_long = false;
  bool thin = false;
  std::string category;
  int template_id = 0;
};

// Attribute rules over shape kind and extents.
AttributeSet derive_attributes(const AnalyticShape& shape, const std::string& category,
                               int template_id);
std::string describe_object(const AttributeSet& attrs);

struct QaPair {
  int instruction_id = 0;  // 1..5
  std::string question;
  std::string answer;
};

struct DatasetRecord {
  std::int64_t id = 0;
  std::string image_path;
  std::string reconstructed_image_path;
  double occlusion_ratio = 0.0;
  std::string category;
  AttributeSet attributes;
  std::vector<QaPair> qa;  // exactly 5
};

struct SceneSpec {
  std::int64_t id = 0;
  std::string category;
  AnalyticShape object;
  std::vector<AnalyticShape> occluder_parts;  // hand stand-in: palm box + finger cylinder
  Camera camera;
  std::uint64_t seed = 0;
};

struct GenConfig {
  double occlusion_target = 0.25;
  int image_size = 224;
  int grid_res = 33;
};

// Deterministic in seed. The occluder's screen-space offset is bisected until
// the realized occlusion ratio lands within target +- 0.1; resamples with a
// derived sub-seed on failure (error after 8 attempts).
SceneSpec generate_scene(std::uint64_t seed, const GenConfig& config);

struct SceneRender {
  RasterImage occluded;       // object + occluder, depth composited
  RasterImage reconstructed;  // object only
  BinaryMask full_mask;
  BinaryMask visible_mask;
  double occlusion_ratio = 0.0;
};

SceneRender render_scene(const SceneSpec& scene, const GenConfig& config);

// Renders images/masks into out_dir (images/, recon/, masks/) and assembles
// the record with its five QA pairs.
DatasetRecord render_record(const SceneSpec& scene, const std::string& out_dir,
                            const GenConfig& config);

void write_records(const std::vector<DatasetRecord>& records, const std::string& path);
std::vector<DatasetRecord> read_records(const std::string& path);

void write_scenes(const std::vector<SceneSpec>& scenes, const std::string& path);
std::vector<SceneSpec> read_scenes(const std::string& path);

enum class Split { train, val, test };
// 80/10/10 deterministic split by record id.
Split split_of(std::int64_t id);

}  // namespace occm
