#include "occm/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace occm {

using nlohmann::json;

namespace {
constexpr double kTwoPi = 6.28318530717958647692;
}

const std::array<std::string, 5>& instruction_set() {
  static const std::array<std::string, 5> kInstructions{
      "What's the object in the hand?",
      "Is the object in the hand round?",
      "Is the object in the hand long?",
      "Is the object in the hand thin?",
      "Describe the object in the hand",
  };
  return kInstructions;
}

const std::array<const char*, 6> kCategories{"ball", "rod", "plate", "box", "can", "bowl"};

int category_index(const std::string& name) {
  for (std::size_t i = 0; i < kCategories.size(); ++i)
    if (name == kCategories[i]) return static_cast<int>(i);
  throw InvalidInputError("unknown category: " + name);
}

AttributeSet derive_attributes(const AnalyticShape& shape, const std::string& category,
                               int template_id) {
  const std::array<double, 3> ext = shape_extents(shape);
  const double max_ext = std::max({ext[0], ext[1], ext[2]});
  const double min_ext = std::min({ext[0], ext[1], ext[2]});

  AttributeSet a;
  a.category = category;
  a.template_id = template_id;
  if (shape.kind == ShapeKind::sphere) {
    a.round = true;
  } else if (shape.kind == ShapeKind::cylinder && (category == "can" || category == "bowl")) {
    const double height_over_diameter = shape.params[1] / shape.params[0];
    a.round = height_over_diameter < 1.2;
  }
  a.is_long = max_ext / min_ext >= 3.0;
  a.thin = min_ext <= 0.15 * max_ext;
  return a;
}

std::string describe_object(const AttributeSet& attrs) {
  std::string adj;
  if (attrs.round) adj += "round ";
  if (attrs.is_long) adj += "long ";
  if (attrs.thin) adj += "thin ";
  if (adj.empty()) adj = "small ";
  const std::string noun = adj + attrs.category;
  switch (attrs.template_id % 3) {
    case 0: return "a " + noun + " held in the hand";
    case 1: return "the hand is holding a " + noun;
    default: return "there is a " + noun + " in the hand";
  }
}

namespace {

AnalyticShape sample_object(int cat, Rng& rng) {
  AnalyticShape s;
  switch (cat) {
    case 0:  // ball
      s.kind = ShapeKind::sphere;
      s.params = {rng.uniform(0.2, 0.34), 0.0, 0.0};
      break;
    case 1:  // rod
      s.kind = ShapeKind::cylinder;
      s.params = {rng.uniform(0.04, 0.06), rng.uniform(0.32, 0.46), 0.0};
      break;
    case 2:  // plate
      s.kind = ShapeKind::cylinder;
      s.params = {rng.uniform(0.3, 0.38), rng.uniform(0.025, 0.04), 0.0};
      break;
    case 3:  // box
      s.kind = ShapeKind::box;
      s.params = {rng.uniform(0.13, 0.3), rng.uniform(0.13, 0.3), rng.uniform(0.13, 0.3)};
      break;
    case 4:  // can
      s.kind = ShapeKind::cylinder;
      s.params = {rng.uniform(0.09, 0.14), rng.uniform(0.19, 0.28), 0.0};
      break;
    default:  // bowl
      s.kind = ShapeKind::cylinder;
      s.params = {rng.uniform(0.22, 0.29), rng.uniform(0.1, 0.15), 0.0};
      break;
  }
  // Tilt the local axis toward the camera, then spin in the image plane, so
  // flat shapes show their faces rather than only their edges. Flat cylinders
  // keep a lower tilt ceiling: near face-on they collapse into circles and
  // become indistinguishable from balls.
  const double tilt_hi = (cat == 2 || cat == 5) ? 0.7 : cat == 4 ? 0.8 : 0.95;
  const double tilt = rng.uniform(0.35, tilt_hi);
  const double spin = rng.uniform(0.0, kTwoPi);
  s.rotation = Mat3::rotation_z(spin).mul(Mat3::rotation_x(tilt));
  s.translation = {rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15), rng.uniform(-0.1, 0.1)};
  return s;
}

double bounding_radius(const AnalyticShape& s) {
  const auto ext = shape_extents(s);
  return 0.5 * std::max({ext[0], ext[1], ext[2]});
}

std::vector<AnalyticShape> sample_occluder(const AnalyticShape& object, Rng& rng) {
  const double rb = bounding_radius(object);
  const double palm_x = std::min(0.3, 0.9 * rb + 0.08);
  const double palm_y = std::min(0.25, 0.7 * rb + 0.07);
  const double palm_z = 0.045;
  const double finger_r = std::clamp(0.25 * rb + 0.02, 0.03, 0.08);

  const double obj_top = object.translation.z + rb;
  const double occ_z = std::min(0.85, std::max(0.45, obj_top + palm_z + 0.05));
  const double jx = rng.uniform(-0.04, 0.04);
  const double jy = rng.uniform(-0.04, 0.04);
  const Point3 palm_center{object.translation.x + jx, object.translation.y + jy, occ_z};
  const double spin = rng.uniform(-0.4, 0.4);

  AnalyticShape palm;
  palm.kind = ShapeKind::box;
  palm.params = {palm_x, palm_y, palm_z};
  palm.rotation = Mat3::rotation_z(spin);
  palm.translation = palm_center;

  AnalyticShape finger;
  finger.kind = ShapeKind::cylinder;
  finger.params = {finger_r, palm_x, 0.0};
  // local y axis laid along the palm's x direction
  finger.rotation = Mat3::rotation_z(spin).mul(Mat3::rotation_z(kTwoPi / 4.0));
  finger.translation =
      palm_center + Mat3::rotation_z(spin).apply({0.0, palm_y + finger_r, 0.0});
  return {palm, finger};
}

Mesh mesh_shape(const AnalyticShape& shape, int grid_res) {
  return marching_cubes(
      sample_grid([&](const Point3& p) { return analytic_sdf(shape, p); }, grid_res));
}

// Occluder parts meshed in a frame centered on the first part so the lattice
// always covers them; the mesh is then moved back to world space.
Mesh mesh_occluder(const std::vector<AnalyticShape>& parts, int grid_res) {
  const Point3 center = parts.front().translation;
  std::vector<AnalyticShape> local = parts;
  for (AnalyticShape& p : local) p.translation = p.translation - center;
  Mesh m = marching_cubes(
      sample_grid([&](const Point3& p) { return union_sdf(local, p); }, grid_res));
  m.translate(center);
  return m;
}

double measure_ratio(const Mesh& object_mesh, const Mesh& occluder_mesh, const Camera& cam,
                     BinaryMask* full_out = nullptr, BinaryMask* visible_out = nullptr,
                     DepthBuffer* scene_out = nullptr) {
  BinaryMask full = render_mask(object_mesh, cam);
  DepthBuffer scene(cam.width, cam.height);
  rasterize_mesh(occluder_mesh, cam, 1, scene);
  rasterize_mesh(object_mesh, cam, 0, scene);
  BinaryMask visible(cam.width, cam.height);
  for (std::size_t i = 0; i < scene.owner.size(); ++i)
    visible.bits[i] = scene.owner[i] == 0 ? 1 : 0;
  const double ratio = occlusion_ratio(full, visible);
  if (full_out) *full_out = std::move(full);
  if (visible_out) *visible_out = std::move(visible);
  if (scene_out) *scene_out = std::move(scene);
  return ratio;
}

}  // namespace

SceneSpec generate_scene(std::uint64_t seed, const GenConfig& config) {
  if (!(config.occlusion_target > 0.0 && config.occlusion_target < 1.0))
    throw ConfigError("generate_scene: occlusion_target must lie in (0,1)");

  const Rng base(seed);
  for (int attempt = 0; attempt < 8; ++attempt) {
    Rng rng = base.fork(attempt);
    const int cat = static_cast<int>(rng.below(kCategories.size()));
    const AnalyticShape object = sample_object(cat, rng);
    std::vector<AnalyticShape> occluder = sample_occluder(object, rng);
    const double dir_angle = rng.uniform(0.0, kTwoPi);
    const Point3 dir{std::cos(dir_angle), std::sin(dir_angle), 0.0};

    Camera cam;
    cam.width = cam.height = config.image_size;

    const Mesh object_mesh = mesh_shape(object, config.grid_res);
    if (object_mesh.empty()) continue;
    const Mesh occluder_mesh = mesh_occluder(occluder, config.grid_res);
    if (occluder_mesh.empty()) continue;

    auto ratio_at = [&](double s) {
      Mesh shifted = occluder_mesh;
      shifted.translate(dir * s);
      return measure_ratio(object_mesh, shifted, cam);
    };

    const double tol = 0.09;
    const double target = config.occlusion_target;
    double lo = 0.0, hi = 1.5;
    double r_lo = ratio_at(lo);
    double accepted = -1.0;
    if (std::fabs(r_lo - target) <= tol) {
      accepted = lo;
    } else if (r_lo > target) {
      for (int it = 0; it < 32; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double r = ratio_at(mid);
        if (std::fabs(r - target) <= tol) {
          accepted = mid;
          break;
        }
        if (r > target)
          lo = mid;
        else
          hi = mid;
      }
    }
    if (accepted < 0.0) continue;

    SceneSpec scene;
    scene.id = 0;
    scene.category = kCategories[cat];
    scene.object = object;
    for (AnalyticShape& part : occluder) part.translation = part.translation + dir * accepted;
    scene.occluder_parts = std::move(occluder);
    scene.camera = cam;
    scene.seed = seed;
    return scene;
  }
  throw Error("generate_scene: no acceptable occluder pose after 8 attempts (seed " +
              std::to_string(seed) + ")");
}

SceneRender render_scene(const SceneSpec& scene, const GenConfig& config) {
  Camera cam = scene.camera;
  cam.width = cam.height = config.image_size;

  const Mesh object_mesh = mesh_shape(scene.object, config.grid_res);
  const Mesh occluder_mesh = mesh_occluder(scene.occluder_parts, config.grid_res);

  SceneRender out;
  DepthBuffer scene_buf(cam.width, cam.height);
  out.occlusion_ratio = measure_ratio(object_mesh, occluder_mesh, cam, &out.full_mask,
                                      &out.visible_mask, &scene_buf);

  out.occluded = RasterImage(cam.width, cam.height);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * cam.width + x;
      if (scene_buf.owner[i] < 0) continue;
      const double shade = depth_shade(cam, scene_buf.depth[i]) / 255.0;
      std::uint8_t* px = out.occluded.at(x, y);
      if (scene_buf.owner[i] == 0) {
        const auto v = static_cast<std::uint8_t>(std::lround(shade * 235.0));
        px[0] = px[1] = px[2] = v;
      } else {
        px[0] = static_cast<std::uint8_t>(std::lround(shade * 205.0));
        px[1] = static_cast<std::uint8_t>(std::lround(shade * 170.0));
        px[2] = static_cast<std::uint8_t>(std::lround(shade * 125.0));
      }
    }
  out.reconstructed = project_mesh(object_mesh, cam, Shading::depth);
  return out;
}

DatasetRecord render_record(const SceneSpec& scene, const std::string& out_dir,
                            const GenConfig& config) {
  namespace fs = std::filesystem;
  std::error_code ec;
  for (const char* sub : {"images", "recon", "masks"}) {
    fs::create_directories(fs::path(out_dir) / sub, ec);
    if (ec) throw IoError("cannot create " + (fs::path(out_dir) / sub).string() + ": " +
                          ec.message());
  }

  const SceneRender rendered = render_scene(scene, config);
  const std::string stem = std::to_string(scene.id);

  DatasetRecord rec;
  rec.id = scene.id;
  rec.image_path = "images/" + stem + ".ppm";
  rec.reconstructed_image_path = "recon/" + stem + ".ppm";
  rec.occlusion_ratio = rendered.occlusion_ratio;
  rec.category = scene.category;

  Rng rng = Rng(scene.seed).fork(0x7e3);
  rec.attributes =
      derive_attributes(scene.object, scene.category, static_cast<int>(rng.below(3)));

  write_ppm(rendered.occluded, (fs::path(out_dir) / rec.image_path).string());
  write_ppm(rendered.reconstructed, (fs::path(out_dir) / rec.reconstructed_image_path).string());
  write_pgm(rendered.full_mask, (fs::path(out_dir) / "masks" / (stem + "_full.pgm")).string());
  write_pgm(rendered.visible_mask,
            (fs::path(out_dir) / "masks" / (stem + "_visible.pgm")).string());

  const auto& questions = instruction_set();
  const AttributeSet& a = rec.attributes;
  const std::array<std::string, 5> answers{
      a.category,
      a.round ? "yes" : "no",
      a.is_long ? "yes" : "no",
      a.thin ? "yes" : "no",
      describe_object(a),
  };
  for (int i = 0; i < 5; ++i) rec.qa.push_back({i + 1, questions[i], answers[i]});
  return rec;
}

namespace {

json attributes_to_json(const AttributeSet& a) {
  return json{{"round", a.round},
              {"long", a.is_long},
              {"thin", a.thin},
              {"category", a.category},
              {"template_id", a.template_id}};
}

AttributeSet attributes_from_json(const json& j) {
  AttributeSet a;
  a.round = j.at("round").get<bool>();
  a.is_long = j.at("long").get<bool>();
  a.thin = j.at("thin").get<bool>();
  a.category = j.at("category").get<std::string>();
  a.template_id = j.at("template_id").get<int>();
  return a;
}

void validate_record(const DatasetRecord& rec) {
  if (rec.qa.size() != 5) throw InvalidInputError("record must carry exactly 5 QA pairs");
  const auto& questions = instruction_set();
  for (int i = 0; i < 5; ++i) {
    if (rec.qa[i].instruction_id != i + 1)
      throw InvalidInputError("QA instruction ids must be 1..5 in order");
    if (rec.qa[i].question != questions[i])
      throw InvalidInputError("QA question differs from the fixed instruction set");
  }
  if (!(rec.occlusion_ratio >= 0.0 && rec.occlusion_ratio <= 1.0))
    throw InvalidInputError("occlusion_ratio outside [0,1]");
}

}  // namespace

void write_records(const std::vector<DatasetRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const DatasetRecord& rec : records) {
    validate_record(rec);
    json q = json::array();
    for (const QaPair& qa : rec.qa)
      q.push_back(json{{"instruction_id", qa.instruction_id},
                       {"question", qa.question},
                       {"answer", qa.answer}});
    const json j{{"id", rec.id},
                 {"image_path", rec.image_path},
                 {"reconstructed_image_path", rec.reconstructed_image_path},
                 {"occlusion_ratio", rec.occlusion_ratio},
                 {"category", rec.category},
                 {"attributes", attributes_to_json(rec.attributes)},
                 {"qa", q}};
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<DatasetRecord> read_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::vector<DatasetRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
    }
    try {
      DatasetRecord rec;
      rec.id = j.at("id").get<std::int64_t>();
      rec.image_path = j.at("image_path").get<std::string>();
      rec.reconstructed_image_path = j.at("reconstructed_image_path").get<std::string>();
      rec.occlusion_ratio = j.at("occlusion_ratio").get<double>();
      rec.category = j.at("category").get<std::string>();
      rec.attributes = attributes_from_json(j.at("attributes"));
      for (const json& qj : j.at("qa"))
        rec.qa.push_back({qj.at("instruction_id").get<int>(),
                          qj.at("question").get<std::string>(),
                          qj.at("answer").get<std::string>()});
      validate_record(rec);
      records.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": invalid record: " + e.what());
    } catch (const InvalidInputError& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

namespace {

json shape_to_json(const AnalyticShape& s) {
  const char* kind = s.kind == ShapeKind::sphere ? "sphere"
                     : s.kind == ShapeKind::box  ? "box"
                                                 : "cylinder";
  return json{{"kind", kind},
              {"params", s.params},
              {"rotation", s.rotation.m},
              {"translation", {s.translation.x, s.translation.y, s.translation.z}}};
}

AnalyticShape shape_from_json(const json& j) {
  AnalyticShape s;
  const std::string kind = j.at("kind").get<std::string>();
  s.kind = kind == "sphere" ? ShapeKind::sphere
           : kind == "box"  ? ShapeKind::box
                            : ShapeKind::cylinder;
  s.params = j.at("params").get<std::array<double, 3>>();
  s.rotation.m = j.at("rotation").get<std::array<double, 9>>();
  const auto t = j.at("translation").get<std::array<double, 3>>();
  s.translation = {t[0], t[1], t[2]};
  return s;
}

}  // namespace

void write_scenes(const std::vector<SceneSpec>& scenes, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const SceneSpec& s : scenes) {
    json parts = json::array();
    for (const AnalyticShape& p : s.occluder_parts) parts.push_back(shape_to_json(p));
    const json j{{"id", s.id},
                 {"category", s.category},
                 {"object", shape_to_json(s.object)},
                 {"occluder_parts", parts},
                 {"camera",
                  {{"eye", {s.camera.eye.x, s.camera.eye.y, s.camera.eye.z}},
                   {"fov_deg", s.camera.fov_deg},
                   {"width", s.camera.width},
                   {"height", s.camera.height}}},
                 {"seed", s.seed}};
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<SceneSpec> read_scenes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::vector<SceneSpec> scenes;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      SceneSpec s;
      s.id = j.at("id").get<std::int64_t>();
      s.category = j.at("category").get<std::string>();
      s.object = shape_from_json(j.at("object"));
      for (const json& pj : j.at("occluder_parts")) s.occluder_parts.push_back(shape_from_json(pj));
      const auto eye = j.at("camera").at("eye").get<std::array<double, 3>>();
      s.camera.eye = {eye[0], eye[1], eye[2]};
      s.camera.fov_deg = j.at("camera").at("fov_deg").get<double>();
      s.camera.width = j.at("camera").at("width").get<int>();
      s.camera.height = j.at("camera").at("height").get<int>();
      s.seed = j.at("seed").get<std::uint64_t>();
      scenes.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": invalid scene: " + e.what());
    }
  }
  return scenes;
}

Split split_of(std::int64_t id) {
  const int r = static_cast<int>(((id % 10) + 10) % 10);
  if (r < 8) return Split::train;
  if (r == 8) return Split::val;
  return Split::test;
}

}  // namespace occm
