#include "occm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "json.hpp"
#include "occm/mesh.hpp"

namespace occm {

namespace fs = std::filesystem;
using nlohmann::json;

GenDataResult run_gen_data(const GenDataOptions& opt) {
  if (opt.out_dir.empty()) throw ConfigError("gen-data: output directory required");
  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  if (ec) throw IoError("cannot create " + opt.out_dir + ": " + ec.message());

  GenConfig cfg;
  cfg.occlusion_target = opt.occlusion_target;
  cfg.image_size = opt.image_size;
  cfg.grid_res = opt.grid_res;

  const Rng base(opt.seed);
  std::vector<SceneSpec> scenes;
  std::vector<DatasetRecord> records;
  double ratio_sum = 0.0;
  for (std::size_t i = 0; i < opt.count; ++i) {
    SceneSpec scene = generate_scene(base.fork(i).seed(), cfg);
    scene.id = static_cast<std::int64_t>(i);
    DatasetRecord rec = render_record(scene, opt.out_dir, cfg);
    ratio_sum += rec.occlusion_ratio;
    scenes.push_back(std::move(scene));
    records.push_back(std::move(rec));
  }
  write_records(records, (fs::path(opt.out_dir) / "records.jsonl").string());
  write_scenes(scenes, (fs::path(opt.out_dir) / "scenes.jsonl").string());

  GenDataResult res;
  res.count = opt.count;
  res.mean_occlusion = opt.count == 0 ? 0.0 : ratio_sum / opt.count;
  return res;
}

// ---------------------------------------------------------------------------

ModelBundle::ModelBundle(const BundleConfig& c, std::uint64_t init_seed) : cfg(c) {
  Rng rng(init_seed);
  subject = SdfDecoder(SdfRole::subject, cfg.posenc_bands, cfg.latent_dim, cfg.sdf_hidden,
                       cfg.sdf_hidden_layers, rng);
  object = SdfDecoder(SdfRole::object, cfg.posenc_bands, cfg.latent_dim, cfg.sdf_hidden,
                      cfg.sdf_hidden_layers, rng);
  encoder = PatchEncoder(cfg.encoder, rng);
  std::vector<std::string> cats(kCategories.begin(), kCategories.end());
  head = CategoryHead(cfg.encoder.dim, std::move(cats), rng);
  lm = LmParams(cfg.lm, rng);
}

bool ModelBundle::has_stage(const std::string& s) const {
  return std::find(stages.begin(), stages.end(), s) != stages.end();
}

namespace {

std::vector<Tensor*> bundle_tensors(ModelBundle& b) {
  std::vector<Tensor*> out;
  for (Tensor* t : b.subject.params()) out.push_back(t);
  for (Tensor* t : b.object.params()) out.push_back(t);
  for (Tensor& t : b.latents.subject) out.push_back(&t);
  for (Tensor& t : b.latents.object) out.push_back(&t);
  for (Tensor* t : b.encoder.params()) out.push_back(t);
  for (Tensor* t : b.head.params()) out.push_back(t);
  for (Tensor* t : b.lm.params()) out.push_back(t);
  return out;
}

}  // namespace

void save_bundle(ModelBundle& bundle, const std::string& path) {
  Checkpoint ckpt;
  json meta;
  meta["stages"] = bundle.stages;
  meta["scene_ids"] = bundle.scene_ids;
  meta["latent_count"] = bundle.latents.object.size();
  meta["config"] = {
      {"latent_dim", bundle.cfg.latent_dim},
      {"sdf_hidden", bundle.cfg.sdf_hidden},
      {"sdf_hidden_layers", bundle.cfg.sdf_hidden_layers},
      {"posenc_bands", bundle.cfg.posenc_bands},
      {"encoder",
       {{"image_side", bundle.cfg.encoder.image_side},
        {"patch", bundle.cfg.encoder.patch},
        {"dim", bundle.cfg.encoder.dim},
        {"heads", bundle.cfg.encoder.heads},
        {"attention", bundle.cfg.encoder.attention}}},
      {"lm",
       {{"dim", bundle.cfg.lm.dim},
        {"heads", bundle.cfg.lm.heads},
        {"num_blocks", bundle.cfg.lm.num_blocks},
        {"t_max", bundle.cfg.lm.t_max},
        {"visual_dim", bundle.cfg.lm.visual_dim}}},
  };
  ckpt.meta_json = meta.dump();
  for (Tensor* t : bundle_tensors(bundle)) ckpt.put(t->name, *t);
  if (!bundle.mean_object_latent.empty())
    ckpt.put("latent.object.mean", {bundle.mean_object_latent.size()},
             bundle.mean_object_latent);
  save_checkpoint(ckpt, path);
}

ModelBundle load_bundle(const std::string& path, const std::string& require_stage) {
  const Checkpoint ckpt = load_checkpoint(path);
  json meta;
  try {
    meta = json::parse(ckpt.meta_json);
  } catch (const json::exception& e) {
    throw IoError("checkpoint metadata is not valid JSON: " + std::string(e.what()));
  }

  BundleConfig cfg;
  const json& c = meta.at("config");
  cfg.latent_dim = c.at("latent_dim").get<int>();
  cfg.sdf_hidden = c.at("sdf_hidden").get<int>();
  cfg.sdf_hidden_layers = c.at("sdf_hidden_layers").get<int>();
  cfg.posenc_bands = c.at("posenc_bands").get<int>();
  cfg.encoder.image_side = c.at("encoder").at("image_side").get<int>();
  cfg.encoder.patch = c.at("encoder").at("patch").get<int>();
  cfg.encoder.dim = c.at("encoder").at("dim").get<int>();
  cfg.encoder.heads = c.at("encoder").at("heads").get<int>();
  cfg.encoder.attention = c.at("encoder").at("attention").get<bool>();
  cfg.lm.dim = c.at("lm").at("dim").get<int>();
  cfg.lm.heads = c.at("lm").at("heads").get<int>();
  cfg.lm.num_blocks = c.at("lm").at("num_blocks").get<int>();
  cfg.lm.t_max = c.at("lm").at("t_max").get<int>();
  cfg.lm.visual_dim = c.at("lm").at("visual_dim").get<int>();

  ModelBundle bundle(cfg, 0);
  bundle.stages = meta.at("stages").get<std::vector<std::string>>();
  bundle.scene_ids = meta.at("scene_ids").get<std::vector<std::int64_t>>();
  bundle.latents = SceneLatents(meta.at("latent_count").get<std::size_t>(), cfg.latent_dim);
  for (Tensor* t : bundle_tensors(bundle)) ckpt.get(t->name, *t);
  if (ckpt.has("latent.object.mean"))
    bundle.mean_object_latent = ckpt.get_values("latent.object.mean");

  if (!require_stage.empty() && !bundle.has_stage(require_stage))
    throw ConfigError("checkpoint " + path + " lacks required training stage '" +
                      require_stage + "'");
  return bundle;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<SceneSpec> train_scenes(const std::string& data_dir, std::size_t max_scenes) {
  std::vector<SceneSpec> all = read_scenes((fs::path(data_dir) / "scenes.jsonl").string());
  std::vector<SceneSpec> out;
  for (SceneSpec& s : all) {
    if (split_of(s.id) != Split::train) continue;
    out.push_back(std::move(s));
    if (max_scenes && out.size() >= max_scenes) break;
  }
  if (out.empty()) throw InvalidInputError("no training scenes in " + data_dir);
  return out;
}

}  // namespace

TrainCurve run_train_sdf1(const Sdf1Options& opt) {
  const std::vector<SceneSpec> scenes = train_scenes(opt.data_dir, opt.max_scenes);

  ModelBundle bundle(opt.bundle, opt.hp.seed);
  bundle.latents = SceneLatents(scenes.size(), opt.bundle.latent_dim);
  for (const SceneSpec& s : scenes) bundle.scene_ids.push_back(s.id);

  TrainCurve curve =
      pretrain_sdf_stage1(bundle.subject, bundle.object, bundle.latents, scenes, opt.hp, opt.cfg);
  bundle.stages = {"sdf1"};
  save_bundle(bundle, opt.ckpt_out);
  if (!opt.curve_csv.empty()) write_loss_curve_csv(curve, opt.curve_csv);
  return curve;
}

RasterImage render_learned_object(const ModelBundle& bundle, const std::vector<double>& latent,
                                  const Camera& camera, int grid_res, Mesh* mesh_out) {
  Tensor lt("latent", {latent.size()});
  lt.value = latent;
  const SdfGrid grid = sample_grid(
      [&](const Point3& p) { return bundle.object.eval(p, lt); }, grid_res);
  Mesh mesh = marching_cubes(grid);
  RasterImage img = project_mesh(mesh, camera, Shading::depth);
  if (mesh_out) *mesh_out = std::move(mesh);
  return img;
}

TrainCurve run_train_sdf2(const Sdf2Options& opt) {
  ModelBundle bundle = load_bundle(opt.ckpt_in, "sdf1");
  const std::vector<DatasetRecord> records =
      read_records((fs::path(opt.data_dir) / "records.jsonl").string());

  std::map<std::int64_t, std::size_t> latent_slot;
  for (std::size_t i = 0; i < bundle.scene_ids.size(); ++i)
    latent_slot[bundle.scene_ids[i]] = i;

  Camera cam;
  cam.width = cam.height = bundle.cfg.encoder.image_side;

  // Training images: the records' reconstructed companions plus, where a
  // stage-1 latent exists, the reconstruction rendered through the learned SDF.
  std::vector<RasterImage> images;
  std::vector<int> labels;
  std::vector<double> mean(bundle.cfg.latent_dim, 0.0);
  std::size_t latent_used = 0, used = 0;
  const int side = bundle.cfg.encoder.image_side;
  for (const DatasetRecord& rec : records) {
    if (split_of(rec.id) != Split::train) continue;
    const int label = category_index(rec.category);
    RasterImage companion =
        read_ppm((fs::path(opt.data_dir) / rec.reconstructed_image_path).string());
    if (companion.width != side || companion.height != side)
      companion = resize_image(companion, side);
    images.push_back(std::move(companion));
    labels.push_back(label);
    const auto it = latent_slot.find(rec.id);
    if (it != latent_slot.end()) {
      const std::vector<double>& lat = bundle.latents.object[it->second].value;
      images.push_back(render_learned_object(bundle, lat, cam, opt.grid_res));
      labels.push_back(label);
      for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += lat[d];
      ++latent_used;
    }
    ++used;
    if (opt.max_records && used >= opt.max_records) break;
  }
  if (images.empty()) throw InvalidInputError("stage 2: no training records");
  if (latent_used == 0)
    throw InvalidInputError("stage 2: no training records overlap the stage-1 scenes");
  for (double& m : mean) m /= static_cast<double>(latent_used);

  // Horizontal/vertical flips are label-preserving for every category; the
  // patch encoder is not translation invariant, so this quadrupling of the
  // training set measurably improves held-out accuracy.
  const auto flipped = [](const RasterImage& im, bool fx, bool fy) {
    RasterImage out(im.width, im.height);
    for (int y = 0; y < im.height; ++y)
      for (int x = 0; x < im.width; ++x) {
        const std::uint8_t* s = im.at(fx ? im.width - 1 - x : x, fy ? im.height - 1 - y : y);
        std::uint8_t* d = out.at(x, y);
        d[0] = s[0]; d[1] = s[1]; d[2] = s[2];
      }
    return out;
  };
  const std::size_t base_count = images.size();
  for (std::size_t i = 0; i < base_count; ++i)
    for (int f = 1; f < 4; ++f) {
      images.push_back(flipped(images[i], f & 1, f & 2));
      labels.push_back(labels[i]);
    }

  TrainCurve curve =
      finetune_sdf_stage2(bundle.encoder, bundle.head, images, labels, opt.hp, opt.steps);
  bundle.mean_object_latent = std::move(mean);
  if (!bundle.has_stage("sdf2")) bundle.stages.push_back("sdf2");
  save_bundle(bundle, opt.ckpt_out);
  if (!opt.curve_csv.empty()) write_loss_curve_csv(curve, opt.curve_csv);
  return curve;
}

// ---------------------------------------------------------------------------

namespace {

RasterImage load_sized(const fs::path& path, int side) {
  RasterImage img = read_ppm(path.string());
  if (img.width == side && img.height == side) return img;
  return resize_image(img, side);
}

VisualTokenSequence fused_tokens_for_record(const ModelBundle& bundle,
                                            const std::string& data_dir,
                                            const DatasetRecord& rec, double alpha) {
  const int side = bundle.cfg.encoder.image_side;
  const RasterImage occ = load_sized(fs::path(data_dir) / rec.image_path, side);
  const RasterImage rcn = load_sized(fs::path(data_dir) / rec.reconstructed_image_path, side);
  const VisualTokenSequence x1 = bundle.encoder.encode(occ, TokenSource::occluded_rgb);
  const VisualTokenSequence x2 = bundle.encoder.encode(rcn, TokenSource::reconstructed);
  return fuse_tokens(x1, x2, alpha);
}

std::vector<int> prompt_for(const std::string& question) {
  std::vector<int> p = tokenize(question);
  p.push_back('\n');
  return p;
}

}  // namespace

TrainCurve run_train_lm(const LmTrainOptions& opt) {
  ModelBundle bundle = load_bundle(opt.ckpt_in, "sdf2");
  const std::vector<DatasetRecord> records =
      read_records((fs::path(opt.data_dir) / "records.jsonl").string());

  std::vector<LmTrainSample> samples;
  std::size_t used = 0;
  for (const DatasetRecord& rec : records) {
    if (split_of(rec.id) != Split::train) continue;
    const VisualTokenSequence fused =
        fused_tokens_for_record(bundle, opt.data_dir, rec, opt.alpha);
    for (int id : opt.instructions) {
      const QaPair& qa = rec.qa.at(id - 1);
      LmTrainSample s;
      s.fused = fused;
      s.prompt = prompt_for(qa.question);
      s.answer = tokenize(qa.answer);
      samples.push_back(std::move(s));
    }
    ++used;
    if (opt.max_records && used >= opt.max_records) break;
  }

  TrainCurve curve = train_lm(bundle.lm, samples, opt.hp);
  if (!bundle.has_stage("lm")) bundle.stages.push_back("lm");
  save_bundle(bundle, opt.ckpt_out);
  if (!opt.curve_csv.empty()) write_loss_curve_csv(curve, opt.curve_csv);
  return curve;
}

std::vector<EvalReport> run_eval(const EvalOptions& opt) {
  ModelBundle bundle = load_bundle(opt.ckpt, "lm");
  const std::vector<DatasetRecord> all =
      read_records((fs::path(opt.data_dir) / "records.jsonl").string());

  std::vector<DatasetRecord> records;
  for (const DatasetRecord& rec : all) {
    if (!opt.all_splits && split_of(rec.id) != opt.split) continue;
    records.push_back(rec);
    if (opt.max_records && records.size() >= opt.max_records) break;
  }
  if (records.empty()) throw InvalidInputError("eval: selected split is empty");

  BeamConfig beam_cfg;
  beam_cfg.width = opt.beam;

  std::vector<EvalReport> reports;
  for (double alpha : opt.alphas) {
    std::map<int, std::vector<Prediction>> preds;
    for (const DatasetRecord& rec : records) {
      const VisualTokenSequence fused = fused_tokens_for_record(bundle, opt.data_dir, rec, alpha);
      const std::vector<double> visual = map_visual(fused, bundle.lm);
      for (int id : opt.instructions) {
        const std::vector<int> prompt = prompt_for(rec.qa.at(id - 1).question);
        const std::vector<int> ids =
            opt.beam <= 1
                ? greedy_decode(visual, fused.count, prompt, bundle.lm, opt.max_new)
                : beam_search_decode(visual, fused.count, prompt, bundle.lm, beam_cfg,
                                     opt.max_new);
        preds[id].push_back({rec.id, detokenize(ids).text});
      }
    }
    EvalReport rep;
    char tag[32];
    std::snprintf(tag, sizeof(tag), "alpha=%.2f", alpha);
    rep.model_tag = tag;
    rep.alpha = alpha;
    rep.image_size = bundle.cfg.encoder.image_side;
    rep.sample_count = records.size();
    for (int id : opt.instructions)
      rep.accuracy[id] = instruction_accuracy(preds[id], records, id);
    reports.push_back(std::move(rep));
  }

  if (!opt.report_json.empty()) {
    std::ofstream out(opt.report_json, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + opt.report_json);
    out << eval_report_json(reports);
  }
  if (!opt.report_table.empty()) {
    std::ofstream out(opt.report_table, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + opt.report_table);
    out << eval_report_table(reports);
  }
  return reports;
}

DescribeResult run_describe(const DescribeOptions& opt) {
  ModelBundle bundle = load_bundle(opt.ckpt, "lm");
  if (bundle.mean_object_latent.empty())
    throw ConfigError("checkpoint carries no object latent; run the sdf2 stage first");

  const int side = bundle.cfg.encoder.image_side;
  const RasterImage occ = load_sized(opt.image_path, side);

  Camera cam;
  cam.width = cam.height = side;
  Mesh mesh;
  const RasterImage recon =
      render_learned_object(bundle, bundle.mean_object_latent, cam, opt.grid_res, &mesh);

  const VisualTokenSequence x1 = bundle.encoder.encode(occ, TokenSource::occluded_rgb);
  const VisualTokenSequence x2 = bundle.encoder.encode(recon, TokenSource::reconstructed);
  const VisualTokenSequence fused = fuse_tokens(x1, x2, opt.alpha);
  const std::vector<double> visual = map_visual(fused, bundle.lm);

  std::string question = opt.question;
  if (question.size() == 1 && question[0] >= '1' && question[0] <= '5')
    question = instruction_set()[question[0] - '1'];
  const std::vector<int> prompt = prompt_for(question);

  BeamConfig beam_cfg;
  beam_cfg.width = opt.beam;
  const std::vector<int> ids =
      opt.beam <= 1 ? greedy_decode(visual, fused.count, prompt, bundle.lm, opt.max_new)
                    : beam_search_decode(visual, fused.count, prompt, bundle.lm, beam_cfg,
                                         opt.max_new);

  DescribeResult res;
  res.answer = detokenize(ids).text;
  res.mesh_vertices = mesh.vertices.size();

  // Rough occlusion estimate: learned silhouette pixels whose input pixel does
  // not look like the bare object (grayscale shading).
  const BinaryMask full = render_mask(mesh, cam);
  BinaryMask visible(side, side);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      const std::uint8_t* p = occ.at(x, y);
      const bool grayish = std::abs(p[0] - p[1]) <= 12 && std::abs(p[1] - p[2]) <= 12;
      visible.set(x, y, grayish && p[0] > 10);
    }
  res.occlusion_estimate = occlusion_ratio(full, visible);
  return res;
}

}  // namespace occm
