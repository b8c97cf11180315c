#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "occm/checkpoint.hpp"
#include "occm/dataset.hpp"
#include "occm/train.hpp"

namespace occm {

// ---------------------------------------------------------------------------
// Data generation

struct GenDataOptions {
  std::string out_dir;
  std::size_t count = 100;
  std::uint64_t seed = 0;
  double occlusion_target = 0.25;
  int image_size = 224;
  int grid_res = 65;
};

struct GenDataResult {
  std::size_t count = 0;
  double mean_occlusion = 0.0;
};

// Writes records.jsonl, scenes.jsonl and the image/mask trees under out_dir.
GenDataResult run_gen_data(const GenDataOptions& opt);

// ---------------------------------------------------------------------------
// Model bundle: every trainable module plus checkpoint (de)serialization.

struct BundleConfig {
  int latent_dim = 16;
  int sdf_hidden = 64;
  int sdf_hidden_layers = 3;
  int posenc_bands = 4;
  PatchEncoderConfig encoder;
  LmConfig lm;
};

struct ModelBundle {
  BundleConfig cfg;
  SdfDecoder subject;
  SdfDecoder object;
  SceneLatents latents;        // one per training scene, stage-1 artifact
  std::vector<double> mean_object_latent;  // stage-2 artifact for single images
  PatchEncoder encoder;
  CategoryHead head;
  LmParams lm;
  std::vector<std::string> stages;        // subset of {"sdf1","sdf2","lm"}, in order
  std::vector<std::int64_t> scene_ids;    // scene behind each latent slot

  ModelBundle(const BundleConfig& cfg, std::uint64_t init_seed);

  bool has_stage(const std::string& s) const;
};

void save_bundle(ModelBundle& bundle, const std::string& path);
// Rebuilds module shapes from the checkpoint metadata. Throws ConfigError
// when `require_stage` (non-empty) is absent from the checkpoint.
ModelBundle load_bundle(const std::string& path, const std::string& require_stage = "");

// ---------------------------------------------------------------------------
// Training stages

struct Sdf1Options {
  std::string data_dir;
  std::string ckpt_out;
  std::string curve_csv;  // optional
  Hyperparams hp;
  SdfStage1Config cfg;
  BundleConfig bundle;
  std::size_t max_scenes = 0;  // 0 = all
};

TrainCurve run_train_sdf1(const Sdf1Options& opt);

struct Sdf2Options {
  std::string data_dir;
  std::string ckpt_in;
  std::string ckpt_out;
  std::string curve_csv;
  Hyperparams hp;
  int steps = 300;
  int grid_res = 25;  // lattice for the learned-SDF render of each scene
  std::size_t max_records = 0;
};

TrainCurve run_train_sdf2(const Sdf2Options& opt);

// Reconstruction of one scene through the learned object SDF: latent -> grid
// -> marching cubes -> depth-shaded projection.
RasterImage render_learned_object(const ModelBundle& bundle, const std::vector<double>& latent,
                                  const Camera& camera, int grid_res,
                                  Mesh* mesh_out = nullptr);

struct LmTrainOptions {
  std::string data_dir;
  std::string ckpt_in;
  std::string ckpt_out;
  std::string curve_csv;
  Hyperparams hp;
  double alpha = 0.5;
  std::vector<int> instructions = {1, 2, 3, 4, 5};
  std::size_t max_records = 0;
};

TrainCurve run_train_lm(const LmTrainOptions& opt);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalOptions {
  std::string data_dir;
  std::string ckpt;
  std::vector<double> alphas = {0.5};
  int beam = 1;
  int max_new = 48;
  std::vector<int> instructions = {1, 2, 3, 4, 5};
  Split split = Split::test;
  bool all_splits = false;
  std::size_t max_records = 0;
  std::string report_json;   // optional output paths
  std::string report_table;
};

std::vector<EvalReport> run_eval(const EvalOptions& opt);

// ---------------------------------------------------------------------------
// Single-image description

struct DescribeOptions {
  std::string image_path;
  std::string ckpt;
  double alpha = 0.5;
  int beam = 1;
  int max_new = 48;
  std::string question = "1";  // 1..5 or free text
  int grid_res = 33;
  bool verbose = false;
};

struct DescribeResult {
  std::string answer;
  std::size_t mesh_vertices = 0;
  double occlusion_estimate = 0.0;
};

DescribeResult run_describe(const DescribeOptions& opt);

}  // namespace occm
