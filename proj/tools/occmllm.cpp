// occmllm: dataset generation, two-stage SDF training, LM instruction tuning,
// evaluation, and single-image description in one executable.
//
// Exit codes: 0 success, 1 runtime or I/O failure, 2 configuration error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "occm/pipeline.hpp"

namespace {

using nlohmann::json;

// Optional JSON config: a flat object or an object with one section per
// subcommand. Flags given on the command line win over config values.
json load_config_section(int argc, char** argv) {
  std::string path;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") path = argv[i + 1];
  if (path.empty()) return json::object();

  std::ifstream in(path, std::ios::binary);
  if (!in) throw occm::ConfigError("cannot open config file: " + path);
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw occm::ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!cfg.is_object()) throw occm::ConfigError("config file must hold a JSON object");

  // The subcommand is the first token that is not a global option or its value.
  std::string sub;
  for (int i = 1; i < argc; ++i) {
    const std::string tok = argv[i];
    if (tok == "--config" || tok == "--threads") {
      ++i;
      continue;
    }
    if (!tok.empty() && tok[0] != '-') {
      sub = tok;
      break;
    }
  }
  if (cfg.contains(sub) && cfg[sub].is_object()) return cfg[sub];
  return cfg;
}

template <typename T>
void cfg_get(const json& cfg, const char* key, T& var) {
  if (cfg.contains(key)) var = cfg.at(key).get<T>();
}

void add_hp_flags(CLI::App* cmd, occm::Hyperparams& hp) {
  cmd->add_option("--batch", hp.batch_size, "Batch size");
  cmd->add_option("--lr", hp.learning_rate, "Learning rate");
  cmd->add_option("--weight-decay", hp.weight_decay, "Decoupled weight decay");
  cmd->add_option("--epochs", hp.epochs, "Training epochs");
  cmd->add_option("--seed", hp.seed, "Random seed");
  cmd->add_option("--momentum", hp.momentum, "SGD momentum");
  cmd->add_flag("--adaptive", hp.adaptive, "Use the adaptive (Adam) optimizer");
}

void cfg_get_hp(const json& cfg, occm::Hyperparams& hp) {
  cfg_get(cfg, "batch", hp.batch_size);
  cfg_get(cfg, "lr", hp.learning_rate);
  cfg_get(cfg, "weight-decay", hp.weight_decay);
  cfg_get(cfg, "epochs", hp.epochs);
  cfg_get(cfg, "seed", hp.seed);
  cfg_get(cfg, "momentum", hp.momentum);
  cfg_get(cfg, "adaptive", hp.adaptive);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Occluded-object multimodal pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "Optional JSON config file; flags win")
      ->configurable(false);
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  app.add_option("--threads", threads, "Upper bound on worker parallelism")
      ->check(CLI::PositiveNumber);

  occm::GenDataOptions gen;
  CLI::App* cmd_gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  // Required settings are validated after parsing so the config file can
  // supply them; CLI11's required() would reject a config-only invocation.
  cmd_gen->add_option("--out", gen.out_dir, "Output directory");
  cmd_gen->add_option("--count", gen.count, "Number of scenes");
  cmd_gen->add_option("--seed", gen.seed, "Random seed");
  cmd_gen->add_option("--occlusion-target", gen.occlusion_target, "Mean occlusion ratio target");
  cmd_gen->add_option("--image-size", gen.image_size, "Rendered image side in pixels");
  cmd_gen->add_option("--grid-res", gen.grid_res, "Meshing lattice resolution");

  std::string stage, data_dir, ckpt_in, ckpt_out, curve_csv;
  occm::Hyperparams train_hp;
  int sdf1_steps = 2000, sdf2_steps = 300, sdf2_grid = 25;
  double lm_alpha = 0.5;
  std::size_t max_items = 0;
  CLI::App* cmd_train = app.add_subcommand("train", "Run one training stage");
  cmd_train->add_option("--stage", stage, "sdf1, sdf2 or lm");
  cmd_train->add_option("--data", data_dir, "Dataset directory");
  cmd_train->add_option("--ckpt-in", ckpt_in, "Input checkpoint (sdf2, lm)");
  cmd_train->add_option("--ckpt-out", ckpt_out, "Output checkpoint");
  cmd_train->add_option("--curve", curve_csv, "Loss-curve CSV path");
  cmd_train->add_option("--steps", sdf1_steps, "Stage-1 optimizer steps");
  cmd_train->add_option("--sdf2-steps", sdf2_steps, "Stage-2 optimizer steps");
  cmd_train->add_option("--sdf2-grid", sdf2_grid, "Stage-2 learned-render lattice");
  cmd_train->add_option("--alpha", lm_alpha, "Fusion weight for LM tuning");
  cmd_train->add_option("--limit", max_items, "Cap on scenes/records used");
  add_hp_flags(cmd_train, train_hp);

  occm::EvalOptions ev;
  bool alpha_sweep = false;
  double eval_alpha = 0.5;
  std::string report_base, split_name = "test";
  CLI::App* cmd_eval = app.add_subcommand("eval", "Instruction-accuracy evaluation");
  cmd_eval->add_option("--data", ev.data_dir, "Dataset directory");
  cmd_eval->add_option("--ckpt", ev.ckpt, "Checkpoint");
  cmd_eval->add_option("--alpha", eval_alpha, "Fusion weight");
  cmd_eval->add_flag("--alpha-sweep", alpha_sweep, "Evaluate alpha in {0,0.25,0.5,0.75,1}");
  cmd_eval->add_option("--beam", ev.beam, "Beam width (1 = greedy)")->check(CLI::PositiveNumber);
  cmd_eval->add_option("--max-new", ev.max_new, "Generation cap per answer");
  cmd_eval->add_option("--report", report_base, "Report base path (.json/.txt appended)");
  cmd_eval->add_option("--split", split_name, "train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  cmd_eval->add_option("--limit", ev.max_records, "Cap on evaluated records");

  occm::DescribeOptions desc;
  CLI::App* cmd_desc = app.add_subcommand("describe", "Answer a question about one image");
  cmd_desc->add_option("--image", desc.image_path, "Input PPM image");
  cmd_desc->add_option("--ckpt", desc.ckpt, "Checkpoint");
  cmd_desc->add_option("--alpha", desc.alpha, "Fusion weight");
  cmd_desc->add_option("--beam", desc.beam, "Beam width (1 = greedy)")
      ->check(CLI::PositiveNumber);
  cmd_desc->add_option("--question", desc.question, "Instruction number 1..5 or free text");
  cmd_desc->add_option("--max-new", desc.max_new, "Generation cap");
  cmd_desc->add_option("--grid-res", desc.grid_res, "Reconstruction lattice resolution");
  cmd_desc->add_flag("--verbose", desc.verbose, "Print intermediate stats");

  try {
    const json cfg = load_config_section(argc, argv);
    // Config fills in defaults before parsing; explicit flags overwrite them.
    cfg_get(cfg, "threads", threads);
    cfg_get(cfg, "out", gen.out_dir);
    cfg_get(cfg, "count", gen.count);
    cfg_get(cfg, "seed", gen.seed);
    cfg_get(cfg, "occlusion-target", gen.occlusion_target);
    cfg_get(cfg, "image-size", gen.image_size);
    cfg_get(cfg, "grid-res", gen.grid_res);
    cfg_get(cfg, "stage", stage);
    cfg_get(cfg, "data", data_dir);
    cfg_get(cfg, "ckpt-in", ckpt_in);
    cfg_get(cfg, "ckpt-out", ckpt_out);
    cfg_get(cfg, "curve", curve_csv);
    cfg_get(cfg, "steps", sdf1_steps);
    cfg_get(cfg, "sdf2-steps", sdf2_steps);
    cfg_get(cfg, "sdf2-grid", sdf2_grid);
    cfg_get(cfg, "alpha", lm_alpha);
    cfg_get(cfg, "limit", max_items);
    cfg_get_hp(cfg, train_hp);
    cfg_get(cfg, "data", ev.data_dir);
    cfg_get(cfg, "ckpt", ev.ckpt);
    cfg_get(cfg, "alpha", eval_alpha);
    cfg_get(cfg, "beam", ev.beam);
    cfg_get(cfg, "max-new", ev.max_new);
    cfg_get(cfg, "report", report_base);
    cfg_get(cfg, "split", split_name);
    cfg_get(cfg, "image", desc.image_path);
    cfg_get(cfg, "ckpt", desc.ckpt);
    cfg_get(cfg, "question", desc.question);

    app.parse(argc, argv);
    if (threads < 1) throw occm::ConfigError("--threads must be positive");

    const auto require = [](const std::string& value, const char* flag) {
      if (value.empty())
        throw occm::ConfigError(std::string(flag) + " is required (flag or config file)");
    };

    if (cmd_gen->parsed()) {
      require(gen.out_dir, "--out");
      const occm::GenDataResult res = occm::run_gen_data(gen);
      std::printf("generated %zu records, mean occlusion ratio %.4f\n", res.count,
                  res.mean_occlusion);
    } else if (cmd_train->parsed()) {
      require(stage, "--stage");
      require(data_dir, "--data");
      require(ckpt_out, "--ckpt-out");
      if (stage != "sdf1" && stage != "sdf2" && stage != "lm")
        throw occm::ConfigError("--stage must be sdf1, sdf2 or lm");
      if ((stage == "sdf2" || stage == "lm") && ckpt_in.empty())
        throw occm::ConfigError("stage " + stage + " requires --ckpt-in from the previous stage");
      occm::TrainCurve curve;
      if (stage == "sdf1") {
        occm::Sdf1Options opt;
        opt.data_dir = data_dir;
        opt.ckpt_out = ckpt_out;
        opt.curve_csv = curve_csv;
        opt.hp = train_hp;
        opt.cfg.steps = sdf1_steps;
        opt.max_scenes = max_items;
        curve = occm::run_train_sdf1(opt);
      } else if (stage == "sdf2") {
        occm::Sdf2Options opt;
        opt.data_dir = data_dir;
        opt.ckpt_in = ckpt_in;
        opt.ckpt_out = ckpt_out;
        opt.curve_csv = curve_csv;
        opt.hp = train_hp;
        opt.steps = sdf2_steps;
        opt.grid_res = sdf2_grid;
        opt.max_records = max_items;
        curve = occm::run_train_sdf2(opt);
      } else {
        occm::LmTrainOptions opt;
        opt.data_dir = data_dir;
        opt.ckpt_in = ckpt_in;
        opt.ckpt_out = ckpt_out;
        opt.curve_csv = curve_csv;
        opt.hp = train_hp;
        opt.alpha = lm_alpha;
        opt.max_records = max_items;
        curve = occm::run_train_lm(opt);
      }
      const double last = curve.losses.empty() ? 0.0 : curve.losses.back();
      std::printf("stage %s done, %zu steps, final loss %.6f\n", stage.c_str(),
                  curve.losses.size(), last);
    } else if (cmd_eval->parsed()) {
      require(ev.data_dir, "--data");
      require(ev.ckpt, "--ckpt");
      ev.alphas = alpha_sweep ? std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}
                              : std::vector<double>{eval_alpha};
      ev.all_splits = split_name == "all";
      ev.split = split_name == "train"  ? occm::Split::train
                 : split_name == "val"  ? occm::Split::val
                                        : occm::Split::test;
      if (!report_base.empty()) {
        ev.report_json = report_base + ".json";
        ev.report_table = report_base + ".txt";
      }
      const std::vector<occm::EvalReport> reports = occm::run_eval(ev);
      std::fputs(occm::eval_report_table(reports).c_str(), stdout);
    } else if (cmd_desc->parsed()) {
      require(desc.image_path, "--image");
      require(desc.ckpt, "--ckpt");
      const occm::DescribeResult res = occm::run_describe(desc);
      if (desc.verbose)
        std::printf("mesh vertices: %zu\nocclusion estimate: %.4f\n", res.mesh_vertices,
                    res.occlusion_estimate);
      std::printf("%s\n", res.answer.c_str());
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const occm::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
