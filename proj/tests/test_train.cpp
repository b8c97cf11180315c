#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "occm/train.hpp"

using namespace occm;

namespace {

DatasetRecord gold_record(std::int64_t id, const std::string& category,
                          const std::string& answer1) {
  DatasetRecord rec;
  rec.id = id;
  rec.category = category;
  for (int i = 0; i < 5; ++i)
    rec.qa.push_back({i + 1, instruction_set()[i], i == 0 ? answer1 : "yes"});
  return rec;
}

}  // namespace

TEST_CASE("paper hyperparameter defaults") {
  const Hyperparams hp;
  CHECK(hp.batch_size == 16);
  CHECK(hp.learning_rate == 0.00002);
  CHECK(hp.weight_decay == 0.0);
  CHECK(hp.epochs == 2);
  CHECK_NOTHROW(hp.validate());
}

TEST_CASE("hyperparameter validation rejects bad values") {
  Hyperparams hp;
  hp.batch_size = 0;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
  hp = Hyperparams{};
  hp.learning_rate = 0.0;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
  hp = Hyperparams{};
  hp.weight_decay = -0.1;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
}

TEST_CASE("answer normalization") {
  CHECK(normalize_answer("Yes.") == "yes");
  CHECK(normalize_answer("  A  ball ") == "a ball");
  CHECK(normalize_answer("No, it is not.") == "no");
  CHECK(normalize_answer("YES!") == "yes");
  CHECK(normalize_answer("yesterday") == "yesterday");  // prefix needs a boundary
  CHECK(normalize_answer("") == "");
}

TEST_CASE("instruction accuracy: exact matches and fractions") {
  std::vector<DatasetRecord> gold;
  for (int i = 0; i < 4; ++i) gold.push_back(gold_record(i, "ball", "ball"));
  std::vector<Prediction> preds;
  for (int i = 0; i < 4; ++i) preds.push_back({i, "Yes."});
  CHECK(instruction_accuracy(preds, gold, 2) == 1.0);

  preds[3].answer = "maybe";
  CHECK(instruction_accuracy(preds, gold, 2) == doctest::Approx(0.75));
}

TEST_CASE("instruction 1 accepts the category as a whole word") {
  std::vector<DatasetRecord> gold = {gold_record(0, "ball", "ball")};
  CHECK(instruction_accuracy({{0, "a ball held in the hand"}}, gold, 1) == 1.0);
  CHECK(instruction_accuracy({{0, "ballpark"}}, gold, 1) == 0.0);
  CHECK(instruction_accuracy({{0, "Ball"}}, gold, 1) == 1.0);
}

TEST_CASE("missing predictions count as wrong and are reported") {
  std::vector<DatasetRecord> gold = {gold_record(0, "ball", "ball"),
                                     gold_record(1, "rod", "rod")};
  std::size_t missing = 0;
  const double acc = instruction_accuracy({{0, "ball"}}, gold, 1, &missing);
  CHECK(acc == doctest::Approx(0.5));
  CHECK(missing == 1);
}

TEST_CASE("accuracy is permutation invariant in record order") {
  std::vector<DatasetRecord> gold = {gold_record(0, "ball", "ball"),
                                     gold_record(1, "rod", "rod"),
                                     gold_record(2, "can", "can")};
  std::vector<Prediction> preds = {{2, "can"}, {0, "ball"}, {1, "plate"}};
  const double a1 = instruction_accuracy(preds, gold, 1);
  std::swap(gold[0], gold[2]);
  std::swap(preds[0], preds[1]);
  CHECK(instruction_accuracy(preds, gold, 1) == a1);
  CHECK(a1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("reports round to four decimals in the table style") {
  CHECK(round4(0.51935) == doctest::Approx(0.5194));
  EvalReport rep;
  rep.model_tag = "alpha=0.50";
  rep.accuracy[1] = 0.51935;
  const std::string table = eval_report_table({rep});
  CHECK(table.find("0.5194") != std::string::npos);
}

TEST_CASE("report json carries tags, config echo and accuracies") {
  EvalReport rep;
  rep.model_tag = "alpha=0.50";
  rep.alpha = 0.5;
  rep.image_size = 64;
  rep.seed = 7;
  rep.sample_count = 100;
  rep.accuracy[1] = 0.25;
  rep.accuracy[2] = 0.5;
  const nlohmann::json j = nlohmann::json::parse(eval_report_json({rep}));
  REQUIRE(j.contains("reports"));
  REQUIRE(j["reports"].size() == 1);
  const auto& r = j["reports"][0];
  CHECK(r["model_tag"] == "alpha=0.50");
  CHECK(r["alpha"] == 0.5);
  CHECK(r["image_size"] == 64);
  CHECK(r["sample_count"] == 100);
  CHECK(r["accuracy"]["1"] == 0.25);
}

TEST_CASE("gradient check is exact for a quadratic loss") {
  Tensor t("q", {8});
  Rng rng(91);
  t.init_normal(rng, 1.0);
  // loss = 0.5 * sum x^2, gradient = x
  t.grad = t.value;
  const double err = gradient_check(
      {&t}, [&]() {
        double l = 0.0;
        for (double v : t.value) l += 0.5 * v * v;
        return l;
      },
      rng, 8, 1e-5);
  CHECK(err <= 1e-8);
}

TEST_CASE("lm batch loss is the sum of per-sample losses") {
  Rng rng(92);
  LmConfig cfg;
  cfg.dim = 16;
  cfg.heads = 2;
  cfg.num_blocks = 2;
  cfg.t_max = 48;
  cfg.visual_dim = 16;

  std::vector<LmTrainSample> samples(2);
  for (auto& s : samples) {
    s.fused.count = 4;
    s.fused.dim = 16;
    s.fused.tokens.resize(64);
    for (double& v : s.fused.tokens) v = rng.normal(0, 0.5);
    s.prompt = {81, 10};
    s.answer = {static_cast<int>(97 + rng.below(3))};
  }

  Rng init1(7);
  LmParams fresh(cfg, init1);
  double expected = 0.0;
  for (const auto& s : samples) {
    Rng init2(7);
    LmParams scratch(cfg, init2);
    expected += lm_answer_loss(s.fused, s.prompt, s.answer, scratch, false);
  }

  Hyperparams hp;
  hp.batch_size = 2;
  hp.epochs = 1;
  const TrainCurve curve = train_lm(fresh, samples, hp);
  REQUIRE(curve.losses.size() == 1);
  CHECK(std::abs(curve.losses[0] - expected) < 1e-5);
}

TEST_CASE("loss curves serialize as step,loss csv") {
  TrainCurve curve;
  curve.losses = {1.5, 0.75};
  const auto path =
      (std::filesystem::temp_directory_path() / "occm_curve_test.csv").string();
  write_loss_curve_csv(curve, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "step,loss");
  std::getline(in, line);
  CHECK(line.substr(0, 2) == "0,");
}

TEST_CASE("optimizer with zero steps leaves parameters untouched") {
  Rng rng(93);
  SdfDecoder subject(SdfRole::subject, 4, 16, 32, 2, rng);
  SdfDecoder object(SdfRole::object, 4, 16, 32, 2, rng);
  const std::vector<double> before = subject.net.weights[0].value;

  AnalyticShape sphere;
  sphere.kind = ShapeKind::sphere;
  sphere.params = {0.4, 0, 0};
  SceneSpec scene;
  scene.category = "ball";
  scene.object = sphere;
  SceneLatents latents(1, 16);

  SdfStage1Config cfg;
  cfg.steps = 0;
  const TrainCurve curve =
      pretrain_sdf_stage1(subject, object, latents, {scene}, Hyperparams{}, cfg);
  CHECK(curve.losses.empty());
  CHECK(subject.net.weights[0].value == before);
}

TEST_CASE("sgd momentum and adam both descend a convex bowl") {
  for (bool adaptive : {false, true}) {
    Tensor t("x", {2});
    t.value = {1.0, -2.0};
    Hyperparams hp;
    hp.learning_rate = 0.1;
    hp.adaptive = adaptive;
    Optimizer opt(hp);
    for (int i = 0; i < 200; ++i) {
      t.grad = t.value;  // d/dx of 0.5*|x|^2
      opt.step({&t});
    }
    CHECK(std::abs(t.value[0]) < 0.05);
    CHECK(std::abs(t.value[1]) < 0.05);
  }
}

TEST_CASE("decoupled weight decay shrinks parameters without gradients") {
  Tensor t("x", {1});
  t.value = {1.0};
  t.grad = {0.0};
  Hyperparams hp;
  hp.learning_rate = 0.1;
  hp.weight_decay = 0.5;
  Optimizer opt(hp);
  opt.step({&t});
  CHECK(t.value[0] == doctest::Approx(1.0 - 0.1 * 0.5 * 1.0));
}
