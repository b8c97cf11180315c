#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "occm/dataset.hpp"
#include "occm/lm.hpp"
#include "occm/mlp.hpp"
#include "occm/vision.hpp"

namespace occm {

struct Hyperparams {
  int batch_size = 16;
  double learning_rate = 0.00002;
  double weight_decay = 0.0;
  int epochs = 2;
  std::uint64_t seed = 0;
  double momentum = 0.9;
  bool adaptive = false;  // Adam instead of SGD+momentum

  void validate() const;
};

struct ParamGroup {
  std::vector<Tensor*> params;
  double lr_scale = 1.0;
};

// SGD with momentum and decoupled weight decay; Adam behind hp.adaptive.
// State is keyed by tensor address, so the trained tensors must outlive the
// optimizer and stay put.
class Optimizer {
 public:
  explicit Optimizer(const Hyperparams& hp);
  void step(const std::vector<ParamGroup>& groups);
  void step(const std::vector<Tensor*>& params) { step({ParamGroup{params, 1.0}}); }

 private:
  Hyperparams hp_;
  std::map<Tensor*, std::vector<double>> vel_;  // SGD momentum / Adam first moment
  std::map<Tensor*, std::vector<double>> sq_;   // Adam second moment
  long t_ = 0;
};

struct TrainCurve {
  std::vector<double> losses;  // one entry per optimizer step
};

void write_loss_curve_csv(const TrainCurve& curve, const std::string& path);

// Free latent codes, one per scene and role.
struct SceneLatents {
  std::vector<Tensor> subject;
  std::vector<Tensor> object;

  SceneLatents() = default;
  SceneLatents(std::size_t scenes, int latent_dim);
};

struct SdfStage1Config {
  int steps = 2000;
  int uniform_samples = 24;   // per scene per step
  int surface_samples = 24;   // near-surface, noise sigma below
  int interior_samples = 12;  // surface points scaled toward the shape center
  double surface_noise = 0.05;
  bool occlusion_weighting = true;  // 2x weight on occluder-blocked object points
};

// Reconstruction pretraining: mean absolute error of both decoders against the
// scenes' analytic fields, latents optimized jointly with the weights.
// Aborts with the step index when the loss turns non-finite.
TrainCurve pretrain_sdf_stage1(SdfDecoder& subject, SdfDecoder& object, SceneLatents& latents,
                               const std::vector<SceneSpec>& scenes, const Hyperparams& hp,
                               const SdfStage1Config& cfg);

// Classification fine-tune on images rendered through the learned SDF chain
// (one image per record, pre-rendered by the caller). `steps` optimizer steps
// of cross-entropy on the category labels.
TrainCurve finetune_sdf_stage2(PatchEncoder& encoder, CategoryHead& head,
                               const std::vector<RasterImage>& images,
                               const std::vector<int>& labels, const Hyperparams& hp, int steps);

double classifier_accuracy(const PatchEncoder& encoder, const CategoryHead& head,
                           const std::vector<RasterImage>& images,
                           const std::vector<int>& labels);

struct LmTrainSample {
  VisualTokenSequence fused;
  std::vector<int> prompt;  // question bytes + '\n'
  std::vector<int> answer;  // answer bytes, EOS appended by the loss
};

// Instruction tuning: hp.epochs shuffled passes, next-token cross-entropy over
// answer tokens only. The batched loss is the sum of the per-sample losses.
TrainCurve train_lm(LmParams& params, const std::vector<LmTrainSample>& samples,
                    const Hyperparams& hp);

// Central finite differences (step h) vs the analytic grads already stored in
// the tensors, over >= per_tensor randomly chosen entries of each tensor.
// loss_fn must recompute the loss from current tensor values without touching
// grads. Returns max |g_a - g_fd| / max(|g_a|, |g_fd|, 1e-8).
double gradient_check(const std::vector<Tensor*>& params,
                      const std::function<double()>& loss_fn, Rng& rng, int per_tensor = 50,
                      double h = 1e-5);

// Lowercase, trim, strip terminal {. ! ?}, collapse whitespace; "yes, ..." and
// "no, ..." style prefixes map to plain yes/no.
std::string normalize_answer(const std::string& text);

struct Prediction {
  std::int64_t record_id = 0;
  std::string answer;
};

// Fraction of gold records whose prediction matches after normalization.
// Instruction 1 also accepts the gold category as a whole word inside the
// prediction. Missing predictions count as wrong; their number lands in
// *missing when given.
double instruction_accuracy(const std::vector<Prediction>& predictions,
                            const std::vector<DatasetRecord>& gold, int instruction_id,
                            std::size_t* missing = nullptr);

// Table-style rounding to 4 decimals.
double round4(double x);

struct EvalReport {
  std::string model_tag;
  double alpha = 0.5;
  int image_size = 64;
  std::uint64_t seed = 0;
  std::size_t sample_count = 0;
  std::map<int, double> accuracy;  // instruction id -> [0,1]
};

std::string eval_report_json(const std::vector<EvalReport>& reports);
// Aligned text table: instruction rows, one column per model tag.
std::string eval_report_table(const std::vector<EvalReport>& reports);

}  // namespace occm
