#include "occm/train.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace occm {

void Hyperparams::validate() const {
  if (batch_size < 1) throw ConfigError("hyperparams: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("hyperparams: learning_rate must be > 0");
  if (weight_decay < 0.0) throw ConfigError("hyperparams: weight_decay must be >= 0");
  if (epochs < 0) throw ConfigError("hyperparams: epochs must be >= 0");
}

Optimizer::Optimizer(const Hyperparams& hp) : hp_(hp) { hp_.validate(); }

void Optimizer::step(const std::vector<ParamGroup>& groups) {
  ++t_;
  for (const ParamGroup& g : groups) {
    const double lr = hp_.learning_rate * g.lr_scale;
    for (Tensor* t : g.params) {
      std::vector<double>& v = vel_[t];
      if (v.empty()) v.assign(t->size(), 0.0);
      if (hp_.adaptive) {
        std::vector<double>& s = sq_[t];
        if (s.empty()) s.assign(t->size(), 0.0);
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double c1 = 1.0 - std::pow(b1, t_);
        const double c2 = 1.0 - std::pow(b2, t_);
        for (std::size_t i = 0; i < t->size(); ++i) {
          const double gd = t->grad[i];
          v[i] = b1 * v[i] + (1.0 - b1) * gd;
          s[i] = b2 * s[i] + (1.0 - b2) * gd * gd;
          t->value[i] -= lr * (v[i] / c1) / (std::sqrt(s[i] / c2) + eps);
        }
      } else {
        for (std::size_t i = 0; i < t->size(); ++i) {
          v[i] = hp_.momentum * v[i] + t->grad[i];
          t->value[i] -= lr * v[i];
        }
      }
      if (hp_.weight_decay > 0.0)
        for (std::size_t i = 0; i < t->size(); ++i)
          t->value[i] -= lr * hp_.weight_decay * t->value[i];
    }
  }
}

void write_loss_curve_csv(const TrainCurve& curve, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.losses.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.10g\n", i, curve.losses[i]);
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path);
}

SceneLatents::SceneLatents(std::size_t scenes, int latent_dim) {
  subject.reserve(scenes);
  object.reserve(scenes);
  for (std::size_t i = 0; i < scenes; ++i) {
    subject.emplace_back("latent.subject." + std::to_string(i),
                         std::vector<std::size_t>{static_cast<std::size_t>(latent_dim)});
    object.emplace_back("latent.object." + std::to_string(i),
                        std::vector<std::size_t>{static_cast<std::size_t>(latent_dim)});
  }
}

namespace {

Point3 sample_surface_local(const AnalyticShape& s, Rng& rng) {
  switch (s.kind) {
    case ShapeKind::sphere: {
      Point3 d{rng.normal(), rng.normal(), rng.normal()};
      const double n = d.norm();
      if (n < 1e-12) return {s.params[0], 0.0, 0.0};
      return d * (s.params[0] / n);
    }
    case ShapeKind::box: {
      const double a = s.params[0], b = s.params[1], c = s.params[2];
      const double wx = b * c, wy = a * c, wz = a * b;
      double pick = rng.uniform() * (wx + wy + wz);
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      if (pick < wx) return {sign * a, rng.uniform(-b, b), rng.uniform(-c, c)};
      pick -= wx;
      if (pick < wy) return {rng.uniform(-a, a), sign * b, rng.uniform(-c, c)};
      return {rng.uniform(-a, a), rng.uniform(-b, b), sign * c};
    }
    default: {
      const double r = s.params[0], hh = s.params[1];
      // side area ~ 2*hh, both caps ~ r (common factor 2*pi*r dropped)
      const double phi = rng.uniform(0.0, 6.28318530717958647692);
      if (rng.uniform() * (2.0 * hh + r) < 2.0 * hh)
        return {r * std::cos(phi), rng.uniform(-hh, hh), r * std::sin(phi)};
      const double rr = r * std::sqrt(rng.uniform());
      const double y = rng.uniform() < 0.5 ? -hh : hh;
      return {rr * std::cos(phi), y, rr * std::sin(phi)};
    }
  }
}

Point3 sample_near_surface(const AnalyticShape& s, double sigma, Rng& rng) {
  const Point3 local = sample_surface_local(s, rng);
  Point3 p = s.rotation.apply(local) + s.translation;
  return {p.x + rng.normal(0.0, sigma), p.y + rng.normal(0.0, sigma),
          p.z + rng.normal(0.0, sigma)};
}

bool ray_blocked(const std::vector<AnalyticShape>& occluder, const Point3& eye,
                 const Point3& p) {
  const Point3 d = p - eye;
  for (int k = 1; k < 16; ++k) {
    const double t = k / 16.0;
    if (union_sdf(occluder, eye + d * t) < 0.0) return true;
  }
  return false;
}

struct SamplePoint {
  Point3 p;
  double target = 0.0;
  double weight = 1.0;
};

}  // namespace

TrainCurve pretrain_sdf_stage1(SdfDecoder& subject, SdfDecoder& object, SceneLatents& latents,
                               const std::vector<SceneSpec>& scenes, const Hyperparams& hp,
                               const SdfStage1Config& cfg) {
  hp.validate();
  if (scenes.empty()) throw InvalidInputError("stage 1: no scenes");
  if (latents.object.size() != scenes.size() || latents.subject.size() != scenes.size())
    throw ShapeError("stage 1: latent count does not match scene count");

  std::vector<Tensor*> all_params;
  for (Tensor* t : subject.params()) all_params.push_back(t);
  for (Tensor* t : object.params()) all_params.push_back(t);
  for (Tensor& t : latents.subject) all_params.push_back(&t);
  for (Tensor& t : latents.object) all_params.push_back(&t);

  Optimizer opt(hp);
  Rng rng = Rng(hp.seed).fork(0x5d1);
  TrainCurve curve;

  for (int step = 0; step < cfg.steps; ++step) {
    zero_grads(all_params);
    double loss_sum = 0.0, weight_sum = 0.0;
    struct Pending {
      SdfDecoder* dec;
      Tensor* latent;
      SamplePoint sp;
    };
    std::vector<Pending> batch_points;

    for (int b = 0; b < hp.batch_size; ++b) {
      const std::size_t si = scenes.size() == 1 ? 0 : rng.below(scenes.size());
      const SceneSpec& scene = scenes[si];
      const bool has_occluder = !scene.occluder_parts.empty();

      auto gather = [&](SdfDecoder* dec, Tensor* latent, bool is_object) {
        const int n = cfg.uniform_samples + cfg.surface_samples + cfg.interior_samples;
        for (int i = 0; i < n; ++i) {
          SamplePoint sp;
          const AnalyticShape& shape =
              is_object ? scene.object
                        : scene.occluder_parts[scene.occluder_parts.size() == 1
                                                   ? 0
                                                   : rng.below(scene.occluder_parts.size())];
          if (i < cfg.uniform_samples) {
            sp.p = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
          } else if (i < cfg.uniform_samples + cfg.surface_samples) {
            sp.p = sample_near_surface(shape, cfg.surface_noise, rng);
          } else {
            // Deep-interior coverage so the inner distance cone is supervised.
            const Point3 local = sample_surface_local(shape, rng) * rng.uniform();
            sp.p = shape.rotation.apply(local) + shape.translation;
          }
          sp.target = is_object ? analytic_sdf(scene.object, sp.p)
                                : union_sdf(scene.occluder_parts, sp.p);
          if (is_object && cfg.occlusion_weighting && has_occluder &&
              ray_blocked(scene.occluder_parts, scene.camera.eye, sp.p))
            sp.weight = 2.0;
          batch_points.push_back({dec, latent, sp});
        }
      };
      gather(&object, &latents.object[si], true);
      if (has_occluder) gather(&subject, &latents.subject[si], false);
    }

    for (const Pending& pd : batch_points) weight_sum += pd.sp.weight;
    const double inv_w = 1.0 / weight_sum;
    for (const Pending& pd : batch_points) {
      Mlp::Cache cache;
      const double value = pd.dec->forward(pd.sp.p, *pd.latent, cache);
      const double err = value - pd.sp.target;
      loss_sum += pd.sp.weight * std::fabs(err);
      const double d = pd.sp.weight * (err > 0.0 ? 1.0 : err < 0.0 ? -1.0 : 0.0) * inv_w;
      pd.dec->backward(cache, d, *pd.latent);
    }

    const double loss = loss_sum * inv_w;
    if (!std::isfinite(loss))
      throw NumericError("stage 1: loss non-finite at step " + std::to_string(step));
    curve.losses.push_back(loss);
    opt.step(all_params);
  }
  return curve;
}

TrainCurve finetune_sdf_stage2(PatchEncoder& encoder, CategoryHead& head,
                               const std::vector<RasterImage>& images,
                               const std::vector<int>& labels, const Hyperparams& hp,
                               int steps) {
  hp.validate();
  if (images.size() != labels.size()) throw ShapeError("stage 2: image/label count mismatch");
  if (images.empty()) throw InvalidInputError("stage 2: no training images");

  std::vector<Tensor*> params = encoder.params();
  for (Tensor* t : head.params()) params.push_back(t);
  Optimizer opt(hp);
  Rng rng = Rng(hp.seed).fork(0x5d2);
  TrainCurve curve;

  for (int step = 0; step < steps; ++step) {
    zero_grads(params);
    double loss = 0.0;
    for (int b = 0; b < hp.batch_size; ++b) {
      const std::size_t i = rng.below(images.size());
      PatchEncoder::Cache ec;
      const VisualTokenSequence tokens =
          encoder.encode(images[i], TokenSource::reconstructed, &ec);
      CategoryHead::Cache hc;
      const std::vector<double> probs = head.classify(tokens, &hc);
      loss += -std::log(std::max(probs[labels[i]], 1e-300));
      std::vector<double> dtokens;
      head.backward_ce(hc, labels[i], &dtokens);
      encoder.backward(ec, dtokens);
    }
    if (!std::isfinite(loss))
      throw NumericError("stage 2: loss non-finite at step " + std::to_string(step));
    curve.losses.push_back(loss);
    opt.step(params);
  }
  return curve;
}

double classifier_accuracy(const PatchEncoder& encoder, const CategoryHead& head,
                           const std::vector<RasterImage>& images,
                           const std::vector<int>& labels) {
  if (images.size() != labels.size()) throw ShapeError("accuracy: image/label count mismatch");
  if (images.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::vector<double> probs =
        head.classify(encoder.encode(images[i], TokenSource::reconstructed));
    const auto best = std::max_element(probs.begin(), probs.end());
    if (static_cast<int>(best - probs.begin()) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / images.size();
}

TrainCurve train_lm(LmParams& params, const std::vector<LmTrainSample>& samples,
                    const Hyperparams& hp) {
  hp.validate();
  if (samples.empty()) throw InvalidInputError("lm training: no samples");

  std::vector<Tensor*> tensors = params.params();
  Optimizer opt(hp);
  Rng rng = Rng(hp.seed).fork(0x5d3);
  TrainCurve curve;

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(hp.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(hp.batch_size));
      zero_grads(tensors);
      double loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const LmTrainSample& s = samples[order[k]];
        loss += lm_answer_loss(s.fused, s.prompt, s.answer, params, /*with_grad=*/true);
      }
      if (!std::isfinite(loss))
        throw NumericError("lm training: loss non-finite at step " +
                           std::to_string(curve.losses.size()));
      curve.losses.push_back(loss);
      opt.step(tensors);
    }
  }
  return curve;
}

double gradient_check(const std::vector<Tensor*>& params,
                      const std::function<double()>& loss_fn, Rng& rng, int per_tensor,
                      double h) {
  double worst = 0.0;
  for (Tensor* t : params) {
    const std::size_t n = t->size();
    std::vector<std::size_t> idx;
    if (n <= static_cast<std::size_t>(per_tensor)) {
      idx.resize(n);
      std::iota(idx.begin(), idx.end(), 0);
    } else {
      for (int k = 0; k < per_tensor; ++k) idx.push_back(rng.below(n));
    }
    for (std::size_t i : idx) {
      const double saved = t->value[i];
      t->value[i] = saved + h;
      const double up = loss_fn();
      t->value[i] = saved - h;
      const double down = loss_fn();
      t->value[i] = saved;
      const double g_fd = (up - down) / (2.0 * h);
      const double g_a = t->grad[i];
      const double rel =
          std::fabs(g_a - g_fd) / std::max({std::fabs(g_a), std::fabs(g_fd), 1e-8});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

std::string normalize_answer(const std::string& text) {
  std::string s;
  s.reserve(text.size());
  bool pending_space = false;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      pending_space = !s.empty();
      continue;
    }
    if (pending_space) {
      s.push_back(' ');
      pending_space = false;
    }
    s.push_back(static_cast<char>(std::tolower(c)));
  }
  while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?' || s.back() == ' '))
    s.pop_back();
  for (const char* word : {"yes", "no"}) {
    const std::size_t len = std::strlen(word);
    if (s.compare(0, len, word) == 0 &&
        (s.size() == len || s[len] == ',' || s[len] == ' '))
      return word;
  }
  return s;
}

namespace {

bool contains_whole_word(const std::string& text, const std::string& word) {
  std::size_t pos = 0;
  auto is_word_char = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
  };
  while ((pos = text.find(word, pos)) != std::string::npos) {
    const bool left_ok = pos == 0 || !is_word_char(text[pos - 1]);
    const std::size_t after = pos + word.size();
    const bool right_ok = after == text.size() || !is_word_char(text[after]);
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

}  // namespace

double instruction_accuracy(const std::vector<Prediction>& predictions,
                            const std::vector<DatasetRecord>& gold, int instruction_id,
                            std::size_t* missing) {
  if (instruction_id < 1 || instruction_id > 5)
    throw InvalidInputError("instruction_id must be 1..5");
  if (gold.empty()) throw InvalidInputError("instruction_accuracy: no gold records");

  std::map<std::int64_t, const std::string*> by_id;
  for (const Prediction& p : predictions) by_id[p.record_id] = &p.answer;

  std::size_t correct = 0, absent = 0;
  for (const DatasetRecord& rec : gold) {
    const auto it = by_id.find(rec.id);
    if (it == by_id.end()) {
      ++absent;
      continue;
    }
    const std::string pred = normalize_answer(*it->second);
    const std::string truth = normalize_answer(rec.qa[instruction_id - 1].answer);
    if (pred == truth) {
      ++correct;
    } else if (instruction_id == 1 && contains_whole_word(pred, truth)) {
      ++correct;
    }
  }
  if (missing) *missing = absent;
  return static_cast<double>(correct) / gold.size();
}

double round4(double x) { return std::round(x * 10000.0) / 10000.0; }

std::string eval_report_json(const std::vector<EvalReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const EvalReport& r : reports) {
    nlohmann::json acc;
    for (const auto& [id, a] : r.accuracy) acc[std::to_string(id)] = round4(a);
    arr.push_back({{"model_tag", r.model_tag},
                   {"alpha", r.alpha},
                   {"image_size", r.image_size},
                   {"seed", r.seed},
                   {"sample_count", r.sample_count},
                   {"accuracy", acc}});
  }
  return nlohmann::json{{"reports", arr}}.dump(2) + "\n";
}

std::string eval_report_table(const std::vector<EvalReport>& reports) {
  const std::string row_header = "instruction";
  std::vector<std::size_t> widths;
  for (const EvalReport& r : reports) widths.push_back(std::max<std::size_t>(r.model_tag.size(), 6));

  std::string out = row_header;
  for (std::size_t c = 0; c < reports.size(); ++c) {
    out += "  ";
    out.append(widths[c] - reports[c].model_tag.size(), ' ');
    out += reports[c].model_tag;
  }
  out += "\n";
  char buf[32];
  for (int id = 1; id <= 5; ++id) {
    std::snprintf(buf, sizeof(buf), "%-*d", static_cast<int>(row_header.size()), id);
    out += buf;
    for (std::size_t c = 0; c < reports.size(); ++c) {
      const auto it = reports[c].accuracy.find(id);
      if (it == reports[c].accuracy.end()) {
        std::snprintf(buf, sizeof(buf), "%*s", static_cast<int>(widths[c]), "-");
      } else {
        std::snprintf(buf, sizeof(buf), "%*.4f", static_cast<int>(widths[c]), round4(it->second));
      }
      out += "  ";
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace occm
