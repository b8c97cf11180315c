#include "occm/lm.hpp"

#include <algorithm>
#include <cmath>

namespace occm {

std::vector<int> tokenize(const std::string& text) {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (unsigned char c : text) ids.push_back(static_cast<int>(c));
  return ids;
}

namespace {
// Validates one UTF-8 sequence starting at `i`; returns its length or 0.
std::size_t utf8_seq_len(const std::vector<unsigned char>& b, std::size_t i) {
  const unsigned char c = b[i];
  if (c < 0x80) return 1;
  std::size_t len = 0;
  if ((c & 0xe0) == 0xc0 && c >= 0xc2) len = 2;
  else if ((c & 0xf0) == 0xe0) len = 3;
  else if ((c & 0xf8) == 0xf0 && c <= 0xf4) len = 4;
  else return 0;
  if (i + len > b.size()) return 0;
  for (std::size_t k = 1; k < len; ++k)
    if ((b[i + k] & 0xc0) != 0x80) return 0;
  // reject overlong/surrogate edge cases conservatively
  if (len == 3 && c == 0xe0 && b[i + 1] < 0xa0) return 0;
  if (len == 3 && c == 0xed && b[i + 1] >= 0xa0) return 0;
  if (len == 4 && c == 0xf0 && b[i + 1] < 0x90) return 0;
  if (len == 4 && c == 0xf4 && b[i + 1] >= 0x90) return 0;
  return len;
}
}  // namespace

DetokenizeResult detokenize(const std::vector<int>& ids) {
  std::vector<unsigned char> bytes;
  bytes.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || id >= kVocabSize) throw InvalidInputError("detokenize: id out of range");
    if (id < 256) bytes.push_back(static_cast<unsigned char>(id));
  }
  DetokenizeResult res;
  std::size_t i = 0;
  while (i < bytes.size()) {
    const std::size_t len = utf8_seq_len(bytes, i);
    if (len == 0) {
      res.text += "\xef\xbf\xbd";  // U+FFFD
      res.replaced_invalid = true;
      ++i;
    } else {
      res.text.append(reinterpret_cast<const char*>(bytes.data() + i), len);
      i += len;
    }
  }
  return res;
}

LmParams::LmParams(const LmConfig& c, Rng& rng) : cfg(c) {
  tok_emb = Tensor("lm.tok_emb", {static_cast<std::size_t>(kVocabSize),
                                  static_cast<std::size_t>(cfg.dim)});
  tok_emb.init_normal(rng, 0.02);
  pos_emb = Tensor("lm.pos_emb", {static_cast<std::size_t>(cfg.t_max),
                                  static_cast<std::size_t>(cfg.dim)});
  pos_emb.init_normal(rng, 0.02);
  vis_w = Tensor("lm.vis_w", {static_cast<std::size_t>(cfg.dim),
                              static_cast<std::size_t>(cfg.visual_dim)});
  vis_w.init_normal(rng, std::sqrt(1.0 / cfg.visual_dim));
  vis_b = Tensor("lm.vis_b", {static_cast<std::size_t>(cfg.dim)});
  blocks.reserve(cfg.num_blocks);
  for (int i = 0; i < cfg.num_blocks; ++i)
    blocks.emplace_back("lm.block" + std::to_string(i), cfg.dim, cfg.heads, /*causal=*/true,
                        rng);
  final_ln = LayerNorm("lm.final_ln", cfg.dim);
  head = Tensor("lm.head", {static_cast<std::size_t>(kVocabSize),
                            static_cast<std::size_t>(cfg.dim)});
  head.init_normal(rng, 0.02);
}

std::vector<Tensor*> LmParams::params() {
  std::vector<Tensor*> p{&tok_emb, &pos_emb, &vis_w, &vis_b};
  for (auto& b : blocks)
    for (Tensor* t : b.params()) p.push_back(t);
  for (Tensor* t : final_ln.params()) p.push_back(t);
  p.push_back(&head);
  return p;
}

std::vector<double> map_visual(const VisualTokenSequence& tokens, const LmParams& params) {
  if (tokens.dim != params.cfg.visual_dim)
    throw ShapeError("map_visual: token dim != cross-modal input dim");
  const int d = params.cfg.dim;
  std::vector<double> out(static_cast<std::size_t>(tokens.count) * d);
  for (int i = 0; i < tokens.count; ++i) {
    double* o = out.data() + static_cast<std::size_t>(i) * d;
    matvec(params.vis_w.value.data(), d, params.cfg.visual_dim, tokens.row(i), o);
    for (int j = 0; j < d; ++j) o[j] += params.vis_b.value[j];
  }
  return out;
}

InputSequence build_input(const std::vector<double>& visual, int n_visual,
                          const std::vector<int>& text, const LmParams& params) {
  const int d = params.cfg.dim;
  if (visual.size() != static_cast<std::size_t>(n_visual) * d)
    throw ShapeError("build_input: visual embedding size mismatch");
  const int total = n_visual + 1 + static_cast<int>(text.size());
  if (total > params.cfg.t_max)
    throw CapacityError("build_input: sequence length " + std::to_string(total) +
                        " exceeds t_max " + std::to_string(params.cfg.t_max));

  InputSequence in;
  in.total = total;
  in.boundary = n_visual;
  in.dim = d;
  in.text_ids.reserve(text.size() + 1);
  in.text_ids.push_back(kBosId);
  in.text_ids.insert(in.text_ids.end(), text.begin(), text.end());
  in.embeddings.resize(static_cast<std::size_t>(total) * d);

  for (int t = 0; t < n_visual; ++t) {
    double* row = in.embeddings.data() + static_cast<std::size_t>(t) * d;
    const double* v = visual.data() + static_cast<std::size_t>(t) * d;
    const double* p = params.pos_emb.value.data() + static_cast<std::size_t>(t) * d;
    for (int j = 0; j < d; ++j) row[j] = v[j] + p[j];
  }
  for (int t = n_visual; t < total; ++t) {
    const int id = in.text_ids[t - n_visual];
    if (id < 0 || id >= kVocabSize) throw InvalidInputError("build_input: token id out of range");
    double* row = in.embeddings.data() + static_cast<std::size_t>(t) * d;
    const double* e = params.tok_emb.value.data() + static_cast<std::size_t>(id) * d;
    const double* p = params.pos_emb.value.data() + static_cast<std::size_t>(t) * d;
    for (int j = 0; j < d; ++j) row[j] = e[j] + p[j];
  }
  return in;
}

std::vector<double> lm_forward(const InputSequence& input, const LmParams& params,
                               LmForwardCache* cache) {
  const int t = input.total, d = input.dim;
  if (d != params.cfg.dim) throw ShapeError("lm_forward: dim mismatch");
  if (cache) cache->blocks.resize(params.blocks.size());
  std::vector<double> cur = input.embeddings;
  std::vector<double> next(cur.size());
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    params.blocks[b].forward(cur.data(), t, next.data(), cache ? &cache->blocks[b] : nullptr);
    for (double v : next)
      if (!std::isfinite(v))
        throw NumericError("lm_forward: non-finite activation after block " + std::to_string(b));
    std::swap(cur, next);
  }
  if (cache) cache->pre_ln = cur;
  std::vector<double> h(cur.size());
  params.final_ln.forward(cur.data(), t, h.data(), cache ? &cache->lnf : nullptr);
  return h;
}

std::vector<double> next_token_distribution(const double* h_t, const LmParams& params) {
  std::vector<double> logits(kVocabSize);
  matvec(params.head.value.data(), kVocabSize, params.cfg.dim, h_t, logits.data());
  softmax_inplace(logits.data(), logits.size());
  return logits;
}

std::vector<double> lm_next_distribution(const std::vector<double>& visual, int n_visual,
                                         const std::vector<int>& text, const LmParams& params) {
  const InputSequence in = build_input(visual, n_visual, text, params);
  const std::vector<double> h = lm_forward(in, params);
  return next_token_distribution(
      h.data() + static_cast<std::size_t>(in.total - 1) * in.dim, params);
}

std::vector<int> greedy_decode(const std::vector<double>& visual, int n_visual,
                               const std::vector<int>& prompt, const LmParams& params,
                               int max_new) {
  const int base = n_visual + 1 + static_cast<int>(prompt.size());
  if (base + max_new > params.cfg.t_max)
    throw CapacityError("greedy_decode: prompt plus max_new exceeds t_max");
  std::vector<int> text = prompt;
  std::vector<int> out;
  for (int step = 0; step < max_new; ++step) {
    const std::vector<double> dist = lm_next_distribution(visual, n_visual, text, params);
    int best = 0;
    for (int v = 1; v < kVocabSize; ++v)
      if (dist[v] > dist[best]) best = v;
    if (best == kEosId) break;
    // Specials stay in the rolling context but never reach the caller,
    // matching beam_search_decode.
    if (best < 256) out.push_back(best);
    text.push_back(best);
  }
  return out;
}

namespace {

// (score desc, ids lexicographically asc)
bool hyp_better(const BeamHypothesis& a, const BeamHypothesis& b, bool length_normalize) {
  const double sa = length_normalize && !a.ids.empty() ? a.score / a.ids.size() : a.score;
  const double sb = length_normalize && !b.ids.empty() ? b.score / b.ids.size() : b.score;
  if (sa != sb) return sa > sb;
  return a.ids < b.ids;
}

}  // namespace

BeamHypothesis beam_search(const std::vector<double>& visual, int n_visual,
                           const std::vector<int>& prompt, const LmParams& params,
                           const BeamConfig& cfg, int max_new) {
  if (cfg.width < 1) throw ConfigError("beam_search: width must be >= 1");
  const int base = n_visual + 1 + static_cast<int>(prompt.size());
  if (base + max_new > params.cfg.t_max)
    throw CapacityError("beam_search: prompt plus max_new exceeds t_max");

  std::vector<BeamHypothesis> live{{{}, 0.0, false}};
  std::vector<BeamHypothesis> finished;
  auto better = [&](const BeamHypothesis& a, const BeamHypothesis& b) {
    return hyp_better(a, b, cfg.length_normalize);
  };

  for (int step = 0; step < max_new && !live.empty(); ++step) {
    std::vector<BeamHypothesis> candidates;
    candidates.reserve(live.size() * kVocabSize);
    for (const BeamHypothesis& hyp : live) {
      std::vector<int> text = prompt;
      text.insert(text.end(), hyp.ids.begin(), hyp.ids.end());
      const std::vector<double> dist = lm_next_distribution(visual, n_visual, text, params);
      for (int v = 0; v < kVocabSize; ++v) {
        BeamHypothesis cand;
        cand.ids = hyp.ids;
        cand.ids.push_back(v);
        cand.score = hyp.score + std::log(dist[v]);
        cand.finished = (v == kEosId);
        candidates.push_back(std::move(cand));
      }
    }
    std::sort(candidates.begin(), candidates.end(), better);
    if (candidates.size() > static_cast<std::size_t>(cfg.width))
      candidates.resize(cfg.width);

    live.clear();
    for (BeamHypothesis& c : candidates) {
      if (c.finished)
        finished.push_back(std::move(c));
      else
        live.push_back(std::move(c));
    }
    std::sort(finished.begin(), finished.end(), better);
    if (finished.size() > static_cast<std::size_t>(cfg.width))
      finished.resize(cfg.width);

    // Stop once a full pool of finished hypotheses dominates every live one.
    if (finished.size() >= static_cast<std::size_t>(cfg.width) && !live.empty()) {
      if (!better(live.front(), finished.back())) return finished.front();
    }
  }

  if (!finished.empty()) return finished.front();
  if (!live.empty()) {
    std::sort(live.begin(), live.end(), better);
    return live.front();
  }
  return {{}, 0.0, false};
}

std::vector<int> beam_search_decode(const std::vector<double>& visual, int n_visual,
                                    const std::vector<int>& prompt, const LmParams& params,
                                    const BeamConfig& cfg, int max_new) {
  const BeamHypothesis best = beam_search(visual, n_visual, prompt, params, cfg, max_new);
  std::vector<int> out;
  for (int id : best.ids)
    if (id < 256) out.push_back(id);
  return out;
}

double sequence_log_prob(const std::vector<double>& visual, int n_visual,
                         const std::vector<int>& prompt, const std::vector<int>& generated,
                         const LmParams& params) {
  std::vector<int> text = prompt;
  text.insert(text.end(), generated.begin(), generated.end());
  const InputSequence in = build_input(visual, n_visual, text, params);
  const std::vector<double> h = lm_forward(in, params);
  // Row predicting generated[i] is the one holding the previous token.
  const int first = n_visual + static_cast<int>(prompt.size());
  double total = 0.0;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    const std::vector<double> dist = next_token_distribution(
        h.data() + static_cast<std::size_t>(first + i) * in.dim, params);
    total += std::log(dist[generated[i]]);
  }
  return total;
}

double lm_answer_loss(const VisualTokenSequence& fused, const std::vector<int>& prompt,
                      const std::vector<int>& answer, LmParams& params, bool with_grad) {
  const int d = params.cfg.dim;
  const int n = fused.count;
  std::vector<int> text = prompt;
  text.insert(text.end(), answer.begin(), answer.end());

  const std::vector<double> visual = map_visual(fused, params);
  const InputSequence in = build_input(visual, n, text, params);
  LmForwardCache cache;
  const std::vector<double> h = lm_forward(in, params, with_grad ? &cache : nullptr);

  const int t_total = in.total;
  const int mask_start = n + static_cast<int>(prompt.size());  // predicts first answer token
  const int n_targets = static_cast<int>(answer.size()) + 1;   // answers plus EOS
  const double inv_targets = 1.0 / n_targets;

  double loss = 0.0;
  std::vector<double> dh;
  if (with_grad) dh.assign(static_cast<std::size_t>(t_total) * d, 0.0);
  for (int t = mask_start; t < t_total; ++t) {
    const int label = (t + 1 < t_total) ? in.text_ids[t + 1 - n] : kEosId;
    std::vector<double> dist =
        next_token_distribution(h.data() + static_cast<std::size_t>(t) * d, params);
    loss -= std::log(std::max(dist[label], 1e-300)) * inv_targets;
    if (with_grad) {
      dist[label] -= 1.0;
      for (double& v : dist) v *= inv_targets;
      matvec_backward(params.head.value.data(), kVocabSize, d,
                      h.data() + static_cast<std::size_t>(t) * d, dist.data(),
                      params.head.grad.data(), dh.data() + static_cast<std::size_t>(t) * d);
    }
  }
  if (!with_grad) return loss;

  std::vector<double> dpre(static_cast<std::size_t>(t_total) * d, 0.0);
  params.final_ln.backward(cache.lnf, dh.data(), t_total, dpre.data());
  std::vector<double> dcur = std::move(dpre);
  for (std::size_t b = params.blocks.size(); b-- > 0;) {
    std::vector<double> dprev(static_cast<std::size_t>(t_total) * d, 0.0);
    params.blocks[b].backward(cache.blocks[b], dcur.data(), t_total, dprev.data());
    dcur = std::move(dprev);
  }

  // Embedding-level grads: visual rows into the cross-modal map, text rows
  // into the token table, every row into its position embedding.
  for (int t = 0; t < t_total; ++t) {
    const double* dr = dcur.data() + static_cast<std::size_t>(t) * d;
    double* dp = params.pos_emb.grad.data() + static_cast<std::size_t>(t) * d;
    for (int j = 0; j < d; ++j) dp[j] += dr[j];
    if (t < n) {
      for (int j = 0; j < d; ++j) params.vis_b.grad[j] += dr[j];
      matvec_backward(params.vis_w.value.data(), d, params.cfg.visual_dim, fused.row(t), dr,
                      params.vis_w.grad.data(), nullptr);
    } else {
      const int id = in.text_ids[t - n];
      double* de = params.tok_emb.grad.data() + static_cast<std::size_t>(id) * d;
      for (int j = 0; j < d; ++j) de[j] += dr[j];
    }
  }
  return loss;
}

}  // namespace occm
