#pragma once

#include <string>
#include <vector>

#include "occm/nn.hpp"
#include "occm/vision.hpp"

namespace occm {

// Byte-level vocabulary: 0..255 raw bytes plus BOS/EOS/PAD.
inline constexpr int kVocabSize = 259;
inline constexpr int kBosId = 256;
inline constexpr int kEosId = 257;
inline constexpr int kPadId = 258;

// One id per byte of the UTF-8 string; no specials added.
std::vector<int> tokenize(const std::string& text);

struct DetokenizeResult {
  std::string text;
  bool replaced_invalid = false;  // invalid UTF-8 bytes became U+FFFD
};

// Drops special ids (>= 256), decodes the rest as UTF-8.
DetokenizeResult detokenize(const std::vector<int>& ids);

struct LmConfig {
  int dim = 64;       // D
  int heads = 4;
  int num_blocks = 2;
  int t_max = 160;
  int visual_dim = 64;  // D_v
};

struct LmParams {
  LmConfig cfg;
  Tensor tok_emb;  // V x D
  Tensor pos_emb;  // t_max x D
  Tensor vis_w;    // D x D_v cross-modal map
  Tensor vis_b;    // D
  std::vector<TransformerBlock> blocks;
  LayerNorm final_ln;
  Tensor head;  // V x D vocabulary head

  LmParams() = default;
  LmParams(const LmConfig& cfg, Rng& rng);

  std::vector<Tensor*> params();
};

// Affine map of each visual token into text-embedding space: N x D output.
std::vector<double> map_visual(const VisualTokenSequence& tokens, const LmParams& params);

struct InputSequence {
  int total = 0;     // T
  int boundary = 0;  // N (BOS sits at this row)
  int dim = 0;
  std::vector<double> embeddings;  // T x D, position embeddings included
  std::vector<int> text_ids;       // BOS followed by the text ids
};

// Rows: visual embeddings, then BOS, then text token embeddings.
InputSequence build_input(const std::vector<double>& visual, int n_visual,
                          const std::vector<int>& text, const LmParams& params);

struct LmForwardCache {
  std::vector<TransformerBlock::Cache> blocks;
  LayerNorm::Cache lnf;
  std::vector<double> pre_ln;  // block stack output before final norm
};

// Causal transformer; returns final-layer hidden states (T x D).
std::vector<double> lm_forward(const InputSequence& input, const LmParams& params,
                               LmForwardCache* cache = nullptr);

// SoftMax[H h_t]: probability vector over the vocabulary.
std::vector<double> next_token_distribution(const double* h_t, const LmParams& params);

// Next-token distribution after (visual, BOS, text) context.
std::vector<double> lm_next_distribution(const std::vector<double>& visual, int n_visual,
                                         const std::vector<int>& text, const LmParams& params);

// Argmax decoding; ties go to the lowest id. Stops at EOS or after max_new
// tokens; special ids never appear in the returned ids.
std::vector<int> greedy_decode(const std::vector<double>& visual, int n_visual,
                               const std::vector<int>& prompt, const LmParams& params,
                               int max_new);

struct BeamHypothesis {
  std::vector<int> ids;  // includes the terminating EOS when finished
  double score = 0.0;    // cumulative log-probability
  bool finished = false;
};

struct BeamConfig {
  int width = 4;
  bool length_normalize = false;
};

BeamHypothesis beam_search(const std::vector<double>& visual, int n_visual,
                           const std::vector<int>& prompt, const LmParams& params,
                           const BeamConfig& cfg, int max_new);

// Best hypothesis with special ids stripped.
std::vector<int> beam_search_decode(const std::vector<double>& visual, int n_visual,
                                    const std::vector<int>& prompt, const LmParams& params,
                                    const BeamConfig& cfg, int max_new);

// Teacher-forced sum of per-step log p over `generated` (EOS included if present).
double sequence_log_prob(const std::vector<double>& visual, int n_visual,
                         const std::vector<int>& prompt, const std::vector<int>& generated,
                         const LmParams& params);

// Mean next-token cross-entropy over the answer tokens plus EOS; question and
// visual positions are excluded. With with_grad, accumulates grads into every
// LM tensor including the cross-modal map.
double lm_answer_loss(const VisualTokenSequence& fused, const std::vector<int>& prompt,
                      const std::vector<int>& answer, LmParams& params, bool with_grad);

}  // namespace occm
