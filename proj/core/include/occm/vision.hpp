#pragma once

#include <string>
#include <vector>

#include "occm/nn.hpp"
#include "occm/render.hpp"

namespace occm {

enum class TokenSource { occluded_rgb, reconstructed, fused };

struct VisualTokenSequence {
  int count = 0;  // N
  int dim = 0;    // D_v
  std::vector<double> tokens;  // N x D_v
  TokenSource source = TokenSource::occluded_rgb;

  double* row(int i) { return tokens.data() + static_cast<std::size_t>(i) * dim; }
  const double* row(int i) const { return tokens.data() + static_cast<std::size_t>(i) * dim; }
};

struct PatchEncoderConfig {
  int image_side = 64;
  int patch = 16;
  int dim = 64;  // D_v
  int heads = 4;
  bool attention = true;

  int tokens_per_side() const { return image_side / patch; }
  int token_count() const { return tokens_per_side() * tokens_per_side(); }
  int patch_dim() const { return patch * patch * 3; }
};

// Linear per-patch projection with an optional single bidirectional
// self-attention block for global mixing.
struct PatchEncoder {
  PatchEncoderConfig cfg;
  Tensor proj;  // (dim x patch_dim)
  Tensor bias;  // (dim)
  TransformerBlock block;

  PatchEncoder() = default;
  PatchEncoder(const PatchEncoderConfig& cfg, Rng& rng);

  struct Cache {
    std::vector<double> patches;  // N x patch_dim
    std::vector<double> linear;   // N x dim, pre-attention
    TransformerBlock::Cache blockc;
  };

  VisualTokenSequence encode(const RasterImage& image, TokenSource tag,
                             Cache* cache = nullptr) const;
  // dtokens: gradient w.r.t. the encoder output (N x dim).
  void backward(const Cache& cache, const std::vector<double>& dtokens);

  std::vector<Tensor*> params();
};

// Eq-style alpha blend: alpha*x1 + (1-alpha)*x2.
VisualTokenSequence fuse_tokens(const VisualTokenSequence& x1, const VisualTokenSequence& x2,
                                double alpha);

struct CategoryHead {
  int dim = 0;
  std::vector<std::string> categories;
  Tensor w;  // (C x dim)
  Tensor b;  // (C)

  CategoryHead() = default;
  CategoryHead(int dim, std::vector<std::string> categories, Rng& rng);

  struct Cache {
    std::vector<double> pooled;
    std::vector<double> probs;
    int token_count = 0;
  };

  // Mean-pool tokens, linear map, softmax.
  std::vector<double> classify(const VisualTokenSequence& tokens, Cache* cache = nullptr) const;
  // Cross-entropy backward for a gold label; accumulates head grads and, if
  // dtokens != nullptr, the gradient w.r.t. the token matrix.
  void backward_ce(const Cache& cache, int label, std::vector<double>* dtokens);

  std::vector<Tensor*> params();
};

}  // namespace occm
