#include "occm/vision.hpp"

#include <cmath>

namespace occm {

PatchEncoder::PatchEncoder(const PatchEncoderConfig& c, Rng& rng) : cfg(c) {
  if (cfg.image_side % cfg.patch != 0)
    throw ConfigError("patch encoder: image side must be divisible by patch size");
  proj = Tensor("vision.proj", {static_cast<std::size_t>(cfg.dim),
                                static_cast<std::size_t>(cfg.patch_dim())});
  proj.init_normal(rng, std::sqrt(1.0 / cfg.patch_dim()));
  bias = Tensor("vision.bias", {static_cast<std::size_t>(cfg.dim)});
  block = TransformerBlock("vision.block", cfg.dim, cfg.heads, /*causal=*/false, rng);
}

VisualTokenSequence PatchEncoder::encode(const RasterImage& image, TokenSource tag,
                                         Cache* cache) const {
  if (image.width != cfg.image_side || image.height != cfg.image_side)
    throw ShapeError("patch encoder: image is " + std::to_string(image.width) + "x" +
                     std::to_string(image.height) + ", expected side " +
                     std::to_string(cfg.image_side));
  const int n = cfg.token_count();
  const int side = cfg.tokens_per_side();
  const int pd = cfg.patch_dim();

  std::vector<double> patches(static_cast<std::size_t>(n) * pd);
  for (int py = 0; py < side; ++py)
    for (int px = 0; px < side; ++px) {
      double* dst = patches.data() + static_cast<std::size_t>(py * side + px) * pd;
      std::size_t o = 0;
      for (int y = 0; y < cfg.patch; ++y)
        for (int x = 0; x < cfg.patch; ++x) {
          const std::uint8_t* p = image.at(px * cfg.patch + x, py * cfg.patch + y);
          dst[o++] = p[0] / 255.0;
          dst[o++] = p[1] / 255.0;
          dst[o++] = p[2] / 255.0;
        }
    }

  VisualTokenSequence out;
  out.count = n;
  out.dim = cfg.dim;
  out.source = tag;
  out.tokens.resize(static_cast<std::size_t>(n) * cfg.dim);
  std::vector<double> linear(out.tokens.size());
  for (int i = 0; i < n; ++i) {
    double* tok = linear.data() + static_cast<std::size_t>(i) * cfg.dim;
    matvec(proj.value.data(), cfg.dim, pd, patches.data() + static_cast<std::size_t>(i) * pd, tok);
    for (int d = 0; d < cfg.dim; ++d) tok[d] += bias.value[d];
  }
  if (cfg.attention) {
    block.forward(linear.data(), n, out.tokens.data(), cache ? &cache->blockc : nullptr);
  } else {
    out.tokens = linear;
  }
  if (cache) {
    cache->patches = std::move(patches);
    cache->linear = std::move(linear);
  }
  return out;
}

void PatchEncoder::backward(const Cache& cache, const std::vector<double>& dtokens) {
  const int n = cfg.token_count();
  const int pd = cfg.patch_dim();
  std::vector<double> dlinear(static_cast<std::size_t>(n) * cfg.dim, 0.0);
  if (cfg.attention) {
    block.backward(cache.blockc, dtokens.data(), n, dlinear.data());
  } else {
    dlinear = dtokens;
  }
  for (int i = 0; i < n; ++i) {
    const double* dl = dlinear.data() + static_cast<std::size_t>(i) * cfg.dim;
    for (int d = 0; d < cfg.dim; ++d) bias.grad[d] += dl[d];
    matvec_backward(proj.value.data(), cfg.dim, pd,
                    cache.patches.data() + static_cast<std::size_t>(i) * pd, dl,
                    proj.grad.data(), nullptr);
  }
}

std::vector<Tensor*> PatchEncoder::params() {
  std::vector<Tensor*> p{&proj, &bias};
  if (cfg.attention)
    for (Tensor* t : block.params()) p.push_back(t);
  return p;
}

VisualTokenSequence fuse_tokens(const VisualTokenSequence& x1, const VisualTokenSequence& x2,
                                double alpha) {
  if (x1.count != x2.count || x1.dim != x2.dim)
    throw ShapeError("fuse_tokens: token sequence shapes differ");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ConfigError("fuse_tokens: alpha must lie in [0,1]");
  VisualTokenSequence out;
  out.count = x1.count;
  out.dim = x1.dim;
  out.source = TokenSource::fused;
  out.tokens.resize(x1.tokens.size());
  for (std::size_t i = 0; i < out.tokens.size(); ++i)
    out.tokens[i] = alpha * x1.tokens[i] + (1.0 - alpha) * x2.tokens[i];
  return out;
}

CategoryHead::CategoryHead(int d, std::vector<std::string> cats, Rng& rng)
    : dim(d), categories(std::move(cats)) {
  if (categories.size() < 2) throw ConfigError("category head: need at least 2 categories");
  w = Tensor("vision.head.w", {categories.size(), static_cast<std::size_t>(d)});
  w.init_normal(rng, 0.02);
  b = Tensor("vision.head.b", {categories.size()});
}

std::vector<double> CategoryHead::classify(const VisualTokenSequence& tokens,
                                           Cache* cache) const {
  if (tokens.dim != dim) throw ShapeError("category head: token dim mismatch");
  if (tokens.count < 1) throw ShapeError("category head: empty token sequence");
  std::vector<double> pooled(dim, 0.0);
  for (int i = 0; i < tokens.count; ++i) {
    const double* r = tokens.row(i);
    for (int d = 0; d < dim; ++d) pooled[d] += r[d];
  }
  for (int d = 0; d < dim; ++d) pooled[d] /= tokens.count;

  std::vector<double> probs(categories.size());
  matvec(w.value.data(), categories.size(), dim, pooled.data(), probs.data());
  for (std::size_t c = 0; c < categories.size(); ++c) probs[c] += b.value[c];
  softmax_inplace(probs.data(), probs.size());
  if (cache) {
    cache->pooled = pooled;
    cache->probs = probs;
    cache->token_count = tokens.count;
  }
  return probs;
}

void CategoryHead::backward_ce(const Cache& cache, int label, std::vector<double>* dtokens) {
  const std::size_t ncat = categories.size();
  std::vector<double> dlogits(cache.probs);
  dlogits[label] -= 1.0;
  std::vector<double> dpooled(dim, 0.0);
  for (std::size_t c = 0; c < ncat; ++c) b.grad[c] += dlogits[c];
  matvec_backward(w.value.data(), ncat, dim, cache.pooled.data(), dlogits.data(), w.grad.data(),
                  dpooled.data());
  if (dtokens) {
    dtokens->assign(static_cast<std::size_t>(cache.token_count) * dim, 0.0);
    const double inv = 1.0 / cache.token_count;
    for (int i = 0; i < cache.token_count; ++i)
      for (int d = 0; d < dim; ++d)
        (*dtokens)[static_cast<std::size_t>(i) * dim + d] = dpooled[d] * inv;
  }
}

std::vector<Tensor*> CategoryHead::params() { return {&w, &b}; }

}  // namespace occm
