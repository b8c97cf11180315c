#include "occm/mlp.hpp"

#include <cmath>

namespace occm {

Mlp::Mlp(const std::string& prefix, std::vector<std::size_t> layer_dims, Rng& rng)
    : dims(std::move(layer_dims)) {
  if (dims.size() < 2) throw ConfigError("Mlp: need at least input and output dims");
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Tensor w(prefix + ".w" + std::to_string(l), {dims[l + 1], dims[l]});
    w.init_normal(rng, std::sqrt(1.0 / static_cast<double>(dims[l])));
    weights.push_back(std::move(w));
    biases.emplace_back(prefix + ".b" + std::to_string(l), std::vector<std::size_t>{dims[l + 1]});
  }
}

std::vector<double> Mlp::forward(const std::vector<double>& x, Cache* cache) const {
  if (x.size() != dims.front())
    throw ShapeError("Mlp: input size " + std::to_string(x.size()) + " != " +
                     std::to_string(dims.front()));
  std::vector<double> cur = x;
  if (cache) {
    cache->activations.clear();
    cache->pre.clear();
    cache->activations.push_back(cur);
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    std::vector<double> next(dims[l + 1]);
    matvec(weights[l].value.data(), dims[l + 1], dims[l], cur.data(), next.data());
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += biases[l].value[i];
    const bool last = (l + 1 == weights.size());
    if (!last) {
      if (cache) cache->pre.push_back(next);
      for (double& v : next) v = std::tanh(v);
    }
    cur = std::move(next);
    if (cache && !last) cache->activations.push_back(cur);
  }
  return cur;
}

void Mlp::backward(const Cache& cache, const std::vector<double>& dout,
                   std::vector<double>* dx) {
  std::vector<double> dcur = dout;
  for (std::size_t li = weights.size(); li-- > 0;) {
    const bool last = (li + 1 == weights.size());
    if (!last) {
      // through tanh
      const std::vector<double>& pre = cache.pre[li];
      for (std::size_t i = 0; i < dcur.size(); ++i) {
        const double t = std::tanh(pre[i]);
        dcur[i] *= 1.0 - t * t;
      }
    }
    const std::vector<double>& input = cache.activations[li];
    std::vector<double> dinput(dims[li], 0.0);
    for (std::size_t i = 0; i < dcur.size(); ++i) biases[li].grad[i] += dcur[i];
    matvec_backward(weights[li].value.data(), dims[li + 1], dims[li], input.data(),
                    dcur.data(), weights[li].grad.data(), dinput.data());
    dcur = std::move(dinput);
  }
  if (dx) *dx = std::move(dcur);
}

std::vector<Tensor*> Mlp::params() {
  std::vector<Tensor*> p;
  for (auto& w : weights) p.push_back(&w);
  for (auto& b : biases) p.push_back(&b);
  return p;
}

SdfDecoder::SdfDecoder(SdfRole r, int bands_, int latent_dim_, int hidden, int hidden_layers,
                       Rng& rng)
    : role(r), bands(bands_), latent_dim(latent_dim_) {
  std::vector<std::size_t> dims;
  dims.push_back(static_cast<std::size_t>(input_dim()));
  for (int i = 0; i < hidden_layers; ++i) dims.push_back(static_cast<std::size_t>(hidden));
  dims.push_back(1);
  const char* tag = (r == SdfRole::subject) ? "sdf.subject" : "sdf.object";
  net = Mlp(tag, dims, rng);
}

double SdfDecoder::eval_feature(const std::vector<double>& point_feature,
                                const Tensor& latent) const {
  if (static_cast<int>(point_feature.size()) != feature_dim())
    throw ShapeError("SdfDecoder: point feature dim mismatch");
  if (static_cast<int>(latent.size()) != latent_dim)
    throw ShapeError("SdfDecoder: latent dim mismatch");
  std::vector<double> input = point_feature;
  input.insert(input.end(), latent.value.begin(), latent.value.end());
  return net.forward(input)[0];
}

double SdfDecoder::eval(const Point3& v, const Tensor& latent) const {
  return eval_feature(positional_encode(v, bands), latent);
}

double SdfDecoder::forward(const Point3& v, const Tensor& latent, Mlp::Cache& cache,
                           std::vector<double>* input_out) const {
  if (static_cast<int>(latent.size()) != latent_dim)
    throw ShapeError("SdfDecoder: latent dim mismatch");
  std::vector<double> input = positional_encode(v, bands);
  input.insert(input.end(), latent.value.begin(), latent.value.end());
  if (input_out) *input_out = input;
  return net.forward(input, &cache)[0];
}

void SdfDecoder::backward(const Mlp::Cache& cache, double dvalue, Tensor& latent) {
  std::vector<double> dx;
  net.backward(cache, {dvalue}, &dx);
  for (int i = 0; i < latent_dim; ++i) latent.grad[i] += dx[feature_dim() + i];
}

std::vector<Tensor*> SdfDecoder::params() { return net.params(); }

}  // namespace occm
