#pragma once

#include <string>
#include <vector>

#include "occm/common.hpp"
#include "occm/geometry.hpp"

namespace occm {

// Fully connected net, tanh between layers, linear head.
struct Mlp {
  std::vector<std::size_t> dims;  // [in, hidden..., out]
  std::vector<Tensor> weights;    // layer l: (dims[l+1] x dims[l])
  std::vector<Tensor> biases;

  Mlp() = default;
  Mlp(const std::string& prefix, std::vector<std::size_t> layer_dims, Rng& rng);

  struct Cache {
    std::vector<std::vector<double>> activations;  // per layer input (post-nonlinearity)
    std::vector<std::vector<double>> pre;          // pre-nonlinearity per hidden layer
  };

  std::vector<double> forward(const std::vector<double>& x, Cache* cache = nullptr) const;
  // dout: gradient w.r.t. output. Accumulates parameter grads; returns dL/dx if dx != nullptr.
  void backward(const Cache& cache, const std::vector<double>& dout,
                std::vector<double>* dx = nullptr);

  std::vector<Tensor*> params();
};

enum class SdfRole { subject, object };

// Learned SDF decoder: scalar field over [point feature ; latent code].
struct SdfDecoder {
  SdfRole role = SdfRole::object;
  int bands = 4;
  int latent_dim = 16;
  Mlp net;

  SdfDecoder() = default;
  SdfDecoder(SdfRole r, int bands, int latent_dim, int hidden, int hidden_layers, Rng& rng);

  int feature_dim() const { return 3 + 6 * bands; }
  int input_dim() const { return feature_dim() + latent_dim; }

  // f([e_v ; latent]) for an already-encoded point feature.
  double eval_feature(const std::vector<double>& point_feature, const Tensor& latent) const;
  // Convenience: positional-encode then evaluate.
  double eval(const Point3& v, const Tensor& latent) const;

  // Training path: returns value, fills cache for backward.
  double forward(const Point3& v, const Tensor& latent, Mlp::Cache& cache,
                 std::vector<double>* input_out = nullptr) const;
  // dvalue: dL/doutput. Accumulates grads into net params and latent.grad.
  void backward(const Mlp::Cache& cache, double dvalue, Tensor& latent);

  std::vector<Tensor*> params();
};

}  // namespace occm
