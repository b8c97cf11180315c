#pragma once

#include <string>
#include <vector>

#include "occm/common.hpp"

namespace occm {

// Sequences are row-major (T x dim) flat buffers.

struct LayerNorm {
  int dim = 0;
  Tensor gain, bias;

  LayerNorm() = default;
  LayerNorm(const std::string& prefix, int dim);

  struct Cache {
    std::vector<double> xhat;
    std::vector<double> inv_std;  // per row
  };

  void forward(const double* x, int rows, double* y, Cache* cache = nullptr) const;
  // Accumulates parameter grads; adds dL/dx into dx.
  void backward(const Cache& cache, const double* dy, int rows, double* dx);

  std::vector<Tensor*> params();
};

struct MultiHeadAttention {
  int dim = 0, heads = 0;
  bool causal = true;
  Tensor wqkv, bqkv;  // (3*dim x dim)
  Tensor wo, bo;      // (dim x dim)

  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& prefix, int dim, int heads, bool causal, Rng& rng);

  struct Cache {
    int rows = 0;
    std::vector<double> x;    // input copy
    std::vector<double> qkv;  // rows x 3*dim
    std::vector<double> att;  // heads x rows x rows
    std::vector<double> ctx;  // rows x dim
  };

  void forward(const double* x, int rows, double* y, Cache* cache = nullptr) const;
  void backward(const Cache& cache, const double* dy, double* dx);

  std::vector<Tensor*> params();
};

struct FeedForward {
  int dim = 0, hidden = 0;
  Tensor w1, b1;  // (hidden x dim)
  Tensor w2, b2;  // (dim x hidden)

  FeedForward() = default;
  FeedForward(const std::string& prefix, int dim, int hidden, Rng& rng);

  struct Cache {
    std::vector<double> x;
    std::vector<double> pre;  // rows x hidden, pre-GELU
  };

  void forward(const double* x, int rows, double* y, Cache* cache = nullptr) const;
  void backward(const Cache& cache, const double* dy, int rows, double* dx);

  std::vector<Tensor*> params();
};

// Pre-norm residual block: x + attn(ln1(x)), then + ff(ln2(.)).
struct TransformerBlock {
  int dim = 0;
  LayerNorm ln1, ln2;
  MultiHeadAttention attn;
  FeedForward ff;

  TransformerBlock() = default;
  TransformerBlock(const std::string& prefix, int dim, int heads, bool causal, Rng& rng);

  struct Cache {
    LayerNorm::Cache ln1c, ln2c;
    MultiHeadAttention::Cache attc;
    FeedForward::Cache ffc;
    std::vector<double> ln1_out, ln2_out, resid1;
  };

  void forward(const double* x, int rows, double* y, Cache* cache = nullptr) const;
  void backward(const Cache& cache, const double* dy, int rows, double* dx);

  std::vector<Tensor*> params();
};

double gelu(double x);
double gelu_derivative(double x);

}  // namespace occm
