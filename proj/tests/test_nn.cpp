#include <cmath>
#include <vector>

#include "doctest.h"
#include "occm/nn.hpp"

using namespace occm;

TEST_CASE("matvec computes W x") {
  const double w[6] = {1, 2, 3, 4, 5, 6};  // 2x3
  const double x[3] = {1, 0, -1};
  double y[2];
  matvec(w, 2, 3, x, y);
  CHECK(y[0] == doctest::Approx(-2.0));
  CHECK(y[1] == doctest::Approx(-2.0));
}

TEST_CASE("softmax normalizes and is shift invariant") {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(16), b(16);
    for (int i = 0; i < 16; ++i) {
      a[i] = rng.normal(0, 3);
      b[i] = a[i] + 11.5;
    }
    softmax_inplace(a.data(), a.size());
    softmax_inplace(b.data(), b.size());
    double sum = 0.0;
    for (int i = 0; i < 16; ++i) {
      sum += a[i];
      CHECK(std::abs(a[i] - b[i]) < 1e-9);
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("layer norm output has zero mean and unit variance per row") {
  Rng rng(22);
  LayerNorm ln("ln", 32);
  std::vector<double> x(2 * 32), y(2 * 32);
  for (double& v : x) v = rng.normal(1.5, 2.0);
  ln.forward(x.data(), 2, y.data());
  for (int r = 0; r < 2; ++r) {
    double mean = 0, var = 0;
    for (int i = 0; i < 32; ++i) mean += y[r * 32 + i];
    mean /= 32;
    for (int i = 0; i < 32; ++i) var += (y[r * 32 + i] - mean) * (y[r * 32 + i] - mean);
    var /= 32;
    CHECK(std::abs(mean) < 1e-9);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("gelu matches its derivative numerically") {
  for (double x : {-2.0, -0.5, 0.0, 0.3, 1.7}) {
    const double h = 1e-6;
    const double fd = (gelu(x + h) - gelu(x - h)) / (2 * h);
    CHECK(gelu_derivative(x) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("causal attention ignores future rows") {
  Rng rng(23);
  MultiHeadAttention att("att", 16, 4, /*causal=*/true, rng);
  const int rows = 6;
  std::vector<double> x(rows * 16), y1(rows * 16), y2(rows * 16);
  for (double& v : x) v = rng.normal();
  att.forward(x.data(), rows, y1.data());
  x[5 * 16 + 3] += 10.0;  // perturb the last row
  att.forward(x.data(), rows, y2.data());
  for (int i = 0; i < 5 * 16; ++i) CHECK(std::abs(y1[i] - y2[i]) < 1e-9);
}

TEST_CASE("bidirectional attention sees every row") {
  Rng rng(24);
  MultiHeadAttention att("att", 16, 4, /*causal=*/false, rng);
  const int rows = 4;
  std::vector<double> x(rows * 16), y1(rows * 16), y2(rows * 16);
  for (double& v : x) v = rng.normal();
  att.forward(x.data(), rows, y1.data());
  x[3 * 16] += 5.0;
  att.forward(x.data(), rows, y2.data());
  double diff = 0.0;
  for (int i = 0; i < 16; ++i) diff += std::abs(y1[i] - y2[i]);
  CHECK(diff > 1e-9);
}

TEST_CASE("transformer block keeps the sequence shape and is deterministic") {
  Rng rng(25);
  TransformerBlock block("blk", 32, 4, true, rng);
  const int rows = 5;
  std::vector<double> x(rows * 32), y1(rows * 32), y2(rows * 32);
  for (double& v : x) v = rng.normal();
  block.forward(x.data(), rows, y1.data());
  block.forward(x.data(), rows, y2.data());
  CHECK(y1 == y2);
}
