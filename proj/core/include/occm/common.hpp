#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace occm {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Tensor/sequence dimension mismatch.
struct ShapeError : Error {
  using Error::Error;
};
// Non-finite or otherwise malformed input value.
struct InvalidInputError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
// Sequence would exceed the model's position capacity.
struct CapacityError : Error {
  using Error::Error;
};
// Overflow / divergence detected mid-computation.
struct NumericError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

// Deterministic RNG with cheap derived sub-streams. All sampling goes through
// hand-rolled conversions so sequences are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // [0, 1)
  double uniform();
  double uniform(double lo, double hi);
  // [0, n)
  std::uint64_t below(std::uint64_t n);
  double normal(double mean = 0.0, double stddev = 1.0);

  // Independent generator for stream index `stream`, derived from this
  // generator's seed without advancing it.
  Rng fork(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Named value+gradient buffer. Row-major when 2-D.
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;

  Tensor() = default;
  Tensor(std::string n, std::vector<std::size_t> s);

  std::size_t size() const { return value.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(std::size_t i, std::size_t j) { return value[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return value[i * cols() + j]; }

  void zero_grad();
  void fill(double v);
  void init_normal(Rng& rng, double stddev);
};

void zero_grads(const std::vector<Tensor*>& params);

// y = W x, W row-major (out x in).
void matvec(const double* w, std::size_t out, std::size_t in, const double* x, double* y);
// dx += W^T dy; dW += dy x^T.
void matvec_backward(const double* w, std::size_t out, std::size_t in, const double* x,
                     const double* dy, double* dw, double* dx);

// In-place numerically stable softmax over n entries.
void softmax_inplace(double* v, std::size_t n);

}  // namespace occm
