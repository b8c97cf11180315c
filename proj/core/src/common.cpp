#include "occm/common.hpp"

#include <algorithm>
#include <cmath>

namespace occm {

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), gen_(splitmix64(seed)) {}

std::uint64_t Rng::next_u64() { return gen_(); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::below(std::uint64_t n) {
  // Modulo bias is negligible for n << 2^64.
  return n == 0 ? 0 : next_u64() % n;
}

double Rng::normal(double mean, double stddev) {
  if (have_spare_) {
    have_spare_ = false;
    return mean + stddev * spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return mean + stddev * r * std::cos(a);
}

Rng Rng::fork(std::uint64_t stream) const {
  return Rng(splitmix64(seed_ ^ splitmix64(stream + 0x5851f42d4c957f2dULL)));
}

Tensor::Tensor(std::string n, std::vector<std::size_t> s) : name(std::move(n)), shape(std::move(s)) {
  std::size_t total = 1;
  for (std::size_t d : shape) total *= d;
  value.assign(total, 0.0);
  grad.assign(total, 0.0);
}

void Tensor::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

void Tensor::fill(double v) { std::fill(value.begin(), value.end(), v); }

void Tensor::init_normal(Rng& rng, double stddev) {
  for (double& v : value) v = rng.normal(0.0, stddev);
}

void zero_grads(const std::vector<Tensor*>& params) {
  for (Tensor* p : params) p->zero_grad();
}

void matvec(const double* w, std::size_t out, std::size_t in, const double* x, double* y) {
  for (std::size_t o = 0; o < out; ++o) {
    const double* row = w + o * in;
    double acc = 0.0;
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

void matvec_backward(const double* w, std::size_t out, std::size_t in, const double* x,
                     const double* dy, double* dw, double* dx) {
  for (std::size_t o = 0; o < out; ++o) {
    const double g = dy[o];
    if (g == 0.0) continue;
    const double* row = w + o * in;
    double* drow = dw + o * in;
    for (std::size_t i = 0; i < in; ++i) {
      drow[i] += g * x[i];
      if (dx) dx[i] += g * row[i];
    }
  }
}

void softmax_inplace(double* v, std::size_t n) {
  double mx = v[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, v[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = std::exp(v[i] - mx);
    sum += v[i];
  }
  const double inv = 1.0 / sum;
  for (std::size_t i = 0; i < n; ++i) v[i] *= inv;
}

}  // namespace occm
