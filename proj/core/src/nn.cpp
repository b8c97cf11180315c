#include "occm/nn.hpp"

#include <cmath>
#include <cstring>

namespace occm {

namespace {
constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_derivative(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

LayerNorm::LayerNorm(const std::string& prefix, int d)
    : dim(d), gain(prefix + ".gain", {static_cast<std::size_t>(d)}),
      bias(prefix + ".bias", {static_cast<std::size_t>(d)}) {
  gain.fill(1.0);
}

void LayerNorm::forward(const double* x, int rows, double* y, Cache* cache) const {
  if (cache) {
    cache->xhat.resize(static_cast<std::size_t>(rows) * dim);
    cache->inv_std.resize(rows);
  }
  for (int t = 0; t < rows; ++t) {
    const double* xr = x + static_cast<std::size_t>(t) * dim;
    double* yr = y + static_cast<std::size_t>(t) * dim;
    double mean = 0.0;
    for (int i = 0; i < dim; ++i) mean += xr[i];
    mean /= dim;
    double var = 0.0;
    for (int i = 0; i < dim; ++i) {
      const double d = xr[i] - mean;
      var += d * d;
    }
    var /= dim;
    const double inv_std = 1.0 / std::sqrt(var + kLnEps);
    for (int i = 0; i < dim; ++i) {
      const double xh = (xr[i] - mean) * inv_std;
      if (cache) cache->xhat[static_cast<std::size_t>(t) * dim + i] = xh;
      yr[i] = gain.value[i] * xh + bias.value[i];
    }
    if (cache) cache->inv_std[t] = inv_std;
  }
}

void LayerNorm::backward(const Cache& cache, const double* dy, int rows, double* dx) {
  for (int t = 0; t < rows; ++t) {
    const double* dyr = dy + static_cast<std::size_t>(t) * dim;
    const double* xh = cache.xhat.data() + static_cast<std::size_t>(t) * dim;
    double* dxr = dx + static_cast<std::size_t>(t) * dim;
    double sum_dxh = 0.0, sum_dxh_xh = 0.0;
    for (int i = 0; i < dim; ++i) {
      gain.grad[i] += dyr[i] * xh[i];
      bias.grad[i] += dyr[i];
      const double dxh = dyr[i] * gain.value[i];
      sum_dxh += dxh;
      sum_dxh_xh += dxh * xh[i];
    }
    const double inv_std = cache.inv_std[t];
    const double inv_dim = 1.0 / dim;
    for (int i = 0; i < dim; ++i) {
      const double dxh = dyr[i] * gain.value[i];
      dxr[i] += inv_std * (dxh - inv_dim * sum_dxh - xh[i] * inv_dim * sum_dxh_xh);
    }
  }
}

std::vector<Tensor*> LayerNorm::params() { return {&gain, &bias}; }

MultiHeadAttention::MultiHeadAttention(const std::string& prefix, int d, int h, bool causal_,
                                       Rng& rng)
    : dim(d),
      heads(h),
      causal(causal_),
      wqkv(prefix + ".wqkv", {static_cast<std::size_t>(3 * d), static_cast<std::size_t>(d)}),
      bqkv(prefix + ".bqkv", {static_cast<std::size_t>(3 * d)}),
      wo(prefix + ".wo", {static_cast<std::size_t>(d), static_cast<std::size_t>(d)}),
      bo(prefix + ".bo", {static_cast<std::size_t>(d)}) {
  if (d % h != 0) throw ConfigError("attention: dim must be divisible by heads");
  wqkv.init_normal(rng, 0.02);
  wo.init_normal(rng, 0.02);
}

void MultiHeadAttention::forward(const double* x, int rows, double* y, Cache* cache) const {
  const int d3 = 3 * dim;
  const int dh = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<double> qkv(static_cast<std::size_t>(rows) * d3);
  for (int t = 0; t < rows; ++t) {
    const double* xr = x + static_cast<std::size_t>(t) * dim;
    double* qr = qkv.data() + static_cast<std::size_t>(t) * d3;
    matvec(wqkv.value.data(), d3, dim, xr, qr);
    for (int i = 0; i < d3; ++i) qr[i] += bqkv.value[i];
  }

  std::vector<double> att(static_cast<std::size_t>(heads) * rows * rows, 0.0);
  std::vector<double> ctx(static_cast<std::size_t>(rows) * dim, 0.0);
  std::vector<double> row(rows);
  for (int h = 0; h < heads; ++h) {
    const int qo = h * dh, ko = dim + h * dh, vo = 2 * dim + h * dh;
    for (int t = 0; t < rows; ++t) {
      const double* q = qkv.data() + static_cast<std::size_t>(t) * d3 + qo;
      const int limit = causal ? t + 1 : rows;
      for (int u = 0; u < limit; ++u) {
        const double* k = qkv.data() + static_cast<std::size_t>(u) * d3 + ko;
        double s = 0.0;
        for (int i = 0; i < dh; ++i) s += q[i] * k[i];
        row[u] = s * scale;
      }
      softmax_inplace(row.data(), limit);
      double* arow = att.data() + (static_cast<std::size_t>(h) * rows + t) * rows;
      double* c = ctx.data() + static_cast<std::size_t>(t) * dim + h * dh;
      for (int u = 0; u < limit; ++u) {
        arow[u] = row[u];
        const double* v = qkv.data() + static_cast<std::size_t>(u) * d3 + vo;
        for (int i = 0; i < dh; ++i) c[i] += row[u] * v[i];
      }
    }
  }

  for (int t = 0; t < rows; ++t) {
    const double* c = ctx.data() + static_cast<std::size_t>(t) * dim;
    double* yr = y + static_cast<std::size_t>(t) * dim;
    matvec(wo.value.data(), dim, dim, c, yr);
    for (int i = 0; i < dim; ++i) yr[i] += bo.value[i];
  }

  if (cache) {
    cache->rows = rows;
    cache->x.assign(x, x + static_cast<std::size_t>(rows) * dim);
    cache->qkv = std::move(qkv);
    cache->att = std::move(att);
    cache->ctx = std::move(ctx);
  }
}

void MultiHeadAttention::backward(const Cache& cache, const double* dy, double* dx) {
  const int rows = cache.rows;
  const int d3 = 3 * dim;
  const int dh = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<double> dctx(static_cast<std::size_t>(rows) * dim, 0.0);
  for (int t = 0; t < rows; ++t) {
    const double* dyr = dy + static_cast<std::size_t>(t) * dim;
    const double* c = cache.ctx.data() + static_cast<std::size_t>(t) * dim;
    for (int i = 0; i < dim; ++i) bo.grad[i] += dyr[i];
    matvec_backward(wo.value.data(), dim, dim, c, dyr, wo.grad.data(),
                    dctx.data() + static_cast<std::size_t>(t) * dim);
  }

  std::vector<double> dqkv(static_cast<std::size_t>(rows) * d3, 0.0);
  std::vector<double> datt(rows);
  std::vector<double> ds(rows);
  for (int h = 0; h < heads; ++h) {
    const int qo = h * dh, ko = dim + h * dh, vo = 2 * dim + h * dh;
    for (int t = 0; t < rows; ++t) {
      const int limit = causal ? t + 1 : rows;
      const double* arow = cache.att.data() + (static_cast<std::size_t>(h) * rows + t) * rows;
      const double* dc = dctx.data() + static_cast<std::size_t>(t) * dim + h * dh;
      double dot = 0.0;
      for (int u = 0; u < limit; ++u) {
        const double* v = cache.qkv.data() + static_cast<std::size_t>(u) * d3 + vo;
        double g = 0.0;
        for (int i = 0; i < dh; ++i) g += dc[i] * v[i];
        datt[u] = g;
        dot += g * arow[u];
        double* dv = dqkv.data() + static_cast<std::size_t>(u) * d3 + vo;
        for (int i = 0; i < dh; ++i) dv[i] += arow[u] * dc[i];
      }
      const double* q = cache.qkv.data() + static_cast<std::size_t>(t) * d3 + qo;
      double* dq = dqkv.data() + static_cast<std::size_t>(t) * d3 + qo;
      for (int u = 0; u < limit; ++u) {
        ds[u] = arow[u] * (datt[u] - dot) * scale;
        const double* k = cache.qkv.data() + static_cast<std::size_t>(u) * d3 + ko;
        double* dk = dqkv.data() + static_cast<std::size_t>(u) * d3 + ko;
        for (int i = 0; i < dh; ++i) {
          dq[i] += ds[u] * k[i];
          dk[i] += ds[u] * q[i];
        }
      }
    }
  }

  for (int t = 0; t < rows; ++t) {
    const double* dqr = dqkv.data() + static_cast<std::size_t>(t) * d3;
    const double* xr = cache.x.data() + static_cast<std::size_t>(t) * dim;
    for (int i = 0; i < d3; ++i) bqkv.grad[i] += dqr[i];
    matvec_backward(wqkv.value.data(), d3, dim, xr, dqr, wqkv.grad.data(),
                    dx + static_cast<std::size_t>(t) * dim);
  }
}

std::vector<Tensor*> MultiHeadAttention::params() { return {&wqkv, &bqkv, &wo, &bo}; }

FeedForward::FeedForward(const std::string& prefix, int d, int h, Rng& rng)
    : dim(d),
      hidden(h),
      w1(prefix + ".w1", {static_cast<std::size_t>(h), static_cast<std::size_t>(d)}),
      b1(prefix + ".b1", {static_cast<std::size_t>(h)}),
      w2(prefix + ".w2", {static_cast<std::size_t>(d), static_cast<std::size_t>(h)}),
      b2(prefix + ".b2", {static_cast<std::size_t>(d)}) {
  w1.init_normal(rng, 0.02);
  w2.init_normal(rng, 0.02);
}

void FeedForward::forward(const double* x, int rows, double* y, Cache* cache) const {
  std::vector<double> pre(static_cast<std::size_t>(rows) * hidden);
  std::vector<double> act(hidden);
  for (int t = 0; t < rows; ++t) {
    const double* xr = x + static_cast<std::size_t>(t) * dim;
    double* pr = pre.data() + static_cast<std::size_t>(t) * hidden;
    matvec(w1.value.data(), hidden, dim, xr, pr);
    for (int i = 0; i < hidden; ++i) {
      pr[i] += b1.value[i];
      act[i] = gelu(pr[i]);
    }
    double* yr = y + static_cast<std::size_t>(t) * dim;
    matvec(w2.value.data(), dim, hidden, act.data(), yr);
    for (int i = 0; i < dim; ++i) yr[i] += b2.value[i];
  }
  if (cache) {
    cache->x.assign(x, x + static_cast<std::size_t>(rows) * dim);
    cache->pre = std::move(pre);
  }
}

void FeedForward::backward(const Cache& cache, const double* dy, int rows, double* dx) {
  std::vector<double> act(hidden), dact(hidden), dpre(hidden);
  for (int t = 0; t < rows; ++t) {
    const double* pr = cache.pre.data() + static_cast<std::size_t>(t) * hidden;
    const double* dyr = dy + static_cast<std::size_t>(t) * dim;
    for (int i = 0; i < hidden; ++i) act[i] = gelu(pr[i]);
    for (int i = 0; i < dim; ++i) b2.grad[i] += dyr[i];
    std::fill(dact.begin(), dact.end(), 0.0);
    matvec_backward(w2.value.data(), dim, hidden, act.data(), dyr, w2.grad.data(), dact.data());
    for (int i = 0; i < hidden; ++i) {
      dpre[i] = dact[i] * gelu_derivative(pr[i]);
      b1.grad[i] += dpre[i];
    }
    const double* xr = cache.x.data() + static_cast<std::size_t>(t) * dim;
    matvec_backward(w1.value.data(), hidden, dim, xr, dpre.data(), w1.grad.data(),
                    dx + static_cast<std::size_t>(t) * dim);
  }
}

std::vector<Tensor*> FeedForward::params() { return {&w1, &b1, &w2, &b2}; }

TransformerBlock::TransformerBlock(const std::string& prefix, int d, int heads, bool causal,
                                   Rng& rng)
    : dim(d),
      ln1(prefix + ".ln1", d),
      ln2(prefix + ".ln2", d),
      attn(prefix + ".attn", d, heads, causal, rng),
      ff(prefix + ".ff", d, 4 * d, rng) {}

void TransformerBlock::forward(const double* x, int rows, double* y, Cache* cache) const {
  const std::size_t n = static_cast<std::size_t>(rows) * dim;
  std::vector<double> ln1_out(n), attn_out(n), resid1(n), ln2_out(n), ff_out(n);
  ln1.forward(x, rows, ln1_out.data(), cache ? &cache->ln1c : nullptr);
  attn.forward(ln1_out.data(), rows, attn_out.data(), cache ? &cache->attc : nullptr);
  for (std::size_t i = 0; i < n; ++i) resid1[i] = x[i] + attn_out[i];
  ln2.forward(resid1.data(), rows, ln2_out.data(), cache ? &cache->ln2c : nullptr);
  ff.forward(ln2_out.data(), rows, ff_out.data(), cache ? &cache->ffc : nullptr);
  for (std::size_t i = 0; i < n; ++i) y[i] = resid1[i] + ff_out[i];
  if (cache) {
    cache->ln1_out = std::move(ln1_out);
    cache->ln2_out = std::move(ln2_out);
    cache->resid1 = std::move(resid1);
  }
}

void TransformerBlock::backward(const Cache& cache, const double* dy, int rows, double* dx) {
  const std::size_t n = static_cast<std::size_t>(rows) * dim;
  std::vector<double> dresid1(dy, dy + n);
  std::vector<double> dln2(n, 0.0);
  ff.backward(cache.ffc, dy, rows, dln2.data());
  ln2.backward(cache.ln2c, dln2.data(), rows, dresid1.data());
  std::vector<double> dln1(n, 0.0);
  attn.backward(cache.attc, dresid1.data(), dln1.data());
  for (std::size_t i = 0; i < n; ++i) dx[i] += dresid1[i];
  ln1.backward(cache.ln1c, dln1.data(), rows, dx);
}

std::vector<Tensor*> TransformerBlock::params() {
  std::vector<Tensor*> p;
  for (Tensor* t : ln1.params()) p.push_back(t);
  for (Tensor* t : attn.params()) p.push_back(t);
  for (Tensor* t : ln2.params()) p.push_back(t);
  for (Tensor* t : ff.params()) p.push_back(t);
  return p;
}

}  // namespace occm
