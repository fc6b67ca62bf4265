#include "hiker/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hiker {

std::vector<double> softmax(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("softmax: empty input");
  double mx = v[0];
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument("softmax: non-finite entry");
    mx = std::max(mx, x);
  }
  std::vector<double> out(v.size());
  double sum = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void MlpParams::validate() const {
  if (w1.rows != b1.cols || w2.rows != b2.cols || w3.rows != b3.cols ||
      b1.rows != 1 || b2.rows != 1 || b3.rows != 1)
    throw std::invalid_argument("MlpParams: bias shape mismatch");
  if (w2.cols != w1.rows || w3.cols != w2.rows)
    throw std::invalid_argument("MlpParams: layer dims do not chain");
}

MlpParams mlp_zeros(int in, int h1, int h2, int out) {
  MlpParams p;
  p.w1 = Tensor2(h1, in);
  p.w2 = Tensor2(h2, h1);
  p.w3 = Tensor2(out, h2);
  p.b1 = Tensor2(1, h1);
  p.b2 = Tensor2(1, h2);
  p.b3 = Tensor2(1, out);
  return p;
}

Tensor2 init_linear(int out, int in, Rng& rng, double scale_mult) {
  Tensor2 w(out, in);
  const double s = scale_mult / std::sqrt(static_cast<double>(std::max(1, in)));
  for (double& v : w.data) v = rng.uniform(-s, s);
  return w;
}

namespace {

// Small nonzero biases: enough to keep rectifier kinks off exact zero
// without risking whole layers starting dead.
Tensor2 init_bias(int n, Rng& rng) {
  Tensor2 b(1, n);
  for (double& v : b.data) v = rng.uniform(-0.1, 0.1);
  return b;
}

}  // namespace

MlpParams mlp_random(int in, int h1, int h2, int out, Rng& rng, double scale_mult) {
  MlpParams p = mlp_zeros(in, h1, h2, out);
  p.w1 = init_linear(h1, in, rng, scale_mult);
  p.w2 = init_linear(h2, h1, rng, scale_mult);
  p.w3 = init_linear(out, h2, rng, scale_mult);
  p.b1 = init_bias(h1, rng);
  p.b2 = init_bias(h2, rng);
  p.b3 = init_bias(out, rng);
  return p;
}

static std::vector<double> linear(const Tensor2& w, const Tensor2& b,
                                  const std::vector<double>& x) {
  if (w.cols != static_cast<int>(x.size()))
    throw std::invalid_argument("mlp_forward: dimension mismatch");
  std::vector<double> y(w.rows);
  for (int i = 0; i < w.rows; ++i) {
    double s = b.data.empty() ? 0.0 : b.at(0, i);
    for (int j = 0; j < w.cols; ++j) s += w.at(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

std::vector<double> mlp_forward(const MlpParams& p, const std::vector<double>& x) {
  p.validate();
  std::vector<double> h = linear(p.w1, p.b1, x);
  for (double& v : h) v = std::max(0.0, v);
  h = linear(p.w2, p.b2, h);
  for (double& v : h) v = std::max(0.0, v);
  return linear(p.w3, p.b3, h);
}

void GruParams::validate() const {
  const int d = wz.rows;
  auto square = [d](const Tensor2& t) { return t.rows == d && t.cols == d; };
  if (!square(wz) || !square(uz) || !square(wr) || !square(ur) || !square(wc) || !square(uc))
    throw std::invalid_argument("GruParams: gate matrices must be d x d");
  if (bz.rows != 1 || bz.cols != d || br.rows != 1 || br.cols != d || bc.rows != 1 ||
      bc.cols != d)
    throw std::invalid_argument("GruParams: bias shape mismatch");
}

GruParams gru_zeros(int d) {
  GruParams p;
  p.wz = Tensor2(d, d);
  p.uz = Tensor2(d, d);
  p.wr = Tensor2(d, d);
  p.ur = Tensor2(d, d);
  p.wc = Tensor2(d, d);
  p.uc = Tensor2(d, d);
  p.bz = Tensor2(1, d);
  p.br = Tensor2(1, d);
  p.bc = Tensor2(1, d);
  return p;
}

GruParams gru_random(int d, Rng& rng, double scale_mult) {
  GruParams p = gru_zeros(d);
  p.wz = init_linear(d, d, rng, scale_mult);
  p.uz = init_linear(d, d, rng, scale_mult);
  p.wr = init_linear(d, d, rng, scale_mult);
  p.ur = init_linear(d, d, rng, scale_mult);
  p.wc = init_linear(d, d, rng, scale_mult);
  p.uc = init_linear(d, d, rng, scale_mult);
  p.bz = init_bias(d, rng);
  p.br = init_bias(d, rng);
  p.bc = init_bias(d, rng);
  return p;
}

std::vector<double> gru_step(const GruParams& p, const std::vector<double>& h,
                             const std::vector<double>& m) {
  p.validate();
  const int d = p.dim();
  if (static_cast<int>(h.size()) != d || static_cast<int>(m.size()) != d)
    throw std::invalid_argument("gru_step: dimension mismatch");
  std::vector<double> out(d);
  std::vector<double> rh(d);
  for (int i = 0; i < d; ++i) {
    double zr = p.bz.at(0, i), rr = p.br.at(0, i);
    for (int j = 0; j < d; ++j) {
      zr += p.wz.at(i, j) * m[j] + p.uz.at(i, j) * h[j];
      rr += p.wr.at(i, j) * m[j] + p.ur.at(i, j) * h[j];
    }
    rh[i] = sigmoid(rr) * h[i];
    out[i] = sigmoid(zr);  // z, reused below
  }
  for (int i = 0; i < d; ++i) {
    double c = p.bc.at(0, i);
    for (int j = 0; j < d; ++j) c += p.wc.at(i, j) * m[j] + p.uc.at(i, j) * rh[j];
    const double z = out[i];
    out[i] = (1.0 - z) * h[i] + z * std::tanh(c);
  }
  return out;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: length mismatch");
  const double na = norm2(a), nb = norm2(b);
  if (na == 0.0 || nb == 0.0)
    throw std::invalid_argument("cosine_similarity: zero-norm vector");
  return dot(a, b) / (na * nb);
}

double cosine_similarity_grad(const std::vector<double>& a, const std::vector<double>& b,
                              std::vector<double>& grad_a, std::vector<double>& grad_b) {
  const double na = norm2(a), nb = norm2(b);
  if (na == 0.0 || nb == 0.0)
    throw std::invalid_argument("cosine_similarity_grad: zero-norm vector");
  const double c = dot(a, b) / (na * nb);
  grad_a.resize(a.size());
  grad_b.resize(b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    grad_a[i] = b[i] / (na * nb) - c * a[i] / (na * na);
    grad_b[i] = a[i] / (na * nb) - c * b[i] / (nb * nb);
  }
  return c;
}

}  // namespace hiker
