// Plain (non-differentiating) forward kernels: stable softmax, 3-layer MLP,
// GRU cell. The tape in tape.hpp implements the same math with gradients;
// tests cross-check the two.
#pragma once

#include <vector>

#include "hiker/rng.hpp"
#include "hiker/tensor.hpp"

namespace hiker {

// Max-shifted exp-normalize. Throws on empty or non-finite input.
std::vector<double> softmax(const std::vector<double>& v);

double sigmoid(double x);

// Three linear layers, rectifier on the two hidden ones, linear output.
struct MlpParams {
  Tensor2 w1, w2, w3;  // [h1 x in], [h2 x h1], [out x h2]
  Tensor2 b1, b2, b3;  // row vectors

  int in_dim() const { return w1.cols; }
  int out_dim() const { return w3.rows; }
  void validate() const;
};

MlpParams mlp_zeros(int in, int h1, int h2, int out);
MlpParams mlp_random(int in, int h1, int h2, int out, Rng& rng, double scale_mult = 1.0);

std::vector<double> mlp_forward(const MlpParams& p, const std::vector<double>& x);

// Update/reset/candidate gate convention:
//   z = sigmoid(Wz m + Uz h + bz)
//   r = sigmoid(Wr m + Ur h + br)
//   hc = tanh(Wc m + Uc (r .* h) + bc)
//   h' = (1 - z) .* h + z .* hc
struct GruParams {
  Tensor2 wz, uz, wr, ur, wc, uc;  // all [d x d]
  Tensor2 bz, br, bc;              // row vectors [1 x d]

  int dim() const { return wz.rows; }
  void validate() const;
};

GruParams gru_zeros(int d);
GruParams gru_random(int d, Rng& rng, double scale_mult = 1.0);

std::vector<double> gru_step(const GruParams& p, const std::vector<double>& h,
                             const std::vector<double>& m);

// Cosine of the angle between two nonzero vectors, in [-1, 1].
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

// Value plus analytic gradients w.r.t. both arguments.
double cosine_similarity_grad(const std::vector<double>& a, const std::vector<double>& b,
                              std::vector<double>& grad_a, std::vector<double>& grad_b);

// Uniform(-s, s) fill with s = 1/sqrt(fan_in), the usual dense-layer default.
Tensor2 init_linear(int out, int in, Rng& rng, double scale_mult = 1.0);

}  // namespace hiker
