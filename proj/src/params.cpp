#include "hiker/params.hpp"

#include <stdexcept>

#include "hiker/rng.hpp"

namespace hiker {

void ModelDims::validate() const {
  if (d < 1 || d_emb < 1 || d_vis < 1) throw std::invalid_argument("ModelDims: dims must be >= 1");
  if (n_ent < 1 || n_pred < 1) throw std::invalid_argument("ModelDims: class counts must be >= 1");
  if (g1e < 1 || g1e > g2e || g2e > n_ent)
    throw std::invalid_argument("ModelDims: entity group counts inconsistent");
  if (g1p < 1 || g1p > g2p || g2p > n_pred)
    throw std::invalid_argument("ModelDims: predicate group counts inconsistent");
}

std::vector<const Tensor2*> mlp_tensors(const MlpParams& p) {
  return {&p.w1, &p.b1, &p.w2, &p.b2, &p.w3, &p.b3};
}

std::vector<const Tensor2*> gru_tensors(const GruParams& p) {
  return {&p.wz, &p.uz, &p.bz, &p.wr, &p.ur, &p.br, &p.wc, &p.uc, &p.bc};
}

ModelParams ModelParams::zeros(const ModelDims& dims) {
  dims.validate();
  ModelParams p;
  p.dims = dims;
  p.proj = Tensor2(dims.d, dims.d_emb);
  p.fc_se = mlp_zeros(dims.d_vis, dims.d, dims.d, dims.d);
  p.fc_sp = mlp_zeros(dims.d_vis, dims.d, dims.d, dims.d);
  p.gru = gru_zeros(dims.d);
  for (auto& t : p.edge_tf) t = Tensor2(dims.d, dims.d);
  p.sim_send_e = mlp_zeros(dims.d, dims.d, dims.d, dims.d);
  p.sim_recv_e = mlp_zeros(dims.d, dims.d, dims.d, dims.d);
  p.sim_send_p = mlp_zeros(dims.d, dims.d, dims.d, dims.d);
  p.sim_recv_p = mlp_zeros(dims.d, dims.d, dims.d, dims.d);
  return p;
}

ModelParams ModelParams::random(const ModelDims& dims, uint64_t seed) {
  dims.validate();
  ModelParams p;
  p.dims = dims;
  // Distinct streams per component: adding a component never shifts the
  // draws of another.
  Rng proj_rng(seed, 1);
  p.proj = init_linear(dims.d, dims.d_emb, proj_rng);
  // Rectifier gain on the deep-net weights keeps activation scale through
  // the layers; without it the similarity logits start near zero and the
  // softmax heads sit on a plateau.
  const double gain = 2.4;
  Rng fc_rng(seed, 2);
  p.fc_se = mlp_random(dims.d_vis, dims.d, dims.d, dims.d, fc_rng, gain);
  p.fc_sp = mlp_random(dims.d_vis, dims.d, dims.d, dims.d, fc_rng, gain);
  Rng gru_rng(seed, 3);
  p.gru = gru_random(dims.d, gru_rng);
  // Negative update-gate bias: early steps keep most of the node state
  // instead of halving it, so features survive t propagation rounds.
  for (double& v : p.gru.bz.data) v -= 2.5;
  Rng tf_rng(seed, 4);
  // Message transforms start small so early propagation nudges rather than
  // overwrites the initialized node features.
  for (auto& t : p.edge_tf) t = init_linear(dims.d, dims.d, tf_rng, 0.25);
  Rng sim_rng(seed, 5);
  p.sim_send_e = mlp_random(dims.d, dims.d, dims.d, dims.d, sim_rng, gain);
  p.sim_recv_e = mlp_random(dims.d, dims.d, dims.d, dims.d, sim_rng, gain);
  p.sim_send_p = mlp_random(dims.d, dims.d, dims.d, dims.d, sim_rng, gain);
  p.sim_recv_p = mlp_random(dims.d, dims.d, dims.d, dims.d, sim_rng, gain);
  // Small output layers on the similarity nets: the softmax heads start
  // near uniform instead of saturated, whatever the feature dimension.
  for (MlpParams* m : {&p.sim_send_e, &p.sim_recv_e, &p.sim_send_p, &p.sim_recv_p}) {
    m->w3 = scale(m->w3, 0.25);
    m->b3 = scale(m->b3, 0.25);
  }
  return p;
}

std::vector<Tensor2*> ModelParams::tensors() {
  std::vector<Tensor2*> out;
  auto push_mlp = [&](MlpParams& m) {
    out.push_back(&m.w1);
    out.push_back(&m.b1);
    out.push_back(&m.w2);
    out.push_back(&m.b2);
    out.push_back(&m.w3);
    out.push_back(&m.b3);
  };
  out.push_back(&proj);
  push_mlp(fc_se);
  push_mlp(fc_sp);
  out.push_back(&gru.wz);
  out.push_back(&gru.uz);
  out.push_back(&gru.bz);
  out.push_back(&gru.wr);
  out.push_back(&gru.ur);
  out.push_back(&gru.br);
  out.push_back(&gru.wc);
  out.push_back(&gru.uc);
  out.push_back(&gru.bc);
  for (auto& t : edge_tf) out.push_back(&t);
  push_mlp(sim_send_e);
  push_mlp(sim_recv_e);
  push_mlp(sim_send_p);
  push_mlp(sim_recv_p);
  return out;
}

std::vector<const Tensor2*> ModelParams::tensors() const {
  auto mut = const_cast<ModelParams*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

size_t ModelParams::scalar_count() const {
  size_t n = 0;
  for (const Tensor2* t : tensors()) n += t->size();
  return n;
}

void ModelParams::add_scaled(const std::vector<Tensor2>& grads, double step) {
  auto ts = tensors();
  if (grads.size() != ts.size())
    throw std::invalid_argument("ModelParams::add_scaled: gradient list mismatch");
  for (size_t i = 0; i < ts.size(); ++i) {
    check_same_shape(*ts[i], grads[i], "ModelParams::add_scaled");
    for (size_t k = 0; k < ts[i]->data.size(); ++k) ts[i]->data[k] += step * grads[i].data[k];
  }
}

void ModelParams::snap_to_f32() {
  for (Tensor2* t : tensors())
    for (double& v : t->data) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace hiker
