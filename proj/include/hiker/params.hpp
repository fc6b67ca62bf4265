// The full trainable parameter set shared by graph construction,
// propagation and the similarity heads, in the fixed enumeration order the
// checkpoint format stores.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "hiker/graph.hpp"
#include "hiker/kernels.hpp"
#include "hiker/tensor.hpp"

namespace hiker {

struct ModelDims {
  int d = 1024;    // node feature dimension
  int d_emb = 0;   // word embedding dimension
  int d_vis = 0;   // detector feature dimension
  int n_ent = 0;
  int n_pred = 0;
  int g2e = 0, g1e = 0;  // entity hierarchy group counts
  int g2p = 0, g1p = 0;  // predicate hierarchy group counts

  bool operator==(const ModelDims&) const = default;
  void validate() const;
};

struct ModelParams {
  ModelDims dims;

  Tensor2 proj;              // [d x d_emb], CE/CP init projection
  MlpParams fc_se, fc_sp;    // d_vis -> d -> d -> d scene init nets
  GruParams gru;             // shared across node families
  std::array<Tensor2, kEdgeTypeCount> edge_tf;  // [d x d] per edge type
  // Similarity nets (sender = scene side, receiver = commonsense side),
  // separate instances per branch.
  MlpParams sim_send_e, sim_recv_e, sim_send_p, sim_recv_p;  // d -> d -> d -> d

  static ModelParams zeros(const ModelDims& dims);
  static ModelParams random(const ModelDims& dims, uint64_t seed);

  // Fixed enumeration; this order is the checkpoint block order.
  std::vector<Tensor2*> tensors();
  std::vector<const Tensor2*> tensors() const;
  size_t scalar_count() const;

  void add_scaled(const std::vector<Tensor2>& grads, double step);
  void snap_to_f32();  // emulate 32-bit parameter storage
};

std::vector<const Tensor2*> mlp_tensors(const MlpParams& p);
std::vector<const Tensor2*> gru_tensors(const GruParams& p);

}  // namespace hiker
