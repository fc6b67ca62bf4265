// The factorized hierarchical inference chain over a 3-level hierarchy,
// plus the confusion-matrix-derived transition refinement.
#pragma once

#include <vector>

#include "hiker/hierarchy.hpp"
#include "hiker/kernels.hpp"
#include "hiker/tensor.hpp"

namespace hiker {

struct HierarchicalDistribution {
  std::vector<double> l1;         // level-1 probabilities
  std::vector<double> l2_cond;    // P(l2 | its l1 group), indexed by l2 id
  std::vector<double> leaf_cond;  // P(leaf | its l2 group), indexed by leaf id
  std::vector<double> joint;      // materialized leaf joint

  double l2_marginal(const Hierarchy& h, int l2) const {
    return l1[h.l2_to_l1[l2]] * l2_cond[l2];
  }
};

// sim(a, b) = FCNet_sender(a) . FCNet_receiver(b); not symmetric.
double node_similarity(const std::vector<double>& x_a, const std::vector<double>& x_b,
                       const MlpParams& fc_sender, const MlpParams& fc_receiver);

// Level-1 softmax over all level-1 nodes, then sibling-restricted softmax
// at level 2 and at the leaves; joint = product of the three factors.
HierarchicalDistribution hierarchical_predict(const std::vector<double>& node_feature,
                                              const Tensor2& leaf_features,
                                              const Tensor2& l2_features,
                                              const Tensor2& l1_features, const Hierarchy& h,
                                              const MlpParams& fc_sender,
                                              const MlpParams& fc_receiver);

struct TransitionMatrix {
  Tensor2 t;  // square, row-stochastic

  int size() const { return t.rows; }
  void validate() const;

  static TransitionMatrix load(const std::string& path);
  void save(const std::string& path, const std::vector<std::string>& labels = {}) const;
};

// T = RowNormalize(R + I).
TransitionMatrix build_transition(const ConfusionMatrix& r);

// Pushforward of a leaf distribution through T; preserves the simplex.
std::vector<double> refine(const std::vector<double>& dist, const TransitionMatrix& t);

// Argmax readout; ties go to the lowest index.
int predict_class(const std::vector<double>& dist);

}  // namespace hiker
