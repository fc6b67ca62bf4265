// Synthetic desk-scale datasets: hierarchically clustered class prototypes
// (level-1 groups far apart, leaves close), detection bundles sampled
// around them, plus matching embedding / hierarchy / relation files.
#pragma once

#include <cstdint>
#include <string>

#include "hiker/graph.hpp"

namespace hiker {

struct SyntheticSpec {
  int n_train = 200;
  int n_test = 150;
  int min_objects = 3, max_objects = 5;
  int n_ent = 12, n_pred = 8;
  int ent_l2 = 4, ent_l1 = 2;
  int pred_l2 = 4, pred_l1 = 2;
  int dim = 32;              // embedding = feature dimension
  double separation = 0.35;  // leaf sibling prototype spacing
  double noise = 0.08;       // per-dimension feature noise
  double score_temp = 0.25;  // detector score softmax sharpness
  int triplets_min = 3, triplets_max = 5;
  uint64_t seed = 0;

  void validate() const;
  uint64_t hash() const;
};

struct SyntheticDataset {
  EmbeddingTable embeddings;  // class prototypes double as word vectors
  Hierarchy ent_hier, pred_hier;
  std::vector<RelationEdge> relations;
  Tensor2 ent_prototypes, pred_prototypes;  // [classes x dim]
  std::vector<DetectionBundle> train, test;
};

SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

// embeddings.txt, hierarchy_ent.json, hierarchy_pred.json, relations.json,
// train.jsonl, test.jsonl, synth_spec.json under out_dir.
void write_synthetic(const SyntheticDataset& data, const SyntheticSpec& spec,
                     const std::string& out_dir);

// The predict-time corruption surrogate: seeded Gaussian noise added to
// entity and pair features; sigma 0 returns the bundle untouched.
DetectionBundle add_feature_noise(const DetectionBundle& bundle, double sigma,
                                  uint64_t seed, uint64_t image_index);

}  // namespace hiker
