// End-to-end optimization: NLL chain losses, reverse-mode gradients through
// the whole pipeline, per-epoch confusion re-evaluation with transition
// blending, and the binary checkpoint format.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hiker/graph.hpp"
#include "hiker/inference.hpp"
#include "hiker/model.hpp"

namespace hiker {

struct TrainConfig {
  int epochs = 30;
  double lr = 1e-4;         // initial learning rate
  int lr_step_every = 10;   // epochs between decays
  double lr_decay = 0.1;
  double alpha = 0.9;       // transition blend rate
  double grad_clip = 5.0;   // global-norm clip per update; 0 disables
  LossWeights weights;      // L_XP1 / L_XP2 / L_P weights (default 1,1,1)
  PipelineToggles toggles;
  bool entity_supervision = true;
  TaskMode task = TaskMode::kPredCls;
  int steps = 3;   // propagation t
  int batch = 1;
  int jobs = 1;
  // 32 keeps parameters on the f32 grid after every update, which makes
  // checkpoints (f32 blocks) lossless; 64 trades that for full-precision
  // accumulation between saves.
  int precision = 32;
  uint64_t seed = 0;

  void validate() const;
  uint64_t hash() const;
};

struct EpochStats {
  int epoch = 0;
  double l_xp1 = 0, l_xp2 = 0, l_p = 0;
  double l_xe1 = 0, l_xe2 = 0, l_e = 0;
  double total = 0;
  int saturated = 0;
  double lr_used = 0;
  double wall_seconds = 0;
  ConfusionMatrix confusion;   // training-set re-evaluation
  TransitionMatrix blended_t;  // snapshot after blending
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  uint64_t config_hash = 0;

  void save(const std::string& path) const;
};

struct ChainLosses {
  double l_xp1 = 0, l_xp2 = 0, l_p = 0;
  bool saturated = false;
};

// NLL of the chain at a ground-truth leaf: L_XP1 on the level-1 marginal,
// L_XP2 on the level-2 prefix, L_P on the joint. Probabilities clamp at
// 1e-12 before the log and the clamp is flagged.
ChainLosses compute_losses(const HierarchicalDistribution& dist, int gt_leaf,
                           const Hierarchy& h);

// One shuffled pass of batched gradient descent; fills the loss fields of
// the returned stats (confusion/transition are handled by `train`).
EpochStats train_epoch(Model& model, const CommonsenseGraph& kg,
                       const std::vector<DetectionBundle>& data, const TrainConfig& cfg,
                       int epoch_index);

// Row-normalized count matrix of predicted vs ground-truth predicate
// classes over the supervised pairs; classes with no instances get a
// one-hot diagonal row.
ConfusionMatrix reevaluate_confusion(const Model& model, const CommonsenseGraph& kg,
                                     const std::vector<DetectionBundle>& data);

// alpha * t_new + (1 - alpha) * t_old.
TransitionMatrix blend_transition(const TransitionMatrix& t_new, const TransitionMatrix& t_old,
                                  double alpha);

// Full loop: per-epoch pass, confusion re-evaluation (refinement sees only
// the blend through the previous epoch), transition blending.
TrainReport train(Model& model, const CommonsenseGraph& kg,
                  const std::vector<DetectionBundle>& data, const TrainConfig& cfg);

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace hiker
