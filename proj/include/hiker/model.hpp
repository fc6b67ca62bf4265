// Ties parameters, commonsense graph, propagation and the hierarchical
// inference heads into one differentiable forward pass, plus the ranked
// triplet readout used by prediction and evaluation.
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "hiker/graph.hpp"
#include "hiker/inference.hpp"
#include "hiker/params.hpp"
#include "hiker/propagation.hpp"

namespace hiker {

struct PipelineToggles {
  bool pred_hierarchy = true;    // PH: hierarchical predicate head
  bool ent_hierarchy = true;     // EH: hierarchical entity head
  bool adaptive_refinement = true;  // AR: transition-matrix refinement
};

enum class TaskMode { kPredCls, kSGCls };
std::string to_string(TaskMode t);
TaskMode task_from_string(const std::string& s);

struct Model {
  ModelParams params;
  TransitionMatrix transition;  // [n_pred x n_pred]
  PipelineToggles toggles;
  int steps = 3;
  uint64_t ent_hier_hash = 0;
  uint64_t pred_hier_hash = 0;
  uint64_t config_hash = 0;
};

struct ForwardOutputs {
  PropagationState state;  // owns the tape

  int n_se = 0, n_sp = 0;
  // Tape ids (-1 when absent). Predicate branch over SP rows:
  int sp_p1 = -1;         // [n_sp x g1p]
  int sp_p2 = -1;         // [n_sp x g2p] conditionals within l1 groups
  int sp_leaf_cond = -1;  // [n_sp x n_pred] conditionals within l2 groups
  int sp_joint = -1;      // [n_sp x n_pred] unrefined leaf joint (flat softmax when PH off)
  int sp_final = -1;      // refined by T when AR is on, else == sp_joint
  // Entity branch over SE rows (never refined):
  int se_p1 = -1;
  int se_p2 = -1;
  int se_leaf_cond = -1;
  int se_joint = -1;
};

// Full pipeline: bridges initialized from ground-truth one-hots (PredCls)
// or detector scores (SGCls), t propagation steps, then the inference heads.
ForwardOutputs model_forward(const Model& m, const CommonsenseGraph& kg,
                             const DetectionBundle& bundle, TaskMode task, bool needs_grad);

struct LossWeights {
  double w_xp1 = 1.0, w_xp2 = 1.0, w_p = 1.0;
};

struct LossIds {
  int total = -1;  // scalar tape node
  double l_xp1 = 0.0, l_xp2 = 0.0, l_p = 0.0;   // per-sample means (values)
  double l_xe1 = 0.0, l_xe2 = 0.0, l_e = 0.0;
  int n_pred_supervised = 0;
  int n_ent_supervised = 0;
  int saturated = 0;  // targets clamped at 1e-12 before the log
};

// NLL losses per the hierarchical chain; predicate targets from gt triplets,
// entity targets (optional) from gt labels. The chain losses always use the
// unrefined joint, which keeps L_P >= L_XP2 >= L_XP1 per sample.
LossIds model_loss(ForwardOutputs& out, const CommonsenseGraph& kg, const DetectionBundle& bundle,
                   const PipelineToggles& toggles, const LossWeights& weights,
                   bool entity_supervision);

// Greedy level-by-level readout: commit to the argmax level-1 group, then
// the argmax level-2 group inside it, then the best leaf; the returned
// distribution carries the path product on the committed path and zero off
// it. The `--greedy` comparison arm.
std::vector<double> greedy_leaf_distribution(const std::vector<double>& p1,
                                             const std::vector<double>& p2_cond,
                                             const std::vector<double>& leaf_cond,
                                             const Hierarchy& h);

struct RankedTriplet {
  int subject = -1, object = -1;  // proposal indices
  int predicate = -1;
  int subject_class = -1, object_class = -1;
  double score = 0.0;
};

// Per-image candidate list (every SP node x every predicate class), scored
// subject_prob * predicate_prob * object_prob and sorted descending; ties
// by (subject, object, predicate) for determinism. PredCls takes entity
// classes from ground truth with probability 1.
std::vector<RankedTriplet> rank_triplets(const ForwardOutputs& out, const DetectionBundle& bundle,
                                         TaskMode task, bool greedy, const Hierarchy& pred_hier);

}  // namespace hiker
