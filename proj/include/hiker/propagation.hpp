// GGNN-style message passing over the joint commonsense + scene graph:
// per-edge-type linear transforms, weighted-sum aggregation, a shared GRU
// update, then similarity-driven softmax renormalization of bridge weights.
// The whole unrolled computation lives on a Tape so training can
// backpropagate through every step.
#pragma once

#include <array>

#include "hiker/graph.hpp"
#include "hiker/params.hpp"
#include "hiker/tape.hpp"

namespace hiker {

constexpr int kFamilyCount = static_cast<int>(Family::kCount);

struct PropagationConfig {
  int steps = 3;  // t
};

// Tape leaf ids for every parameter tensor, in ModelParams::tensors() order.
struct ParamIds {
  std::vector<int> all;
  int proj = -1;
  std::array<int, 6> fc_se{}, fc_sp{};
  std::array<int, 9> gru{};
  std::array<int, kEdgeTypeCount> edge_tf{};
  std::array<int, 6> sim_send_e{}, sim_recv_e{}, sim_send_p{}, sim_recv_p{};
};

ParamIds push_params(Tape& tape, const ModelParams& params, bool needs_grad);

struct PropagationState {
  Tape tape;
  ParamIds params;
  PropagationConfig config;
  int step = 0;

  // Current feature matrix per family; -1 when the family is empty.
  std::array<int, kFamilyCount> x{};

  // Bridge weight matrices (tape ids); rows sum to 1 after init and after
  // every renormalization.
  int bridge_se_ce = -1;
  int bridge_sp_cp = -1;

  struct StaticBlock {
    EdgeType type;
    Family src, dst;
    int adj = -1;  // constant tape leaf
  };
  std::vector<StaticBlock> blocks;

  const Hierarchy* ent_hier = nullptr;
  const Hierarchy* pred_hier = nullptr;

  int family(Family f) const { return x[static_cast<int>(f)]; }
  int n_rows(Family f) const {
    const int id = family(f);
    return id < 0 ? 0 : tape.val(id).rows;
  }
};

// Assembles the per-image state: commonsense features recomputed from the
// stored embeddings through the (possibly trainable) projection, scene
// features through the two FCNets, bridges initialized from
// `initial_scores` (detector scores or one-hot ground truth).
PropagationState make_state(const ModelParams& params, const CommonsenseGraph& kg,
                            const DetectionBundle& bundle, const Tensor2& initial_scores,
                            const PropagationConfig& config, bool needs_grad);

// Weighted sum of per-edge-type transformed source features per family;
// families with no incoming edges get a zero message.
std::array<int, kFamilyCount> aggregate_messages(PropagationState& s);

// One step: GRU update of every family from its aggregated message, then
// bridge-weight renormalization from the recomputed similarities.
void propagate_step(PropagationState& s);

// config.steps applications of propagate_step.
void run_propagation(PropagationState& s);

}  // namespace hiker
