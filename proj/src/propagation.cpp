#include "hiker/propagation.hpp"

#include <stdexcept>

namespace hiker {

ParamIds push_params(Tape& tape, const ModelParams& params, bool needs_grad) {
  ParamIds ids;
  for (const Tensor2* t : params.tensors()) ids.all.push_back(tape.leaf(*t, needs_grad));
  size_t k = 0;
  auto take = [&]() { return ids.all[k++]; };
  auto take_mlp = [&](std::array<int, 6>& slot) {
    for (int i = 0; i < 6; ++i) slot[i] = take();
  };
  ids.proj = take();
  take_mlp(ids.fc_se);
  take_mlp(ids.fc_sp);
  for (int i = 0; i < 9; ++i) ids.gru[i] = take();
  for (int i = 0; i < kEdgeTypeCount; ++i) ids.edge_tf[i] = take();
  take_mlp(ids.sim_send_e);
  take_mlp(ids.sim_recv_e);
  take_mlp(ids.sim_send_p);
  take_mlp(ids.sim_recv_p);
  if (k != ids.all.size()) throw std::logic_error("push_params: enumeration out of sync");
  return ids;
}

PropagationState make_state(const ModelParams& params, const CommonsenseGraph& kg,
                            const DetectionBundle& bundle, const Tensor2& initial_scores,
                            const PropagationConfig& config, bool needs_grad) {
  if (kg.ent_hier.n_leaves() != params.dims.n_ent || kg.pred_hier.n_leaves() != params.dims.n_pred)
    throw std::invalid_argument("make_state: graph/params class counts differ");

  PropagationState s;
  s.config = config;
  s.ent_hier = &kg.ent_hier;
  s.pred_hier = &kg.pred_hier;
  s.params = push_params(s.tape, params, needs_grad);
  Tape& t = s.tape;
  s.x.fill(-1);

  // Commonsense features from embeddings through the projection, then
  // child-averaging for the superclass levels.
  const int emb_e = t.leaf(kg.emb_e);
  const int emb_p = t.leaf(kg.emb_p);
  const int ce = t.matmul_nt(emb_e, s.params.proj);
  const int cp = t.matmul_nt(emb_p, s.params.proj);
  const int cxe2 = t.matmul(t.leaf(kg.avg_e2), ce);
  const int cxe1 = t.matmul(t.leaf(kg.avg_e1), cxe2);
  const int cxp2 = t.matmul(t.leaf(kg.avg_p2), cp);
  const int cxp1 = t.matmul(t.leaf(kg.avg_p1), cxp2);
  s.x[static_cast<int>(Family::kCE)] = ce;
  s.x[static_cast<int>(Family::kCP)] = cp;
  s.x[static_cast<int>(Family::kCXE2)] = cxe2;
  s.x[static_cast<int>(Family::kCXE1)] = cxe1;
  s.x[static_cast<int>(Family::kCXP2)] = cxp2;
  s.x[static_cast<int>(Family::kCXP1)] = cxp1;

  // Scene features via the two distinct FCNets.
  SceneGraph scene = scene_structure(bundle);
  const int n_se = scene.n_se(), n_sp = scene.n_sp();
  if (n_se > 0)
    s.x[static_cast<int>(Family::kSE)] = t.mlp3(t.leaf(bundle.ent_features), s.params.fc_se);
  if (n_sp > 0)
    s.x[static_cast<int>(Family::kSP)] = t.mlp3(t.leaf(bundle.pair_features), s.params.fc_sp);

  // Static adjacency blocks: commonsense (relation + hierarchical) and scene.
  for (const auto& b : kg.blocks) s.blocks.push_back({b.type, b.src, b.dst, t.leaf(b.adj)});
  for (const auto& b : scene.blocks)
    if (b.adj.rows > 0 && b.adj.cols > 0)
      s.blocks.push_back({b.type, b.src, b.dst, t.leaf(b.adj)});

  // Bridges: SE rows from the caller-provided scores (renormalized),
  // SP rows uniform until the first renormalization.
  if (n_se > 0) {
    BridgeSet init = init_bridges(scene, initial_scores, kg.n_pred());
    s.bridge_se_ce = t.leaf(init.se_ce);
    if (n_sp > 0) s.bridge_sp_cp = t.leaf(init.sp_cp);
  }
  return s;
}

namespace {

int transformed(PropagationState& s, Family src, EdgeType type) {
  return s.tape.matmul_nt(s.family(src), s.params.edge_tf[static_cast<int>(type)]);
}

}  // namespace

std::array<int, kFamilyCount> aggregate_messages(PropagationState& s) {
  Tape& t = s.tape;
  std::array<int, kFamilyCount> msg;
  msg.fill(-1);
  auto accumulate = [&](Family dst, int contribution) {
    int& slot = msg[static_cast<int>(dst)];
    slot = slot < 0 ? contribution : t.add(slot, contribution);
  };

  // Static blocks: adj [n_dst x n_src] times transformed source features.
  for (const auto& b : s.blocks) {
    if (s.family(b.src) < 0 || s.n_rows(b.src) == 0) continue;
    accumulate(b.dst, t.matmul(b.adj, transformed(s, b.src, b.type)));
  }

  // Bridge blocks: shared weights, both directions, per-direction transforms.
  if (s.bridge_se_ce >= 0) {
    accumulate(Family::kSE,
               t.matmul(s.bridge_se_ce, transformed(s, Family::kCE, EdgeType::kBridgeCeSe)));
    accumulate(Family::kCE,
               t.matmul_tn(s.bridge_se_ce, transformed(s, Family::kSE, EdgeType::kBridgeSeCe)));
  }
  if (s.bridge_sp_cp >= 0) {
    accumulate(Family::kSP,
               t.matmul(s.bridge_sp_cp, transformed(s, Family::kCP, EdgeType::kBridgeCpSp)));
    accumulate(Family::kCP,
               t.matmul_tn(s.bridge_sp_cp, transformed(s, Family::kSP, EdgeType::kBridgeSpCp)));
  }

  // Isolated families still get a zero message.
  for (int f = 0; f < kFamilyCount; ++f) {
    if (s.x[f] < 0 || msg[f] >= 0) continue;
    const Tensor2& xv = t.val(s.x[f]);
    msg[f] = t.leaf(Tensor2(xv.rows, xv.cols));
  }
  return msg;
}

void propagate_step(PropagationState& s) {
  if (s.step >= s.config.steps)
    throw std::logic_error("propagate_step: step counter exceeded configured t");
  Tape& t = s.tape;
  const auto msg = aggregate_messages(s);

  for (int f = 0; f < kFamilyCount; ++f) {
    if (s.x[f] < 0 || t.val(s.x[f]).rows == 0) continue;
    s.x[f] = t.gru(s.x[f], msg[f], s.params.gru);
  }

  // Recompute similarities (Eq. 11 form) and renormalize bridge rows.
  if (s.bridge_se_ce >= 0) {
    const int send = t.mlp3(s.family(Family::kSE), s.params.sim_send_e);
    const int recv = t.mlp3(s.family(Family::kCE), s.params.sim_recv_e);
    s.bridge_se_ce = t.row_softmax(t.matmul_nt(send, recv));
  }
  if (s.bridge_sp_cp >= 0) {
    const int send = t.mlp3(s.family(Family::kSP), s.params.sim_send_p);
    const int recv = t.mlp3(s.family(Family::kCP), s.params.sim_recv_p);
    s.bridge_sp_cp = t.row_softmax(t.matmul_nt(send, recv));
  }
  ++s.step;
}

void run_propagation(PropagationState& s) {
  while (s.step < s.config.steps) propagate_step(s);
}

}  // namespace hiker
