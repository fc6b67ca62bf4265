#include "hiker/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hiker {

std::string to_string(TaskMode t) { return t == TaskMode::kPredCls ? "predcls" : "sgcls"; }

TaskMode task_from_string(const std::string& s) {
  if (s == "predcls") return TaskMode::kPredCls;
  if (s == "sgcls") return TaskMode::kSGCls;
  throw std::invalid_argument("unknown task mode: " + s);
}

namespace {

struct Branch {
  int p1 = -1, p2 = -1, leaf_cond = -1, joint = -1;
};

// Hierarchical (or flat) head for one branch: similarities of each scene
// node against leaf and superclass nodes, chained softmaxes, joint product.
Branch build_head(Tape& t, int scene_x, int leaf_x, int l2_x, int l1_x,
                  const std::array<int, 6>& send, const std::array<int, 6>& recv,
                  const Hierarchy& h, bool hierarchical) {
  Branch b;
  const int sender = t.mlp3(scene_x, send);
  const int s_leaf = t.matmul_nt(sender, t.mlp3(leaf_x, recv));
  if (!hierarchical) {
    b.joint = t.row_softmax(s_leaf);
    b.leaf_cond = b.joint;
    return b;
  }
  const int s1 = t.matmul_nt(sender, t.mlp3(l1_x, recv));
  const int s2 = t.matmul_nt(sender, t.mlp3(l2_x, recv));
  b.p1 = t.row_softmax(s1);
  b.p2 = t.grouped_row_softmax(s2, h.l2_to_l1);
  b.leaf_cond = t.grouped_row_softmax(s_leaf, h.leaf_to_l2);
  std::vector<int> l1_of_leaf(h.n_leaves());
  for (int i = 0; i < h.n_leaves(); ++i) l1_of_leaf[i] = h.l1_of_leaf(i);
  const int f1 = t.gather_cols(b.p1, l1_of_leaf);
  const int f2 = t.gather_cols(b.p2, h.leaf_to_l2);
  b.joint = t.hadamard(t.hadamard(f1, f2), b.leaf_cond);
  return b;
}

}  // namespace

ForwardOutputs model_forward(const Model& m, const CommonsenseGraph& kg,
                             const DetectionBundle& bundle, TaskMode task, bool needs_grad) {
  const Tensor2 initial_scores = task == TaskMode::kPredCls
                                     ? one_hot_rows(bundle.gt.labels, kg.n_ent())
                                     : bundle.scores;
  ForwardOutputs out{make_state(m.params, kg, bundle, initial_scores,
                                PropagationConfig{m.steps}, needs_grad)};
  PropagationState& s = out.state;
  run_propagation(s);
  Tape& t = s.tape;

  out.n_se = s.n_rows(Family::kSE);
  out.n_sp = s.n_rows(Family::kSP);

  if (out.n_sp > 0) {
    Branch b = build_head(t, s.family(Family::kSP), s.family(Family::kCP),
                          s.family(Family::kCXP2), s.family(Family::kCXP1), s.params.sim_send_p,
                          s.params.sim_recv_p, kg.pred_hier, m.toggles.pred_hierarchy);
    out.sp_p1 = b.p1;
    out.sp_p2 = b.p2;
    out.sp_leaf_cond = b.leaf_cond;
    out.sp_joint = b.joint;
    out.sp_final = m.toggles.adaptive_refinement
                       ? t.matmul(b.joint, t.leaf(m.transition.t))  // T is never trained
                       : b.joint;
  }
  if (out.n_se > 0) {
    Branch b = build_head(t, s.family(Family::kSE), s.family(Family::kCE),
                          s.family(Family::kCXE2), s.family(Family::kCXE1), s.params.sim_send_e,
                          s.params.sim_recv_e, kg.ent_hier, m.toggles.ent_hierarchy);
    out.se_p1 = b.p1;
    out.se_p2 = b.p2;
    out.se_leaf_cond = b.leaf_cond;
    out.se_joint = b.joint;
  }
  return out;
}

namespace {

constexpr double kProbClamp = 1e-12;

struct NllTerm {
  int node = -1;     // scalar tape id, already weighted
  double value = 0;  // unweighted mean NLL
  int saturated = 0;
};

// Mean NLL of `dist` (rows) at the targets marked in `mask`; counts how many
// targets sat at the clamp.
NllTerm nll(Tape& t, int dist, const Tensor2& mask, int n_targets, double weight) {
  NllTerm term;
  if (n_targets == 0) return term;
  const Tensor2& d = t.val(dist);
  for (int i = 0; i < d.rows; ++i)
    for (int j = 0; j < d.cols; ++j)
      if (mask.at(i, j) > 0.0 && d.at(i, j) <= kProbClamp) ++term.saturated;
  const int picked = t.sum_all(t.hadamard(t.log(t.clamp_min(dist, kProbClamp)), t.leaf(mask)));
  const int mean_nll = t.scale(picked, -1.0 / n_targets);
  term.value = t.val(mean_nll).at(0, 0);
  term.node = t.scale(mean_nll, weight);
  return term;
}

}  // namespace

LossIds model_loss(ForwardOutputs& out, const CommonsenseGraph& kg, const DetectionBundle& bundle,
                   const PipelineToggles& toggles, const LossWeights& weights,
                   bool entity_supervision) {
  Tape& t = out.state.tape;
  LossIds ids;
  std::vector<int> terms;

  if (out.n_sp > 0 && !bundle.gt.triplets.empty()) {
    const Hierarchy& h = kg.pred_hier;
    const int n = bundle.n();
    Tensor2 mask_leaf(out.n_sp, h.n_leaves());
    Tensor2 mask_l2(out.n_sp, h.n_l2());
    Tensor2 mask_l1(out.n_sp, h.n_l1());
    int n_targets = 0;
    for (const auto& trip : bundle.gt.triplets) {
      const int k = pair_index(trip[0], trip[2], n);
      const int leaf = trip[1];
      if (leaf >= h.n_leaves())
        throw std::invalid_argument("model_loss: gt predicate outside hierarchy");
      mask_leaf.at(k, leaf) += 1.0;
      mask_l2.at(k, h.leaf_to_l2[leaf]) += 1.0;
      mask_l1.at(k, h.l1_of_leaf(leaf)) += 1.0;
      ++n_targets;
    }
    ids.n_pred_supervised = n_targets;

    NllTerm lp = nll(t, out.sp_joint, mask_leaf, n_targets, weights.w_p);
    ids.l_p = lp.value;
    ids.saturated += lp.saturated;
    terms.push_back(lp.node);
    if (toggles.pred_hierarchy) {
      // Marginal level-2 mass is the chain prefix P(l1) * P(l2 | l1).
      const int prefix2 = t.hadamard(t.gather_cols(out.sp_p1, h.l2_to_l1), out.sp_p2);
      NllTerm l2 = nll(t, prefix2, mask_l2, n_targets, weights.w_xp2);
      NllTerm l1 = nll(t, out.sp_p1, mask_l1, n_targets, weights.w_xp1);
      ids.l_xp2 = l2.value;
      ids.l_xp1 = l1.value;
      ids.saturated += l2.saturated + l1.saturated;
      terms.push_back(l2.node);
      terms.push_back(l1.node);
    }
  }

  if (entity_supervision && out.n_se > 0) {
    const Hierarchy& h = kg.ent_hier;
    const Tensor2 mask_leaf = one_hot_rows(bundle.gt.labels, h.n_leaves());
    std::vector<int> l2_labels(out.n_se), l1_labels(out.n_se);
    for (int i = 0; i < out.n_se; ++i) {
      l2_labels[i] = h.leaf_to_l2[bundle.gt.labels[i]];
      l1_labels[i] = h.l1_of_leaf(bundle.gt.labels[i]);
    }
    ids.n_ent_supervised = out.n_se;

    NllTerm le = nll(t, out.se_joint, mask_leaf, out.n_se, weights.w_p);
    ids.l_e = le.value;
    ids.saturated += le.saturated;
    terms.push_back(le.node);
    if (toggles.ent_hierarchy) {
      const int prefix2 = t.hadamard(t.gather_cols(out.se_p1, h.l2_to_l1), out.se_p2);
      NllTerm l2 = nll(t, prefix2, one_hot_rows(l2_labels, h.n_l2()), out.n_se, weights.w_xp2);
      NllTerm l1 = nll(t, out.se_p1, one_hot_rows(l1_labels, h.n_l1()), out.n_se, weights.w_xp1);
      ids.l_xe2 = l2.value;
      ids.l_xe1 = l1.value;
      ids.saturated += l2.saturated + l1.saturated;
      terms.push_back(l2.node);
      terms.push_back(l1.node);
    }
  }

  if (terms.empty()) {
    ids.total = t.sum_all(t.leaf(Tensor2(1, 1)));  // constant zero
    return ids;
  }
  int total = terms[0];
  for (size_t i = 1; i < terms.size(); ++i) total = t.add(total, terms[i]);
  ids.total = total;
  return ids;
}

std::vector<double> greedy_leaf_distribution(const std::vector<double>& p1,
                                             const std::vector<double>& p2_cond,
                                             const std::vector<double>& leaf_cond,
                                             const Hierarchy& h) {
  const int g1 = predict_class(p1);
  int g2 = -1;
  double best2 = -1.0;
  for (int l2 = 0; l2 < h.n_l2(); ++l2)
    if (h.l2_to_l1[l2] == g1 && p2_cond[l2] > best2) {
      best2 = p2_cond[l2];
      g2 = l2;
    }
  std::vector<double> out(h.n_leaves(), 0.0);
  for (int leaf = 0; leaf < h.n_leaves(); ++leaf)
    if (h.leaf_to_l2[leaf] == g2) out[leaf] = p1[g1] * p2_cond[g2] * leaf_cond[leaf];
  return out;
}

namespace {

std::vector<double> row_of(const Tensor2& m, int i) {
  std::vector<double> v(m.cols);
  for (int j = 0; j < m.cols; ++j) v[j] = m.at(i, j);
  return v;
}

}  // namespace

std::vector<RankedTriplet> rank_triplets(const ForwardOutputs& out, const DetectionBundle& bundle,
                                         TaskMode task, bool greedy, const Hierarchy& pred_hier) {
  std::vector<RankedTriplet> ranked;
  if (out.n_sp == 0) return ranked;
  const Tape& t = out.state.tape;
  const int n = bundle.n();
  const auto pairs = ordered_pairs(n);

  // Entity class + probability per proposal.
  std::vector<int> ent_class(n);
  std::vector<double> ent_prob(n, 1.0);
  if (task == TaskMode::kPredCls) {
    ent_class = bundle.gt.labels;
  } else {
    const Tensor2& ej = t.val(out.se_joint);
    for (int i = 0; i < n; ++i) {
      const auto dist = row_of(ej, i);
      ent_class[i] = predict_class(dist);
      ent_prob[i] = dist[ent_class[i]];
    }
  }

  const Tensor2& final_dist = t.val(out.sp_final);
  for (int k = 0; k < out.n_sp; ++k) {
    std::vector<double> dist = row_of(final_dist, k);
    if (greedy && out.sp_p1 >= 0) {
      dist = greedy_leaf_distribution(row_of(t.val(out.sp_p1), k), row_of(t.val(out.sp_p2), k),
                                      row_of(t.val(out.sp_leaf_cond), k), pred_hier);
    }
    for (int c = 0; c < static_cast<int>(dist.size()); ++c) {
      RankedTriplet r;
      r.subject = pairs[k].first;
      r.object = pairs[k].second;
      r.predicate = c;
      r.subject_class = ent_class[r.subject];
      r.object_class = ent_class[r.object];
      r.score = ent_prob[r.subject] * dist[c] * ent_prob[r.object];
      ranked.push_back(r);
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedTriplet& a, const RankedTriplet& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.subject != b.subject) return a.subject < b.subject;
    if (a.object != b.object) return a.object < b.object;
    return a.predicate < b.predicate;
  });
  return ranked;
}

}  // namespace hiker
