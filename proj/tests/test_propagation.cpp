#include <cmath>

#include "doctest.h"
#include "hiker/gradcheck.hpp"
#include "hiker/model.hpp"
#include "hiker/propagation.hpp"
#include "toy_world.hpp"

using namespace hiker;
using hiker::testing::make_toy_world;
using hiker::testing::params_to_vec;
using hiker::testing::vec_to_params;

TEST_SUITE_BEGIN("propagation");

TEST_CASE("aggregate_messages basic arithmetic") {
  // Manual state: one CE family with a single weighted self-type edge.
  ModelDims dims;
  dims.d = 2;
  dims.d_emb = 2;
  dims.d_vis = 2;
  dims.n_ent = 2;
  dims.g2e = 1;
  dims.g1e = 1;
  dims.n_pred = 2;
  dims.g2p = 1;
  dims.g1p = 1;
  ModelParams params = ModelParams::zeros(dims);
  params.edge_tf[static_cast<int>(EdgeType::kRelCeCe)] = Tensor2::identity(2);

  PropagationState s;
  s.params = push_params(s.tape, params, false);
  s.x.fill(-1);
  s.x[static_cast<int>(Family::kCE)] = s.tape.leaf(Tensor2::from_rows({{2.0, 0.0}}));
  Tensor2 adj(1, 1);
  adj.at(0, 0) = 0.5;  // one incoming edge of weight 0.5
  s.blocks.push_back({EdgeType::kRelCeCe, Family::kCE, Family::kCE, s.tape.leaf(adj)});

  auto msg = aggregate_messages(s);
  const Tensor2& m = s.tape.val(msg[static_cast<int>(Family::kCE)]);
  CHECK(m.at(0, 0) == doctest::Approx(1.0));
  CHECK(m.at(0, 1) == doctest::Approx(0.0));

  // Two incoming edges of the same type add up.
  PropagationState s2;
  s2.params = push_params(s2.tape, params, false);
  s2.x.fill(-1);
  s2.x[static_cast<int>(Family::kCE)] =
      s2.tape.leaf(Tensor2::from_rows({{2.0, 0.0}, {0.0, 3.0}}));
  Tensor2 adj2(2, 2);
  adj2.at(0, 0) = 1.0;
  adj2.at(0, 1) = 1.0;  // node 0 hears from both nodes
  s2.blocks.push_back({EdgeType::kRelCeCe, Family::kCE, Family::kCE, s2.tape.leaf(adj2)});
  auto msg2 = aggregate_messages(s2);
  const Tensor2& m2 = s2.tape.val(msg2[static_cast<int>(Family::kCE)]);
  CHECK(m2.at(0, 0) == doctest::Approx(2.0));
  CHECK(m2.at(0, 1) == doctest::Approx(3.0));
  // Node 1 has no incoming edges: zero message.
  CHECK(m2.at(1, 0) == 0.0);
  CHECK(m2.at(1, 1) == 0.0);
}

TEST_CASE("isolated family gets a zero message") {
  ModelDims dims;
  dims.d = 3;
  dims.d_emb = 2;
  dims.d_vis = 2;
  dims.n_ent = 2;
  dims.g2e = 1;
  dims.g1e = 1;
  dims.n_pred = 2;
  dims.g2p = 1;
  dims.g1p = 1;
  ModelParams params = ModelParams::zeros(dims);
  PropagationState s;
  s.params = push_params(s.tape, params, false);
  s.x.fill(-1);
  s.x[static_cast<int>(Family::kCP)] = s.tape.leaf(Tensor2(2, 3, 5.0));
  auto msg = aggregate_messages(s);
  const Tensor2& m = s.tape.val(msg[static_cast<int>(Family::kCP)]);
  for (double v : m.data) CHECK(v == 0.0);
}

TEST_CASE("zero-parameter step: features halve, bridges go uniform") {
  auto w = make_toy_world(3, 3);
  ModelParams zero = ModelParams::zeros(w.dims);
  // Rebuild the graph with the zero projection so commonsense features are 0.
  CommonsenseGraph kg = build_commonsense_graph(w.emb, w.ent_hier, w.pred_hier, w.relations,
                                                zero.proj);
  PropagationState s =
      make_state(zero, kg, w.bundle, w.bundle.scores, PropagationConfig{3}, false);
  // All features are zero with zero params.
  for (int f = 0; f < kFamilyCount; ++f)
    if (s.x[f] >= 0)
      for (double v : s.tape.val(s.x[f]).data) CHECK(v == 0.0);

  propagate_step(s);
  for (int f = 0; f < kFamilyCount; ++f)
    if (s.x[f] >= 0)
      for (double v : s.tape.val(s.x[f]).data) CHECK(v == 0.0);
  // Equal (zero) similarities: every bridge row is uniform.
  const Tensor2& be = s.tape.val(s.bridge_se_ce);
  for (double v : be.data) CHECK(v == doctest::Approx(1.0 / w.dims.n_ent));
  const Tensor2& bp = s.tape.val(s.bridge_sp_cp);
  for (double v : bp.data) CHECK(v == doctest::Approx(1.0 / w.dims.n_pred));
}

TEST_CASE("zero-parameter GRU is a halving contraction") {
  auto w = make_toy_world(4, 3);
  ModelParams zero = ModelParams::zeros(w.dims);
  CommonsenseGraph kg = build_commonsense_graph(w.emb, w.ent_hier, w.pred_hier, w.relations,
                                                w.model.params.proj);  // nonzero features
  ModelParams frozen = zero;
  frozen.proj = w.model.params.proj;
  frozen.fc_se = w.model.params.fc_se;
  frozen.fc_sp = w.model.params.fc_sp;
  PropagationState s =
      make_state(frozen, kg, w.bundle, w.bundle.scores, PropagationConfig{3}, false);

  std::array<Tensor2, kFamilyCount> before;
  for (int f = 0; f < kFamilyCount; ++f)
    if (s.x[f] >= 0) before[f] = s.tape.val(s.x[f]);

  for (int step = 1; step <= 3; ++step) {
    propagate_step(s);
    for (int f = 0; f < kFamilyCount; ++f) {
      if (s.x[f] < 0) continue;
      const Tensor2& now = s.tape.val(s.x[f]);
      for (size_t i = 0; i < now.data.size(); ++i) {
        CHECK(now.data[i] == doctest::Approx(before[f].data[i] * std::pow(0.5, step)));
        CHECK(std::abs(now.data[i]) <= std::max(std::abs(before[f].data[i]), 1.0) + 1e-15);
      }
    }
  }
}

TEST_CASE("engineered similarities give the softmax(ln3,0,0) bridge row") {
  // d = 1, identity sim nets, zero GRU: after one step SE = 1 and the CE
  // features are (ln 3, 0, 0), so the bridge row is softmax(ln3, 0, 0).
  ModelDims dims;
  dims.d = 1;
  dims.d_emb = 1;
  dims.d_vis = 1;
  dims.n_ent = 3;
  dims.g2e = 1;
  dims.g1e = 1;
  dims.n_pred = 2;
  dims.g2p = 1;
  dims.g1p = 1;
  ModelParams p = ModelParams::zeros(dims);
  auto identity_mlp = [&] {
    MlpParams m = mlp_zeros(1, 1, 1, 1);
    m.w1.at(0, 0) = 1.0;
    m.w2.at(0, 0) = 1.0;
    m.w3.at(0, 0) = 1.0;
    return m;
  };
  p.sim_send_e = identity_mlp();
  p.sim_recv_e = identity_mlp();
  p.sim_send_p = identity_mlp();
  p.sim_recv_p = identity_mlp();
  p.proj.at(0, 0) = 1.0;  // CE feature = embedding value

  EmbeddingTable emb;
  emb.add("a", {2.0 * std::log(3.0)});
  emb.add("b", {0.0});
  emb.add("c", {0.0});
  emb.add("q", {0.0});
  emb.add("r", {0.0});
  Hierarchy ent;
  ent.target = HierarchyTarget::kEntity;
  ent.leaf_names = {"a", "b", "c"};
  ent.leaf_to_l2 = {0, 0, 0};
  ent.l2_to_l1 = {0};
  Hierarchy pred;
  pred.target = HierarchyTarget::kPredicate;
  pred.leaf_names = {"q", "r"};
  pred.leaf_to_l2 = {0, 0};
  pred.l2_to_l1 = {0};
  CommonsenseGraph kg = build_commonsense_graph(emb, ent, pred, {}, p.proj);

  DetectionBundle b;
  b.image_id = "one";
  b.boxes = Tensor2::from_rows({{0.1, 0.1, 0.4, 0.4}});
  b.scores = Tensor2::from_rows({{1.0, 0.0, 0.0}});
  b.ent_features = Tensor2::from_rows({{2.0}});  // fc_se is zero: feature 0
  b.pair_features = Tensor2(0, 1);
  b.gt.labels = {0};
  b.gt.boxes = b.boxes;

  // fc_se zero would make SE = 0; wire it as identity so SE starts at 2.
  MlpParams id_fc = mlp_zeros(1, 1, 1, 1);
  id_fc.w1.at(0, 0) = 1.0;
  id_fc.w2.at(0, 0) = 1.0;
  id_fc.w3.at(0, 0) = 1.0;
  p.fc_se = id_fc;
  p.fc_sp = id_fc;

  PropagationState s = make_state(p, kg, b, b.scores, PropagationConfig{1}, false);
  propagate_step(s);
  const Tensor2& bridge = s.tape.val(s.bridge_se_ce);
  CHECK(bridge.at(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(bridge.at(0, 1) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(bridge.at(0, 2) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("bridge rows sum to 1 after every step; t = 0 leaves state untouched") {
  auto w = make_toy_world(7, 3);
  PropagationState s = make_state(w.model.params, w.kg, w.bundle, w.bundle.scores,
                                  PropagationConfig{3}, false);
  for (int step = 0; step < 3; ++step) {
    propagate_step(s);
    for (int id : {s.bridge_se_ce, s.bridge_sp_cp}) {
      const Tensor2& m = s.tape.val(id);
      for (int i = 0; i < m.rows; ++i) {
        double sum = 0.0;
        for (int j = 0; j < m.cols; ++j) sum += m.at(i, j);
        CHECK(std::abs(sum - 1.0) < 1e-6);
      }
    }
  }
  CHECK_THROWS(propagate_step(s));  // past configured t

  PropagationState s0 = make_state(w.model.params, w.kg, w.bundle, w.bundle.scores,
                                   PropagationConfig{0}, false);
  const Tensor2 se_before = s0.tape.val(s0.family(Family::kSE));
  run_propagation(s0);
  CHECK(s0.step == 0);
  CHECK(s0.tape.val(s0.family(Family::kSE)).data == se_before.data);
}

TEST_CASE("determinism and single-step composition") {
  auto w = make_toy_world(11, 1);
  auto run = [&](int steps) {
    PropagationState s = make_state(w.model.params, w.kg, w.bundle, w.bundle.scores,
                                    PropagationConfig{steps}, false);
    run_propagation(s);
    return s.tape.val(s.family(Family::kSP));
  };
  Tensor2 a = run(1);
  Tensor2 b = run(1);
  CHECK(a.data == b.data);  // bit-identical

  PropagationState s = make_state(w.model.params, w.kg, w.bundle, w.bundle.scores,
                                  PropagationConfig{1}, false);
  propagate_step(s);
  CHECK(s.tape.val(s.family(Family::kSP)).data == a.data);
}

TEST_CASE("full-pipeline gradient matches finite differences at t = 2") {
  auto w = make_toy_world(13, 2);

  auto loss_of = [&](const ModelParams& params) {
    Model m = w.model;
    m.params = params;
    ForwardOutputs out = model_forward(m, w.kg, w.bundle, TaskMode::kSGCls, true);
    LossIds ids = model_loss(out, w.kg, w.bundle, m.toggles, LossWeights{}, true);
    return out.state.tape.val(ids.total).at(0, 0);
  };

  // Analytic gradients.
  Model m = w.model;
  ForwardOutputs out = model_forward(m, w.kg, w.bundle, TaskMode::kSGCls, true);
  LossIds ids = model_loss(out, w.kg, w.bundle, m.toggles, LossWeights{}, true);
  out.state.tape.backward(ids.total);
  std::vector<double> analytic;
  for (int pid : out.state.params.all) {
    const Tensor2& g = out.state.tape.grad(pid);
    analytic.insert(analytic.end(), g.data.begin(), g.data.end());
  }

  auto f = [&](const std::vector<double>& v) {
    ModelParams p = w.model.params;
    vec_to_params(p, v);
    return loss_of(p);
  };
  auto rep = grad_check(f, params_to_vec(w.model.params), analytic, 1e-5);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_SUITE_END();
