#include <cstdio>

#include "doctest.h"
#include "hiker/graph.hpp"
#include "hiker/rng.hpp"

using namespace hiker;

namespace {

Hierarchy toy_hier(HierarchyTarget target, std::vector<std::string> names,
                   std::vector<int> leaf_to_l2, std::vector<int> l2_to_l1) {
  Hierarchy h;
  h.target = target;
  h.leaf_names = std::move(names);
  h.leaf_to_l2 = std::move(leaf_to_l2);
  h.l2_to_l1 = std::move(l2_to_l1);
  h.validate();
  return h;
}

EmbeddingTable toy_embeddings() {
  EmbeddingTable t;
  t.add("man", {1.0, 0.0});
  t.add("cat", {0.0, 1.0});
  t.add("tree", {1.0, 1.0});
  t.add("on", {0.5, 0.0});
  t.add("wears", {0.0, 0.5});
  return t;
}

DetectionBundle toy_bundle(int n, int n_ent, int d_vis, uint64_t seed = 3) {
  Rng rng(seed);
  DetectionBundle b;
  b.image_id = "toy";
  b.boxes = Tensor2(n, 4);
  for (int i = 0; i < n; ++i) {
    const double x1 = 0.05 + 0.2 * i, y1 = 0.1;
    b.boxes.at(i, 0) = x1;
    b.boxes.at(i, 1) = y1;
    b.boxes.at(i, 2) = x1 + 0.1;
    b.boxes.at(i, 3) = y1 + 0.3;
  }
  b.scores = Tensor2(n, n_ent);
  for (int i = 0; i < n; ++i) b.scores.at(i, i % n_ent) = 1.0;
  b.ent_features = Tensor2(n, d_vis);
  b.pair_features = Tensor2(n * (n - 1), d_vis);
  for (double& v : b.ent_features.data) v = rng.uniform(-1, 1);
  for (double& v : b.pair_features.data) v = rng.uniform(-1, 1);
  b.gt.labels.resize(n);
  for (int i = 0; i < n; ++i) b.gt.labels[i] = i % n_ent;
  b.gt.boxes = b.boxes;
  if (n >= 2) b.gt.triplets.push_back({0, 0, 1});
  return b;
}

}  // namespace

TEST_SUITE_BEGIN("graph");

TEST_CASE("commonsense graph features and superclass averaging") {
  auto ent = toy_hier(HierarchyTarget::kEntity, {"man", "cat", "tree"}, {0, 0, 1}, {0, 0});
  auto pred = toy_hier(HierarchyTarget::kPredicate, {"on", "wears"}, {0, 1}, {0, 0});
  EmbeddingTable emb = toy_embeddings();
  Tensor2 proj = Tensor2::identity(2);  // d = d_emb = 2

  CommonsenseGraph g = build_commonsense_graph(emb, ent, pred, {}, proj);
  // CE features are the projected embeddings.
  CHECK(g.ce_x.at(0, 0) == doctest::Approx(1.0));
  CHECK(g.ce_x.at(1, 1) == doctest::Approx(1.0));
  // Two children with features [1,0] and [0,1] average to [0.5, 0.5].
  CHECK(g.cxe2_x.at(0, 0) == doctest::Approx(0.5));
  CHECK(g.cxe2_x.at(0, 1) == doctest::Approx(0.5));
  // Superclass with a single child keeps the child feature.
  CHECK(g.cxe2_x.at(1, 0) == doctest::Approx(1.0));
  CHECK(g.cxe2_x.at(1, 1) == doctest::Approx(1.0));
  // Predicate level-1 group averages its two level-2 children.
  CHECK(g.cxp1_x.at(0, 0) == doctest::Approx(0.25));
  CHECK(g.cxp1_x.at(0, 1) == doctest::Approx(0.25));

  // No relation edges: all relation adjacency empty but blocks exist.
  int relation_entries = 0;
  for (const auto& b : g.blocks)
    if (b.type == EdgeType::kRelCeCp || b.type == EdgeType::kRelCpCe ||
        b.type == EdgeType::kRelCeCe || b.type == EdgeType::kRelCpCp)
      for (double v : b.adj.data) relation_entries += v != 0.0;
  CHECK(relation_entries == 0);
  g.validate();
}

TEST_CASE("commonsense graph input validation") {
  auto ent = toy_hier(HierarchyTarget::kEntity, {"man", "dog"}, {0, 1}, {0, 0});
  auto pred = toy_hier(HierarchyTarget::kPredicate, {"on"}, {0}, {0});
  EmbeddingTable emb = toy_embeddings();  // no "dog"
  Tensor2 proj = Tensor2::identity(2);
  CHECK_THROWS(build_commonsense_graph(emb, ent, pred, {}, proj));

  auto ent_ok = toy_hier(HierarchyTarget::kEntity, {"man", "cat"}, {0, 1}, {0, 0});
  std::vector<RelationEdge> bad_edge = {{{"CE", 0}, {"CP", 5}, "rel"}};
  CHECK_THROWS(build_commonsense_graph(emb, ent_ok, pred, bad_edge, proj));
  std::vector<RelationEdge> self_loop = {{{"CE", 1}, {"CE", 1}, "rel"}};
  CHECK_THROWS(build_commonsense_graph(emb, ent_ok, pred, self_loop, proj));

  std::vector<RelationEdge> ok_edge = {{{"CE", 0}, {"CP", 0}, "subject-of"}};
  CommonsenseGraph g = build_commonsense_graph(emb, ent_ok, pred, ok_edge, proj);
  for (const auto& b : g.blocks)
    if (b.type == EdgeType::kRelCeCp) CHECK(b.adj.at(0, 0) == 1.0);
}

TEST_CASE("commonsense graph serialization roundtrips losslessly") {
  auto ent = toy_hier(HierarchyTarget::kEntity, {"man", "cat", "tree"}, {0, 0, 1}, {0, 0});
  auto pred = toy_hier(HierarchyTarget::kPredicate, {"on", "wears"}, {0, 1}, {0, 0});
  EmbeddingTable emb = toy_embeddings();
  Rng rng(4);
  Tensor2 proj(3, 2);
  for (double& v : proj.data) v = rng.uniform(-1, 1);
  std::vector<RelationEdge> edges = {{{"CE", 0}, {"CP", 1}, "wears"},
                                     {{"CP", 0}, {"CE", 2}, "on"}};
  CommonsenseGraph g = build_commonsense_graph(emb, ent, pred, edges, proj);

  const std::string path = "/tmp/hiker_test_kg.json";
  g.save(path);
  CommonsenseGraph r = CommonsenseGraph::load(path);
  CHECK(r.ce_x.data == g.ce_x.data);
  CHECK(r.cp_x.data == g.cp_x.data);
  CHECK(r.cxe1_x.data == g.cxe1_x.data);
  CHECK(r.cxp1_x.data == g.cxp1_x.data);
  CHECK(r.blocks.size() == g.blocks.size());
  for (size_t i = 0; i < g.blocks.size(); ++i) CHECK(r.blocks[i].adj.data == g.blocks[i].adj.data);
  CHECK(r.ent_hier.hash() == g.ent_hier.hash());
  CHECK(r.relation_edges.size() == 2);
  std::remove(path.c_str());
}

TEST_CASE("scene graph structure counts") {
  DetectionBundle b2 = toy_bundle(2, 3, 5);
  MlpParams fc = mlp_zeros(5, 4, 4, 4);
  SceneGraph g2 = init_scene_graph(b2, fc, fc);
  CHECK(g2.n_se() == 2);
  CHECK(g2.n_sp() == 2);
  int edges = 0;
  for (const auto& blk : g2.blocks)
    for (double v : blk.adj.data) edges += v != 0.0;
  CHECK(edges == 8);
  for (double v : g2.se_x.data) CHECK(v == 0.0);
  for (double v : g2.sp_x.data) CHECK(v == 0.0);

  DetectionBundle b1 = toy_bundle(1, 3, 5);
  SceneGraph g1 = init_scene_graph(b1, fc, fc);
  CHECK(g1.n_se() == 1);
  CHECK(g1.n_sp() == 0);

  DetectionBundle b4 = toy_bundle(4, 3, 5);
  SceneGraph g4 = init_scene_graph(b4, fc, fc);
  CHECK(g4.n_sp() == 12);
  g4.validate();
  // pair_index agrees with the enumeration order.
  for (int k = 0; k < g4.n_sp(); ++k)
    CHECK(pair_index(g4.pairs[k].first, g4.pairs[k].second, 4) == k);

  MlpParams wrong = mlp_zeros(7, 4, 4, 4);
  CHECK_THROWS(init_scene_graph(b2, wrong, wrong));
}

TEST_CASE("bridge initialization") {
  DetectionBundle b = toy_bundle(3, 4, 5);
  MlpParams fc = mlp_zeros(5, 4, 4, 4);
  SceneGraph g = init_scene_graph(b, fc, fc);

  Tensor2 scores(3, 4);
  scores.at(0, 2) = 1.0;              // one-hot
  scores.at(1, 0) = 0.2;              // two active classes
  scores.at(1, 1) = 0.2;
  /* row 2 all zero -> uniform */
  BridgeSet bs = init_bridges(g, scores, 50);

  CHECK(bs.se_ce.at(0, 2) == doctest::Approx(1.0));
  CHECK(bs.se_ce.at(1, 0) == doctest::Approx(0.5));
  CHECK(bs.se_ce.at(1, 1) == doctest::Approx(0.5));
  CHECK(bs.se_ce.at(1, 2) == doctest::Approx(0.0));
  CHECK(bs.se_ce.at(2, 0) == doctest::Approx(0.25));
  for (int k = 0; k < g.n_sp(); ++k)
    for (int j = 0; j < 50; ++j) CHECK(bs.sp_cp.at(k, j) == doctest::Approx(0.02));
  bs.validate();

  Tensor2 misaligned(2, 4);
  CHECK_THROWS(init_bridges(g, misaligned, 50));
}

TEST_CASE("detection bundle validation and jsonl roundtrip") {
  DetectionBundle b = toy_bundle(3, 4, 5);
  b.validate(4);

  DetectionBundle bad_box = b;
  bad_box.boxes.at(0, 2) = bad_box.boxes.at(0, 0);  // x2 == x1
  CHECK_THROWS(bad_box.validate(4));

  DetectionBundle bad_trip = b;
  bad_trip.gt.triplets.push_back({0, 1, 0});  // subject == object
  CHECK_THROWS(bad_trip.validate(4));

  const std::string path = "/tmp/hiker_test_bundles.jsonl";
  DetectionBundle b2 = toy_bundle(2, 4, 5, 17);
  save_bundles(path, {b, b2});
  auto loaded = load_bundles(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].boxes.data == b.boxes.data);
  CHECK(loaded[0].pair_features.data == b.pair_features.data);
  CHECK(loaded[0].gt.triplets == b.gt.triplets);
  CHECK(loaded[1].n() == 2);
  std::remove(path.c_str());
}

TEST_CASE("one_hot_rows") {
  Tensor2 m = one_hot_rows({2, 0}, 3);
  CHECK(m.at(0, 2) == 1.0);
  CHECK(m.at(1, 0) == 1.0);
  CHECK(m.at(0, 0) == 0.0);
  CHECK_THROWS(one_hot_rows({3}, 3));
}

TEST_SUITE_END();
