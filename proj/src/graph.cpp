#include "hiker/graph.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "json_util.hpp"

namespace hiker {

using detail::json;

const char* edge_type_name(EdgeType t) {
  switch (t) {
    case EdgeType::kRelCeCp: return "rel_ce_cp";
    case EdgeType::kRelCpCe: return "rel_cp_ce";
    case EdgeType::kRelCeCe: return "rel_ce_ce";
    case EdgeType::kRelCpCp: return "rel_cp_cp";
    case EdgeType::kHierEntDown: return "hier_ent_down";
    case EdgeType::kHierEntUp: return "hier_ent_up";
    case EdgeType::kHierPredDown: return "hier_pred_down";
    case EdgeType::kHierPredUp: return "hier_pred_up";
    case EdgeType::kSubjectOf: return "subject_of";
    case EdgeType::kObjectOf: return "object_of";
    case EdgeType::kHasSubject: return "has_subject";
    case EdgeType::kHasObject: return "has_object";
    case EdgeType::kBridgeCeSe: return "bridge_ce_se";
    case EdgeType::kBridgeSeCe: return "bridge_se_ce";
    case EdgeType::kBridgeCpSp: return "bridge_cp_sp";
    case EdgeType::kBridgeSpCp: return "bridge_sp_cp";
    default: return "unknown";
  }
}

std::vector<RelationEdge> load_relation_edges(const std::string& path) {
  json j = detail::load_json_file(path);
  if (!j.is_array()) throw std::runtime_error("relation edge file must be a JSON list: " + path);
  std::vector<RelationEdge> out;
  for (const auto& e : j) {
    RelationEdge r;
    r.src.kind = e.at("src").at("kind").get<std::string>();
    r.src.idx = e.at("src").at("idx").get<int>();
    r.dst.kind = e.at("dst").at("kind").get<std::string>();
    r.dst.idx = e.at("dst").at("idx").get<int>();
    r.label = e.value("label", "");
    if ((r.src.kind != "CE" && r.src.kind != "CP") || (r.dst.kind != "CE" && r.dst.kind != "CP"))
      throw std::runtime_error("relation edges may only join CE/CP nodes: " + path);
    out.push_back(std::move(r));
  }
  return out;
}

void save_relation_edges(const std::string& path, const std::vector<RelationEdge>& edges) {
  json j = json::array();
  for (const auto& e : edges) {
    j.push_back({{"src", {{"kind", e.src.kind}, {"idx", e.src.idx}}},
                 {"dst", {{"kind", e.dst.kind}, {"idx", e.dst.idx}}},
                 {"label", e.label}});
  }
  detail::save_json_file(path, j);
}

namespace {

Tensor2 child_average_map(const std::vector<int>& child_to_parent, int n_parents) {
  const int n_children = static_cast<int>(child_to_parent.size());
  std::vector<int> counts(n_parents, 0);
  for (int p : child_to_parent) ++counts[p];
  Tensor2 m(n_parents, n_children);
  for (int c = 0; c < n_children; ++c)
    m.at(child_to_parent[c], c) = 1.0 / static_cast<double>(counts[child_to_parent[c]]);
  return m;
}

Tensor2 parent_child_adj(const std::vector<int>& child_to_parent, int n_parents, bool down) {
  const int n_children = static_cast<int>(child_to_parent.size());
  // down: [children x parents]; up: [parents x children]
  Tensor2 m(down ? n_children : n_parents, down ? n_parents : n_children);
  for (int c = 0; c < n_children; ++c) {
    if (down)
      m.at(c, child_to_parent[c]) = 1.0;
    else
      m.at(child_to_parent[c], c) = 1.0;
  }
  return m;
}

}  // namespace

CommonsenseGraph build_commonsense_graph(const EmbeddingTable& embeddings,
                                         const Hierarchy& ent_hier, const Hierarchy& pred_hier,
                                         const std::vector<RelationEdge>& relation_edges,
                                         const Tensor2& proj) {
  ent_hier.validate();
  pred_hier.validate();
  if (proj.cols != embeddings.dim)
    throw std::invalid_argument("build_commonsense_graph: projection/embedding dim mismatch");

  CommonsenseGraph g;
  g.ent_hier = ent_hier;
  g.pred_hier = pred_hier;
  g.relation_edges = relation_edges;

  // Leaf features: LinearProj(embedding). Throws if any class lacks a vector.
  g.emb_e = embeddings.rows_for(ent_hier.leaf_names);
  g.emb_p = embeddings.rows_for(pred_hier.leaf_names);
  g.ce_x = matmul_nt(g.emb_e, proj);
  g.cp_x = matmul_nt(g.emb_p, proj);

  // Superclass features: mean of direct children, level by level.
  g.avg_e2 = child_average_map(ent_hier.leaf_to_l2, ent_hier.n_l2());
  g.avg_e1 = child_average_map(ent_hier.l2_to_l1, ent_hier.n_l1());
  g.avg_p2 = child_average_map(pred_hier.leaf_to_l2, pred_hier.n_l2());
  g.avg_p1 = child_average_map(pred_hier.l2_to_l1, pred_hier.n_l1());
  g.cxe2_x = matmul(g.avg_e2, g.ce_x);
  g.cxe1_x = matmul(g.avg_e1, g.cxe2_x);
  g.cxp2_x = matmul(g.avg_p2, g.cp_x);
  g.cxp1_x = matmul(g.avg_p1, g.cxp2_x);

  // Relation adjacency (weight 1, no self loops).
  const int ne = ent_hier.n_leaves(), np = pred_hier.n_leaves();
  Tensor2 ce_cp(np, ne), cp_ce(ne, np), ce_ce(ne, ne), cp_cp(np, np);
  for (const auto& e : relation_edges) {
    const int src_n = e.src.kind == "CE" ? ne : np;
    const int dst_n = e.dst.kind == "CE" ? ne : np;
    if (e.src.idx < 0 || e.src.idx >= src_n || e.dst.idx < 0 || e.dst.idx >= dst_n)
      throw std::invalid_argument("relation edge references an unknown class index");
    if (e.src.kind == e.dst.kind && e.src.idx == e.dst.idx)
      throw std::invalid_argument("relation edge would form a self-loop");
    if (e.src.kind == "CE" && e.dst.kind == "CP") ce_cp.at(e.dst.idx, e.src.idx) = 1.0;
    else if (e.src.kind == "CP" && e.dst.kind == "CE") cp_ce.at(e.dst.idx, e.src.idx) = 1.0;
    else if (e.src.kind == "CE" && e.dst.kind == "CE") ce_ce.at(e.dst.idx, e.src.idx) = 1.0;
    else cp_cp.at(e.dst.idx, e.src.idx) = 1.0;
  }
  g.blocks.push_back({EdgeType::kRelCeCp, Family::kCE, Family::kCP, std::move(ce_cp)});
  g.blocks.push_back({EdgeType::kRelCpCe, Family::kCP, Family::kCE, std::move(cp_ce)});
  g.blocks.push_back({EdgeType::kRelCeCe, Family::kCE, Family::kCE, std::move(ce_ce)});
  g.blocks.push_back({EdgeType::kRelCpCp, Family::kCP, Family::kCP, std::move(cp_cp)});

  // Hierarchical edges, both directions, between adjacent levels.
  g.blocks.push_back({EdgeType::kHierEntDown, Family::kCXE2, Family::kCE,
                      parent_child_adj(ent_hier.leaf_to_l2, ent_hier.n_l2(), true)});
  g.blocks.push_back({EdgeType::kHierEntDown, Family::kCXE1, Family::kCXE2,
                      parent_child_adj(ent_hier.l2_to_l1, ent_hier.n_l1(), true)});
  g.blocks.push_back({EdgeType::kHierEntUp, Family::kCE, Family::kCXE2,
                      parent_child_adj(ent_hier.leaf_to_l2, ent_hier.n_l2(), false)});
  g.blocks.push_back({EdgeType::kHierEntUp, Family::kCXE2, Family::kCXE1,
                      parent_child_adj(ent_hier.l2_to_l1, ent_hier.n_l1(), false)});
  g.blocks.push_back({EdgeType::kHierPredDown, Family::kCXP2, Family::kCP,
                      parent_child_adj(pred_hier.leaf_to_l2, pred_hier.n_l2(), true)});
  g.blocks.push_back({EdgeType::kHierPredDown, Family::kCXP1, Family::kCXP2,
                      parent_child_adj(pred_hier.l2_to_l1, pred_hier.n_l1(), true)});
  g.blocks.push_back({EdgeType::kHierPredUp, Family::kCP, Family::kCXP2,
                      parent_child_adj(pred_hier.leaf_to_l2, pred_hier.n_l2(), false)});
  g.blocks.push_back({EdgeType::kHierPredUp, Family::kCXP2, Family::kCXP1,
                      parent_child_adj(pred_hier.l2_to_l1, pred_hier.n_l1(), false)});

  g.validate();
  return g;
}

void CommonsenseGraph::validate() const {
  if (ce_x.cols != cp_x.cols || ce_x.cols != cxe2_x.cols || ce_x.cols != cxp1_x.cols)
    throw std::invalid_argument("CommonsenseGraph: inconsistent feature dims");
  // Hierarchical blocks must mirror each other: every down edge has its
  // reverse up edge.
  auto find_block = [&](EdgeType t, Family s, Family d) -> const EdgeBlock* {
    for (const auto& b : blocks)
      if (b.type == t && b.src == s && b.dst == d) return &b;
    return nullptr;
  };
  const struct {
    EdgeType down, up;
    Family parent, child;
  } pairs[] = {
      {EdgeType::kHierEntDown, EdgeType::kHierEntUp, Family::kCXE2, Family::kCE},
      {EdgeType::kHierEntDown, EdgeType::kHierEntUp, Family::kCXE1, Family::kCXE2},
      {EdgeType::kHierPredDown, EdgeType::kHierPredUp, Family::kCXP2, Family::kCP},
      {EdgeType::kHierPredDown, EdgeType::kHierPredUp, Family::kCXP1, Family::kCXP2},
  };
  for (const auto& p : pairs) {
    const EdgeBlock* down = find_block(p.down, p.parent, p.child);
    const EdgeBlock* up = find_block(p.up, p.child, p.parent);
    if (!down || !up) throw std::invalid_argument("CommonsenseGraph: missing hierarchical block");
    if (down->adj.rows != up->adj.cols || down->adj.cols != up->adj.rows)
      throw std::invalid_argument("CommonsenseGraph: hierarchical block shape mismatch");
    for (int i = 0; i < down->adj.rows; ++i)
      for (int j = 0; j < down->adj.cols; ++j)
        if (down->adj.at(i, j) != up->adj.at(j, i))
          throw std::invalid_argument("CommonsenseGraph: hierarchical edge missing its reverse");
  }
  for (const auto& b : blocks) {
    const bool relation = b.type == EdgeType::kRelCeCp || b.type == EdgeType::kRelCpCe ||
                          b.type == EdgeType::kRelCeCe || b.type == EdgeType::kRelCpCp;
    if (relation && (b.src != Family::kCE && b.src != Family::kCP))
      throw std::invalid_argument("CommonsenseGraph: relation edge touching a superclass node");
    if (relation && (b.dst != Family::kCE && b.dst != Family::kCP))
      throw std::invalid_argument("CommonsenseGraph: relation edge touching a superclass node");
    if (relation && b.src == b.dst)
      for (int i = 0; i < b.adj.rows; ++i)
        if (b.adj.at(i, i) != 0.0)
          throw std::invalid_argument("CommonsenseGraph: self-loop in relation edges");
  }
}

namespace {

json tensor_to_json(const Tensor2& t) {
  json rows = json::array();
  for (int i = 0; i < t.rows; ++i) {
    json row = json::array();
    for (int j = 0; j < t.cols; ++j) row.push_back(t.at(i, j));
    rows.push_back(std::move(row));
  }
  return json{{"rows", t.rows}, {"cols", t.cols}, {"data", std::move(rows)}};
}

Tensor2 tensor_from_json(const json& j) {
  Tensor2 t(j.at("rows").get<int>(), j.at("cols").get<int>());
  const auto& rows = j.at("data");
  if (static_cast<int>(rows.size()) != t.rows)
    throw std::runtime_error("tensor_from_json: row count mismatch");
  for (int i = 0; i < t.rows; ++i)
    for (int j2 = 0; j2 < t.cols; ++j2) t.at(i, j2) = rows[i][j2].get<double>();
  return t;
}

json hierarchy_to_json(const Hierarchy& h) {
  return json{{"target", to_string(h.target)},
              {"leaf_to_l2", h.leaf_to_l2},
              {"l2_to_l1", h.l2_to_l1},
              {"leaf_names", h.leaf_names}};
}

Hierarchy hierarchy_from_json(const json& j) {
  Hierarchy h;
  h.target = hierarchy_target_from_string(j.at("target").get<std::string>());
  h.leaf_to_l2 = j.at("leaf_to_l2").get<std::vector<int>>();
  h.l2_to_l1 = j.at("l2_to_l1").get<std::vector<int>>();
  h.leaf_names = j.at("leaf_names").get<std::vector<std::string>>();
  return h;
}

}  // namespace

void CommonsenseGraph::save(const std::string& path) const {
  json j;
  j["ent_hier"] = hierarchy_to_json(ent_hier);
  j["pred_hier"] = hierarchy_to_json(pred_hier);
  json rel = json::array();
  for (const auto& e : relation_edges)
    rel.push_back({{"src", {{"kind", e.src.kind}, {"idx", e.src.idx}}},
                   {"dst", {{"kind", e.dst.kind}, {"idx", e.dst.idx}}},
                   {"label", e.label}});
  j["relation_edges"] = std::move(rel);
  j["emb_e"] = tensor_to_json(emb_e);
  j["emb_p"] = tensor_to_json(emb_p);
  j["ce_x"] = tensor_to_json(ce_x);
  j["cp_x"] = tensor_to_json(cp_x);
  j["cxe2_x"] = tensor_to_json(cxe2_x);
  j["cxe1_x"] = tensor_to_json(cxe1_x);
  j["cxp2_x"] = tensor_to_json(cxp2_x);
  j["cxp1_x"] = tensor_to_json(cxp1_x);
  json blks = json::array();
  for (const auto& b : blocks)
    blks.push_back({{"type", static_cast<int>(b.type)},
                    {"src", static_cast<int>(b.src)},
                    {"dst", static_cast<int>(b.dst)},
                    {"adj", tensor_to_json(b.adj)}});
  j["blocks"] = std::move(blks);
  detail::save_json_file(path, j, -1);
}

CommonsenseGraph CommonsenseGraph::load(const std::string& path) {
  json j = detail::load_json_file(path);
  CommonsenseGraph g;
  g.ent_hier = hierarchy_from_json(j.at("ent_hier"));
  g.pred_hier = hierarchy_from_json(j.at("pred_hier"));
  for (const auto& e : j.at("relation_edges")) {
    RelationEdge r;
    r.src.kind = e.at("src").at("kind").get<std::string>();
    r.src.idx = e.at("src").at("idx").get<int>();
    r.dst.kind = e.at("dst").at("kind").get<std::string>();
    r.dst.idx = e.at("dst").at("idx").get<int>();
    r.label = e.value("label", "");
    g.relation_edges.push_back(std::move(r));
  }
  g.emb_e = tensor_from_json(j.at("emb_e"));
  g.emb_p = tensor_from_json(j.at("emb_p"));
  g.ce_x = tensor_from_json(j.at("ce_x"));
  g.cp_x = tensor_from_json(j.at("cp_x"));
  g.cxe2_x = tensor_from_json(j.at("cxe2_x"));
  g.cxe1_x = tensor_from_json(j.at("cxe1_x"));
  g.cxp2_x = tensor_from_json(j.at("cxp2_x"));
  g.cxp1_x = tensor_from_json(j.at("cxp1_x"));
  for (const auto& b : j.at("blocks")) {
    EdgeBlock eb;
    eb.type = static_cast<EdgeType>(b.at("type").get<int>());
    eb.src = static_cast<Family>(b.at("src").get<int>());
    eb.dst = static_cast<Family>(b.at("dst").get<int>());
    eb.adj = tensor_from_json(b.at("adj"));
    g.blocks.push_back(std::move(eb));
  }
  g.avg_e2 = child_average_map(g.ent_hier.leaf_to_l2, g.ent_hier.n_l2());
  g.avg_e1 = child_average_map(g.ent_hier.l2_to_l1, g.ent_hier.n_l1());
  g.avg_p2 = child_average_map(g.pred_hier.leaf_to_l2, g.pred_hier.n_l2());
  g.avg_p1 = child_average_map(g.pred_hier.l2_to_l1, g.pred_hier.n_l1());
  g.validate();
  return g;
}

void DetectionBundle::validate(int n_ent) const {
  const int np = n();
  if (boxes.cols != 4) throw std::invalid_argument("bundle: boxes must be [n x 4]");
  for (int i = 0; i < np; ++i) {
    const double x1 = boxes.at(i, 0), y1 = boxes.at(i, 1);
    const double x2 = boxes.at(i, 2), y2 = boxes.at(i, 3);
    if (!(x1 >= 0.0 && y1 >= 0.0 && x2 <= 1.0 && y2 <= 1.0 && x1 < x2 && y1 < y2))
      throw std::invalid_argument("bundle: box outside [0,1] or degenerate");
  }
  if (scores.rows != np || scores.cols != n_ent)
    throw std::invalid_argument("bundle: scores shape mismatch");
  for (int i = 0; i < np; ++i) {
    double sum = 0.0;
    for (int j = 0; j < n_ent; ++j) {
      if (scores.at(i, j) < 0.0) throw std::invalid_argument("bundle: negative score");
      sum += scores.at(i, j);
    }
    if (sum > 1.0 + 1e-6) throw std::invalid_argument("bundle: score row sums above 1");
  }
  if (ent_features.rows != np) throw std::invalid_argument("bundle: ent_features rows mismatch");
  if (pair_features.rows != np * (np - 1) && !(np < 2 && pair_features.rows == 0))
    throw std::invalid_argument("bundle: pair_features rows mismatch");
  if (static_cast<int>(gt.labels.size()) != np)
    throw std::invalid_argument("bundle: gt label count mismatch");
  for (int l : gt.labels)
    if (l < 0 || l >= n_ent) throw std::invalid_argument("bundle: gt label out of range");
  for (const auto& t : gt.triplets) {
    if (t[0] < 0 || t[0] >= np || t[2] < 0 || t[2] >= np || t[0] == t[2])
      throw std::invalid_argument("bundle: triplet proposal index invalid");
    if (t[1] < 0) throw std::invalid_argument("bundle: triplet predicate invalid");
  }
}

std::vector<std::pair<int, int>> ordered_pairs(int n) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<size_t>(n) * (n - 1));
  for (int s = 0; s < n; ++s)
    for (int o = 0; o < n; ++o)
      if (o != s) pairs.emplace_back(s, o);
  return pairs;
}

std::vector<DetectionBundle> load_bundles(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open bundle file: " + path);
  std::vector<DetectionBundle> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
    }
    DetectionBundle b;
    b.image_id = j.value("image_id", "img_" + std::to_string(lineno));
    b.boxes = tensor_from_json(j.at("boxes"));
    b.scores = tensor_from_json(j.at("scores"));
    b.ent_features = tensor_from_json(j.at("ent_features"));
    b.pair_features = tensor_from_json(j.at("pair_features"));
    const auto& gt = j.at("gt");
    b.gt.labels = gt.at("labels").get<std::vector<int>>();
    b.gt.boxes = tensor_from_json(gt.at("boxes"));
    for (const auto& t : gt.at("triplets"))
      b.gt.triplets.push_back({t[0].get<int>(), t[1].get<int>(), t[2].get<int>()});
    out.push_back(std::move(b));
  }
  return out;
}

void save_bundles(const std::string& path, const std::vector<DetectionBundle>& bundles) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write bundle file: " + path);
  for (const auto& b : bundles) {
    json gt;
    gt["labels"] = b.gt.labels;
    gt["boxes"] = tensor_to_json(b.gt.boxes);
    json trips = json::array();
    for (const auto& t : b.gt.triplets) trips.push_back({t[0], t[1], t[2]});
    gt["triplets"] = std::move(trips);
    json j;
    j["image_id"] = b.image_id;
    j["boxes"] = tensor_to_json(b.boxes);
    j["scores"] = tensor_to_json(b.scores);
    j["ent_features"] = tensor_to_json(b.ent_features);
    j["pair_features"] = tensor_to_json(b.pair_features);
    j["gt"] = std::move(gt);
    out << j.dump() << "\n";
  }
}

SceneGraph scene_structure(const DetectionBundle& bundle) {
  SceneGraph g;
  g.boxes = bundle.boxes;
  const int n = bundle.n();
  if (n < 2)
    std::fprintf(stderr, "[hiker] warning: image %s has %d proposal(s), no predicate nodes\n",
                 bundle.image_id.c_str(), n);
  g.pairs = ordered_pairs(n);
  const int n_sp = g.n_sp();

  Tensor2 subject_of(n_sp, n), object_of(n_sp, n);    // SE -> SP
  Tensor2 has_subject(n, n_sp), has_object(n, n_sp);  // SP -> SE
  for (int k = 0; k < n_sp; ++k) {
    subject_of.at(k, g.pairs[k].first) = 1.0;
    object_of.at(k, g.pairs[k].second) = 1.0;
    has_subject.at(g.pairs[k].first, k) = 1.0;
    has_object.at(g.pairs[k].second, k) = 1.0;
  }
  g.blocks.push_back({EdgeType::kSubjectOf, Family::kSE, Family::kSP, std::move(subject_of)});
  g.blocks.push_back({EdgeType::kObjectOf, Family::kSE, Family::kSP, std::move(object_of)});
  g.blocks.push_back({EdgeType::kHasSubject, Family::kSP, Family::kSE, std::move(has_subject)});
  g.blocks.push_back({EdgeType::kHasObject, Family::kSP, Family::kSE, std::move(has_object)});
  return g;
}

SceneGraph init_scene_graph(const DetectionBundle& bundle, const MlpParams& fc_e,
                            const MlpParams& fc_p) {
  if (fc_e.in_dim() != bundle.ent_features.cols ||
      (bundle.pair_features.rows > 0 && fc_p.in_dim() != bundle.pair_features.cols))
    throw std::invalid_argument("init_scene_graph: feature dims do not match the FCNets");
  SceneGraph g = scene_structure(bundle);
  const int n = g.n_se(), n_sp = g.n_sp();
  g.se_x = Tensor2(n, fc_e.out_dim());
  for (int i = 0; i < n; ++i) {
    std::vector<double> v(bundle.ent_features.cols);
    for (int j = 0; j < bundle.ent_features.cols; ++j) v[j] = bundle.ent_features.at(i, j);
    const auto y = mlp_forward(fc_e, v);
    for (int j = 0; j < fc_e.out_dim(); ++j) g.se_x.at(i, j) = y[j];
  }
  g.sp_x = Tensor2(n_sp, fc_p.out_dim());
  for (int k = 0; k < n_sp; ++k) {
    std::vector<double> v(bundle.pair_features.cols);
    for (int j = 0; j < bundle.pair_features.cols; ++j) v[j] = bundle.pair_features.at(k, j);
    const auto y = mlp_forward(fc_p, v);
    for (int j = 0; j < fc_p.out_dim(); ++j) g.sp_x.at(k, j) = y[j];
  }
  g.validate();
  return g;
}

void SceneGraph::validate() const {
  const int n = n_se();
  if (n_sp() != n * (n - 1) && !(n < 2 && n_sp() == 0))
    throw std::invalid_argument("SceneGraph: SP count must be n*(n-1)");
  std::vector<int> has_subj(n_sp(), 0), has_obj(n_sp(), 0);
  for (const auto& b : blocks) {
    if (b.type == EdgeType::kHasSubject)
      for (int i = 0; i < b.adj.rows; ++i)
        for (int k = 0; k < b.adj.cols; ++k)
          if (b.adj.at(i, k) != 0.0) ++has_subj[k];
    if (b.type == EdgeType::kHasObject)
      for (int i = 0; i < b.adj.rows; ++i)
        for (int k = 0; k < b.adj.cols; ++k)
          if (b.adj.at(i, k) != 0.0) ++has_obj[k];
  }
  for (int k = 0; k < n_sp(); ++k) {
    if (has_subj[k] != 1 || has_obj[k] != 1)
      throw std::invalid_argument("SceneGraph: SP node without exactly one subject/object");
    if (pairs[k].first == pairs[k].second)
      throw std::invalid_argument("SceneGraph: SP node with subject == object");
  }
}

Tensor2 one_hot_rows(const std::vector<int>& labels, int n_classes) {
  Tensor2 m(static_cast<int>(labels.size()), n_classes);
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes)
      throw std::invalid_argument("one_hot_rows: label out of range");
    m.at(static_cast<int>(i), labels[i]) = 1.0;
  }
  return m;
}

BridgeSet init_bridges(const SceneGraph& scene, const Tensor2& detector_scores, int n_pred) {
  if (detector_scores.rows != scene.n_se())
    throw std::invalid_argument("init_bridges: score rows do not align with SE nodes");
  BridgeSet b;
  b.se_ce = detector_scores;
  for (int i = 0; i < b.se_ce.rows; ++i) {
    double sum = 0.0;
    for (int j = 0; j < b.se_ce.cols; ++j) sum += b.se_ce.at(i, j);
    if (sum <= 0.0) {
      std::fprintf(stderr, "[hiker] warning: all-zero detector score row %d, using uniform\n", i);
      for (int j = 0; j < b.se_ce.cols; ++j) b.se_ce.at(i, j) = 1.0 / b.se_ce.cols;
    } else {
      for (int j = 0; j < b.se_ce.cols; ++j) b.se_ce.at(i, j) /= sum;
    }
  }
  b.sp_cp = Tensor2(scene.n_sp(), n_pred, 1.0 / n_pred);
  b.validate();
  return b;
}

void BridgeSet::validate() const {
  auto check_rows = [](const Tensor2& m, const char* which) {
    for (int i = 0; i < m.rows; ++i) {
      double sum = 0.0;
      for (int j = 0; j < m.cols; ++j) {
        if (m.at(i, j) < 0.0) throw std::invalid_argument(std::string(which) + ": negative weight");
        sum += m.at(i, j);
      }
      if (std::abs(sum - 1.0) > 1e-6)
        throw std::invalid_argument(std::string(which) + ": bridge row does not sum to 1");
    }
  };
  check_rows(se_ce, "BridgeSet.se_ce");
  check_rows(sp_cp, "BridgeSet.sp_cp");
}

}  // namespace hiker
