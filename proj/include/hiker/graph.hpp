// Hierarchical commonsense graph (CE/CP/CXE/CXP nodes, relation +
// hierarchical edges), per-image scene graphs (SE/SP nodes, scene edges),
// bridge-edge weights, and the detection-bundle ingestion format.
#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "hiker/hierarchy.hpp"
#include "hiker/kernels.hpp"
#include "hiker/tensor.hpp"

namespace hiker {

// Node families carrying their own feature matrix during propagation.
enum class Family : int { kSE = 0, kSP, kCE, kCP, kCXE2, kCXE1, kCXP2, kCXP1, kCount };

enum class EdgeType : int {
  kRelCeCp = 0,
  kRelCpCe,
  kRelCeCe,
  kRelCpCp,
  kHierEntDown,  // parent -> child, both hierarchy levels
  kHierEntUp,
  kHierPredDown,
  kHierPredUp,
  kSubjectOf,  // SE -> SP
  kObjectOf,   // SE -> SP
  kHasSubject,  // SP -> SE
  kHasObject,   // SP -> SE
  kBridgeCeSe,  // CE -> SE (hasInst direction)
  kBridgeSeCe,  // SE -> CE (classTo direction)
  kBridgeCpSp,
  kBridgeSpCp,
  kCount
};
constexpr int kEdgeTypeCount = static_cast<int>(EdgeType::kCount);

const char* edge_type_name(EdgeType t);

struct NodeRef {
  std::string kind;  // "CE" or "CP"
  int idx = -1;
};

struct RelationEdge {
  NodeRef src;
  NodeRef dst;
  std::string label;
};

std::vector<RelationEdge> load_relation_edges(const std::string& path);
void save_relation_edges(const std::string& path, const std::vector<RelationEdge>& edges);

// Static 0/1 adjacency for one edge type between two families,
// stored [n_dst x n_src] so that messages = adj * transformed(src).
struct EdgeBlock {
  EdgeType type = EdgeType::kCount;
  Family src = Family::kCount;
  Family dst = Family::kCount;
  Tensor2 adj;
};

struct CommonsenseGraph {
  Hierarchy ent_hier, pred_hier;
  std::vector<RelationEdge> relation_edges;

  // Raw class embeddings in hierarchy leaf order; kept so a trainable
  // projection can recompute node features later.
  Tensor2 emb_e, emb_p;  // [count x d_emb]

  // Initialized features, [count x d].
  Tensor2 ce_x, cp_x, cxe2_x, cxe1_x, cxp2_x, cxp1_x;

  // Child-averaging maps used for superclass initialization.
  Tensor2 avg_e2, avg_e1, avg_p2, avg_p1;

  std::vector<EdgeBlock> blocks;  // relation + hierarchical adjacency

  int d() const { return ce_x.cols; }
  int n_ent() const { return ce_x.rows; }
  int n_pred() const { return cp_x.rows; }

  void validate() const;
  void save(const std::string& path) const;
  static CommonsenseGraph load(const std::string& path);
};

// CE/CP features are a linear projection of the class word embeddings;
// CXE/CXP features average their direct children. All eight edge sets are
// materialized as adjacency blocks.
CommonsenseGraph build_commonsense_graph(const EmbeddingTable& embeddings,
                                         const Hierarchy& ent_hier, const Hierarchy& pred_hier,
                                         const std::vector<RelationEdge>& relation_edges,
                                         const Tensor2& proj);

struct GroundTruth {
  std::vector<int> labels;                      // entity class per proposal
  Tensor2 boxes;                                // [n x 4]
  std::vector<std::array<int, 3>> triplets;     // (subject idx, predicate class, object idx)
};

struct DetectionBundle {
  std::string image_id;
  Tensor2 boxes;          // [n x 4], normalized x1,y1,x2,y2
  Tensor2 scores;         // [n x n_ent] detector class scores
  Tensor2 ent_features;   // [n x d_vis]
  Tensor2 pair_features;  // [n*(n-1) x d_vis], ordered-pair enumeration
  GroundTruth gt;

  int n() const { return boxes.rows; }
  void validate(int n_ent) const;
};

// Ordered-pair enumeration shared by every consumer: subject-major,
// skipping the diagonal.
inline int pair_index(int subject, int object, int n) {
  return subject * (n - 1) + (object < subject ? object : object - 1);
}
std::vector<std::pair<int, int>> ordered_pairs(int n);

std::vector<DetectionBundle> load_bundles(const std::string& path);
void save_bundles(const std::string& path, const std::vector<DetectionBundle>& bundles);

struct SceneGraph {
  Tensor2 boxes;                           // [n_se x 4]
  std::vector<std::pair<int, int>> pairs;  // SP index -> (subject SE, object SE)
  Tensor2 se_x;                            // [n_se x d]
  Tensor2 sp_x;                            // [n_sp x d]
  std::vector<EdgeBlock> blocks;           // the four scene edge types

  int n_se() const { return boxes.rows; }
  int n_sp() const { return static_cast<int>(pairs.size()); }
  void validate() const;
};

// One SE per proposal, one SP per ordered pair, features from the two
// (distinct) fully connected nets. n < 2 proposals yields zero SP nodes.
SceneGraph init_scene_graph(const DetectionBundle& bundle, const MlpParams& fc_e,
                            const MlpParams& fc_p);

// Scene edge structure only (no features); used by the differentiable path
// which computes features on the tape.
SceneGraph scene_structure(const DetectionBundle& bundle);

struct BridgeSet {
  Tensor2 se_ce;  // [n_se x n_ent], rows sum to 1
  Tensor2 sp_cp;  // [n_sp x n_pred], rows sum to 1

  void validate() const;
};

// SE rows: detector scores renormalized (all-zero rows go uniform, with a
// warning); SP rows: uniform, the stand-in for "starts empty" that keeps
// the first propagation step well defined.
BridgeSet init_bridges(const SceneGraph& scene, const Tensor2& detector_scores, int n_pred);

// One-hot rows from known labels; the PredCls entry path.
Tensor2 one_hot_rows(const std::vector<int>& labels, int n_classes);

}  // namespace hiker
