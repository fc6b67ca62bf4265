// Hierarchy discovery: semantic/pattern similarity blending, average-linkage
// agglomerative clustering, and the 3-level cut used by the inference chain.
// Also the embedding / confusion-matrix / hierarchy file formats.
#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "hiker/tensor.hpp"

namespace hiker {

struct EmbeddingTable {
  int dim = 0;
  std::vector<std::string> tokens;
  std::unordered_map<std::string, int> index;
  Tensor2 vectors;  // [n x dim]

  bool has(const std::string& token) const { return index.count(token) > 0; }
  std::vector<double> vec(const std::string& token) const;
  void add(const std::string& token, const std::vector<double>& v);

  // Rows of `vectors` reordered to match `names`; throws on a missing token.
  Tensor2 rows_for(const std::vector<std::string>& names) const;

  static EmbeddingTable load(const std::string& path);
  void save(const std::string& path) const;
};

struct ConfusionMatrix {
  std::vector<std::string> labels;
  Tensor2 m;  // rows = actual class, cols = predicted class

  int size() const { return m.rows; }
  void validate() const;  // entries in [0,1], rows sum to <= 1 + 1e-6

  static ConfusionMatrix load(const std::string& path);
  void save(const std::string& path) const;
};

struct Merge {
  int a = -1;  // lower cluster id of the merged pair
  int b = -1;
  double similarity = 0.0;
  int new_id = -1;
};

struct Dendrogram {
  int n_leaves = 0;
  std::vector<Merge> merges;  // exactly n_leaves - 1 entries
};

enum class HierarchyTarget { kEntity, kPredicate };

std::string to_string(HierarchyTarget t);
HierarchyTarget hierarchy_target_from_string(const std::string& s);

struct Hierarchy {
  HierarchyTarget target = HierarchyTarget::kPredicate;
  std::vector<std::string> leaf_names;
  std::vector<int> leaf_to_l2;  // level-2 parent per leaf
  std::vector<int> l2_to_l1;    // level-1 parent per level-2 group

  int n_leaves() const { return static_cast<int>(leaf_to_l2.size()); }
  int n_l2() const { return static_cast<int>(l2_to_l1.size()); }
  int n_l1() const;
  int l1_of_leaf(int leaf) const { return l2_to_l1[leaf_to_l2[leaf]]; }

  std::vector<std::vector<int>> l2_groups() const;  // leaf members per l2 group
  std::vector<std::vector<int>> l1_groups() const;  // l2 members per l1 group

  // Synthesized level names, e.g. "pred_l2_3".
  std::vector<std::string> l2_names() const;
  std::vector<std::string> l1_names() const;

  void validate() const;
  uint64_t hash() const;  // content hash over target + names + parent maps

  static Hierarchy load(const std::string& path);
  void save(const std::string& path) const;
};

// Cosine similarity of two embedding vectors (Eq. 1 role).
double semantic_similarity(const std::vector<double>& a, const std::vector<double>& b);

// R[i][j] + R[j][i]: how often the baseline confuses the two classes.
double pattern_similarity(const ConfusionMatrix& r, int i, int j);

// lambda * sem + (1 - lambda) * pat, lambda in [0, 1].
double combined_similarity(double sem, double pat, double lambda);

// Full blended similarity matrix for an ordered class list. `conf` may be
// null when lambda == 1 (pure semantic).
Tensor2 similarity_matrix(const EmbeddingTable& emb, const std::vector<std::string>& classes,
                          const ConfusionMatrix* conf, double lambda);

// Average-linkage clustering: repeatedly merges the active pair with the
// highest similarity; ties go to the lowest (then lowest-second) cluster id.
Dendrogram agglomerate(const Tensor2& similarity);

// Cuts the dendrogram where exactly n_l2 (resp. n_l1) clusters remain and
// labels groups by their smallest leaf index.
Hierarchy cut_levels(const Dendrogram& d, int n_leaves, int n_l2_groups, int n_l1_groups,
                     HierarchyTarget target, std::vector<std::string> leaf_names);

// Hierarchy::load plus full validation; the "manually configured" arm.
Hierarchy load_manual_hierarchy(const std::string& path);

}  // namespace hiker
