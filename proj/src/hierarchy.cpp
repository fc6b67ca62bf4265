#include "hiker/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "hiker/kernels.hpp"
#include "hiker/rng.hpp"
#include "json_util.hpp"

namespace hiker {

using detail::json;

std::vector<double> EmbeddingTable::vec(const std::string& token) const {
  auto it = index.find(token);
  if (it == index.end()) throw std::invalid_argument("embedding missing for token: " + token);
  std::vector<double> v(dim);
  for (int j = 0; j < dim; ++j) v[j] = vectors.at(it->second, j);
  return v;
}

void EmbeddingTable::add(const std::string& token, const std::vector<double>& v) {
  if (index.count(token)) throw std::invalid_argument("duplicate embedding token: " + token);
  if (tokens.empty()) {
    dim = static_cast<int>(v.size());
    vectors = Tensor2(0, dim);
  }
  if (static_cast<int>(v.size()) != dim)
    throw std::invalid_argument("embedding dimension mismatch for token: " + token);
  index[token] = static_cast<int>(tokens.size());
  tokens.push_back(token);
  vectors.rows += 1;
  vectors.data.insert(vectors.data.end(), v.begin(), v.end());
}

Tensor2 EmbeddingTable::rows_for(const std::vector<std::string>& names) const {
  Tensor2 out(static_cast<int>(names.size()), dim);
  for (size_t i = 0; i < names.size(); ++i) {
    auto it = index.find(names[i]);
    if (it == index.end())
      throw std::invalid_argument("embedding missing for class: " + names[i]);
    for (int j = 0; j < dim; ++j) out.at(static_cast<int>(i), j) = vectors.at(it->second, j);
  }
  return out;
}

EmbeddingTable EmbeddingTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embeddings file: " + path);
  EmbeddingTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    std::vector<double> v;
    double x;
    while (ss >> x) v.push_back(x);
    if (token.empty() || v.empty())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed embedding line");
    t.add(token, v);
  }
  if (t.tokens.empty()) throw std::runtime_error("empty embeddings file: " + path);
  return t;
}

void EmbeddingTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write embeddings file: " + path);
  out.precision(17);
  for (size_t i = 0; i < tokens.size(); ++i) {
    out << tokens[i];
    for (int j = 0; j < dim; ++j) out << ' ' << vectors.at(static_cast<int>(i), j);
    out << '\n';
  }
}

void ConfusionMatrix::validate() const {
  if (m.rows != m.cols) throw std::invalid_argument("confusion matrix must be square");
  if (!labels.empty() && static_cast<int>(labels.size()) != m.rows)
    throw std::invalid_argument("confusion matrix labels/size mismatch");
  for (int i = 0; i < m.rows; ++i) {
    double sum = 0.0;
    for (int j = 0; j < m.cols; ++j) {
      const double v = m.at(i, j);
      if (!(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument("confusion matrix entry outside [0,1]");
      sum += v;
    }
    if (sum > 1.0 + 1e-6) throw std::invalid_argument("confusion matrix row sums above 1");
  }
}

ConfusionMatrix ConfusionMatrix::load(const std::string& path) {
  json j = detail::load_json_file(path);
  ConfusionMatrix r;
  r.labels = j.value("labels", std::vector<std::string>{});
  const auto& rows = j.at("matrix");
  r.m = Tensor2(static_cast<int>(rows.size()),
                rows.empty() ? 0 : static_cast<int>(rows[0].size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<int>(rows[i].size()) != r.m.cols)
      throw std::runtime_error("ragged confusion matrix in " + path);
    for (size_t k = 0; k < rows[i].size(); ++k)
      r.m.at(static_cast<int>(i), static_cast<int>(k)) = rows[i][k].get<double>();
  }
  r.validate();
  return r;
}

void ConfusionMatrix::save(const std::string& path) const {
  json j;
  j["labels"] = labels;
  json rows = json::array();
  for (int i = 0; i < m.rows; ++i) {
    json row = json::array();
    for (int k = 0; k < m.cols; ++k) row.push_back(m.at(i, k));
    rows.push_back(std::move(row));
  }
  j["matrix"] = std::move(rows);
  detail::save_json_file(path, j);
}

std::string to_string(HierarchyTarget t) {
  return t == HierarchyTarget::kEntity ? "entity" : "predicate";
}

HierarchyTarget hierarchy_target_from_string(const std::string& s) {
  if (s == "entity") return HierarchyTarget::kEntity;
  if (s == "predicate") return HierarchyTarget::kPredicate;
  throw std::invalid_argument("unknown hierarchy target: " + s);
}

int Hierarchy::n_l1() const {
  int n = 0;
  for (int p : l2_to_l1) n = std::max(n, p + 1);
  return n;
}

std::vector<std::vector<int>> Hierarchy::l2_groups() const {
  std::vector<std::vector<int>> g(n_l2());
  for (int i = 0; i < n_leaves(); ++i) g[leaf_to_l2[i]].push_back(i);
  return g;
}

std::vector<std::vector<int>> Hierarchy::l1_groups() const {
  std::vector<std::vector<int>> g(n_l1());
  for (int i = 0; i < n_l2(); ++i) g[l2_to_l1[i]].push_back(i);
  return g;
}

std::vector<std::string> Hierarchy::l2_names() const {
  std::vector<std::string> names(n_l2());
  const std::string prefix = target == HierarchyTarget::kEntity ? "ent" : "pred";
  for (int i = 0; i < n_l2(); ++i) names[i] = prefix + "_l2_" + std::to_string(i);
  return names;
}

std::vector<std::string> Hierarchy::l1_names() const {
  std::vector<std::string> names(n_l1());
  const std::string prefix = target == HierarchyTarget::kEntity ? "ent" : "pred";
  for (int i = 0; i < n_l1(); ++i) names[i] = prefix + "_l1_" + std::to_string(i);
  return names;
}

void Hierarchy::validate() const {
  const int nl = n_leaves();
  if (nl == 0) throw std::invalid_argument("hierarchy has no leaves");
  if (leaf_names.size() != static_cast<size_t>(nl))
    throw std::invalid_argument("hierarchy leaf_names/leaf_to_l2 size mismatch");
  const int nl2 = n_l2();
  if (nl2 == 0 || nl2 > nl)
    throw std::invalid_argument("hierarchy level-2 group count out of range");
  std::vector<int> l2_count(nl2, 0);
  for (int p : leaf_to_l2) {
    if (p < 0 || p >= nl2) throw std::invalid_argument("hierarchy leaf parent out of range");
    ++l2_count[p];
  }
  for (int c : l2_count)
    if (c == 0) throw std::invalid_argument("hierarchy has an empty level-2 group");
  const int nl1 = n_l1();
  if (nl1 == 0 || nl1 > nl2)
    throw std::invalid_argument("hierarchy level-1 group count out of range");
  std::vector<int> l1_count(nl1, 0);
  for (int p : l2_to_l1) {
    if (p < 0) throw std::invalid_argument("hierarchy level-2 parent out of range");
    ++l1_count[p];
  }
  for (int c : l1_count)
    if (c == 0) throw std::invalid_argument("hierarchy has an empty level-1 group");
}

uint64_t Hierarchy::hash() const {
  uint64_t h = fnv1a64(std::string_view(to_string(target)));
  for (const auto& n : leaf_names) {
    h = fnv1a64(std::string_view(n), h);
    h = fnv1a64(std::string_view("\x1f"), h);
  }
  for (int p : leaf_to_l2) h = fnv1a64_u64(static_cast<uint64_t>(p), h);
  for (int p : l2_to_l1) h = fnv1a64_u64(static_cast<uint64_t>(p), h);
  return h;
}

Hierarchy Hierarchy::load(const std::string& path) {
  json j = detail::load_json_file(path);
  Hierarchy h;
  h.target = hierarchy_target_from_string(j.at("target").get<std::string>());
  h.leaf_to_l2 = j.at("leaf_to_l2").get<std::vector<int>>();
  h.l2_to_l1 = j.at("l2_to_l1").get<std::vector<int>>();
  h.leaf_names = j.at("leaf_names").get<std::vector<std::string>>();
  return h;
}

void Hierarchy::save(const std::string& path) const {
  json j;
  j["target"] = to_string(target);
  j["leaf_to_l2"] = leaf_to_l2;
  j["l2_to_l1"] = l2_to_l1;
  j["leaf_names"] = leaf_names;
  detail::save_json_file(path, j);
}

Hierarchy load_manual_hierarchy(const std::string& path) {
  Hierarchy h = Hierarchy::load(path);
  h.validate();
  return h;
}

double semantic_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  return cosine_similarity(a, b);
}

double pattern_similarity(const ConfusionMatrix& r, int i, int j) {
  if (i < 0 || j < 0 || i >= r.size() || j >= r.size())
    throw std::invalid_argument("pattern_similarity: class index out of range");
  return r.m.at(i, j) + r.m.at(j, i);
}

double combined_similarity(double sem, double pat, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("combined_similarity: lambda outside [0,1]");
  return lambda * sem + (1.0 - lambda) * pat;
}

Tensor2 similarity_matrix(const EmbeddingTable& emb, const std::vector<std::string>& classes,
                          const ConfusionMatrix* conf, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("similarity_matrix: lambda outside [0,1]");
  if (lambda < 1.0) {
    if (conf == nullptr)
      throw std::invalid_argument("similarity_matrix: confusion matrix required for lambda < 1");
    if (conf->size() != static_cast<int>(classes.size()))
      throw std::invalid_argument("similarity_matrix: confusion matrix size mismatch");
  }
  const int n = static_cast<int>(classes.size());
  std::vector<std::vector<double>> vecs(n);
  for (int i = 0; i < n; ++i) vecs[i] = emb.vec(classes[i]);
  Tensor2 s(n, n);
  for (int i = 0; i < n; ++i) {
    s.at(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      const double sem = semantic_similarity(vecs[i], vecs[j]);
      const double pat = lambda < 1.0 ? pattern_similarity(*conf, i, j) : 0.0;
      const double v = combined_similarity(sem, pat, lambda);
      s.at(i, j) = v;
      s.at(j, i) = v;
    }
  }
  return s;
}

Dendrogram agglomerate(const Tensor2& similarity) {
  const int n = similarity.rows;
  if (similarity.cols != n) throw std::invalid_argument("agglomerate: matrix not square");
  if (!similarity.all_finite()) throw std::invalid_argument("agglomerate: non-finite similarity");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (std::abs(similarity.at(i, j) - similarity.at(j, i)) > 1e-9)
        throw std::invalid_argument("agglomerate: matrix not symmetric");

  Dendrogram d;
  d.n_leaves = n;
  if (n <= 1) return d;

  // Cluster ids: 0..n-1 leaves, n..2n-2 merged clusters. Similarities kept
  // dense over ids; merged-cluster rows filled by the average-linkage
  // (Lance-Williams) update.
  const int total = 2 * n - 1;
  Tensor2 sim(total, total);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) sim.at(i, j) = similarity.at(i, j);
  std::vector<int> active;
  std::vector<int> size(total, 0);
  for (int i = 0; i < n; ++i) {
    active.push_back(i);
    size[i] = 1;
  }

  for (int step = 0; step < n - 1; ++step) {
    int best_a = -1, best_b = -1;
    double best = 0.0;
    for (size_t x = 0; x < active.size(); ++x)
      for (size_t y = x + 1; y < active.size(); ++y) {
        const int a = std::min(active[x], active[y]);
        const int b = std::max(active[x], active[y]);
        const double s = sim.at(a, b);
        if (best_a < 0 || s > best ||
            (s == best && (a < best_a || (a == best_a && b < best_b)))) {
          best = s;
          best_a = a;
          best_b = b;
        }
      }
    const int id = n + step;
    d.merges.push_back({best_a, best_b, best, id});
    size[id] = size[best_a] + size[best_b];
    active.erase(std::remove(active.begin(), active.end(), best_a), active.end());
    active.erase(std::remove(active.begin(), active.end(), best_b), active.end());
    for (int k : active) {
      const double s = (size[best_a] * sim.at(best_a, k) + size[best_b] * sim.at(best_b, k)) /
                       static_cast<double>(size[id]);
      sim.at(id, k) = s;
      sim.at(k, id) = s;
    }
    active.push_back(id);
  }
  return d;
}

namespace {

// Leaf -> cluster-root assignment after the first `n_merges` merges,
// with groups labelled by ascending smallest leaf index.
std::vector<int> cluster_assignment(const Dendrogram& d, int n_merges) {
  const int n = d.n_leaves;
  std::vector<int> parent(2 * n - 1);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (int s = 0; s < n_merges; ++s) {
    const Merge& m = d.merges[s];
    parent[find(m.a)] = m.new_id;
    parent[find(m.b)] = m.new_id;
  }
  std::vector<int> root(n);
  std::vector<int> order;  // roots by first (= smallest) leaf occurrence
  std::unordered_map<int, int> label;
  for (int i = 0; i < n; ++i) {
    root[i] = find(i);
    if (!label.count(root[i])) {
      label[root[i]] = static_cast<int>(order.size());
      order.push_back(root[i]);
    }
  }
  std::vector<int> out(n);
  for (int i = 0; i < n; ++i) out[i] = label[root[i]];
  return out;
}

}  // namespace

Hierarchy cut_levels(const Dendrogram& d, int n_leaves, int n_l2_groups, int n_l1_groups,
                     HierarchyTarget target, std::vector<std::string> leaf_names) {
  if (d.n_leaves != n_leaves || static_cast<int>(d.merges.size()) != n_leaves - 1)
    throw std::invalid_argument("cut_levels: dendrogram incomplete for leaf count");
  if (n_l2_groups > n_leaves || n_l1_groups > n_leaves)
    throw std::invalid_argument("cut_levels: requested group count exceeds leaf count");
  if (n_l2_groups < 1 || n_l1_groups < 1 || n_l1_groups > n_l2_groups)
    throw std::invalid_argument("cut_levels: need 1 <= level-1 groups <= level-2 groups");
  if (leaf_names.empty()) {
    leaf_names.resize(n_leaves);
    const std::string prefix = target == HierarchyTarget::kEntity ? "ent_" : "pred_";
    for (int i = 0; i < n_leaves; ++i) leaf_names[i] = prefix + std::to_string(i);
  }

  const std::vector<int> leaf_l2 = cluster_assignment(d, n_leaves - n_l2_groups);
  const std::vector<int> leaf_l1 = cluster_assignment(d, n_leaves - n_l1_groups);

  Hierarchy h;
  h.target = target;
  h.leaf_names = std::move(leaf_names);
  h.leaf_to_l2 = leaf_l2;
  h.l2_to_l1.assign(n_l2_groups, -1);
  for (int i = 0; i < n_leaves; ++i) {
    int& slot = h.l2_to_l1[leaf_l2[i]];
    if (slot == -1) slot = leaf_l1[i];
    // Merges are nested, so all leaves of an l2 group share one l1 group.
  }
  h.validate();
  return h;
}

}  // namespace hiker
