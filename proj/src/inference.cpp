#include "hiker/inference.hpp"

#include <cmath>
#include <stdexcept>

#include "json_util.hpp"

namespace hiker {

using detail::json;

double node_similarity(const std::vector<double>& x_a, const std::vector<double>& x_b,
                       const MlpParams& fc_sender, const MlpParams& fc_receiver) {
  const auto pa = mlp_forward(fc_sender, x_a);
  const auto pb = mlp_forward(fc_receiver, x_b);
  if (pa.size() != pb.size())
    throw std::invalid_argument("node_similarity: projection dims differ");
  return dot(pa, pb);
}

namespace {

std::vector<double> row_of(const Tensor2& m, int i) {
  std::vector<double> v(m.cols);
  for (int j = 0; j < m.cols; ++j) v[j] = m.at(i, j);
  return v;
}

// Softmax over an index subset, written back at those indices.
void softmax_subset(const std::vector<double>& scores, const std::vector<int>& subset,
                    std::vector<double>& out) {
  std::vector<double> s(subset.size());
  for (size_t k = 0; k < subset.size(); ++k) s[k] = scores[subset[k]];
  const auto p = softmax(s);
  for (size_t k = 0; k < subset.size(); ++k) out[subset[k]] = p[k];
}

}  // namespace

HierarchicalDistribution hierarchical_predict(const std::vector<double>& node_feature,
                                              const Tensor2& leaf_features,
                                              const Tensor2& l2_features,
                                              const Tensor2& l1_features, const Hierarchy& h,
                                              const MlpParams& fc_sender,
                                              const MlpParams& fc_receiver) {
  h.validate();  // rejects empty sibling groups
  if (leaf_features.rows != h.n_leaves() || l2_features.rows != h.n_l2() ||
      l1_features.rows != h.n_l1())
    throw std::invalid_argument("hierarchical_predict: feature/hierarchy size mismatch");

  const auto sender = mlp_forward(fc_sender, node_feature);
  auto receiver_sims = [&](const Tensor2& feats) {
    std::vector<double> sims(feats.rows);
    for (int i = 0; i < feats.rows; ++i)
      sims[i] = dot(sender, mlp_forward(fc_receiver, row_of(feats, i)));
    return sims;
  };

  HierarchicalDistribution out;
  out.l1 = softmax(receiver_sims(l1_features));

  const auto l2_scores = receiver_sims(l2_features);
  out.l2_cond.assign(h.n_l2(), 0.0);
  for (const auto& group : h.l1_groups()) softmax_subset(l2_scores, group, out.l2_cond);

  const auto leaf_scores = receiver_sims(leaf_features);
  out.leaf_cond.assign(h.n_leaves(), 0.0);
  for (const auto& group : h.l2_groups()) softmax_subset(leaf_scores, group, out.leaf_cond);

  out.joint.resize(h.n_leaves());
  for (int i = 0; i < h.n_leaves(); ++i)
    out.joint[i] = out.l1[h.l1_of_leaf(i)] * out.l2_cond[h.leaf_to_l2[i]] * out.leaf_cond[i];
  return out;
}

void TransitionMatrix::validate() const {
  if (t.rows != t.cols) throw std::invalid_argument("TransitionMatrix must be square");
  for (int i = 0; i < t.rows; ++i) {
    double sum = 0.0;
    for (int j = 0; j < t.cols; ++j) {
      if (t.at(i, j) < 0.0) throw std::invalid_argument("TransitionMatrix: negative entry");
      sum += t.at(i, j);
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("TransitionMatrix: row does not sum to 1");
  }
}

TransitionMatrix build_transition(const ConfusionMatrix& r) {
  if (r.m.rows != r.m.cols) throw std::invalid_argument("build_transition: R must be square");
  TransitionMatrix out;
  out.t = r.m;
  for (int i = 0; i < out.t.rows; ++i) {
    for (int j = 0; j < out.t.cols; ++j)
      if (out.t.at(i, j) < 0.0) throw std::invalid_argument("build_transition: negative entry");
    out.t.at(i, i) += 1.0;
    double sum = 0.0;
    for (int j = 0; j < out.t.cols; ++j) sum += out.t.at(i, j);
    for (int j = 0; j < out.t.cols; ++j) out.t.at(i, j) /= sum;
  }
  out.validate();
  return out;
}

std::vector<double> refine(const std::vector<double>& dist, const TransitionMatrix& t) {
  if (static_cast<int>(dist.size()) != t.size())
    throw std::invalid_argument("refine: distribution/transition size mismatch");
  std::vector<double> out(dist.size(), 0.0);
  for (size_t g = 0; g < dist.size(); ++g) {
    if (dist[g] == 0.0) continue;
    for (size_t s = 0; s < dist.size(); ++s)
      out[s] += dist[g] * t.t.at(static_cast<int>(g), static_cast<int>(s));
  }
  return out;
}

int predict_class(const std::vector<double>& dist) {
  if (dist.empty()) throw std::invalid_argument("predict_class: empty distribution");
  int best = 0;
  for (size_t i = 1; i < dist.size(); ++i)
    if (dist[i] > dist[best]) best = static_cast<int>(i);
  return best;
}

TransitionMatrix TransitionMatrix::load(const std::string& path) {
  json j = detail::load_json_file(path);
  if (!j.value("row_stochastic", false))
    throw std::runtime_error("transition file missing row_stochastic flag: " + path);
  TransitionMatrix out;
  const auto& rows = j.at("matrix");
  out.t = Tensor2(static_cast<int>(rows.size()),
                  rows.empty() ? 0 : static_cast<int>(rows[0].size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t k = 0; k < rows[i].size(); ++k)
      out.t.at(static_cast<int>(i), static_cast<int>(k)) = rows[i][k].get<double>();
  out.validate();
  return out;
}

void TransitionMatrix::save(const std::string& path, const std::vector<std::string>& labels) const {
  json j;
  j["labels"] = labels;
  j["row_stochastic"] = true;
  json rows = json::array();
  for (int i = 0; i < t.rows; ++i) {
    json row = json::array();
    for (int k = 0; k < t.cols; ++k) row.push_back(t.at(i, k));
    rows.push_back(std::move(row));
  }
  j["matrix"] = std::move(rows);
  detail::save_json_file(path, j);
}

}  // namespace hiker
