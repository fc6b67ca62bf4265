#include "hiker/synth.hpp"

#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "hiker/evaluation.hpp"
#include "hiker/kernels.hpp"
#include "hiker/rng.hpp"
#include "json_util.hpp"

namespace hiker {

void SyntheticSpec::validate() const {
  if (n_train < 0 || n_test < 0) throw std::invalid_argument("synth: negative image count");
  if (min_objects < 1 || max_objects < min_objects)
    throw std::invalid_argument("synth: bad object count range");
  if (n_ent < ent_l2 || ent_l2 < ent_l1 || ent_l1 < 1)
    throw std::invalid_argument("synth: entity class/group counts inconsistent");
  if (n_pred < pred_l2 || pred_l2 < pred_l1 || pred_l1 < 1)
    throw std::invalid_argument("synth: predicate class/group counts inconsistent");
  if (dim < 2) throw std::invalid_argument("synth: dim must be >= 2");
  if (!(separation > 0.0)) throw std::invalid_argument("synth: separation must be positive");
  if (noise < 0.0) throw std::invalid_argument("synth: negative noise");
  if (triplets_min < 1 || triplets_max < triplets_min)
    throw std::invalid_argument("synth: bad triplet count range");
}

uint64_t SyntheticSpec::hash() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "tr%d te%d o%d-%d e%d/%d/%d p%d/%d/%d d%d sep%.17g n%.17g "
                "t%.17g r%d-%d s%llu",
                n_train, n_test, min_objects, max_objects, n_ent, ent_l2, ent_l1, n_pred,
                pred_l2, pred_l1, dim, separation, noise, score_temp, triplets_min,
                triplets_max, static_cast<unsigned long long>(seed));
  return fnv1a64(std::string_view(buf));
}

namespace {

std::vector<double> random_unit(Rng& rng, int dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

// Level-1 centers far apart, level-2 offset inside them, leaves closest:
// distances 4*sep / 2*sep / 1*sep down the tree.
Tensor2 hierarchical_prototypes(Rng& rng, const Hierarchy& h, int dim, double sep) {
  const int nl1 = h.n_l1(), nl2 = h.n_l2(), n = h.n_leaves();
  std::vector<std::vector<double>> l1(nl1), l2(nl2);
  for (int g = 0; g < nl1; ++g) {
    l1[g] = random_unit(rng, dim);
    for (double& x : l1[g]) x *= 6.0 * sep;
  }
  for (int g = 0; g < nl2; ++g) {
    l2[g] = random_unit(rng, dim);
    for (int j = 0; j < dim; ++j) l2[g][j] = l1[h.l2_to_l1[g]][j] + 3.0 * sep * l2[g][j];
  }
  Tensor2 protos(n, dim);
  for (int i = 0; i < n; ++i) {
    auto u = random_unit(rng, dim);
    for (int j = 0; j < dim; ++j) protos.at(i, j) = l2[h.leaf_to_l2[i]][j] + sep * u[j];
  }
  return protos;
}

Hierarchy even_hierarchy(HierarchyTarget target, const std::string& prefix, int n, int nl2,
                         int nl1) {
  Hierarchy h;
  h.target = target;
  for (int i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%02d", prefix.c_str(), i);
    h.leaf_names.push_back(buf);
    h.leaf_to_l2.push_back(i * nl2 / n);
  }
  for (int g = 0; g < nl2; ++g) h.l2_to_l1.push_back(g * nl1 / nl2);
  h.validate();
  return h;
}

Tensor2 sample_boxes(Rng& rng, int n) {
  // Rejection keeps cross-object IoU low so box matching is unambiguous.
  Tensor2 boxes(n, 4);
  std::vector<Box> placed;
  for (int i = 0; i < n; ++i) {
    for (int attempt = 0;; ++attempt) {
      const double w = rng.uniform(0.12, 0.3);
      const double h = rng.uniform(0.12, 0.3);
      const double x1 = rng.uniform(0.0, 1.0 - w);
      const double y1 = rng.uniform(0.0, 1.0 - h);
      Box b{x1, y1, x1 + w, y1 + h};
      bool ok = true;
      for (const auto& other : placed)
        if (iou(b, other) > 0.35) {
          ok = false;
          break;
        }
      if (ok || attempt > 50) {
        placed.push_back(b);
        boxes.at(i, 0) = b.x1;
        boxes.at(i, 1) = b.y1;
        boxes.at(i, 2) = b.x2;
        boxes.at(i, 3) = b.y2;
        break;
      }
    }
  }
  return boxes;
}

DetectionBundle make_image(Rng& rng, const SyntheticSpec& spec, const Tensor2& ent_protos,
                           const Tensor2& pred_protos, const std::string& image_id) {
  DetectionBundle b;
  b.image_id = image_id;
  const int n = spec.min_objects +
                static_cast<int>(rng.bounded(spec.max_objects - spec.min_objects + 1));
  b.boxes = sample_boxes(rng, n);
  b.gt.boxes = b.boxes;

  b.gt.labels.resize(n);
  b.ent_features = Tensor2(n, spec.dim);
  for (int i = 0; i < n; ++i) {
    b.gt.labels[i] = rng.index(spec.n_ent);
    for (int j = 0; j < spec.dim; ++j)
      b.ent_features.at(i, j) = ent_protos.at(b.gt.labels[i], j) + spec.noise * rng.normal();
  }

  // Detector scores: softmax of negative squared prototype distance.
  b.scores = Tensor2(n, spec.n_ent);
  const double denom = 2.0 * spec.score_temp * spec.separation * spec.separation;
  for (int i = 0; i < n; ++i) {
    std::vector<double> logits(spec.n_ent);
    for (int c = 0; c < spec.n_ent; ++c) {
      double d2 = 0.0;
      for (int j = 0; j < spec.dim; ++j) {
        const double diff = b.ent_features.at(i, j) - ent_protos.at(c, j);
        d2 += diff * diff;
      }
      logits[c] = -d2 / denom;
    }
    const auto p = softmax(logits);
    for (int c = 0; c < spec.n_ent; ++c) b.scores.at(i, c) = p[c];
  }

  // Ground-truth relations on distinct ordered pairs; the remaining pairs
  // carry background (zero-centered) features.
  b.pair_features = Tensor2(n * (n - 1), spec.dim);
  for (double& v : b.pair_features.data) v = spec.noise * rng.normal();
  auto pairs = ordered_pairs(n);
  rng.shuffle(pairs);
  const int want = spec.triplets_min +
                   static_cast<int>(rng.bounded(spec.triplets_max - spec.triplets_min + 1));
  const int m = std::min<int>(want, static_cast<int>(pairs.size()));
  for (int t = 0; t < m; ++t) {
    const auto [s, o] = pairs[t];
    const int pred = rng.index(spec.n_pred);
    b.gt.triplets.push_back({s, pred, o});
    const int k = pair_index(s, o, n);
    for (int j = 0; j < spec.dim; ++j)
      b.pair_features.at(k, j) = pred_protos.at(pred, j) + spec.noise * rng.normal();
  }
  b.validate(spec.n_ent);
  return b;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticDataset out;
  out.ent_hier = even_hierarchy(HierarchyTarget::kEntity, "ent", spec.n_ent, spec.ent_l2,
                                spec.ent_l1);
  out.pred_hier = even_hierarchy(HierarchyTarget::kPredicate, "pred", spec.n_pred, spec.pred_l2,
                                 spec.pred_l1);

  Rng proto_rng(spec.seed, 11);
  out.ent_prototypes = hierarchical_prototypes(proto_rng, out.ent_hier, spec.dim,
                                               spec.separation);
  out.pred_prototypes = hierarchical_prototypes(proto_rng, out.pred_hier, spec.dim,
                                                spec.separation);

  for (int i = 0; i < spec.n_ent; ++i) {
    std::vector<double> v(spec.dim);
    for (int j = 0; j < spec.dim; ++j) v[j] = out.ent_prototypes.at(i, j);
    out.embeddings.add(out.ent_hier.leaf_names[i], v);
  }
  for (int i = 0; i < spec.n_pred; ++i) {
    std::vector<double> v(spec.dim);
    for (int j = 0; j < spec.dim; ++j) v[j] = out.pred_prototypes.at(i, j);
    out.embeddings.add(out.pred_hier.leaf_names[i], v);
  }

  // A small plausible relation list: each predicate linked to two entities.
  Rng rel_rng(spec.seed, 12);
  for (int p = 0; p < spec.n_pred; ++p) {
    out.relations.push_back({{"CE", rel_rng.index(spec.n_ent)}, {"CP", p}, "subject-of"});
    out.relations.push_back({{"CP", p}, {"CE", rel_rng.index(spec.n_ent)}, "object-of"});
  }

  for (int i = 0; i < spec.n_train; ++i) {
    Rng rng(spec.seed, 1'000'000 + i);  // per-image stream
    out.train.push_back(make_image(rng, spec, out.ent_prototypes, out.pred_prototypes,
                                   "train_" + std::to_string(i)));
  }
  for (int i = 0; i < spec.n_test; ++i) {
    Rng rng(spec.seed, 2'000'000 + i);
    out.test.push_back(make_image(rng, spec, out.ent_prototypes, out.pred_prototypes,
                                  "test_" + std::to_string(i)));
  }
  return out;
}

void write_synthetic(const SyntheticDataset& data, const SyntheticSpec& spec,
                     const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  data.embeddings.save(out_dir + "/embeddings.txt");
  data.ent_hier.save(out_dir + "/hierarchy_ent.json");
  data.pred_hier.save(out_dir + "/hierarchy_pred.json");
  save_relation_edges(out_dir + "/relations.json", data.relations);
  save_bundles(out_dir + "/train.jsonl", data.train);
  save_bundles(out_dir + "/test.jsonl", data.test);

  detail::json j;
  j["n_train"] = spec.n_train;
  j["n_test"] = spec.n_test;
  j["objects"] = {spec.min_objects, spec.max_objects};
  j["n_ent"] = spec.n_ent;
  j["n_pred"] = spec.n_pred;
  j["ent_groups"] = {spec.ent_l2, spec.ent_l1};
  j["pred_groups"] = {spec.pred_l2, spec.pred_l1};
  j["dim"] = spec.dim;
  j["separation"] = spec.separation;
  j["noise"] = spec.noise;
  j["score_temp"] = spec.score_temp;
  j["triplets"] = {spec.triplets_min, spec.triplets_max};
  j["seed"] = spec.seed;
  char hashbuf[32];
  std::snprintf(hashbuf, sizeof hashbuf, "%016llx",
                static_cast<unsigned long long>(spec.hash()));
  j["config_hash"] = hashbuf;
  detail::save_json_file(out_dir + "/synth_spec.json", j);
}

DetectionBundle add_feature_noise(const DetectionBundle& bundle, double sigma, uint64_t seed,
                                  uint64_t image_index) {
  if (sigma == 0.0) return bundle;
  if (sigma < 0.0) throw std::invalid_argument("add_feature_noise: negative sigma");
  DetectionBundle out = bundle;
  Rng rng(seed, 3'000'000 + image_index);
  for (double& v : out.ent_features.data) v += sigma * rng.normal();
  for (double& v : out.pair_features.data) v += sigma * rng.normal();
  return out;
}

}  // namespace hiker
