#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "doctest.h"
#include "hiker/evaluation.hpp"
#include "hiker/rng.hpp"

using namespace hiker;

namespace {

// Independent reference matcher: explicit eligibility matrix, then greedy
// consumption by rank with the same exact-first / lowest-index tie rule.
std::vector<int> oracle_match(const std::vector<TripletPrediction>& preds,
                              const std::vector<GtTriplet>& gts, const MatchOptions& opts) {
  std::vector<TripletPrediction> pool;
  if (opts.constrained) {
    std::map<std::pair<int, int>, bool> used;
    for (const auto& p : preds) {
      auto key = std::make_pair(p.subject_idx, p.object_idx);
      if (used.count(key)) continue;
      used[key] = true;
      pool.push_back(p);
    }
  } else {
    pool = preds;
  }
  if (static_cast<int>(pool.size()) > opts.k) pool.resize(opts.k);

  auto pred_ok = [&](int pc, int gc) {
    if (opts.hop == 3) return pc == gc;
    if (opts.hop == 2) return opts.pred_hier->leaf_to_l2[pc] == opts.pred_hier->leaf_to_l2[gc];
    return opts.pred_hier->l1_of_leaf(pc) == opts.pred_hier->l1_of_leaf(gc);
  };
  std::vector<std::vector<int>> exact(pool.size()), relaxed(pool.size());
  for (size_t p = 0; p < pool.size(); ++p)
    for (size_t g = 0; g < gts.size(); ++g) {
      const auto& pr = pool[p];
      const auto& gt = gts[g];
      const bool classes = pr.subject_class == gt.subject_class &&
                           pr.object_class == gt.object_class;
      const bool boxes = iou(pr.subject_box, gt.subject_box) >= opts.iou_thresh &&
                         iou(pr.object_box, gt.object_box) >= opts.iou_thresh;
      if (!classes || !boxes || !pred_ok(pr.predicate, gt.predicate)) continue;
      (pr.predicate == gt.predicate ? exact[p] : relaxed[p]).push_back(static_cast<int>(g));
    }
  std::vector<bool> taken(gts.size(), false);
  std::vector<int> matched;
  for (size_t p = 0; p < pool.size(); ++p) {
    int hit = -1;
    for (int g : exact[p])
      if (!taken[g]) {
        hit = g;
        break;
      }
    if (hit < 0)
      for (int g : relaxed[p])
        if (!taken[g]) {
          hit = g;
          break;
        }
    if (hit >= 0) {
      taken[hit] = true;
      matched.push_back(hit);
    }
  }
  return matched;
}

Box random_box(Rng& rng) {
  const double x1 = rng.uniform(0.0, 0.7);
  const double y1 = rng.uniform(0.0, 0.7);
  return {x1, y1, x1 + rng.uniform(0.1, 0.3), y1 + rng.uniform(0.1, 0.3)};
}

struct Scene {
  std::vector<TripletPrediction> preds;
  std::vector<GtTriplet> gts;
};

Scene random_scene(Rng& rng, const Hierarchy& h) {
  const int n_obj = 2 + rng.index(3);      // up to 4 objects
  const int n_cls = h.n_leaves();          // up to 3 predicate classes
  const int n_ent_cls = 3;
  Scene s;
  std::vector<Box> boxes(n_obj);
  std::vector<int> ent_cls(n_obj);
  for (int i = 0; i < n_obj; ++i) {
    boxes[i] = random_box(rng);
    ent_cls[i] = rng.index(n_ent_cls);
  }
  for (int i = 0; i < n_obj; ++i)
    for (int j = 0; j < n_obj; ++j) {
      if (i == j) continue;
      if (rng.uniform() < 0.5) {
        GtTriplet gt;
        gt.subject_box = boxes[i];
        gt.object_box = boxes[j];
        gt.subject_class = ent_cls[i];
        gt.object_class = ent_cls[j];
        gt.predicate = rng.index(n_cls);
        s.gts.push_back(gt);
      }
      const int preds_here = rng.index(3);
      for (int c = 0; c < preds_here; ++c) {
        TripletPrediction p;
        p.subject_idx = i;
        p.object_idx = j;
        p.subject_box = boxes[i];
        p.object_box = boxes[j];
        // Sometimes jitter a box so IoU has work to do.
        if (rng.uniform() < 0.3) p.subject_box = random_box(rng);
        p.subject_class = rng.uniform() < 0.8 ? ent_cls[i] : rng.index(n_ent_cls);
        p.object_class = rng.uniform() < 0.8 ? ent_cls[j] : rng.index(n_ent_cls);
        p.predicate = rng.index(n_cls);
        p.score = rng.uniform();
        s.preds.push_back(p);
      }
    }
  std::stable_sort(s.preds.begin(), s.preds.end(),
                   [](const TripletPrediction& a, const TripletPrediction& b) {
                     return a.score > b.score;
                   });
  return s;
}

Hierarchy tiny_pred_hier() {
  Hierarchy h;
  h.target = HierarchyTarget::kPredicate;
  h.leaf_names = {"p0", "p1", "p2"};
  h.leaf_to_l2 = {0, 0, 1};
  h.l2_to_l1 = {0, 0};
  return h;
}

}  // namespace

TEST_SUITE_BEGIN("evaluation");

TEST_CASE("iou values") {
  Box a{0, 0, 2, 2};
  CHECK(iou(a, a) == doctest::Approx(1.0));
  Box b{3, 3, 4, 4};
  CHECK(iou(a, b) == 0.0);
  Box c{1, 0, 3, 2};
  CHECK(iou(a, c) == doctest::Approx(2.0 / 6.0));
  CHECK(iou(a, c) == doctest::Approx(iou(c, a)));
  Box degenerate{0.5, 0.5, 0.5, 0.8};
  CHECK(iou(a, degenerate) == 0.0);
}

TEST_CASE("exact predictions all match; constraint keeps only the pair top") {
  Hierarchy h = tiny_pred_hier();
  std::vector<GtTriplet> gts;
  GtTriplet g1{{0.0, 0.0, 0.2, 0.2}, {0.5, 0.5, 0.7, 0.7}, 0, 1, 1};
  GtTriplet g2{{0.5, 0.5, 0.7, 0.7}, {0.0, 0.0, 0.2, 0.2}, 1, 2, 0};
  gts = {g1, g2};
  std::vector<TripletPrediction> preds;
  TripletPrediction p1{0, 1, g1.subject_box, g1.object_box, 1, 0.9, 0, 1};
  TripletPrediction p2{1, 0, g2.subject_box, g2.object_box, 2, 0.8, 1, 0};
  preds = {p1, p2};
  MatchOptions opts;
  opts.k = 100;
  auto matched = match_triplets(preds, gts, opts);
  CHECK(matched.size() == 2);

  // A second predicate on pair (0,1), ranked lower, matching a second gt
  // on that pair: unconstrained matches it, constrained does not.
  GtTriplet g3 = g1;
  g3.predicate = 2;
  gts.push_back(g3);
  TripletPrediction p3 = p1;
  p3.predicate = 2;
  p3.score = 0.5;
  preds.push_back(p3);
  auto un = match_triplets(preds, gts, opts);
  CHECK(un.size() == 3);
  opts.constrained = true;
  auto con = match_triplets(preds, gts, opts);
  CHECK(con.size() == 2);

  // Constrained matches are a subset of unconstrained matches.
  for (int g : con) CHECK(std::find(un.begin(), un.end(), g) != un.end());
}

TEST_CASE("matcher equals the brute-force oracle on random tiny scenes") {
  Hierarchy h = tiny_pred_hier();
  Rng rng(2025);
  int scenes_checked = 0;
  for (int seed = 0; seed < 50; ++seed) {
    Scene s = random_scene(rng, h);
    if (s.gts.empty()) continue;
    ++scenes_checked;
    for (bool constrained : {false, true})
      for (int hop : {3, 2, 1})
        for (int k : {1, 3, 20}) {
          MatchOptions opts;
          opts.k = k;
          opts.constrained = constrained;
          opts.hop = hop;
          opts.pred_hier = &h;
          auto mine = match_triplets(s.preds, s.gts, opts);
          auto ref = oracle_match(s.preds, s.gts, opts);
          CHECK(mine == ref);
        }
  }
  CHECK(scenes_checked >= 30);
}

TEST_CASE("mean recall arithmetic") {
  Hierarchy h = tiny_pred_hier();
  // Two classes present; the predictor finds class 0's instance and misses
  // class 1's only instance -> mR = 50%.
  GtTriplet g0{{0, 0, 0.2, 0.2}, {0.3, 0.3, 0.5, 0.5}, 0, 0, 1};
  GtTriplet g1{{0.3, 0.3, 0.5, 0.5}, {0, 0, 0.2, 0.2}, 1, 1, 0};
  TripletPrediction hit{0, 1, g0.subject_box, g0.object_box, 0, 0.9, 0, 1};
  std::vector<std::vector<TripletPrediction>> preds = {{hit}};
  std::vector<std::vector<GtTriplet>> gts = {{g0, g1}};
  MatchOptions opts;
  opts.k = 20;
  auto res = mean_recall_at_k(preds, gts, h.n_leaves(), opts);
  CHECK(res.mean == doctest::Approx(50.0));
  CHECK(res.per_class[0] == doctest::Approx(100.0));
  CHECK(res.per_class[1] == doctest::Approx(0.0));
  CHECK(res.per_class[2] == -1.0);  // absent class excluded from the mean

  // Perfect predictor -> 100%.
  TripletPrediction hit2{1, 0, g1.subject_box, g1.object_box, 1, 0.8, 1, 0};
  preds[0].push_back(hit2);
  CHECK(mean_recall_at_k(preds, gts, h.n_leaves(), opts).mean == doctest::Approx(100.0));

  CHECK_THROWS(mean_recall_at_k({{}}, {{}}, 3, opts));
}

TEST_CASE("multi-hop relaxation") {
  Hierarchy h = tiny_pred_hier();  // p0,p1 share l2 group 0; all share l1
  GtTriplet gt{{0, 0, 0.2, 0.2}, {0.3, 0.3, 0.5, 0.5}, 0, 0, 1};
  // Wrong leaf (p1) but the correct level-2 parent.
  TripletPrediction wrong_leaf{0, 1, gt.subject_box, gt.object_box, 1, 0.9, 0, 1};
  std::vector<std::vector<TripletPrediction>> preds = {{wrong_leaf}};
  std::vector<std::vector<GtTriplet>> gts = {{gt}};
  MatchOptions opts;
  opts.k = 20;
  opts.pred_hier = &h;
  opts.hop = 3;
  CHECK(mean_recall_at_k(preds, gts, 3, opts).mean == doctest::Approx(0.0));
  opts.hop = 2;
  CHECK(mean_recall_at_k(preds, gts, 3, opts).mean == doctest::Approx(100.0));
  opts.hop = 1;
  CHECK(mean_recall_at_k(preds, gts, 3, opts).mean == doctest::Approx(100.0));

  // A correct leaf counts at every hop.
  preds[0][0].predicate = 0;
  for (int hop : {1, 2, 3}) {
    opts.hop = hop;
    CHECK(mean_recall_at_k(preds, gts, 3, opts).mean == doctest::Approx(100.0));
  }

  opts.hop = 7;
  CHECK_THROWS(mean_recall_at_k(preds, gts, 3, opts));
}

TEST_CASE("summary enforces monotonicity and computes accuracy") {
  Hierarchy h = tiny_pred_hier();
  Rng rng(99);
  std::vector<std::vector<TripletPrediction>> preds;
  std::vector<std::vector<GtTriplet>> gts;
  for (int i = 0; i < 10; ++i) {
    Scene s = random_scene(rng, h);
    if (s.gts.empty()) continue;
    preds.push_back(s.preds);
    gts.push_back(s.gts);
  }
  REQUIRE(!gts.empty());
  MetricsSummary s = summarize(preds, gts, h.n_leaves(), h);
  for (int hop = 1; hop <= 3; ++hop) {
    CHECK(s.mr_c[hop][2] >= s.mr_c[hop][1]);
    CHECK(s.mr_c[hop][1] >= s.mr_c[hop][0]);
  }
  for (int ki = 0; ki < 3; ++ki) {
    CHECK(s.mr_c[1][ki] >= s.mr_c[2][ki]);
    CHECK(s.mr_c[2][ki] >= s.mr_c[3][ki]);
    CHECK(s.mr_uc[1][ki] >= s.mr_uc[2][ki]);
  }
  CHECK(s.predicate_accuracy >= 0.0);
  CHECK(s.predicate_accuracy <= 100.0);
}

TEST_CASE("report files") {
  MetricsReport rep;
  rep.class_names = {"p0", "p1"};
  rep.per_class_recall_c[0] = {50.0, 75.0};
  rep.per_class_recall_c[1] = {60.0, 80.0};
  rep.per_class_recall_c[2] = {70.0, 90.0};
  rep.clean.mr_c[3][0] = 62.5;
  rep.config_hash = "deadbeef00000000";
  MetricsSummary corrupted;
  corrupted.mr_c[3][0] = 55.0;
  rep.per_corruption["gaus3"] = corrupted;

  rep.save_json("/tmp/hiker_metrics.json");
  rep.save_csv("/tmp/hiker_metrics.csv");
  rep.save_corruption_table("/tmp/hiker_corruption.csv");
  std::ifstream a("/tmp/hiker_metrics.json"), b("/tmp/hiker_metrics.csv"),
      c("/tmp/hiker_corruption.csv");
  CHECK(a.good());
  CHECK(b.good());
  CHECK(c.good());
  std::string header;
  std::getline(b, header);
  CHECK(header == "class,recall@20,recall@50,recall@100");
  std::getline(c, header);
  CHECK(header == "metric,clean,gaus3");
  std::remove("/tmp/hiker_metrics.json");
  std::remove("/tmp/hiker_metrics.csv");
  std::remove("/tmp/hiker_corruption.csv");
}

TEST_SUITE_END();
