// PredCls/SGCls scoring: IoU, ranked triplet matching under the graph
// constraint, per-class mean recall, multi-hop superclass recall, and the
// report formats.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "hiker/hierarchy.hpp"

namespace hiker {

struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
};

// Intersection over union; degenerate boxes give 0 (with a warning).
double iou(const Box& a, const Box& b);

struct TripletPrediction {
  int subject_idx = -1, object_idx = -1;
  Box subject_box, object_box;
  int predicate = -1;
  double score = 0.0;
  int subject_class = -1, object_class = -1;
};

struct GtTriplet {
  Box subject_box, object_box;
  int subject_class = -1, predicate = -1, object_class = -1;
};

struct MatchOptions {
  int k = 100;
  bool constrained = false;
  double iou_thresh = 0.5;
  int hop = 3;  // 3 = exact leaf; 2/1 relax to the level-2/-1 ancestor
  const Hierarchy* pred_hier = nullptr;  // required for hop < 3
};

// Greedy by rank over the top-k (eligible) predictions; each ground truth
// is consumed at most once. A prediction matches a gt when subject/object
// classes agree, the predicate agrees at the requested hop, and both boxes
// clear the IoU threshold. Under the constraint only the top-scoring
// prediction per ordered (subject, object) proposal pair is eligible.
// Returns the matched gt indices.
std::vector<int> match_triplets(const std::vector<TripletPrediction>& preds_sorted,
                                const std::vector<GtTriplet>& gts, const MatchOptions& opts);

struct RecallResult {
  std::vector<double> per_class;   // recall in [0,100]; -1 for classes with no gt
  std::vector<long> gt_counts;
  double mean = 0.0;               // over classes with >= 1 gt instance
};

// Per-predicate-class recall pooled over images, then the unweighted mean
// over classes that appear in the ground truth.
RecallResult mean_recall_at_k(const std::vector<std::vector<TripletPrediction>>& preds_by_image,
                              const std::vector<std::vector<GtTriplet>>& gts_by_image,
                              int n_pred_classes, const MatchOptions& opts);

struct MetricsSummary {
  // [hop 1..3][k index 0..2 for 20/50/100] -> mR %, constrained/unconstrained
  double mr_c[4][3] = {};
  double mr_uc[4][3] = {};
  double predicate_accuracy = 0.0;  // top-1 per gt pair
  long n_images = 0;
  long n_gt_triplets = 0;
};

struct MetricsReport {
  MetricsSummary clean;
  std::vector<double> per_class_recall_c[3];   // per k, exact hop, constrained
  std::vector<double> per_class_recall_uc[3];
  std::vector<std::string> class_names;
  std::map<std::string, MetricsSummary> per_corruption;
  std::string config_hash;

  void save_json(const std::string& path) const;
  void save_csv(const std::string& path) const;  // class,recall@20,recall@50,recall@100
  // Rows = metric, columns = corruption label, mirroring the benchmark table.
  void save_corruption_table(const std::string& path) const;
};

inline const int kRecallKs[3] = {20, 50, 100};

// Full summary over one prediction/gt set; enforces the k- and hop-
// monotonicity invariants and throws if they are violated.
MetricsSummary summarize(const std::vector<std::vector<TripletPrediction>>& preds_by_image,
                         const std::vector<std::vector<GtTriplet>>& gts_by_image,
                         int n_pred_classes, const Hierarchy& pred_hier);

}  // namespace hiker
