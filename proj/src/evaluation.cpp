#include "hiker/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json_util.hpp"

namespace hiker {

using detail::json;

double iou(const Box& a, const Box& b) {
  const double area_a = (a.x2 - a.x1) * (a.y2 - a.y1);
  const double area_b = (b.x2 - b.x1) * (b.y2 - b.y1);
  if (area_a <= 0.0 || area_b <= 0.0) {
    std::fprintf(stderr, "[hiker] warning: degenerate box in iou\n");
    return 0.0;
  }
  const double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  return inter / (area_a + area_b - inter);
}

namespace {

// Predicate equivalence at a hop: exact leaf, same level-2 parent, or same
// level-1 parent.
bool hop_match(int predicted, int gt, int hop, const Hierarchy* h) {
  if (hop == 3) return predicted == gt;
  if (h == nullptr) throw std::invalid_argument("match_triplets: hop < 3 needs a hierarchy");
  if (hop == 2) return h->leaf_to_l2[predicted] == h->leaf_to_l2[gt];
  if (hop == 1) return h->l1_of_leaf(predicted) == h->l1_of_leaf(gt);
  throw std::invalid_argument("match_triplets: hop must be 1, 2 or 3");
}

std::vector<TripletPrediction> apply_constraint(const std::vector<TripletPrediction>& preds) {
  // Keep the first (highest-ranked) prediction per ordered proposal pair.
  std::vector<TripletPrediction> out;
  std::map<std::pair<int, int>, bool> seen;
  for (const auto& p : preds) {
    auto key = std::make_pair(p.subject_idx, p.object_idx);
    if (seen.count(key)) continue;
    seen[key] = true;
    out.push_back(p);
  }
  return out;
}

}  // namespace

std::vector<int> match_triplets(const std::vector<TripletPrediction>& preds_sorted,
                                const std::vector<GtTriplet>& gts, const MatchOptions& opts) {
  std::vector<TripletPrediction> eligible =
      opts.constrained ? apply_constraint(preds_sorted) : preds_sorted;
  if (static_cast<int>(eligible.size()) > opts.k) eligible.resize(opts.k);

  std::vector<bool> taken(gts.size(), false);
  std::vector<int> matched;
  for (const auto& p : eligible) {
    int exact_hit = -1, relaxed_hit = -1;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const GtTriplet& gt = gts[g];
      if (p.subject_class != gt.subject_class || p.object_class != gt.object_class) continue;
      if (!hop_match(p.predicate, gt.predicate, opts.hop, opts.pred_hier)) continue;
      if (iou(p.subject_box, gt.subject_box) < opts.iou_thresh) continue;
      if (iou(p.object_box, gt.object_box) < opts.iou_thresh) continue;
      if (p.predicate == gt.predicate) {
        exact_hit = static_cast<int>(g);
        break;  // exact leaf match wins; lowest gt index among exacts
      }
      if (relaxed_hit < 0) relaxed_hit = static_cast<int>(g);
    }
    const int hit = exact_hit >= 0 ? exact_hit : relaxed_hit;
    if (hit >= 0) {
      taken[hit] = true;
      matched.push_back(hit);
    }
  }
  return matched;
}

RecallResult mean_recall_at_k(const std::vector<std::vector<TripletPrediction>>& preds_by_image,
                              const std::vector<std::vector<GtTriplet>>& gts_by_image,
                              int n_pred_classes, const MatchOptions& opts) {
  if (preds_by_image.size() != gts_by_image.size())
    throw std::invalid_argument("mean_recall_at_k: image sets differ");
  RecallResult res;
  res.gt_counts.assign(n_pred_classes, 0);
  std::vector<long> matched(n_pred_classes, 0);
  long total_gt = 0;
  for (size_t img = 0; img < preds_by_image.size(); ++img) {
    const auto& gts = gts_by_image[img];
    for (const auto& gt : gts) {
      if (gt.predicate < 0 || gt.predicate >= n_pred_classes)
        throw std::invalid_argument("mean_recall_at_k: gt predicate out of range");
      ++res.gt_counts[gt.predicate];
      ++total_gt;
    }
    for (int g : match_triplets(preds_by_image[img], gts, opts))
      ++matched[gts[g].predicate];
  }
  if (total_gt == 0) throw std::invalid_argument("mean_recall_at_k: no ground truth anywhere");

  res.per_class.assign(n_pred_classes, -1.0);
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < n_pred_classes; ++c) {
    if (res.gt_counts[c] == 0) continue;
    res.per_class[c] = 100.0 * matched[c] / static_cast<double>(res.gt_counts[c]);
    sum += res.per_class[c];
    ++present;
  }
  res.mean = present > 0 ? sum / present : 0.0;
  return res;
}

MetricsSummary summarize(const std::vector<std::vector<TripletPrediction>>& preds_by_image,
                         const std::vector<std::vector<GtTriplet>>& gts_by_image,
                         int n_pred_classes, const Hierarchy& pred_hier) {
  MetricsSummary s;
  s.n_images = static_cast<long>(gts_by_image.size());
  for (const auto& gts : gts_by_image) s.n_gt_triplets += static_cast<long>(gts.size());

  for (int hop = 1; hop <= 3; ++hop)
    for (int ki = 0; ki < 3; ++ki) {
      MatchOptions opts;
      opts.k = kRecallKs[ki];
      opts.hop = hop;
      opts.pred_hier = &pred_hier;
      opts.constrained = true;
      s.mr_c[hop][ki] = mean_recall_at_k(preds_by_image, gts_by_image, n_pred_classes, opts).mean;
      opts.constrained = false;
      s.mr_uc[hop][ki] = mean_recall_at_k(preds_by_image, gts_by_image, n_pred_classes, opts).mean;
    }

  // Structural invariants: monotone in k, monotone in hop relaxation.
  const double tol = 1e-9;
  for (int hop = 1; hop <= 3; ++hop)
    for (int ki = 1; ki < 3; ++ki) {
      if (s.mr_c[hop][ki] + tol < s.mr_c[hop][ki - 1] ||
          s.mr_uc[hop][ki] + tol < s.mr_uc[hop][ki - 1])
        throw std::logic_error("summarize: mR must be monotone in k");
    }
  for (int hop = 2; hop <= 3; ++hop)
    for (int ki = 0; ki < 3; ++ki) {
      if (s.mr_c[hop][ki] > s.mr_c[hop - 1][ki] + tol ||
          s.mr_uc[hop][ki] > s.mr_uc[hop - 1][ki] + tol)
        throw std::logic_error("summarize: hop relaxation must not reduce mR");
    }

  // Top-1 accuracy per gt pair: the best-scoring prediction on the exact
  // ordered pair, compared by leaf class.
  long correct = 0, total = 0;
  for (size_t img = 0; img < preds_by_image.size(); ++img) {
    const auto constrained = apply_constraint(preds_by_image[img]);
    for (const auto& gt : gts_by_image[img]) {
      ++total;
      for (const auto& p : constrained) {
        if (p.subject_class != gt.subject_class || p.object_class != gt.object_class) continue;
        if (iou(p.subject_box, gt.subject_box) < 0.5 || iou(p.object_box, gt.object_box) < 0.5)
          continue;
        if (p.predicate == gt.predicate) ++correct;
        break;  // first hit on this pair is its top-1
      }
    }
  }
  s.predicate_accuracy = total > 0 ? 100.0 * correct / total : 0.0;
  return s;
}

namespace {

json summary_to_json(const MetricsSummary& s) {
  json j;
  for (int hop = 1; hop <= 3; ++hop) {
    json hc = json::array(), huc = json::array();
    for (int ki = 0; ki < 3; ++ki) {
      hc.push_back(s.mr_c[hop][ki]);
      huc.push_back(s.mr_uc[hop][ki]);
    }
    j["hop" + std::to_string(hop)]["mr_c"] = hc;    // order: k = 20, 50, 100
    j["hop" + std::to_string(hop)]["mr_uc"] = huc;
  }
  j["predicate_accuracy"] = s.predicate_accuracy;
  j["n_images"] = s.n_images;
  j["n_gt_triplets"] = s.n_gt_triplets;
  return j;
}

}  // namespace

void MetricsReport::save_json(const std::string& path) const {
  json j;
  j["config_hash"] = config_hash;
  j["clean"] = summary_to_json(clean);
  j["class_names"] = class_names;
  for (int ki = 0; ki < 3; ++ki) {
    j["per_class_recall_c"]["k" + std::to_string(kRecallKs[ki])] = per_class_recall_c[ki];
    j["per_class_recall_uc"]["k" + std::to_string(kRecallKs[ki])] = per_class_recall_uc[ki];
  }
  json pc;
  for (const auto& [label, summary] : per_corruption) pc[label] = summary_to_json(summary);
  j["per_corruption"] = std::move(pc);
  detail::save_json_file(path, j);
}

void MetricsReport::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write csv: " + path);
  out << "class,recall@20,recall@50,recall@100\n";
  for (size_t c = 0; c < class_names.size(); ++c) {
    out << class_names[c];
    for (int ki = 0; ki < 3; ++ki) {
      out << ',';
      if (c < per_class_recall_c[ki].size() && per_class_recall_c[ki][c] >= 0.0)
        out << per_class_recall_c[ki][c];
    }
    out << '\n';
  }
}

void MetricsReport::save_corruption_table(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corruption table: " + path);
  out << "metric,clean";
  for (const auto& [label, unused] : per_corruption) out << ',' << label;
  out << '\n';
  auto row = [&](const std::string& name, auto getter) {
    out << name << ',' << getter(clean);
    for (const auto& [label, s] : per_corruption) out << ',' << getter(s);
    out << '\n';
  };
  for (int ki = 0; ki < 3; ++ki) {
    const std::string k = std::to_string(kRecallKs[ki]);
    row("mR@" + k + ":C", [&](const MetricsSummary& s) { return s.mr_c[3][ki]; });
    row("mR@" + k + ":UC", [&](const MetricsSummary& s) { return s.mr_uc[3][ki]; });
  }
  row("accuracy", [](const MetricsSummary& s) { return s.predicate_accuracy; });
}

}  // namespace hiker
