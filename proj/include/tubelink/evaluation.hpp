#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "tubelink/error.hpp"
#include "tubelink/geometry.hpp"
#include "tubelink/tube_model.hpp"

namespace tubelink {

/// Spatiotemporal IoU: temporal IoU of the frame spans times the mean per-frame
/// box IoU over the shared frames. Works for any pair of dense tube types.
template <class Det, class Gt>
double st_iou(const Det& det, const Gt& gt) {
  if (det.video_id != gt.video_id || det.boxes.empty() || gt.boxes.empty()) return 0.0;
  const int lo = std::max(det.first_frame, gt.first_frame);
  const int hi = std::min(det.last_frame(), gt.last_frame());
  if (lo > hi) return 0.0;
  const int shared = hi - lo + 1;
  const int uni = std::max(det.last_frame(), gt.last_frame()) - std::min(det.first_frame, gt.first_frame) + 1;
  double spatial = 0.0;
  for (int t = lo; t <= hi; ++t)
    spatial += iou(det.boxes[static_cast<std::size_t>(t - det.first_frame)],
                   gt.boxes[static_cast<std::size_t>(t - gt.first_frame)]);
  return (static_cast<double>(shared) / static_cast<double>(uni)) * (spatial / static_cast<double>(shared));
}

/// Detection-by-ground-truth overlap table, row-major.
struct OverlapMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// Indices sorted by descending score; equal scores keep input order.
inline std::vector<std::size_t> rank_by_score(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

/// All-point interpolated AP from true-positive flags listed in rank order.
inline double ap_from_ranked_matches(const std::vector<bool>& ranked_tp, std::size_t num_gt) {
  if (num_gt == 0 || ranked_tp.empty()) return 0.0;
  const std::size_t n = ranked_tp.size();
  std::vector<double> recall(n), precision(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ranked_tp[i]) ++tp;
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  for (std::size_t i = n - 1; i > 0; --i) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return std::clamp(ap, 0.0, 1.0);
}

/// Greedy matching in rank order: each detection takes the unmatched ground
/// truth of highest overlap when that overlap reaches `threshold`.
inline std::vector<bool> greedy_match(std::span<const std::size_t> ranked, const OverlapMatrix& overlaps,
                                      double threshold) {
  std::vector<bool> taken(overlaps.cols, false);
  std::vector<bool> tp;
  tp.reserve(ranked.size());
  for (std::size_t d : ranked) {
    std::size_t best = overlaps.cols;
    double best_overlap = -1.0;
    for (std::size_t g = 0; g < overlaps.cols; ++g) {
      if (taken[g]) continue;
      const double v = overlaps(d, g);
      if (v > best_overlap) {
        best_overlap = v;
        best = g;
      }
    }
    const bool hit = best < overlaps.cols && best_overlap >= threshold;
    if (hit) taken[best] = true;
    tp.push_back(hit);
  }
  return tp;
}

inline double average_precision(std::span<const double> scores, const OverlapMatrix& overlaps, double threshold) {
  const auto ranked = rank_by_score(scores);
  return ap_from_ranked_matches(greedy_match(ranked, overlaps, threshold), overlaps.cols);
}

template <class Det, class Gt>
OverlapMatrix st_overlaps(std::span<const Det> dets, std::span<const Gt> gts) {
  OverlapMatrix m{dets.size(), gts.size(), std::vector<double>(dets.size() * gts.size(), 0.0)};
  for (std::size_t d = 0; d < dets.size(); ++d)
    for (std::size_t g = 0; g < gts.size(); ++g) m.values[d * gts.size() + g] = st_iou(dets[d], gts[g]);
  return m;
}

/// Video-level AP of one class's detection tubes against that class's ground truth.
inline double average_precision(std::span<const ActionTube> dets, std::span<const GroundTruthTube> gts,
                                double threshold) {
  std::vector<double> scores;
  for (const auto& d : dets) scores.push_back(d.score);
  return average_precision(scores, st_overlaps(dets, gts), threshold);
}

struct ThresholdSweep {
  double start = 0.5;
  double step = 0.05;
  double stop = 0.95;

  /// Values start + k * step up to stop, snapped to a 1e-9 grid so that e.g.
  /// 0.5 + 9 * 0.05 is exactly the double nearest 0.95.
  std::vector<double> thresholds() const {
    if (!(step > 0.0)) throw Error(ErrorCode::Config, "sweep step must be positive");
    if (!(start > 0.0) || stop > 1.0 || stop < start)
      throw Error(ErrorCode::Config, "sweep range must lie in (0,1]");
    std::vector<double> out;
    for (int k = 0;; ++k) {
      const double v = std::round((start + k * step) * 1e9) / 1e9;
      if (v > stop + 1e-9) break;
      out.push_back(v);
    }
    return out;
  }

  friend bool operator==(const ThresholdSweep&, const ThresholdSweep&) = default;
};

struct EvalConfig {
  std::vector<double> deltas{0.2, 0.5, 0.75};
  std::optional<ThresholdSweep> sweep = ThresholdSweep{};
  double frame_map_delta = 0.5;

  void validate() const {
    for (double d : deltas)
      if (!(d > 0.0 && d <= 1.0)) throw Error(ErrorCode::Config, "thresholds must lie in (0,1]");
    if (!(frame_map_delta > 0.0 && frame_map_delta <= 1.0))
      throw Error(ErrorCode::Config, "frame-mAP threshold must lie in (0,1]");
    if (sweep) sweep->thresholds();
  }
};

struct ClassResult {
  std::string name;
  std::size_t gt_instances = 0;
  std::size_t detections = 0;
  std::vector<double> ap;           // one per configured delta
  std::optional<double> sweep_mean;  // mean AP over the sweep thresholds

  bool evaluated() const { return gt_instances > 0; }

  friend bool operator==(const ClassResult&, const ClassResult&) = default;
};

struct SweepResult {
  std::vector<double> thresholds;
  std::vector<double> map;  // one per threshold
  double mean = 0.0;

  friend bool operator==(const SweepResult&, const SweepResult&) = default;
};

enum class FrameMapSource { None, TubeSlices, FrameDetections };

inline std::string_view to_string(FrameMapSource s) {
  switch (s) {
    case FrameMapSource::None: return "none";
    case FrameMapSource::TubeSlices: return "tube_slices";
    case FrameMapSource::FrameDetections: return "frame_detections";
  }
  return "none";
}

struct EvalReport {
  std::vector<double> deltas;
  std::vector<ClassResult> classes;
  std::vector<double> map;  // one per delta, mean over evaluated classes
  std::optional<SweepResult> sweep;
  std::optional<double> frame_map;
  FrameMapSource frame_map_source = FrameMapSource::None;
  std::optional<double> accuracy;
  std::size_t videos = 0;
  std::size_t gt_instances = 0;
  std::size_t detections = 0;

  std::size_t evaluated_classes() const {
    return static_cast<std::size_t>(std::count_if(classes.begin(), classes.end(), [](const auto& c) { return c.evaluated(); }));
  }

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

namespace detail {

inline double mean_over_evaluated(const std::vector<ClassResult>& classes, const std::vector<double>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (!classes[c].evaluated()) continue;
    sum += values[c];
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

template <class T>
void check_class_ids(std::span<const T> items, const ClassVocabulary& vocab, const char* what) {
  for (const auto& it : items)
    if (!vocab.contains(it.class_id))
      throw Error(ErrorCode::Vocabulary, std::string(what) + " with unknown class id " + std::to_string(it.class_id));
}

}  // namespace detail

/// Per-class video APs at each configured delta, their class means, and the
/// averaged sweep.
inline EvalReport video_map(std::span<const ActionTube> dets, std::span<const GroundTruthTube> gts,
                            const ClassVocabulary& vocab, const EvalConfig& cfg) {
  cfg.validate();
  detail::check_class_ids(dets, vocab, "detection");
  detail::check_class_ids(gts, vocab, "ground truth");

  EvalReport report;
  report.deltas = cfg.deltas;
  report.gt_instances = gts.size();
  report.detections = dets.size();
  const std::vector<double> sweep = cfg.sweep ? cfg.sweep->thresholds() : std::vector<double>{};
  std::vector<std::vector<double>> sweep_ap(sweep.size(), std::vector<double>(static_cast<std::size_t>(vocab.size()), 0.0));

  for (int c = 1; c <= vocab.size(); ++c) {
    std::vector<ActionTube> cd;
    std::vector<GroundTruthTube> cg;
    for (const auto& d : dets)
      if (d.class_id == c) cd.push_back(d);
    for (const auto& g : gts)
      if (g.class_id == c) cg.push_back(g);

    ClassResult cr;
    cr.name = vocab.name(c);
    cr.gt_instances = cg.size();
    cr.detections = cd.size();
    std::vector<double> scores;
    for (const auto& d : cd) scores.push_back(d.score);
    const OverlapMatrix overlaps = st_overlaps<ActionTube, GroundTruthTube>(cd, cg);
    for (double delta : cfg.deltas) cr.ap.push_back(average_precision(scores, overlaps, delta));
    if (!sweep.empty()) {
      double sum = 0.0;
      for (std::size_t k = 0; k < sweep.size(); ++k) {
        const double ap = average_precision(scores, overlaps, sweep[k]);
        sweep_ap[k][static_cast<std::size_t>(c - 1)] = ap;
        sum += ap;
      }
      cr.sweep_mean = sum / static_cast<double>(sweep.size());
    }
    report.classes.push_back(std::move(cr));
  }

  for (std::size_t k = 0; k < cfg.deltas.size(); ++k) {
    std::vector<double> col;
    for (const auto& cr : report.classes) col.push_back(cr.ap[k]);
    report.map.push_back(detail::mean_over_evaluated(report.classes, col));
  }
  if (!sweep.empty()) {
    SweepResult sr;
    sr.thresholds = sweep;
    for (const auto& col : sweep_ap) sr.map.push_back(detail::mean_over_evaluated(report.classes, col));
    sr.mean = std::accumulate(sr.map.begin(), sr.map.end(), 0.0) / static_cast<double>(sr.map.size());
    report.sweep = std::move(sr);
  }
  return report;
}

struct FrameDetection {
  std::string video_id;
  int frame = 0;
  int class_id = 1;
  Box box;
  double score = 0.0;

  friend bool operator==(const FrameDetection&, const FrameDetection&) = default;
};

struct FrameAnnotation {
  std::string video_id;
  int frame = 0;
  int class_id = 1;
  Box box;

  friend bool operator==(const FrameAnnotation&, const FrameAnnotation&) = default;
};

/// One frame-level detection per tube frame, scored with the tube score.
inline std::vector<FrameDetection> slice_tubes(std::span<const ActionTube> tubes) {
  std::vector<FrameDetection> out;
  for (const auto& t : tubes)
    for (int i = 0; i < t.length(); ++i)
      out.push_back({t.video_id, t.first_frame + i, t.class_id, t.boxes[static_cast<std::size_t>(i)], t.score});
  return out;
}

inline std::vector<FrameAnnotation> slice_ground_truth(std::span<const GroundTruthTube> gts) {
  std::vector<FrameAnnotation> out;
  for (const auto& g : gts)
    for (int i = 0; i < g.length(); ++i)
      out.push_back({g.video_id, g.first_frame + i, g.class_id, g.boxes[static_cast<std::size_t>(i)]});
  return out;
}

/// Frame-level AP of one class over the pooled frames of all videos.
inline double frame_average_precision(std::span<const FrameDetection> dets, std::span<const FrameAnnotation> gts,
                                      double threshold) {
  using Key = std::tuple<std::string, int>;
  std::map<Key, std::vector<std::size_t>> by_frame;
  for (std::size_t g = 0; g < gts.size(); ++g) by_frame[{gts[g].video_id, gts[g].frame}].push_back(g);
  std::vector<double> scores;
  for (const auto& d : dets) scores.push_back(d.score);
  std::vector<bool> taken(gts.size(), false);
  std::vector<bool> tp;
  for (std::size_t d : rank_by_score(scores)) {
    bool hit = false;
    auto it = by_frame.find({dets[d].video_id, dets[d].frame});
    if (it != by_frame.end()) {
      std::size_t best = gts.size();
      double best_overlap = -1.0;
      for (std::size_t g : it->second) {
        if (taken[g]) continue;
        const double v = iou(dets[d].box, gts[g].box);
        if (v > best_overlap) {
          best_overlap = v;
          best = g;
        }
      }
      if (best < gts.size() && best_overlap >= threshold) {
        taken[best] = true;
        hit = true;
      }
    }
    tp.push_back(hit);
  }
  return ap_from_ranked_matches(tp, gts.size());
}

/// Mean frame AP over classes with ground truth; nullopt when no class has any.
inline std::optional<double> frame_map(std::span<const FrameDetection> dets, std::span<const FrameAnnotation> gts,
                                       const ClassVocabulary& vocab, double threshold = 0.5) {
  detail::check_class_ids(dets, vocab, "frame detection");
  detail::check_class_ids(gts, vocab, "frame annotation");
  double sum = 0.0;
  int n = 0;
  for (int c = 1; c <= vocab.size(); ++c) {
    std::vector<FrameDetection> cd;
    std::vector<FrameAnnotation> cg;
    for (const auto& d : dets)
      if (d.class_id == c) cd.push_back(d);
    for (const auto& g : gts)
      if (g.class_id == c) cg.push_back(g);
    if (cg.empty()) continue;
    sum += frame_average_precision(cd, cg, threshold);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

/// Fraction of labeled videos whose highest-scoring tube carries the video
/// label; videos without tubes count as misclassified. Nullopt if no video is labeled.
inline std::optional<double> classification_accuracy(std::span<const ActionTube> dets, std::span<const VideoMeta> videos) {
  std::size_t total = 0;
  std::size_t correct = 0;
  for (const auto& v : videos) {
    if (!v.label) continue;
    ++total;
    const ActionTube* top = nullptr;
    for (const auto& d : dets)
      if (d.video_id == v.video_id && (!top || d.score > top->score)) top = &d;
    if (top && top->class_id == *v.label) ++correct;
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace tubelink
