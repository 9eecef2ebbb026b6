#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "tubelink/error.hpp"
#include "tubelink/geometry.hpp"
#include "tubelink/tube_model.hpp"

namespace tubelink {

inline constexpr double kDefaultNmsThreshold = 0.45;
inline constexpr int kDefaultTopK = 300;

/// Greedy per-class suppression over micro-tubes, using mean pair IoU as the
/// overlap measure. Survivors are pairwise below `overlap_threshold`, sorted by
/// descending score for `class_id` (stable on input order) and capped at `top_k`.
inline std::vector<MicroTube> microtube_nms(std::span<const MicroTube> candidates, int class_id,
                                            double overlap_threshold = kDefaultNmsThreshold,
                                            int top_k = kDefaultTopK) {
  if (overlap_threshold < 0.0 || overlap_threshold > 1.0)
    throw Error(ErrorCode::Config, "nms threshold must lie in [0,1]");
  if (candidates.empty() || top_k <= 0) return {};
  const MicroTube& ref = candidates.front();
  for (const auto& m : candidates)
    if (m.t1 != ref.t1 || m.t2 != ref.t2 || m.video_id != ref.video_id)
      throw Error(ErrorCode::MixedSpan, "nms candidates must share video and frame span");

  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].score(class_id) > candidates[b].score(class_id);
  });

  std::vector<MicroTube> kept;
  for (std::size_t idx : order) {
    const MicroTube& m = candidates[idx];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const MicroTube& k) {
      return mean_pair_iou(k.boxes, m.boxes) >= overlap_threshold;
    });
    if (suppressed) continue;
    kept.push_back(m);
    if (static_cast<int>(kept.size()) >= top_k) break;
  }
  return kept;
}

enum class ProposalLabel { Positive, Negative, Ignore };

inline constexpr double kPositiveMeanIou = 0.5;
inline constexpr double kNegativeMeanIou = 0.3;

inline ProposalLabel label_for_overlap(double best_mean_iou) {
  if (best_mean_iou >= kPositiveMeanIou) return ProposalLabel::Positive;
  if (best_mean_iou < kNegativeMeanIou) return ProposalLabel::Negative;
  return ProposalLabel::Ignore;
}

/// Labels anchor pairs by their best mean IoU against the ground-truth pairs.
/// An empty ground-truth set labels everything Negative.
inline std::vector<ProposalLabel> label_proposals(std::span<const BoxPair> anchors, std::span<const BoxPair> gt) {
  std::vector<ProposalLabel> labels;
  labels.reserve(anchors.size());
  for (const auto& a : anchors) {
    double best = 0.0;
    for (const auto& g : gt) best = std::max(best, mean_pair_iou(a, g));
    labels.push_back(label_for_overlap(best));
  }
  return labels;
}

}  // namespace tubelink
