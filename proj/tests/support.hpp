#pragma once

// Test-only helpers: random generators and independent oracles. Nothing here
// calls into the code paths it is used to check.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "tubelink/tubelink.hpp"

namespace tubelink::testing {

inline Box random_box(std::mt19937_64& gen, double min_size = 0.01) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double w = min_size + (0.5 - min_size) * u(gen);
  const double h = min_size + (0.5 - min_size) * u(gen);
  const double x = (1.0 - w) * u(gen);
  const double y = (1.0 - h) * u(gen);
  return {x, y, x + w, y + h};
}

inline std::vector<double> random_scores(std::mt19937_64& gen, int num_classes) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<double> s(static_cast<std::size_t>(num_classes) + 1);
  double sum = 0.0;
  for (double& v : s) sum += (v = u(gen));
  for (double& v : s) v /= sum;
  return s;
}

inline MicroTube make_microtube(const Box& a, const Box& b, std::vector<double> scores, int t1 = 0, int t2 = 1,
                                std::string video = "v") {
  return {std::move(video), t1, t2, {a, b}, std::move(scores)};
}

/// Two-class score vector with `s` on class 1.
inline std::vector<double> scores_for(double s) { return {1.0 - s, s}; }

// ---------------------------------------------------------------------------
// AP oracle: explicit greedy matching, then integration of the interpolated
// precision p(r) = max{precision_k : recall_k >= r} over [0, 1], evaluated on
// each interval between consecutive distinct recall levels.

inline double oracle_average_precision(const std::vector<double>& scores, const std::vector<std::vector<double>>& overlaps,
                                       std::size_t num_gt, double threshold) {
  const std::size_t n = scores.size();
  if (num_gt == 0 || n == 0) return 0.0;
  std::vector<bool> done(n, false);
  std::vector<bool> gt_used(num_gt, false);
  std::vector<double> recall, precision;
  std::size_t tp = 0;
  for (std::size_t rank = 0; rank < n; ++rank) {
    // Highest remaining score, lowest index on ties.
    std::size_t d = n;
    for (std::size_t i = 0; i < n; ++i)
      if (!done[i] && (d == n || scores[i] > scores[d])) d = i;
    done[d] = true;
    std::size_t best = num_gt;
    for (std::size_t g = 0; g < num_gt; ++g)
      if (!gt_used[g] && (best == num_gt || overlaps[d][g] > overlaps[d][best])) best = g;
    if (best != num_gt && overlaps[d][best] >= threshold) {
      gt_used[best] = true;
      ++tp;
    }
    recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(rank + 1));
  }
  std::set<double> levels(recall.begin(), recall.end());
  levels.insert(0.0);
  std::vector<double> breaks(levels.begin(), levels.end());
  double area = 0.0;
  for (std::size_t k = 1; k < breaks.size(); ++k) {
    const double mid = 0.5 * (breaks[k - 1] + breaks[k]);
    double p = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (recall[i] >= mid) p = std::max(p, precision[i]);
    area += (breaks[k] - breaks[k - 1]) * p;
  }
  return area;
}

// ---------------------------------------------------------------------------
// Greedy-step oracle: rebuilds the per-step assignment from the full
// (tube, candidate) match table, visiting tubes by repeated max selection.

struct OracleTube {
  int id;
  double score;
  int trailing_frame;
  Box trailing;
};

inline Box oracle_box_on_frame(const MicroTube& m, int frame) {
  if (frame <= m.t1) return m.boxes.first;
  if (frame >= m.t2) return m.boxes.second;
  const double a = static_cast<double>(frame - m.t1) / static_cast<double>(m.t2 - m.t1);
  const Box& p = m.boxes.first;
  const Box& q = m.boxes.second;
  return {p.x1 + a * (q.x1 - p.x1), p.y1 + a * (q.y1 - p.y1), p.x2 + a * (q.x2 - p.x2), p.y2 + a * (q.y2 - p.y2)};
}

inline double oracle_iou(const Box& a, const Box& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Map tube id -> claimed candidate index.
inline std::vector<std::pair<int, int>> oracle_assignment(const std::vector<OracleTube>& tubes,
                                                          const std::vector<MicroTube>& cands, int class_id,
                                                          const LinkerConfig& cfg) {
  const std::size_t nt = tubes.size();
  const std::size_t nc = cands.size();
  std::vector<std::vector<double>> match(nt, std::vector<double>(nc));
  std::vector<std::vector<bool>> allowed(nt, std::vector<bool>(nc));
  for (std::size_t i = 0; i < nt; ++i)
    for (std::size_t j = 0; j < nc; ++j) {
      const double v = oracle_iou(tubes[i].trailing, oracle_box_on_frame(cands[j], tubes[i].trailing_frame));
      allowed[i][j] = v >= cfg.link_iou_min;
      match[i][j] = cands[j].scores[static_cast<std::size_t>(class_id)] + cfg.lambda_iou * v;
    }
  std::vector<bool> visited(nt, false), consumed(nc, false);
  std::vector<std::pair<int, int>> out;
  for (std::size_t step = 0; step < nt; ++step) {
    std::size_t pick = nt;
    for (std::size_t i = 0; i < nt; ++i) {
      if (visited[i]) continue;
      if (pick == nt || tubes[i].score > tubes[pick].score ||
          (tubes[i].score == tubes[pick].score && tubes[i].id < tubes[pick].id))
        pick = i;
    }
    visited[pick] = true;
    std::size_t best = nc;
    for (std::size_t j = 0; j < nc; ++j)
      if (!consumed[j] && allowed[pick][j] && (best == nc || match[pick][j] > match[pick][best])) best = j;
    if (best != nc) {
      consumed[best] = true;
      out.emplace_back(tubes[pick].id, static_cast<int>(best));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<OracleTube> oracle_view(std::span<const ActiveTube> tubes) {
  std::vector<OracleTube> out;
  for (const auto& t : tubes) {
    double sum = 0.0;
    for (const auto& s : t.steps) sum += s.score;
    out.push_back({t.id, sum / static_cast<double>(t.steps.size()), t.keyframes.back().frame, t.keyframes.back().box});
  }
  return out;
}

/// Best ST-IoU of each GT against same-class tubes of its video, using a
/// frame-by-frame recomputation.
inline double oracle_st_iou(const ActionTube& d, const GroundTruthTube& g) {
  if (d.video_id != g.video_id) return 0.0;
  std::set<int> df, gf, uni;
  for (int i = 0; i < d.length(); ++i) df.insert(d.first_frame + i);
  for (int i = 0; i < g.length(); ++i) gf.insert(g.first_frame + i);
  uni = df;
  uni.insert(gf.begin(), gf.end());
  double sum = 0.0;
  int shared = 0;
  for (int f : df)
    if (gf.count(f)) {
      ++shared;
      sum += oracle_iou(d.boxes[static_cast<std::size_t>(f - d.first_frame)], g.boxes[static_cast<std::size_t>(f - g.first_frame)]);
    }
  if (shared == 0) return 0.0;
  return (static_cast<double>(shared) / static_cast<double>(uni.size())) * (sum / shared);
}

inline std::vector<double> recovered_st_iou(const std::vector<ActionTube>& tubes, const std::vector<GroundTruthTube>& gts) {
  std::vector<double> out;
  for (const auto& g : gts) {
    double best = 0.0;
    for (const auto& t : tubes)
      if (t.class_id == g.class_id) best = std::max(best, oracle_st_iou(t, g));
    out.push_back(best);
  }
  return out;
}

}  // namespace tubelink::testing
