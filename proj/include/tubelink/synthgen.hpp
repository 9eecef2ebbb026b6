#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tubelink/error.hpp"
#include "tubelink/geometry.hpp"
#include "tubelink/linker.hpp"
#include "tubelink/rng.hpp"
#include "tubelink/tube_model.hpp"

namespace tubelink {

struct Interval {
  double min = 0.0;
  double max = 0.0;

  friend constexpr bool operator==(const Interval&, const Interval&) = default;
};

/// Scenario layout. Instances of one video move inside disjoint horizontal
/// lanes (instances_max lanes per video) so that they never overlap.
struct ScenarioConfig {
  int num_videos = 10;
  int num_frames = 120;
  int num_classes = 3;
  int instances_min = 1;
  int instances_max = 2;
  int waypoints = 2;  // 2 = linear motion; more = piecewise-linear curved path
  Interval box_width{0.10, 0.20};
  Interval box_height{0.10, 0.20};
  Interval span_fraction{0.75, 1.0};
  Box frame_bounds{0.0, 0.0, 1.0, 1.0};
  int width = 320;
  int height = 240;
  bool single_class_per_video = true;

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::Config, m); };
    if (num_videos < 0) fail("num_videos must be >= 0");
    if (num_frames < 2) fail("num_frames must be >= 2");
    if (num_classes < 1) fail("num_classes must be >= 1");
    if (instances_min < 0 || instances_max < instances_min || instances_max < 1)
      fail("instances range must satisfy 0 <= min <= max, max >= 1");
    if (waypoints < 2) fail("waypoints must be >= 2");
    if (width < 1 || height < 1) fail("frame dimensions must be >= 1");
    if (!is_valid(frame_bounds) || frame_bounds.area() <= 0.0) fail("frame_bounds must be a positive-area box in [0,1]");
    for (const Interval* r : {&box_width, &box_height})
      if (!(r->min > 0.0) || r->max < r->min) fail("box size ranges must satisfy 0 < min <= max");
    if (!(span_fraction.min > 0.0) || span_fraction.max < span_fraction.min || span_fraction.max > 1.0)
      fail("span_fraction must satisfy 0 < min <= max <= 1");
    const double lane = frame_bounds.height() / instances_max;
    if (box_width.max > frame_bounds.width() || box_height.max > lane)
      fail("box sizes do not fit the frame bounds with " + std::to_string(instances_max) + " lanes");
  }

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

/// Detector emulator noise. All-zero (the default) reproduces ground truth exactly.
struct NoiseConfig {
  double center_sigma = 0.0;    // normalized units
  double scale_sigma = 0.0;     // relative to box size
  double score_mean = 0.9;      // true-class score before clipping
  double score_sigma = 0.0;
  double drop_prob = 0.0;       // per instance and pair
  double fp_rate = 0.0;         // expected false positives per pair
  double fp_score_max = 0.3;    // false positives score U(0, fp_score_max) on a random class
  double confusion_prob = 0.0;  // chance that true-class mass leaks to a wrong class
  double confusion_mass = 0.5;  // fraction of the true-class score that leaks

  void validate() const {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!(center_sigma >= 0.0) || !(scale_sigma >= 0.0) || !(score_sigma >= 0.0))
      throw Error(ErrorCode::Config, "noise sigmas must be >= 0");
    if (!unit(score_mean) || !unit(drop_prob) || !unit(fp_score_max) || !unit(confusion_prob) || !unit(confusion_mass))
      throw Error(ErrorCode::Config, "noise probabilities must lie in [0,1]");
    if (!(fp_rate >= 0.0)) throw Error(ErrorCode::Config, "fp_rate must be >= 0");
  }

  friend bool operator==(const NoiseConfig&, const NoiseConfig&) = default;
};

struct Scenario {
  ClassVocabulary vocabulary;
  std::vector<GroundTruthTube> ground_truth;
  std::vector<VideoMeta> videos;
};

/// One video's micro-tube stream, pairs in schedule order.
struct VideoStream {
  std::string video_id;
  std::vector<PairGroup> groups;

  std::size_t microtube_count() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.microtubes.size();
    return n;
  }

  friend bool operator==(const VideoStream&, const VideoStream&) = default;
};

using DetectionStream = std::vector<VideoStream>;

// Independent streams of the master seed.
inline constexpr std::uint64_t kScenarioStream = 1;
inline constexpr std::uint64_t kDetectionStream = 2;

inline std::string video_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "video%04d", index);
  return buf;
}

/// Ground-truth tubes from waypoint motion. Video v draws from its own
/// sub-seed derive_seed(seed, kScenarioStream, v), so videos can be generated
/// independently.
inline Scenario generate_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Scenario out;
  out.vocabulary = ClassVocabulary::numbered(cfg.num_classes);
  const Box& fb = cfg.frame_bounds;
  const double lane_h = fb.height() / cfg.instances_max;

  for (int v = 0; v < cfg.num_videos; ++v) {
    Rng rng(derive_seed(seed, kScenarioStream, static_cast<std::uint64_t>(v)));
    VideoMeta meta{video_name(v), cfg.num_frames, cfg.width, cfg.height, std::nullopt};
    const int count = rng.uniform_int(cfg.instances_min, cfg.instances_max);
    const int video_class = rng.uniform_int(1, cfg.num_classes);
    if (cfg.single_class_per_video && count > 0) meta.label = video_class;

    std::vector<int> lanes(static_cast<std::size_t>(cfg.instances_max));
    for (int i = 0; i < cfg.instances_max; ++i) lanes[static_cast<std::size_t>(i)] = i;
    for (int i = cfg.instances_max - 1; i > 0; --i) std::swap(lanes[static_cast<std::size_t>(i)], lanes[static_cast<std::size_t>(rng.uniform_int(0, i))]);

    for (int k = 0; k < count; ++k) {
      GroundTruthTube gt;
      gt.video_id = meta.video_id;
      gt.class_id = cfg.single_class_per_video ? video_class : rng.uniform_int(1, cfg.num_classes);
      const double frac = rng.uniform(cfg.span_fraction.min, cfg.span_fraction.max);
      const int len = std::clamp(static_cast<int>(std::lround(frac * cfg.num_frames)), 2, cfg.num_frames);
      gt.first_frame = rng.uniform_int(0, cfg.num_frames - len);

      const double w0 = rng.uniform(cfg.box_width.min, cfg.box_width.max);
      const double w1 = rng.uniform(cfg.box_width.min, cfg.box_width.max);
      const double h0 = rng.uniform(cfg.box_height.min, cfg.box_height.max);
      const double h1 = rng.uniform(cfg.box_height.min, cfg.box_height.max);
      const double wmax = std::max(w0, w1);
      const double hmax = std::max(h0, h1);
      const double lane_y1 = fb.y1 + lane_h * lanes[static_cast<std::size_t>(k)];

      std::vector<std::pair<double, double>> centers;
      for (int w = 0; w < cfg.waypoints; ++w)
        centers.emplace_back(rng.uniform(fb.x1 + 0.5 * wmax, fb.x2 - 0.5 * wmax),
                             rng.uniform(lane_y1 + 0.5 * hmax, lane_y1 + lane_h - 0.5 * hmax));

      const int segments = cfg.waypoints - 1;
      for (int i = 0; i < len; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(len - 1);
        const double s = u * segments;
        const int seg = std::min(static_cast<int>(s), segments - 1);
        const double local = s - seg;
        const auto& a = centers[static_cast<std::size_t>(seg)];
        const auto& b = centers[static_cast<std::size_t>(seg) + 1];
        const double cx = a.first * (1.0 - local) + b.first * local;
        const double cy = a.second * (1.0 - local) + b.second * local;
        const double w = w0 * (1.0 - u) + w1 * u;
        const double h = h0 * (1.0 - u) + h1 * u;
        gt.boxes.push_back(clip({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h}));
      }
      out.ground_truth.push_back(std::move(gt));
    }
    out.videos.push_back(std::move(meta));
  }
  return out;
}

namespace detail {

inline Box perturb(const Box& b, const NoiseConfig& noise, Rng& rng) {
  if (noise.center_sigma == 0.0 && noise.scale_sigma == 0.0) return b;
  const double cx = b.center_x() + rng.normal(0.0, noise.center_sigma);
  const double cy = b.center_y() + rng.normal(0.0, noise.center_sigma);
  const double w = std::max(1e-4, b.width() * (1.0 + rng.normal(0.0, noise.scale_sigma)));
  const double h = std::max(1e-4, b.height() * (1.0 + rng.normal(0.0, noise.scale_sigma)));
  return clip({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h});
}

inline void normalize(std::vector<double>& scores) {
  double sum = 0.0;
  for (double s : scores) sum += s;
  if (sum <= 0.0) {
    scores.assign(scores.size(), 0.0);
    scores[kBackground] = 1.0;
    return;
  }
  for (double& s : scores) s /= sum;
}

inline std::vector<double> true_class_scores(int class_id, int num_classes, const NoiseConfig& noise, Rng& rng) {
  std::vector<double> scores(static_cast<std::size_t>(num_classes) + 1, 0.0);
  double s = std::clamp(rng.normal(noise.score_mean, noise.score_sigma), 0.0, 1.0);
  scores[kBackground] = 1.0 - s;
  if (num_classes >= 2 && noise.confusion_prob > 0.0 && rng.bernoulli(noise.confusion_prob)) {
    int wrong = rng.uniform_int(1, num_classes - 1);
    if (wrong >= class_id) ++wrong;
    const double moved = s * noise.confusion_mass;
    s -= moved;
    scores[static_cast<std::size_t>(wrong)] += moved;
  }
  scores[static_cast<std::size_t>(class_id)] = s;
  normalize(scores);
  return scores;
}

}  // namespace detail

/// Detector emulation at stride `delta`. Every schedule pair lying inside an
/// instance's span yields (unless dropped) a micro-tube on the perturbed GT
/// boxes; Poisson false positives are added per pair. Video v draws from
/// derive_seed(seed, kDetectionStream, v). Pairs without micro-tubes are omitted.
inline DetectionStream emit_detections(std::span<const GroundTruthTube> gts, std::span<const VideoMeta> videos,
                                       int num_classes, int delta, const NoiseConfig& noise, std::uint64_t seed) {
  noise.validate();
  if (num_classes < 1) throw Error(ErrorCode::Config, "num_classes must be >= 1");
  Interval fp_w{1.0, 0.0};
  Interval fp_h{1.0, 0.0};
  for (const auto& g : gts)
    for (const auto& b : g.boxes) {
      fp_w = {std::min(fp_w.min, b.width()), std::max(fp_w.max, b.width())};
      fp_h = {std::min(fp_h.min, b.height()), std::max(fp_h.max, b.height())};
    }
  if (fp_w.max < fp_w.min) fp_w = fp_h = {0.1, 0.2};

  DetectionStream stream;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    const VideoMeta& meta = videos[v];
    Rng rng(derive_seed(seed, kDetectionStream, v));
    VideoStream vs{meta.video_id, {}};
    std::vector<const GroundTruthTube*> instances;
    for (const auto& g : gts)
      if (g.video_id == meta.video_id) instances.push_back(&g);

    for (const FramePair& pair : pair_schedule(meta.num_frames, delta)) {
      PairGroup group{pair, {}};
      for (const GroundTruthTube* g : instances) {
        if (pair.t1 < g->first_frame || pair.t2 > g->last_frame()) continue;
        if (noise.drop_prob > 0.0 && rng.bernoulli(noise.drop_prob)) continue;
        MicroTube m;
        m.video_id = meta.video_id;
        m.t1 = pair.t1;
        m.t2 = pair.t2;
        m.boxes.first = detail::perturb(g->boxes[static_cast<std::size_t>(pair.t1 - g->first_frame)], noise, rng);
        m.boxes.second = detail::perturb(g->boxes[static_cast<std::size_t>(pair.t2 - g->first_frame)], noise, rng);
        m.scores = detail::true_class_scores(g->class_id, num_classes, noise, rng);
        group.microtubes.push_back(std::move(m));
      }
      const int fps = rng.poisson(noise.fp_rate);
      for (int k = 0; k < fps; ++k) {
        const double w = rng.uniform(fp_w.min, fp_w.max);
        const double h = rng.uniform(fp_h.min, fp_h.max);
        const double x = rng.uniform(0.0, 1.0 - w);
        const double y = rng.uniform(0.0, 1.0 - h);
        MicroTube m;
        m.video_id = meta.video_id;
        m.t1 = pair.t1;
        m.t2 = pair.t2;
        m.boxes.first = {x, y, x + w, y + h};
        m.boxes.second = detail::perturb(m.boxes.first, noise, rng);
        m.scores.assign(static_cast<std::size_t>(num_classes) + 1, 0.0);
        const int c = rng.uniform_int(1, num_classes);
        const double s = rng.uniform(0.0, noise.fp_score_max);
        m.scores[static_cast<std::size_t>(c)] = s;
        m.scores[kBackground] = 1.0 - s;
        detail::normalize(m.scores);
        group.microtubes.push_back(std::move(m));
      }
      if (!group.microtubes.empty()) vs.groups.push_back(std::move(group));
    }
    stream.push_back(std::move(vs));
  }
  return stream;
}

}  // namespace tubelink
