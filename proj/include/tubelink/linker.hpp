#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tubelink/error.hpp"
#include "tubelink/geometry.hpp"
#include "tubelink/suppression.hpp"
#include "tubelink/tube_model.hpp"

namespace tubelink {

struct LinkerConfig {
  int delta = 1;
  double link_iou_min = 0.1;
  double start_score_min = 0.01;
  int patience = 2;
  double nms_threshold = kDefaultNmsThreshold;
  int top_k = kDefaultTopK;
  double lambda_iou = 1.0;
  double trim_threshold = 0.05;
  bool trim_enabled = false;

  void validate() const {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (delta < 1) throw Error(ErrorCode::Config, "delta must be >= 1");
    if (!unit(link_iou_min) || !unit(start_score_min) || !unit(nms_threshold) || !unit(trim_threshold))
      throw Error(ErrorCode::Config, "linker thresholds must lie in [0,1]");
    if (patience < 0) throw Error(ErrorCode::Config, "patience must be >= 0");
    if (top_k < 1) throw Error(ErrorCode::Config, "top_k must be >= 1");
    if (!(lambda_iou >= 0.0)) throw Error(ErrorCode::Config, "lambda_iou must be >= 0");
  }
};

enum class LinkEventKind { Started, Extended, Missed, Terminated };

constexpr std::string_view to_string(LinkEventKind kind) {
  switch (kind) {
    case LinkEventKind::Started: return "started";
    case LinkEventKind::Extended: return "extended";
    case LinkEventKind::Missed: return "missed";
    case LinkEventKind::Terminated: return "terminated";
  }
  return "unknown";
}

/// `candidate` indexes the per-class candidate list of the step (-1 for
/// missed/terminated); `score` is that candidate's class score.
struct LinkEvent {
  LinkEventKind kind = LinkEventKind::Started;
  int tube_id = 0;
  int class_id = 0;
  FramePair pair;
  int candidate = -1;
  double score = 0.0;

  friend bool operator==(const LinkEvent&, const LinkEvent&) = default;
};

/// Tube under construction. Keyframes hold the predicted (and shared-frame
/// merged) boxes; intermediate frames are filled in at finalization.
struct ActiveTube {
  int id = 0;
  int class_id = 0;
  std::vector<FrameBox> keyframes;
  std::vector<TubeStep> steps;
  double score_sum = 0.0;
  int miss_count = 0;

  const Box& trailing_box() const { return keyframes.back().box; }
  int trailing_frame() const { return keyframes.back().frame; }
  double running_score() const { return steps.empty() ? 0.0 : score_sum / static_cast<double>(steps.size()); }
};

/// Box of `m` at `frame`; frames inside the pair are linearly interpolated and
/// frames before t1 use the first box.
inline Box box_at_frame(const MicroTube& m, int frame) {
  if (frame <= m.t1) return m.boxes.first;
  if (frame >= m.t2) return m.boxes.second;
  const double alpha = static_cast<double>(frame - m.t1) / static_cast<double>(m.t2 - m.t1);
  return lerp(m.boxes.first, m.boxes.second, alpha);
}

inline double match_score(const ActiveTube& tube, const MicroTube& candidate, const LinkerConfig& cfg,
                          double* overlap = nullptr) {
  const double v = iou(tube.trailing_box(), box_at_frame(candidate, tube.trailing_frame()));
  if (overlap) *overlap = v;
  return candidate.score(tube.class_id) + cfg.lambda_iou * v;
}

/// Tube visiting order for association: descending running score, then creation order.
inline std::vector<std::size_t> association_order(std::span<const ActiveTube> tubes) {
  std::vector<std::size_t> order(tubes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = tubes[a].running_score();
    const double sb = tubes[b].running_score();
    if (sa != sb) return sa > sb;
    return tubes[a].id < tubes[b].id;
  });
  return order;
}

/// Greedy association for one class. Returns, per tube, the claimed candidate
/// index or -1. Each candidate is claimed at most once; ties go to the earlier
/// candidate.
inline std::vector<int> greedy_assign(std::span<const ActiveTube> tubes, std::span<const MicroTube> candidates,
                                      const LinkerConfig& cfg) {
  std::vector<int> claim(tubes.size(), -1);
  std::vector<bool> consumed(candidates.size(), false);
  for (std::size_t ti : association_order(tubes)) {
    int best = -1;
    double best_match = 0.0;
    for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
      if (consumed[ci]) continue;
      double overlap = 0.0;
      const double match = match_score(tubes[ti], candidates[ci], cfg, &overlap);
      if (overlap < cfg.link_iou_min) continue;
      if (best < 0 || match > best_match) {
        best = static_cast<int>(ci);
        best_match = match;
      }
    }
    if (best >= 0) {
      claim[ti] = best;
      consumed[static_cast<std::size_t>(best)] = true;
    }
  }
  return claim;
}

/// Per-class candidate lists for one frame pair; index 0 (background) stays empty.
using ClassCandidates = std::vector<std::vector<MicroTube>>;

inline ClassCandidates prepare_candidates(std::span<const MicroTube> raw, int num_classes, const LinkerConfig& cfg) {
  ClassCandidates out(static_cast<std::size_t>(num_classes) + 1);
  for (int c = 1; c <= num_classes; ++c)
    out[static_cast<std::size_t>(c)] = microtube_nms(raw, c, cfg.nms_threshold, cfg.top_k);
  return out;
}

/// Drops the longest prefix and suffix of steps scoring below `threshold`.
/// Interior low-score steps are kept; a fully low-score tube is dropped.
inline std::vector<ActionTube> trim(const ActionTube& tube, double threshold) {
  const auto& steps = tube.steps;
  std::size_t begin = 0;
  std::size_t end = steps.size();
  while (begin < end && steps[begin].score < threshold) ++begin;
  while (end > begin && steps[end - 1].score < threshold) --end;
  if (begin == end) return {};
  if (begin == 0 && end == steps.size()) return {tube};

  ActionTube out = tube;
  out.steps.assign(steps.begin() + static_cast<std::ptrdiff_t>(begin), steps.begin() + static_cast<std::ptrdiff_t>(end));
  const int first = out.steps.front().first_frame;
  const int last = out.steps.back().last_frame;
  out.boxes.assign(tube.boxes.begin() + (first - tube.first_frame), tube.boxes.begin() + (last - tube.first_frame) + 1);
  out.first_frame = first;
  double sum = 0.0;
  for (const auto& s : out.steps) sum += s.score;
  out.score = sum / static_cast<double>(out.steps.size());
  return {out};
}

/// Online incremental tube builder for one video. Pairs must arrive in schedule
/// order; every step's events depend only on the pairs consumed so far.
/// Single-writer: step/finalize must be externally serialized.
class OnlineLinker {
 public:
  OnlineLinker(std::string video_id, int num_classes, LinkerConfig cfg)
      : video_id_(std::move(video_id)), num_classes_(num_classes), cfg_(cfg),
        active_(static_cast<std::size_t>(num_classes) + 1) {
    if (num_classes < 1) throw Error(ErrorCode::Vocabulary, "linker needs at least one class");
    cfg_.validate();
  }

  const LinkerConfig& config() const { return cfg_; }
  int num_classes() const { return num_classes_; }
  std::size_t consumed_candidates() const { return consumed_; }

  /// Live tubes of one class, in creation order.
  std::span<const ActiveTube> active(int class_id) const { return active_.at(static_cast<std::size_t>(class_id)); }

  /// Runs per-class NMS over the raw micro-tubes of `pair`, then steps.
  std::vector<LinkEvent> push(FramePair pair, std::span<const MicroTube> raw) {
    check_pair(pair, raw);
    return step(pair, prepare_candidates(raw, num_classes_, cfg_));
  }

  std::vector<LinkEvent> step(FramePair pair, const ClassCandidates& candidates) {
    if (candidates.size() != static_cast<std::size_t>(num_classes_) + 1)
      throw Error(ErrorCode::Vocabulary, "candidate lists do not match the class count");
    for (const auto& list : candidates) check_pair(pair, list);
    last_pair_ = pair;

    std::vector<LinkEvent> events;
    for (int c = 1; c <= num_classes_; ++c) step_class(c, pair, candidates[static_cast<std::size_t>(c)], events);
    return events;
  }

  /// Densified tubes for every live and terminated tube, ordered by tube id.
  std::vector<ActionTube> finalize() const {
    std::vector<const ActiveTube*> all;
    for (const auto& t : finished_) all.push_back(&t);
    for (const auto& per_class : active_)
      for (const auto& t : per_class) all.push_back(&t);
    std::sort(all.begin(), all.end(), [](const ActiveTube* a, const ActiveTube* b) { return a->id < b->id; });

    std::vector<ActionTube> out;
    for (const ActiveTube* t : all) {
      ActionTube tube = densify(*t);
      if (!cfg_.trim_enabled) {
        out.push_back(std::move(tube));
        continue;
      }
      for (auto& kept : trim(tube, cfg_.trim_threshold)) out.push_back(std::move(kept));
    }
    return out;
  }

 private:
  void check_pair(FramePair pair, std::span<const MicroTube> list) const {
    if (pair.t2 - pair.t1 != cfg_.delta)
      throw Error(ErrorCode::Span, "pair (" + std::to_string(pair.t1) + ", " + std::to_string(pair.t2) +
                                       ") does not span delta " + std::to_string(cfg_.delta));
    if (last_pair_ && (pair.t1 <= last_pair_->t1 || pair.t2 <= last_pair_->t2))
      throw Error(ErrorCode::Ordering, "pair (" + std::to_string(pair.t1) + ", " + std::to_string(pair.t2) +
                                           ") arrived out of schedule order");
    for (const auto& m : list)
      if (m.pair() != pair) throw Error(ErrorCode::Span, "candidate span differs from the step pair");
  }

  void step_class(int class_id, FramePair pair, std::span<const MicroTube> candidates, std::vector<LinkEvent>& events) {
    auto& tubes = active_[static_cast<std::size_t>(class_id)];
    consumed_ += candidates.size();
    const std::vector<int> claim = greedy_assign(tubes, candidates, cfg_);
    std::vector<bool> used(candidates.size(), false);

    for (std::size_t ti : association_order(tubes)) {
      if (claim[ti] < 0) continue;
      const auto ci = static_cast<std::size_t>(claim[ti]);
      used[ci] = true;
      extend(tubes[ti], candidates[ci]);
      events.push_back({LinkEventKind::Extended, tubes[ti].id, class_id, pair, claim[ti], candidates[ci].score(class_id)});
    }

    std::vector<ActiveTube> survivors;
    for (std::size_t ti = 0; ti < tubes.size(); ++ti) {
      ActiveTube& t = tubes[ti];
      if (claim[ti] >= 0) {
        survivors.push_back(std::move(t));
        continue;
      }
      ++t.miss_count;
      events.push_back({LinkEventKind::Missed, t.id, class_id, pair, -1, 0.0});
      if (t.miss_count > cfg_.patience) {
        events.push_back({LinkEventKind::Terminated, t.id, class_id, pair, -1, 0.0});
        finished_.push_back(std::move(t));
      } else {
        survivors.push_back(std::move(t));
      }
    }
    tubes = std::move(survivors);

    for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
      if (used[ci]) continue;
      const MicroTube& m = candidates[ci];
      const double s = m.score(class_id);
      if (s < cfg_.start_score_min) continue;
      ActiveTube t;
      t.id = next_id_++;
      t.class_id = class_id;
      t.keyframes = {{m.t1, m.boxes.first}, {m.t2, m.boxes.second}};
      t.steps = {{m.t1, m.t2, s}};
      t.score_sum = s;
      tubes.push_back(std::move(t));
      events.push_back({LinkEventKind::Started, tubes.back().id, class_id, pair, static_cast<int>(ci), s});
    }
  }

  static void extend(ActiveTube& tube, const MicroTube& m) {
    const int tf = tube.trailing_frame();
    if (m.t1 > tf) {
      tube.keyframes.push_back({m.t1, m.boxes.first});
    } else {
      // Shared (or overlapping) frame: both predictions describe frame tf.
      tube.keyframes.back().box = mean_box(tube.trailing_box(), box_at_frame(m, tf));
    }
    tube.keyframes.push_back({m.t2, m.boxes.second});
    const double s = m.score(tube.class_id);
    tube.steps.push_back({tf, m.t2, s});
    tube.score_sum += s;
    tube.miss_count = 0;
  }

  ActionTube densify(const ActiveTube& t) const {
    ActionTube tube;
    tube.video_id = video_id_;
    tube.class_id = t.class_id;
    tube.first_frame = t.keyframes.front().frame;
    tube.score = t.running_score();
    tube.steps = t.steps;
    tube.boxes.push_back(t.keyframes.front().box);
    for (std::size_t k = 1; k < t.keyframes.size(); ++k) {
      const FrameBox& a = t.keyframes[k - 1];
      const FrameBox& b = t.keyframes[k];
      for (const auto& fb : interpolate(a.box, b.box, a.frame, b.frame)) tube.boxes.push_back(fb.box);
      tube.boxes.push_back(b.box);
    }
    return tube;
  }

  std::string video_id_;
  int num_classes_;
  LinkerConfig cfg_;
  std::vector<std::vector<ActiveTube>> active_;
  std::vector<ActiveTube> finished_;
  std::optional<FramePair> last_pair_;
  int next_id_ = 0;
  std::size_t consumed_ = 0;
};

/// Micro-tubes of one frame pair as read from a detection stream.
struct PairGroup {
  FramePair pair;
  std::vector<MicroTube> microtubes;

  friend bool operator==(const PairGroup&, const PairGroup&) = default;
};

struct TimedEvent {
  std::string video_id;
  LinkEvent event;

  friend bool operator==(const TimedEvent&, const TimedEvent&) = default;
};

struct LinkResult {
  std::vector<ActionTube> tubes;
  std::vector<TimedEvent> events;
  std::size_t pairs = 0;
  std::size_t candidates = 0;
};

/// Links one video's stream over its full pair schedule; schedule pairs with no
/// detections are stepped with empty candidate sets.
inline LinkResult link_video(const VideoMeta& meta, std::span<const PairGroup> groups, int num_classes,
                             const LinkerConfig& cfg) {
  OnlineLinker linker(meta.video_id, num_classes, cfg);
  const auto schedule = pair_schedule(meta.num_frames, cfg.delta);
  LinkResult result;
  std::size_t g = 0;
  for (const FramePair& pair : schedule) {
    std::vector<MicroTube> raw;
    if (g < groups.size() && groups[g].pair == pair) {
      raw.reserve(groups[g].microtubes.size());
      for (const auto& m : groups[g].microtubes) {
        if (m.video_id != meta.video_id) throw Error(ErrorCode::Span, "micro-tube from another video in stream");
        if (static_cast<int>(m.scores.size()) != num_classes + 1)
          throw Error(ErrorCode::MalformedScores, "score vector width does not match the class vocabulary");
        raw.push_back(validate_microtube(m, meta));
      }
      ++g;
    } else if (g < groups.size() && groups[g].pair < pair) {
      throw Error(ErrorCode::Ordering, "pair (" + std::to_string(groups[g].pair.t1) + ", " +
                                           std::to_string(groups[g].pair.t2) + ") is not on the delta-" +
                                           std::to_string(cfg.delta) + " schedule of video '" + meta.video_id + "'");
    }
    for (auto& e : linker.push(pair, raw)) result.events.push_back({meta.video_id, e});
    ++result.pairs;
  }
  if (g < groups.size())
    throw Error(ErrorCode::Ordering, "pair (" + std::to_string(groups[g].pair.t1) + ", " +
                                         std::to_string(groups[g].pair.t2) + ") is not on the schedule of video '" +
                                         meta.video_id + "'");
  result.candidates = linker.consumed_candidates();
  result.tubes = linker.finalize();
  return result;
}

}  // namespace tubelink
