#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tubelink/error.hpp"
#include "tubelink/geometry.hpp"

namespace tubelink {

/// Score index reserved for the background class.
inline constexpr int kBackground = 0;

/// Ordered action-class labels; class id k (1-based) names `names[k - 1]`.
class ClassVocabulary {
 public:
  ClassVocabulary() = default;

  explicit ClassVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw Error(ErrorCode::Vocabulary, "vocabulary needs at least one class");
    std::set<std::string> seen;
    for (const auto& n : names_) {
      if (n.empty()) throw Error(ErrorCode::Vocabulary, "empty class name");
      if (!seen.insert(n).second) throw Error(ErrorCode::Vocabulary, "duplicate class name '" + n + "'");
    }
  }

  /// Generic labels "class1".."classC".
  static ClassVocabulary numbered(int num_classes) {
    std::vector<std::string> names;
    for (int c = 1; c <= num_classes; ++c) names.push_back("class" + std::to_string(c));
    return ClassVocabulary(std::move(names));
  }

  int size() const { return static_cast<int>(names_.size()); }
  int score_width() const { return size() + 1; }
  bool contains(int class_id) const { return class_id >= 1 && class_id <= size(); }

  const std::string& name(int class_id) const {
    if (!contains(class_id)) throw Error(ErrorCode::Vocabulary, "unknown class id " + std::to_string(class_id));
    return names_[static_cast<std::size_t>(class_id - 1)];
  }

  std::optional<int> find(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return static_cast<int>(i) + 1;
    return std::nullopt;
  }

  const std::vector<std::string>& names() const { return names_; }

  friend bool operator==(const ClassVocabulary&, const ClassVocabulary&) = default;

 private:
  std::vector<std::string> names_;
};

struct FramePair {
  int t1 = 0;
  int t2 = 0;

  friend constexpr bool operator==(const FramePair&, const FramePair&) = default;
  friend constexpr auto operator<=>(const FramePair&, const FramePair&) = default;
};

/// Two boxes at frames (t1, t2) with one C+1 score vector; index 0 is background.
struct MicroTube {
  std::string video_id;
  int t1 = 0;
  int t2 = 0;
  BoxPair boxes;
  std::vector<double> scores;

  FramePair pair() const { return {t1, t2}; }
  double score(int class_id) const { return scores.at(static_cast<std::size_t>(class_id)); }

  friend bool operator==(const MicroTube&, const MicroTube&) = default;
};

/// One linked micro-tube inside an action tube, covering frames [first, last].
struct TubeStep {
  int first_frame = 0;
  int last_frame = 0;
  double score = 0.0;

  friend constexpr bool operator==(const TubeStep&, const TubeStep&) = default;
};

/// Dense per-frame boxes starting at `first_frame`; frame of boxes[i] is first_frame + i.
struct ActionTube {
  std::string video_id;
  int class_id = 1;
  int first_frame = 0;
  std::vector<Box> boxes;
  double score = 0.0;
  std::vector<TubeStep> steps;

  int last_frame() const { return first_frame + static_cast<int>(boxes.size()) - 1; }
  int length() const { return static_cast<int>(boxes.size()); }

  friend bool operator==(const ActionTube&, const ActionTube&) = default;
};

struct GroundTruthTube {
  std::string video_id;
  int class_id = 1;
  int first_frame = 0;
  std::vector<Box> boxes;

  int last_frame() const { return first_frame + static_cast<int>(boxes.size()) - 1; }
  int length() const { return static_cast<int>(boxes.size()); }

  friend bool operator==(const GroundTruthTube&, const GroundTruthTube&) = default;
};

struct VideoMeta {
  std::string video_id;
  int num_frames = 1;
  int width = 1;
  int height = 1;
  std::optional<int> label;

  friend bool operator==(const VideoMeta&, const VideoMeta&) = default;
};

inline void check_video_meta(const VideoMeta& meta) {
  if (meta.num_frames < 1) throw Error(ErrorCode::Schema, "video '" + meta.video_id + "' needs at least one frame");
  if (meta.width < 1 || meta.height < 1)
    throw Error(ErrorCode::Schema, "video '" + meta.video_id + "' needs positive dimensions");
}

inline constexpr double kScoreRenormTolerance = 1e-3;

/// Checks ordering and range, clips boxes, and renormalizes scores that are
/// within 1e-3 of a unit sum.
inline MicroTube validate_microtube(MicroTube m, const VideoMeta& meta) {
  if (m.t2 <= m.t1)
    throw Error(ErrorCode::Ordering, "micro-tube frames must satisfy t1 < t2 (got " + std::to_string(m.t1) +
                                         ", " + std::to_string(m.t2) + ")");
  if (m.t1 < 0 || m.t2 > meta.num_frames - 1)
    throw Error(ErrorCode::Range, "micro-tube frames (" + std::to_string(m.t1) + ", " + std::to_string(m.t2) +
                                      ") outside video of " + std::to_string(meta.num_frames) + " frames");
  if (m.scores.size() < 2) throw Error(ErrorCode::MalformedScores, "score vector needs background plus a class");
  double sum = 0.0;
  for (double s : m.scores) {
    if (!std::isfinite(s) || s < 0.0 || s > 1.0 + kScoreRenormTolerance)
      throw Error(ErrorCode::MalformedScores, "score outside [0,1]");
    sum += s;
  }
  if (std::abs(sum - 1.0) > kScoreRenormTolerance)
    throw Error(ErrorCode::MalformedScores, "scores sum to " + std::to_string(sum));
  if (std::abs(sum - 1.0) > 1e-12)
    for (double& s : m.scores) s /= sum;
  m.boxes.first = validated(m.boxes.first);
  m.boxes.second = validated(m.boxes.second);
  return m;
}

/// Stride-delta frame pairs from frame 0; a clamped (T-1-delta, T-1) pair closes
/// the schedule whenever the stride would skip the last frame.
inline std::vector<FramePair> pair_schedule(int num_frames, int delta) {
  if (num_frames < 2) throw Error(ErrorCode::InfeasibleStride, "schedule needs at least two frames");
  if (delta < 1 || delta >= num_frames)
    throw Error(ErrorCode::InfeasibleStride,
                "delta " + std::to_string(delta) + " infeasible for " + std::to_string(num_frames) + " frames");
  std::vector<FramePair> pairs;
  const int last = num_frames - 1;
  int t = 0;
  for (; t + delta <= last; t += delta) pairs.push_back({t, t + delta});
  if (pairs.back().t2 != last) pairs.push_back({last - delta, last});
  return pairs;
}

}  // namespace tubelink
