#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tubelink/error.hpp"
#include "tubelink/geometry.hpp"

namespace tubelink {

/// Row-major (channels, height, width) tensor.
class FeatureMap {
 public:
  FeatureMap(int channels, int height, int width, double fill = 0.0)
      : FeatureMap(channels, height, width,
                   std::vector<double>(checked_size(channels, height, width), fill)) {}

  FeatureMap(int channels, int height, int width, std::vector<double> data)
      : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != checked_size(channels, height, width))
      throw Error(ErrorCode::Shape, "feature data length does not match dimensions");
    for (double v : data_)
      if (!std::isfinite(v)) throw Error(ErrorCode::Shape, "feature map holds a non-finite value");
  }

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_); }
  std::span<const double> data() const { return data_; }

  double at(int c, int y, int x) const {
    return data_[static_cast<std::size_t>(c) * plane_size() + static_cast<std::size_t>(y) * width_ + x];
  }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  static std::size_t checked_size(int c, int h, int w) {
    if (c < 1 || h < 1 || w < 1) throw Error(ErrorCode::Shape, "feature map dimensions must be >= 1");
    return static_cast<std::size_t>(c) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }

  int channels_;
  int height_;
  int width_;
  std::vector<double> data_;
};

inline std::string shape_string(const FeatureMap& m) {
  return "(" + std::to_string(m.channels()) + "," + std::to_string(m.height()) + "," + std::to_string(m.width()) + ")";
}

/// Element-wise sum; the output keeps the common input shape.
inline FeatureMap sum_fuse(std::span<const FeatureMap> maps) {
  if (maps.size() < 2) throw Error(ErrorCode::Shape, "sum fusion needs at least two maps");
  const FeatureMap& ref = maps.front();
  for (const auto& m : maps)
    if (m.channels() != ref.channels() || m.height() != ref.height() || m.width() != ref.width())
      throw Error(ErrorCode::Shape, "sum fusion of " + shape_string(ref) + " and " + shape_string(m));
  std::vector<double> out(ref.data().begin(), ref.data().end());
  for (std::size_t k = 1; k < maps.size(); ++k) {
    auto d = maps[k].data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += d[i];
  }
  return FeatureMap(ref.channels(), ref.height(), ref.width(), std::move(out));
}

/// Channel concatenation in list order; spatial dimensions must agree.
inline FeatureMap concat_fuse(std::span<const FeatureMap> maps) {
  if (maps.empty()) throw Error(ErrorCode::Shape, "concat fusion needs at least one map");
  const FeatureMap& ref = maps.front();
  int channels = 0;
  for (const auto& m : maps) {
    if (m.height() != ref.height() || m.width() != ref.width())
      throw Error(ErrorCode::Shape, "concat fusion of " + shape_string(ref) + " and " + shape_string(m));
    channels += m.channels();
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(channels) * ref.plane_size());
  for (const auto& m : maps) out.insert(out.end(), m.data().begin(), m.data().end());
  return FeatureMap(channels, ref.height(), ref.width(), std::move(out));
}

struct ScoredAnchor {
  BoxPair boxes;
  std::vector<double> scores;

  friend bool operator==(const ScoredAnchor&, const ScoredAnchor&) = default;
};

/// One stream's per-anchor output for a frame pair.
using ScoredAnchorSet = std::vector<ScoredAnchor>;

/// Test-time late fusion of two aligned anchor sets: mean scores (renormalized)
/// and mean boxes per anchor.
inline ScoredAnchorSet late_fuse(const ScoredAnchorSet& a, const ScoredAnchorSet& b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::Alignment,
                "anchor counts differ (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  ScoredAnchorSet out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].scores.size() != b[i].scores.size())
      throw Error(ErrorCode::Alignment, "score widths differ at anchor " + std::to_string(i));
    ScoredAnchor f;
    f.boxes = {mean_box(a[i].boxes.first, b[i].boxes.first), mean_box(a[i].boxes.second, b[i].boxes.second)};
    f.scores.resize(a[i].scores.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < f.scores.size(); ++k) {
      f.scores[k] = 0.5 * (a[i].scores[k] + b[i].scores[k]);
      sum += f.scores[k];
    }
    if (sum > 0.0 && std::abs(sum - 1.0) > 1e-12)
      for (double& s : f.scores) s /= sum;
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace tubelink
