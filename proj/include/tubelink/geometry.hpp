#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "tubelink/error.hpp"

namespace tubelink {

/// Axis-aligned box in normalized image coordinates, (x1,y1) top-left.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  constexpr double width() const { return x2 - x1; }
  constexpr double height() const { return y2 - y1; }
  constexpr double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  constexpr double center_x() const { return 0.5 * (x1 + x2); }
  constexpr double center_y() const { return 0.5 * (y1 + y2); }

  friend constexpr bool operator==(const Box&, const Box&) = default;
};

/// Boxes of one micro-tube: `first` at frame t, `second` at frame t+delta.
struct BoxPair {
  Box first;
  Box second;

  friend constexpr bool operator==(const BoxPair&, const BoxPair&) = default;
};

inline bool is_finite(const Box& b) {
  return std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) && std::isfinite(b.y2);
}

inline bool is_valid(const Box& b) {
  return is_finite(b) && b.x1 <= b.x2 && b.y1 <= b.y2 && b.x1 >= 0.0 && b.y1 >= 0.0 &&
         b.x2 <= 1.0 && b.y2 <= 1.0;
}

inline Box clip(const Box& b) {
  auto c = [](double v) { return std::clamp(v, 0.0, 1.0); };
  return {c(b.x1), c(b.y1), c(b.x2), c(b.y2)};
}

/// Clips to the unit square; throws when the box is non-finite or inverted.
inline Box validated(const Box& b) {
  if (!is_finite(b)) throw Error(ErrorCode::InvalidBox, "non-finite box coordinate");
  Box c = clip(b);
  if (c.x1 > c.x2 || c.y1 > c.y2) throw Error(ErrorCode::InvalidBox, "inverted box corners");
  return c;
}

inline double intersection_area(const Box& a, const Box& b) {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

/// Zero-area unions yield 0, so degenerate boxes never divide by zero.
inline double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

inline double mean_pair_iou(const BoxPair& a, const BoxPair& b) {
  return 0.5 * (iou(a.first, b.first) + iou(a.second, b.second));
}

/// Convex combination (1 - alpha) * a + alpha * b, coordinate-wise.
inline Box lerp(const Box& a, const Box& b, double alpha) {
  const double w = 1.0 - alpha;
  return {a.x1 * w + b.x1 * alpha, a.y1 * w + b.y1 * alpha, a.x2 * w + b.x2 * alpha,
          a.y2 * w + b.y2 * alpha};
}

inline Box mean_box(const Box& a, const Box& b) { return lerp(a, b, 0.5); }

struct FrameBox {
  int frame = 0;
  Box box;

  friend constexpr bool operator==(const FrameBox&, const FrameBox&) = default;
};

/// Boxes for every frame strictly between `t_a` and `t_b`, linearly interpolated
/// from the endpoint boxes and clipped to the unit square.
inline std::vector<FrameBox> interpolate(const Box& a, const Box& b, int t_a, int t_b) {
  if (t_a >= t_b) throw Error(ErrorCode::InvalidInterval, "interpolation needs t_a < t_b");
  std::vector<FrameBox> out;
  out.reserve(static_cast<std::size_t>(t_b - t_a - 1));
  const double span = static_cast<double>(t_b - t_a);
  for (int t = t_a + 1; t < t_b; ++t) {
    const double alpha = static_cast<double>(t - t_a) / span;
    out.push_back({t, clip(lerp(a, b, alpha))});
  }
  return out;
}

}  // namespace tubelink
