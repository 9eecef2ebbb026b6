#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <exception>
#include <span>
#include <thread>
#include <vector>

#include "tubelink/error.hpp"
#include "tubelink/linker.hpp"
#include "tubelink/synthgen.hpp"
#include "tubelink/tube_model.hpp"

namespace tubelink {

struct TimingStats {
  std::size_t pairs = 0;
  std::size_t microtubes = 0;  // post-NMS candidates offered to the linker
  double wall_seconds = 0.0;
  int delta = 1;

  double pairs_per_second() const { return wall_seconds > 0.0 ? static_cast<double>(pairs) / wall_seconds : 0.0; }
  double associations_per_second() const {
    return wall_seconds > 0.0 ? static_cast<double>(microtubes) / wall_seconds : 0.0;
  }
  /// Frames covered per second when stepping by delta.
  double frames_per_second() const { return pairs_per_second() * delta; }
};

struct LinkedStream {
  std::vector<ActionTube> tubes;
  std::vector<TimedEvent> events;
  TimingStats timing;
};

/// Metadata for streamed videos: the given entry when present, otherwise the
/// frame count implied by the last detected pair.
inline VideoMeta meta_for(const VideoStream& vs, std::span<const VideoMeta> videos) {
  for (const auto& v : videos)
    if (v.video_id == vs.video_id) return v;
  VideoMeta meta;
  meta.video_id = vs.video_id;
  meta.num_frames = vs.groups.empty() ? 2 : vs.groups.back().pair.t2 + 1;
  return meta;
}

/// Links every video of the stream. Videos listed in `videos` but absent from
/// the stream are linked over empty candidate sets. With jobs > 1 videos run on
/// worker threads; results are always concatenated in stream order.
inline LinkedStream link_stream(const DetectionStream& stream, std::span<const VideoMeta> videos, int num_classes,
                                const LinkerConfig& cfg, int jobs = 1) {
  if (jobs < 1) throw Error(ErrorCode::Config, "jobs must be >= 1");
  LinkedStream out;
  out.timing.delta = cfg.delta;
  std::vector<const VideoStream*> order;
  std::vector<VideoStream> empties;
  empties.reserve(videos.size());
  for (const auto& vs : stream) order.push_back(&vs);
  for (const auto& v : videos) {
    const bool present = std::any_of(stream.begin(), stream.end(), [&](const VideoStream& s) { return s.video_id == v.video_id; });
    if (!present) {
      empties.push_back({v.video_id, {}});
      order.push_back(&empties.back());
    }
  }

  std::vector<LinkResult> results(order.size());
  std::vector<std::exception_ptr> errors(order.size());
  auto run = [&](std::size_t i) {
    try {
      results[i] = link_video(meta_for(*order[i], videos), order[i]->groups, num_classes, cfg);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const auto start = std::chrono::steady_clock::now();
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), order.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < order.size(); ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < order.size(); i = next++) run(i);
      });
    for (auto& t : pool) t.join();
  }
  out.timing.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  for (std::size_t i = 0; i < order.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.timing.pairs += results[i].pairs;
    out.timing.microtubes += results[i].candidates;
    for (auto& t : results[i].tubes) out.tubes.push_back(std::move(t));
    for (auto& e : results[i].events) out.events.push_back(std::move(e));
  }
  return out;
}

struct BenchResult {
  std::vector<TimingStats> runs;
  TimingStats median;
};

/// Repeats link_stream `repeat` times; the median is taken over wall time.
inline BenchResult bench_link(const DetectionStream& stream, std::span<const VideoMeta> videos, int num_classes,
                              const LinkerConfig& cfg, int repeat) {
  if (repeat < 1) throw Error(ErrorCode::Config, "repeat must be >= 1");
  BenchResult br;
  for (int i = 0; i < repeat; ++i) br.runs.push_back(link_stream(stream, videos, num_classes, cfg).timing);
  std::vector<TimingStats> sorted = br.runs;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.wall_seconds < b.wall_seconds; });
  br.median = sorted[sorted.size() / 2];
  if (sorted.size() % 2 == 0) br.median.wall_seconds = 0.5 * (sorted[sorted.size() / 2 - 1].wall_seconds + sorted[sorted.size() / 2].wall_seconds);
  return br;
}

}  // namespace tubelink
