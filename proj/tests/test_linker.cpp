#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "tubelink/linker.hpp"
#include "tubelink/synthgen.hpp"

namespace tubelink {
namespace {

using testing::make_microtube;
using testing::scores_for;

LinkerConfig config(int delta) {
  LinkerConfig cfg;
  cfg.delta = delta;
  return cfg;
}

ClassCandidates one_class(std::vector<MicroTube> list) { return {{}, std::move(list)}; }

TEST(OnlineLinker, NothingInNothingOut) {
  OnlineLinker linker("v", 1, config(3));
  EXPECT_TRUE(linker.step({0, 3}, one_class({})).empty());
  EXPECT_TRUE(linker.finalize().empty());
}

TEST(OnlineLinker, TwoPairsFormOneTube) {
  const Box x0{0.1, 0.1, 0.3, 0.3};
  const Box x3{0.2, 0.1, 0.4, 0.3};
  const Box x6{0.3, 0.1, 0.5, 0.3};
  OnlineLinker linker("v", 1, config(3));
  auto e1 = linker.step({0, 3}, one_class({make_microtube(x0, x3, scores_for(0.8), 0, 3)}));
  auto e2 = linker.step({3, 6}, one_class({make_microtube(x3, x6, scores_for(0.6), 3, 6)}));
  ASSERT_EQ(e1.size(), 1u);
  EXPECT_EQ(e1[0].kind, LinkEventKind::Started);
  ASSERT_EQ(e2.size(), 1u);
  EXPECT_EQ(e2[0].kind, LinkEventKind::Extended);
  EXPECT_EQ(e2[0].tube_id, e1[0].tube_id);

  const auto tubes = linker.finalize();
  ASSERT_EQ(tubes.size(), 1u);
  EXPECT_EQ(tubes[0].first_frame, 0);
  EXPECT_EQ(tubes[0].length(), 7);  // 2 * delta + 1
  EXPECT_NEAR(tubes[0].score, 0.7, 1e-12);
  EXPECT_EQ(tubes[0].boxes[3], x3);
  EXPECT_NEAR(tubes[0].boxes[1].x1, 0.1 + 0.1 / 3.0, 1e-12);
  EXPECT_NEAR(tubes[0].boxes[5].x1, 0.3 - 0.1 / 3.0, 1e-12);
}

TEST(OnlineLinker, MatchScoreCombinesClassScoreAndIou) {
  const Box trail{0.0, 0.0, 0.5, 0.5};
  OnlineLinker linker("v", 1, config(3));
  linker.step({0, 3}, one_class({make_microtube({0, 0, 0.5, 0.5}, trail, scores_for(0.9), 0, 3)}));
  // A: IoU 0.8, score 0.6 -> 1.4.  B: IoU 0.5, score 0.95 -> 1.45.
  const MicroTube a = make_microtube({0, 0, 0.4, 0.5}, {0, 0, 0.4, 0.5}, scores_for(0.6), 3, 6);
  const MicroTube b = make_microtube({0, 0, 0.25, 0.5}, {0, 0, 0.25, 0.5}, scores_for(0.95), 3, 6);
  ASSERT_NEAR(iou(trail, a.boxes.first), 0.8, 1e-12);
  ASSERT_NEAR(iou(trail, b.boxes.first), 0.5, 1e-12);
  const auto events = linker.step({3, 6}, one_class({a, b}));
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[0].kind, LinkEventKind::Extended);
  EXPECT_EQ(events[0].tube_id, 0);
  EXPECT_EQ(events[0].candidate, 1);
  EXPECT_EQ(events[1].kind, LinkEventKind::Started);
  EXPECT_EQ(events[1].candidate, 0);
  EXPECT_EQ(linker.active(1).size(), 2u);
}

TEST(OnlineLinker, SharedFrameBoxIsMerged) {
  OnlineLinker linker("v", 1, config(2));
  linker.step({0, 2}, one_class({make_microtube({0, 0, 0.4, 0.4}, {0.1, 0, 0.5, 0.4}, scores_for(0.9), 0, 2)}));
  linker.step({2, 4}, one_class({make_microtube({0.2, 0, 0.6, 0.4}, {0.3, 0, 0.7, 0.4}, scores_for(0.9), 2, 4)}));
  const auto t = linker.finalize().at(0);
  EXPECT_NEAR(t.boxes[2].x1, 0.15, 1e-12);
  EXPECT_NEAR(t.boxes[2].x2, 0.55, 1e-12);
  EXPECT_EQ(linker.active(1)[0].trailing_box(), (Box{0.3, 0, 0.7, 0.4}));
}

TEST(OnlineLinker, PatienceThenTermination) {
  LinkerConfig cfg = config(1);
  cfg.patience = 2;
  OnlineLinker linker("v", 1, cfg);
  linker.step({0, 1}, one_class({make_microtube({0, 0, 0.2, 0.2}, {0, 0, 0.2, 0.2}, scores_for(0.9), 0, 1)}));
  std::vector<LinkEventKind> kinds;
  for (int t = 1; t < 4; ++t)
    for (const auto& e : linker.step({t, t + 1}, one_class({}))) kinds.push_back(e.kind);
  EXPECT_EQ(kinds, (std::vector<LinkEventKind>{LinkEventKind::Missed, LinkEventKind::Missed, LinkEventKind::Missed,
                                               LinkEventKind::Terminated}));
  EXPECT_TRUE(linker.active(1).empty());
  ASSERT_EQ(linker.finalize().size(), 1u);
  EXPECT_EQ(linker.finalize()[0].length(), 2);
}

TEST(OnlineLinker, GapIsInterpolatedAfterMiss) {
  OnlineLinker linker("v", 1, config(2));
  linker.step({0, 2}, one_class({make_microtube({0, 0, 0.2, 0.2}, {0.02, 0, 0.22, 0.2}, scores_for(0.9), 0, 2)}));
  linker.step({2, 4}, one_class({}));
  linker.step({4, 6}, one_class({make_microtube({0.04, 0, 0.24, 0.2}, {0.06, 0, 0.26, 0.2}, scores_for(0.9), 4, 6)}));
  const auto tubes = linker.finalize();
  ASSERT_EQ(tubes.size(), 1u);
  EXPECT_EQ(tubes[0].length(), 7);
  for (int f = 0; f <= 6; ++f) EXPECT_NEAR(tubes[0].boxes[static_cast<std::size_t>(f)].x1, 0.01 * f, 1e-12);
}

TEST(OnlineLinker, LowScoreCandidatesDoNotStartTubes) {
  OnlineLinker linker("v", 1, config(1));
  EXPECT_TRUE(linker.step({0, 1}, one_class({make_microtube({0, 0, 0.2, 0.2}, {0, 0, 0.2, 0.2}, scores_for(0.005), 0, 1)})).empty());
}

TEST(OnlineLinker, OrderingAndSpanErrors) {
  OnlineLinker linker("v", 1, config(2));
  linker.step({2, 4}, one_class({}));
  auto code = [&](FramePair p, std::vector<MicroTube> c) {
    try {
      linker.step(p, one_class(std::move(c)));
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Config;
  };
  EXPECT_EQ(code({0, 2}, {}), ErrorCode::Ordering);
  EXPECT_EQ(code({4, 7}, {}), ErrorCode::Span);
  EXPECT_EQ(code({4, 6}, {make_microtube({}, {}, scores_for(0.5), 5, 7)}), ErrorCode::Span);
}

TEST(Finalize, SingleMicrotubeDeltaOne) {
  OnlineLinker linker("v", 1, config(1));
  linker.step({0, 1}, one_class({make_microtube({0, 0, 0.2, 0.2}, {0, 0, 0.2, 0.2}, scores_for(0.9), 0, 1)}));
  const auto t = linker.finalize();
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].length(), 2);
}

TEST(Finalize, ClampedFinalPairStaysExactOnLinearMotion) {
  // T = 10, delta = 4: pairs (0,4), (4,8), (5,9).
  auto box_at = [](int f) { return Box{0.05 * f, 0.1, 0.05 * f + 0.2, 0.3}; };
  VideoMeta meta{"v", 10, 1, 1, std::nullopt};
  std::vector<PairGroup> groups;
  for (const auto& p : pair_schedule(10, 4))
    groups.push_back({p, {make_microtube(box_at(p.t1), box_at(p.t2), scores_for(0.9), p.t1, p.t2)}});
  const auto r = link_video(meta, groups, 1, config(4));
  ASSERT_EQ(r.tubes.size(), 1u);
  ASSERT_EQ(r.tubes[0].length(), 10);
  for (int f = 0; f < 10; ++f) {
    EXPECT_NEAR(r.tubes[0].boxes[static_cast<std::size_t>(f)].x1, box_at(f).x1, 1e-12);
    EXPECT_NEAR(r.tubes[0].boxes[static_cast<std::size_t>(f)].x2, box_at(f).x2, 1e-12);
  }
}

TEST(Trim, Examples) {
  ActionTube t;
  t.video_id = "v";
  t.first_frame = 0;
  for (int f = 0; f <= 8; ++f) t.boxes.push_back({0.01 * f, 0, 0.01 * f + 0.1, 0.1});
  t.steps = {{0, 2, 0.01}, {2, 4, 0.9}, {4, 6, 0.9}, {6, 8, 0.02}};
  t.score = 0.4575;

  const auto kept = trim(t, 0.05);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].first_frame, 2);
  EXPECT_EQ(kept[0].last_frame(), 6);
  EXPECT_EQ(kept[0].steps.size(), 2u);
  EXPECT_EQ(kept[0].boxes.front(), t.boxes[2]);
  EXPECT_NEAR(kept[0].score, 0.9, 1e-12);

  EXPECT_EQ(trim(t, 0.005), std::vector<ActionTube>{t});
  EXPECT_TRUE(trim(t, 0.95).empty());
}

TEST(Trim, InteriorLowStepsKept) {
  ActionTube t;
  t.first_frame = 0;
  t.boxes.assign(4, Box{0, 0, 0.1, 0.1});
  t.steps = {{0, 1, 0.9}, {1, 2, 0.01}, {2, 3, 0.9}};
  EXPECT_EQ(trim(t, 0.05), std::vector<ActionTube>{t});
}

TEST(LinkVideo, RejectsOffSchedulePairs) {
  VideoMeta meta{"v", 10, 1, 1, std::nullopt};
  std::vector<PairGroup> groups{{{1, 3}, {make_microtube({0, 0, 0.2, 0.2}, {0, 0, 0.2, 0.2}, scores_for(0.9), 1, 3)}}};
  try {
    link_video(meta, groups, 1, config(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Ordering);
  }
}

// Noisy scenario used by the property checks below.
Scenario noisy_scenario(std::uint64_t seed, DetectionStream& stream, int delta) {
  ScenarioConfig sc;
  sc.num_videos = 3;
  sc.num_frames = 40;
  sc.num_classes = 2;
  sc.instances_max = 3;
  sc.box_height = {0.1, 0.3};
  sc.single_class_per_video = false;
  Scenario s = generate_scenario(sc, seed);
  NoiseConfig nc;
  nc.center_sigma = 0.02;
  nc.scale_sigma = 0.1;
  nc.score_sigma = 0.1;
  nc.score_mean = 0.7;
  nc.drop_prob = 0.2;
  nc.fp_rate = 3.0;
  nc.confusion_prob = 0.2;
  stream = emit_detections(s.ground_truth, s.videos, 2, delta, nc, seed + 1);
  return s;
}

TEST(OnlineLinker, GreedyStepMatchesOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    DetectionStream stream;
    const Scenario s = noisy_scenario(seed, stream, 2);
    LinkerConfig cfg = config(2);
    for (const auto& vs : stream) {
      OnlineLinker linker(vs.video_id, 2, cfg);
      std::size_t g = 0;
      for (const auto& pair : pair_schedule(40, 2)) {
        std::vector<MicroTube> raw;
        if (g < vs.groups.size() && vs.groups[g].pair == pair) raw = vs.groups[g++].microtubes;
        const ClassCandidates cands = prepare_candidates(raw, 2, cfg);
        std::vector<std::vector<std::pair<int, int>>> expected(3);
        for (int c = 1; c <= 2; ++c)
          expected[static_cast<std::size_t>(c)] = testing::oracle_assignment(
              testing::oracle_view(linker.active(c)), cands[static_cast<std::size_t>(c)], c, cfg);
        std::vector<std::vector<std::pair<int, int>>> actual(3);
        for (const auto& e : linker.step(pair, cands))
          if (e.kind == LinkEventKind::Extended) actual[static_cast<std::size_t>(e.class_id)].emplace_back(e.tube_id, e.candidate);
        for (auto& a : actual) std::sort(a.begin(), a.end());
        EXPECT_EQ(actual, expected);
      }
    }
  }
}

TEST(OnlineLinker, PrefixReplayMatchesFullLog) {
  DetectionStream stream;
  const Scenario s = noisy_scenario(99, stream, 3);
  const LinkerConfig cfg = config(3);
  const auto& vs = stream.front();
  OnlineLinker full(vs.video_id, 2, cfg);
  std::vector<std::vector<LinkEvent>> per_step;
  for (const auto& g : vs.groups) per_step.push_back(full.push(g.pair, g.microtubes));
  for (std::size_t k = 0; k <= vs.groups.size(); ++k) {
    OnlineLinker prefix(vs.video_id, 2, cfg);
    for (std::size_t i = 0; i < k; ++i) EXPECT_EQ(prefix.push(vs.groups[i].pair, vs.groups[i].microtubes), per_step[i]);
  }
}

TEST(OnlineLinker, CandidatesClaimedAtMostOnce) {
  DetectionStream stream;
  noisy_scenario(5, stream, 1);
  for (const auto& vs : stream) {
    OnlineLinker linker(vs.video_id, 2, config(1));
    for (const auto& g : vs.groups) {
      std::set<std::pair<int, int>> claimed;
      for (const auto& e : linker.push(g.pair, g.microtubes))
        if (e.kind == LinkEventKind::Extended || e.kind == LinkEventKind::Started) {
          EXPECT_TRUE(claimed.insert({e.class_id, e.candidate}).second);
        }
    }
  }
}

TEST(OnlineLinker, FinalizedTubesAreDense) {
  DetectionStream stream;
  const Scenario s = noisy_scenario(8, stream, 4);
  for (std::size_t v = 0; v < stream.size(); ++v) {
    const auto r = link_video(s.videos[v], stream[v].groups, 2, config(4));
    for (const auto& t : r.tubes) {
      ASSERT_FALSE(t.steps.empty());
      EXPECT_EQ(t.first_frame, t.steps.front().first_frame);
      EXPECT_EQ(t.last_frame(), t.steps.back().last_frame);
      for (const auto& b : t.boxes) EXPECT_TRUE(is_valid(b));
      EXPECT_GE(t.score, 0.0);
      EXPECT_LE(t.score, 1.0);
      EXPECT_NE(t.class_id, kBackground);
    }
  }
}

}  // namespace
}  // namespace tubelink
