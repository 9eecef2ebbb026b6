#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "support.hpp"
#include "tubelink/io/serialization.hpp"

namespace tubelink {
namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::Config;
}

const char* kRecord =
    R"({"video_id":"v1","t1":0,"t2":4,"box1":[0.1,0.1,0.3,0.3],"box2":[0.2,0.1,0.4,0.3],"scores":[0.1,0.9]})";

TEST(Detections, EmptyStream) {
  std::istringstream in("");
  EXPECT_TRUE(io::read_detections(in).empty());
  std::istringstream blank("\n\n");
  EXPECT_TRUE(io::read_detections(blank).empty());
}

TEST(Detections, SingleRecord) {
  std::istringstream in(std::string(kRecord) + "\n");
  const auto s = io::read_detections(in);
  ASSERT_EQ(s.size(), 1u);
  ASSERT_EQ(s[0].groups.size(), 1u);
  EXPECT_EQ(s[0].groups[0].pair, (FramePair{0, 4}));
  const MicroTube& m = s[0].groups[0].microtubes.at(0);
  EXPECT_EQ(m.boxes.second, (Box{0.2, 0.1, 0.4, 0.3}));
  EXPECT_EQ(m.scores, (std::vector<double>{0.1, 0.9}));
}

TEST(Detections, BadBoxNamesLine) {
  std::istringstream in(std::string(kRecord) + "\n" +
                        R"({"video_id":"v1","t1":4,"t2":8,"box1":[0.1,0.1,0.3],"box2":[0.2,0.1,0.4,0.3],"scores":[0.1,0.9]})" +
                        "\n");
  try {
    io::read_detections(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Parse);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Detections, InvalidJsonIsParseError) {
  std::istringstream in("{not json\n");
  EXPECT_EQ(code_of([&] { io::read_detections(in); }), ErrorCode::Parse);
}

TEST(Detections, NonAdvancingPairRejected) {
  const std::string later =
      R"({"video_id":"v1","t1":4,"t2":8,"box1":[0.1,0.1,0.3,0.3],"box2":[0.2,0.1,0.4,0.3],"scores":[0.1,0.9]})";
  std::istringstream in(later + "\n" + kRecord + "\n");
  EXPECT_EQ(code_of([&] { io::read_detections(in); }), ErrorCode::Ordering);
}

TEST(Detections, RoundTripIsByteIdentical) {
  const Scenario s = generate_scenario(ScenarioConfig{}, 4);
  NoiseConfig n;
  n.center_sigma = 0.01;
  n.fp_rate = 1.0;
  const auto stream = emit_detections(s.ground_truth, s.videos, 3, 4, n, 5);
  std::ostringstream a;
  io::write_detections(a, stream);
  std::istringstream in(a.str());
  std::ostringstream b;
  io::write_detections(b, io::read_detections(in));
  EXPECT_EQ(a.str(), b.str());
}

TEST(Events, RoundTrip) {
  const std::vector<TimedEvent> events{
      {"v", {LinkEventKind::Started, 0, 1, {0, 2}, 3, 0.75}},
      {"v", {LinkEventKind::Missed, 0, 1, {2, 4}, -1, 0.0}},
  };
  std::ostringstream out;
  io::write_events(out, events);
  std::istringstream in(out.str());
  EXPECT_EQ(io::read_events(in), events);
}

io::TubeSet sample_tubes(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  io::TubeSet set{ClassVocabulary::numbered(3), {}};
  for (int i = 0; i < 5; ++i) {
    ActionTube t;
    t.video_id = "video" + std::to_string(i);
    t.class_id = 1 + i % 3;
    t.first_frame = i;
    for (int k = 0; k < 4; ++k) t.boxes.push_back(testing::random_box(gen));
    t.steps = {{i, i + 3, u(gen)}};
    t.score = u(gen);
    set.tubes.push_back(t);
  }
  return set;
}

TEST(Tubes, RoundTripQuantized) {
  const io::TubeSet set = sample_tubes(1);
  std::ostringstream out;
  io::write_tubes(out, set);
  std::istringstream in(out.str());
  const io::TubeSet back = io::read_tubes(in);
  ASSERT_EQ(back.tubes.size(), set.tubes.size());
  EXPECT_EQ(back.vocabulary, set.vocabulary);
  for (std::size_t i = 0; i < set.tubes.size(); ++i) {
    EXPECT_EQ(back.tubes[i].score, io::quantize(set.tubes[i].score));
    EXPECT_EQ(back.tubes[i].boxes[2].x1, io::quantize(set.tubes[i].boxes[2].x1));
    EXPECT_EQ(back.tubes[i].first_frame, set.tubes[i].first_frame);
  }
  std::ostringstream again;
  io::write_tubes(again, back);
  EXPECT_EQ(again.str(), out.str());
}

TEST(Report, RoundTripQuantized) {
  const Scenario s = generate_scenario(ScenarioConfig{}, 6);
  NoiseConfig n;
  n.center_sigma = 0.03;
  n.fp_rate = 0.5;
  const auto stream = emit_detections(s.ground_truth, s.videos, 3, 2, n, 7);
  const auto linked = link_stream(stream, s.videos, 3, LinkerConfig{.delta = 2});
  EvalReport r = video_map(linked.tubes, s.ground_truth, s.vocabulary, EvalConfig{});
  r.accuracy = classification_accuracy(linked.tubes, s.videos);
  r.frame_map = 0.123456789;
  r.frame_map_source = FrameMapSource::TubeSlices;
  std::ostringstream out;
  io::write_report(out, r);
  std::istringstream in(out.str());
  const EvalReport back = io::read_report(in);
  EXPECT_EQ(back.classes.size(), r.classes.size());
  EXPECT_EQ(back.map[1], io::quantize(r.map[1]));
  EXPECT_EQ(*back.frame_map, 0.123457);
  EXPECT_EQ(back.frame_map_source, FrameMapSource::TubeSlices);
  EXPECT_EQ(back.sweep->thresholds, r.sweep->thresholds);
  std::ostringstream again;
  io::write_report(again, back);
  EXPECT_EQ(again.str(), out.str());
}

TEST(Json, FixedFloatFormatting) {
  EXPECT_EQ(io::format_fixed(0.1), "0.100000");
  EXPECT_EQ(io::format_fixed(-0.0000001), "0.000000");
  EXPECT_EQ(io::dump(io::Json::array({1.0, 2, "a"})), "[1.000000,2,\"a\"]");
}

std::string annotation_doc(int num_classes, const std::string& instances, const std::string& video_extra = "") {
  std::string classes;
  for (int c = 1; c <= num_classes; ++c) classes += (c > 1 ? "," : "") + std::string("\"action") + std::to_string(c) + "\"";
  return R"({"format_version":1,"classes":[)" + classes + R"(],"videos":[{"video_id":"v","num_frames":10)" + video_extra +
         R"(}],"instances":[)" + instances + "]}";
}

TEST(Annotations, VocabularySizes) {
  for (int c : {24, 21}) {
    std::istringstream in(annotation_doc(
        c, R"({"video_id":"v","class":"action21","frames":[3,4,5],"boxes":[[0,0,0.5,0.5],[0,0,0.5,0.5],[0,0,0.5,0.5]]})"));
    const auto a = io::read_annotations(in);
    EXPECT_EQ(a.vocabulary.size(), c);
    ASSERT_EQ(a.ground_truth.size(), 1u);
    EXPECT_EQ(a.ground_truth[0].class_id, 21);
    EXPECT_EQ(a.ground_truth[0].first_frame, 3);
    EXPECT_EQ(a.ground_truth[0].length(), 3);
  }
}

TEST(Annotations, Errors) {
  const std::string gap = R"({"video_id":"v","class":"action1","frames":[3,4,6],"boxes":[[0,0,0.5,0.5],[0,0,0.5,0.5],[0,0,0.5,0.5]]})";
  std::istringstream a(annotation_doc(3, gap));
  EXPECT_EQ(code_of([&] { io::read_annotations(a); }), ErrorCode::Contiguity);

  const std::string pixel = R"({"video_id":"v","class":"action1","coords":"pixel","frames":[0],"boxes":[[0,0,50,50]]})";
  std::istringstream b(annotation_doc(3, pixel));
  EXPECT_EQ(code_of([&] { io::read_annotations(b); }), ErrorCode::Schema);
  std::istringstream b2(annotation_doc(3, pixel, R"(,"width":100,"height":200)"));
  EXPECT_EQ(io::read_annotations(b2).ground_truth[0].boxes[0], (Box{0, 0, 0.5, 0.25}));

  const std::string range = R"({"video_id":"v","class":"action1","frames":[9,10],"boxes":[[0,0,0.5,0.5],[0,0,0.5,0.5]]})";
  std::istringstream c(annotation_doc(3, range));
  EXPECT_EQ(code_of([&] { io::read_annotations(c); }), ErrorCode::Range);

  const std::string unknown = R"({"video_id":"v","class":"jump","frames":[0],"boxes":[[0,0,0.5,0.5]]})";
  std::istringstream d(annotation_doc(3, unknown));
  EXPECT_EQ(code_of([&] { io::read_annotations(d); }), ErrorCode::Vocabulary);

  std::istringstream e("");
  EXPECT_EQ(code_of([&] { io::read_annotations(e); }), ErrorCode::Parse);
}

TEST(Annotations, RoundTrip) {
  const Scenario s = generate_scenario(ScenarioConfig{}, 12);
  const io::Annotations ann{s.vocabulary, s.videos, s.ground_truth};
  std::ostringstream out;
  io::write_annotations(out, ann);
  std::istringstream in(out.str());
  const io::Annotations back = io::read_annotations(in);
  EXPECT_EQ(back.videos, ann.videos);
  ASSERT_EQ(back.ground_truth.size(), ann.ground_truth.size());
  for (std::size_t i = 0; i < ann.ground_truth.size(); ++i)
    EXPECT_NEAR(back.ground_truth[i].boxes[0].x1, ann.ground_truth[i].boxes[0].x1, 1e-6);
}

TEST(Table, CsvRoundTripPreservesValues) {
  io::PerClassTable t;
  t.columns = {"0.2", "0.5", "0.75", "0.5:0.95"};
  for (int c = 1; c <= 24; ++c)
    t.rows.push_back({"class" + std::to_string(c), {64.07, 50.0 + c, std::nullopt, 12.34}});
  t.mean = io::PerClassTable::Row{"mAP", {64.07, 62.5, 0.0, 12.34}};
  std::ostringstream out;
  io::write_table_csv(out, t);
  std::istringstream in(out.str());
  const io::PerClassTable back = io::read_table_csv(in);
  EXPECT_EQ(back, t);
  EXPECT_NE(out.str().find("64.07"), std::string::npos);
  EXPECT_NE(out.str().find(",-,"), std::string::npos);
  EXPECT_EQ(back.rows.size(), 24u);
}

TEST(Table, FromReport) {
  EvalReport r;
  r.deltas = {0.5};
  r.classes = {{"a", 2, 3, {0.640712}, std::nullopt}, {"b", 0, 1, {0.0}, std::nullopt}};
  r.map = {0.640712};
  const auto t = io::make_table(r);
  EXPECT_EQ(t.columns, std::vector<std::string>{"0.5"});
  EXPECT_EQ(t.rows[0].values[0], 64.07);
  EXPECT_FALSE(t.rows[1].values[0]);
  EXPECT_NE(io::render_table(t).find("64.07"), std::string::npos);
}

TEST(Table, MalformedCsv) {
  std::istringstream a("name,0.5\n");
  EXPECT_EQ(code_of([&] { io::read_table_csv(a); }), ErrorCode::Parse);
  std::istringstream b("class,0.5\nx,abc\n");
  EXPECT_EQ(code_of([&] { io::read_table_csv(b); }), ErrorCode::Parse);
  std::istringstream c("class,0.5\nx,1,2\n");
  EXPECT_EQ(code_of([&] { io::read_table_csv(c); }), ErrorCode::Parse);
}

TEST(SimulationConfig, ParsesAndRejectsUnknownKeys) {
  std::istringstream in(R"({"scenario":{"num_videos":3,"instances":[2,2],"box_width":[0.1,0.15]},"noise":{"fp_rate":0.5}})");
  const auto cfg = io::read_simulation_config(in);
  EXPECT_EQ(cfg.scenario.num_videos, 3);
  EXPECT_EQ(cfg.scenario.instances_min, 2);
  EXPECT_EQ(cfg.scenario.box_width, (Interval{0.1, 0.15}));
  EXPECT_EQ(cfg.noise.fp_rate, 0.5);
  std::istringstream bad(R"({"scenario":{"num_vidoes":3}})");
  EXPECT_EQ(code_of([&] { io::read_simulation_config(bad); }), ErrorCode::Config);
  std::istringstream infeasible(R"({"scenario":{"instances":[6,6]}})");
  EXPECT_EQ(code_of([&] { io::read_simulation_config(infeasible); }), ErrorCode::Config);
}

}  // namespace
}  // namespace tubelink
