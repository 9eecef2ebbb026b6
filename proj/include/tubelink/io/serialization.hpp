#pragma once

#include <cstddef>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tubelink/error.hpp"
#include "tubelink/evaluation.hpp"
#include "tubelink/io/json_format.hpp"
#include "tubelink/linker.hpp"
#include "tubelink/synthgen.hpp"
#include "tubelink/tube_model.hpp"

namespace tubelink::io {

// ---------------------------------------------------------------------------
// Field helpers. Schema violations in structured files raise Schema errors;
// the line-oriented readers rethrow them as Parse errors carrying the line.

namespace detail {

inline const Json& field(const Json& obj, const char* key) {
  if (!obj.is_object()) throw Error(ErrorCode::Schema, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::Schema, std::string("missing field '") + key + "'");
  return *it;
}

inline double number(const Json& j, const char* what) {
  if (!j.is_number()) throw Error(ErrorCode::Schema, std::string("field '") + what + "' must be a number");
  return j.get<double>();
}

inline int integer(const Json& j, const char* what) {
  if (!j.is_number_integer()) throw Error(ErrorCode::Schema, std::string("field '") + what + "' must be an integer");
  return j.get<int>();
}

inline std::string text(const Json& j, const char* what) {
  if (!j.is_string()) throw Error(ErrorCode::Schema, std::string("field '") + what + "' must be a string");
  return j.get<std::string>();
}

inline std::optional<double> optional_number(const Json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return number(*it, key);
}

inline Box box_from(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw Error(ErrorCode::Schema, "box must have exactly 4 coordinates");
  return {number(j[0], "box"), number(j[1], "box"), number(j[2], "box"), number(j[3], "box")};
}

inline Json box_to(const Box& b) { return Json::array({b.x1, b.y1, b.x2, b.y2}); }

inline std::vector<double> numbers_from(const Json& j, const char* what) {
  if (!j.is_array()) throw Error(ErrorCode::Schema, std::string("field '") + what + "' must be an array");
  std::vector<double> out;
  for (const auto& e : j) out.push_back(number(e, what));
  return out;
}

inline Json numbers_to(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

inline Json optional_to(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline void check_version(const Json& doc) {
  const int v = integer(field(doc, "format_version"), "format_version");
  if (v != kFormatVersion) throw Error(ErrorCode::Schema, "unsupported format_version " + std::to_string(v));
}

inline Json parse_document(std::istream& in) {
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, e.what());
  }
}

template <class F>
auto on_line(std::size_t line, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(ErrorCode::Parse, "line " + std::to_string(line) + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, "line " + std::to_string(line) + ": " + e.what());
  }
}

inline bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Parse, "cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Config, "cannot write '" + path + "'");
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Detection stream: one micro-tube per line,
//   {"video_id":..,"t1":..,"t2":..,"box1":[x1,y1,x2,y2],"box2":[..],"scores":[bg,c1..cC]}

inline Json to_json(const MicroTube& m) {
  return Json{{"video_id", m.video_id},       {"t1", m.t1}, {"t2", m.t2}, {"box1", detail::box_to(m.boxes.first)},
              {"box2", detail::box_to(m.boxes.second)}, {"scores", detail::numbers_to(m.scores)}};
}

inline MicroTube microtube_from_json(const Json& j) {
  using namespace detail;
  MicroTube m;
  m.video_id = text(field(j, "video_id"), "video_id");
  m.t1 = integer(field(j, "t1"), "t1");
  m.t2 = integer(field(j, "t2"), "t2");
  m.boxes.first = box_from(field(j, "box1"));
  m.boxes.second = box_from(field(j, "box2"));
  m.scores = numbers_from(field(j, "scores"), "scores");
  if (m.t2 <= m.t1) throw Error(ErrorCode::Ordering, "record needs t1 < t2");
  if (m.scores.size() < 2) throw Error(ErrorCode::MalformedScores, "score vector needs background plus a class");
  return m;
}

/// Groups records by (video, pair). Videos appear in first-seen order; within a
/// video the pairs must strictly advance and each pair's records must be contiguous.
inline DetectionStream read_detections(std::istream& in) {
  DetectionStream stream;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    MicroTube m = detail::on_line(lineno, [&] { return microtube_from_json(Json::parse(line)); });
    auto [it, fresh] = index.try_emplace(m.video_id, stream.size());
    if (fresh) stream.push_back({m.video_id, {}});
    auto& groups = stream[it->second].groups;
    if (!groups.empty() && groups.back().pair == m.pair()) {
      groups.back().microtubes.push_back(std::move(m));
      continue;
    }
    if (!groups.empty() && (m.t1 <= groups.back().pair.t1 || m.t2 <= groups.back().pair.t2))
      throw Error(ErrorCode::Ordering, "line " + std::to_string(lineno) + ": pair (" + std::to_string(m.t1) + ", " +
                                           std::to_string(m.t2) + ") does not advance video '" + m.video_id + "'");
    groups.push_back({m.pair(), {}});
    groups.back().microtubes.push_back(std::move(m));
  }
  return stream;
}

inline void write_detections(std::ostream& out, const DetectionStream& stream) {
  for (const auto& vs : stream)
    for (const auto& g : vs.groups)
      for (const auto& m : g.microtubes) out << dump(to_json(m)) << '\n';
}

inline DetectionStream read_detections_file(const std::string& path) {
  auto in = detail::open_in(path);
  return read_detections(in);
}

// ---------------------------------------------------------------------------
// Link event log, one event per line.

inline Json to_json(const TimedEvent& te) {
  const LinkEvent& e = te.event;
  Json j{{"video_id", te.video_id}, {"t1", e.pair.t1}, {"t2", e.pair.t2}, {"event", std::string(to_string(e.kind))},
         {"tube", e.tube_id},       {"class_id", e.class_id}};
  if (e.kind == LinkEventKind::Started || e.kind == LinkEventKind::Extended) {
    j["candidate"] = e.candidate;
    j["score"] = e.score;
  }
  return j;
}

inline TimedEvent event_from_json(const Json& j) {
  using namespace detail;
  TimedEvent te;
  te.video_id = text(field(j, "video_id"), "video_id");
  te.event.pair = {integer(field(j, "t1"), "t1"), integer(field(j, "t2"), "t2")};
  const std::string kind = text(field(j, "event"), "event");
  bool known = false;
  for (auto k : {LinkEventKind::Started, LinkEventKind::Extended, LinkEventKind::Missed, LinkEventKind::Terminated})
    if (kind == to_string(k)) {
      te.event.kind = k;
      known = true;
    }
  if (!known) throw Error(ErrorCode::Schema, "unknown event kind '" + kind + "'");
  te.event.tube_id = integer(field(j, "tube"), "tube");
  te.event.class_id = integer(field(j, "class_id"), "class_id");
  if (j.contains("candidate")) te.event.candidate = integer(j["candidate"], "candidate");
  if (j.contains("score")) te.event.score = number(j["score"], "score");
  return te;
}

inline void write_events(std::ostream& out, const std::vector<TimedEvent>& events) {
  for (const auto& e : events) out << dump(to_json(e)) << '\n';
}

inline std::vector<TimedEvent> read_events(std::istream& in) {
  std::vector<TimedEvent> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    out.push_back(detail::on_line(lineno, [&] { return event_from_json(Json::parse(line)); }));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tubes file.

struct TubeSet {
  ClassVocabulary vocabulary;
  std::vector<ActionTube> tubes;

  friend bool operator==(const TubeSet&, const TubeSet&) = default;
};

inline Json to_json(const ActionTube& t) {
  Json boxes = Json::array();
  for (const auto& b : t.boxes) boxes.push_back(detail::box_to(b));
  Json steps = Json::array();
  for (const auto& s : t.steps) steps.push_back(Json{{"first_frame", s.first_frame}, {"last_frame", s.last_frame}, {"score", s.score}});
  return Json{{"video_id", t.video_id}, {"class_id", t.class_id}, {"score", t.score},
              {"first_frame", t.first_frame}, {"boxes", boxes}, {"steps", steps}};
}

inline ActionTube tube_from_json(const Json& j) {
  using namespace detail;
  ActionTube t;
  t.video_id = text(field(j, "video_id"), "video_id");
  t.class_id = integer(field(j, "class_id"), "class_id");
  t.score = number(field(j, "score"), "score");
  t.first_frame = integer(field(j, "first_frame"), "first_frame");
  for (const auto& b : field(j, "boxes")) t.boxes.push_back(box_from(b));
  if (auto it = j.find("steps"); it != j.end())
    for (const auto& s : *it)
      t.steps.push_back({integer(field(s, "first_frame"), "first_frame"), integer(field(s, "last_frame"), "last_frame"),
                         number(field(s, "score"), "score")});
  if (t.boxes.empty()) throw Error(ErrorCode::Schema, "tube without boxes");
  return t;
}

inline Json to_json(const TubeSet& set) {
  Json tubes = Json::array();
  for (const auto& t : set.tubes) tubes.push_back(to_json(t));
  return Json{{"format_version", kFormatVersion}, {"kind", "tubes"}, {"classes", set.vocabulary.names()}, {"tubes", tubes}};
}

inline TubeSet tubes_from_json(const Json& doc) {
  using namespace detail;
  check_version(doc);
  TubeSet set;
  std::vector<std::string> names;
  for (const auto& n : field(doc, "classes")) names.push_back(text(n, "classes"));
  set.vocabulary = ClassVocabulary(names);
  for (const auto& t : field(doc, "tubes")) {
    set.tubes.push_back(tube_from_json(t));
    if (!set.vocabulary.contains(set.tubes.back().class_id))
      throw Error(ErrorCode::Vocabulary, "tube with unknown class id " + std::to_string(set.tubes.back().class_id));
  }
  return set;
}

inline void write_tubes(std::ostream& out, const TubeSet& set) { out << dump(to_json(set), 2) << '\n'; }
inline TubeSet read_tubes(std::istream& in) { return tubes_from_json(detail::parse_document(in)); }

// ---------------------------------------------------------------------------
// Annotation file:
//   {"format_version":1, "classes":[names],
//    "videos":[{"video_id","num_frames","width","height","label"?}],
//    "instances":[{"video_id","class" (name) | "class_id","coords":"normalized"|"pixel",
//                  "frames":[contiguous ints],"boxes":[[x1,y1,x2,y2],..]}]}
// Pixel boxes are divided by the video's width/height, which are then required.

struct Annotations {
  ClassVocabulary vocabulary;
  std::vector<VideoMeta> videos;
  std::vector<GroundTruthTube> ground_truth;

  const VideoMeta* find_video(const std::string& id) const {
    for (const auto& v : videos)
      if (v.video_id == id) return &v;
    return nullptr;
  }

  friend bool operator==(const Annotations&, const Annotations&) = default;
};

inline int class_ref(const Json& obj, const ClassVocabulary& vocab, const char* name_key, const char* id_key) {
  if (auto it = obj.find(name_key); it != obj.end()) {
    const std::string n = detail::text(*it, name_key);
    auto id = vocab.find(n);
    if (!id) throw Error(ErrorCode::Vocabulary, "unknown class '" + n + "'");
    return *id;
  }
  if (auto it = obj.find(id_key); it != obj.end()) {
    const int id = detail::integer(*it, id_key);
    if (!vocab.contains(id)) throw Error(ErrorCode::Vocabulary, "unknown class id " + std::to_string(id));
    return id;
  }
  throw Error(ErrorCode::Schema, std::string("missing field '") + name_key + "'");
}

inline Annotations annotations_from_json(const Json& doc) {
  using namespace detail;
  check_version(doc);
  Annotations ann;
  std::vector<std::string> names;
  for (const auto& n : field(doc, "classes")) names.push_back(text(n, "classes"));
  ann.vocabulary = ClassVocabulary(names);

  std::map<std::string, std::pair<bool, std::size_t>> has_dims;  // video -> (explicit dims, index)
  for (const auto& v : field(doc, "videos")) {
    VideoMeta meta;
    meta.video_id = text(field(v, "video_id"), "video_id");
    meta.num_frames = integer(field(v, "num_frames"), "num_frames");
    const bool dims = v.contains("width") && v.contains("height");
    if (dims) {
      meta.width = integer(v["width"], "width");
      meta.height = integer(v["height"], "height");
    }
    if (v.contains("label") && !v["label"].is_null()) meta.label = class_ref(v, ann.vocabulary, "label", "label_id");
    check_video_meta(meta);
    if (!has_dims.emplace(meta.video_id, std::make_pair(dims, ann.videos.size())).second)
      throw Error(ErrorCode::Schema, "duplicate video '" + meta.video_id + "'");
    ann.videos.push_back(std::move(meta));
  }

  std::size_t idx = 0;
  for (const auto& inst : field(doc, "instances")) {
    const std::string where = "instance " + std::to_string(idx++);
    GroundTruthTube gt;
    gt.video_id = text(field(inst, "video_id"), "video_id");
    auto vit = has_dims.find(gt.video_id);
    if (vit == has_dims.end()) throw Error(ErrorCode::Schema, where + " references unknown video '" + gt.video_id + "'");
    const VideoMeta& meta = ann.videos[vit->second.second];
    gt.class_id = class_ref(inst, ann.vocabulary, "class", "class_id");
    const std::string coords = inst.contains("coords") ? text(inst["coords"], "coords") : "normalized";
    if (coords != "normalized" && coords != "pixel") throw Error(ErrorCode::Schema, where + ": coords must be normalized or pixel");
    if (coords == "pixel" && !vit->second.first)
      throw Error(ErrorCode::Schema, where + ": pixel boxes need width/height on video '" + gt.video_id + "'");

    const Json& frames = field(inst, "frames");
    const Json& boxes = field(inst, "boxes");
    if (!frames.is_array() || !boxes.is_array() || frames.size() != boxes.size() || frames.empty())
      throw Error(ErrorCode::Schema, where + ": frames and boxes must be non-empty lists of equal length");
    for (std::size_t k = 0; k < frames.size(); ++k) {
      const int f = integer(frames[k], "frames");
      if (k == 0) gt.first_frame = f;
      else if (f != gt.first_frame + static_cast<int>(k))
        throw Error(ErrorCode::Contiguity, where + ": frame " + std::to_string(f) + " breaks the contiguous frame run");
      if (f < 0 || f >= meta.num_frames) throw Error(ErrorCode::Range, where + ": frame " + std::to_string(f) + " outside video");
      Box b = box_from(boxes[k]);
      if (coords == "pixel") b = {b.x1 / meta.width, b.y1 / meta.height, b.x2 / meta.width, b.y2 / meta.height};
      gt.boxes.push_back(validated(b));
    }
    ann.ground_truth.push_back(std::move(gt));
  }
  return ann;
}

inline Json to_json(const Annotations& ann) {
  Json videos = Json::array();
  for (const auto& v : ann.videos) {
    Json j{{"video_id", v.video_id}, {"num_frames", v.num_frames}, {"width", v.width}, {"height", v.height}};
    if (v.label) j["label"] = ann.vocabulary.name(*v.label);
    videos.push_back(j);
  }
  Json instances = Json::array();
  for (const auto& g : ann.ground_truth) {
    Json frames = Json::array();
    Json boxes = Json::array();
    for (int i = 0; i < g.length(); ++i) {
      frames.push_back(g.first_frame + i);
      boxes.push_back(detail::box_to(g.boxes[static_cast<std::size_t>(i)]));
    }
    instances.push_back(Json{{"video_id", g.video_id}, {"class", ann.vocabulary.name(g.class_id)}, {"coords", "normalized"},
                             {"frames", frames}, {"boxes", boxes}});
  }
  return Json{{"format_version", kFormatVersion}, {"classes", ann.vocabulary.names()}, {"videos", videos}, {"instances", instances}};
}

inline void write_annotations(std::ostream& out, const Annotations& ann) { out << dump(to_json(ann), 2) << '\n'; }
inline Annotations read_annotations(std::istream& in) { return annotations_from_json(detail::parse_document(in)); }

inline Annotations read_annotations_file(const std::string& path) {
  auto in = detail::open_in(path);
  return read_annotations(in);
}

// ---------------------------------------------------------------------------
// Frame-level detections, one per line:
//   {"video_id","frame","class_id","box":[..],"score"}

inline std::vector<FrameDetection> read_frame_detections(std::istream& in) {
  using namespace detail;
  std::vector<FrameDetection> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    out.push_back(on_line(lineno, [&] {
      const Json j = Json::parse(line);
      return FrameDetection{text(field(j, "video_id"), "video_id"), integer(field(j, "frame"), "frame"),
                            integer(field(j, "class_id"), "class_id"), validated(box_from(field(j, "box"))),
                            number(field(j, "score"), "score")};
    }));
  }
  return out;
}

inline void write_frame_detections(std::ostream& out, const std::vector<FrameDetection>& dets) {
  for (const auto& d : dets)
    out << dump(Json{{"video_id", d.video_id}, {"frame", d.frame}, {"class_id", d.class_id},
                     {"box", detail::box_to(d.box)}, {"score", d.score}})
        << '\n';
}

// ---------------------------------------------------------------------------
// Evaluation report.

inline constexpr const char* kAccuracyDefinition = "class of the highest-scoring tube per video";

inline Json to_json(const EvalReport& r) {
  Json classes = Json::array();
  for (const auto& c : r.classes)
    classes.push_back(Json{{"name", c.name}, {"gt_instances", c.gt_instances}, {"detections", c.detections},
                           {"ap", detail::numbers_to(c.ap)}, {"sweep_mean", detail::optional_to(c.sweep_mean)}});
  Json sweep = nullptr;
  if (r.sweep)
    sweep = Json{{"thresholds", detail::numbers_to(r.sweep->thresholds)}, {"map", detail::numbers_to(r.sweep->map)},
                 {"mean", r.sweep->mean}};
  return Json{{"format_version", kFormatVersion},
              {"kind", "eval_report"},
              {"deltas", detail::numbers_to(r.deltas)},
              {"map", detail::numbers_to(r.map)},
              {"sweep", sweep},
              {"frame_map", detail::optional_to(r.frame_map)},
              {"frame_map_source", std::string(to_string(r.frame_map_source))},
              {"accuracy", detail::optional_to(r.accuracy)},
              {"accuracy_definition", kAccuracyDefinition},
              {"counts", Json{{"videos", r.videos}, {"gt_instances", r.gt_instances}, {"detections", r.detections},
                              {"evaluated_classes", r.evaluated_classes()}}},
              {"classes", classes}};
}

inline EvalReport report_from_json(const Json& doc) {
  using namespace detail;
  check_version(doc);
  EvalReport r;
  r.deltas = numbers_from(field(doc, "deltas"), "deltas");
  r.map = numbers_from(field(doc, "map"), "map");
  if (const Json& s = field(doc, "sweep"); !s.is_null())
    r.sweep = SweepResult{numbers_from(field(s, "thresholds"), "thresholds"), numbers_from(field(s, "map"), "map"),
                          number(field(s, "mean"), "mean")};
  r.frame_map = optional_number(doc, "frame_map");
  const std::string src = text(field(doc, "frame_map_source"), "frame_map_source");
  r.frame_map_source = FrameMapSource::None;
  for (auto s : {FrameMapSource::TubeSlices, FrameMapSource::FrameDetections})
    if (src == to_string(s)) r.frame_map_source = s;
  r.accuracy = optional_number(doc, "accuracy");
  const Json& counts = field(doc, "counts");
  r.videos = static_cast<std::size_t>(integer(field(counts, "videos"), "videos"));
  r.gt_instances = static_cast<std::size_t>(integer(field(counts, "gt_instances"), "gt_instances"));
  r.detections = static_cast<std::size_t>(integer(field(counts, "detections"), "detections"));
  for (const auto& c : field(doc, "classes")) {
    ClassResult cr;
    cr.name = text(field(c, "name"), "name");
    cr.gt_instances = static_cast<std::size_t>(integer(field(c, "gt_instances"), "gt_instances"));
    cr.detections = static_cast<std::size_t>(integer(field(c, "detections"), "detections"));
    cr.ap = numbers_from(field(c, "ap"), "ap");
    cr.sweep_mean = optional_number(c, "sweep_mean");
    if (cr.ap.size() != r.deltas.size()) throw Error(ErrorCode::Schema, "class '" + cr.name + "' has a wrong AP count");
    r.classes.push_back(std::move(cr));
  }
  if (r.map.size() != r.deltas.size()) throw Error(ErrorCode::Schema, "mAP count differs from delta count");
  return r;
}

inline void write_report(std::ostream& out, const EvalReport& r) { out << dump(to_json(r), 2) << '\n'; }
inline EvalReport read_report(std::istream& in) { return report_from_json(detail::parse_document(in)); }

// ---------------------------------------------------------------------------
// Per-class table: one row per class, one column per delta (plus the sweep
// mean), values as percentages with 2 decimals. Classes without ground truth
// show "-".

struct PerClassTable {
  struct Row {
    std::string name;
    std::vector<std::optional<double>> values;

    friend bool operator==(const Row&, const Row&) = default;
  };

  std::vector<std::string> columns;
  std::vector<Row> rows;
  std::optional<Row> mean;

  friend bool operator==(const PerClassTable&, const PerClassTable&) = default;
};

inline std::string threshold_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline double percent(double fraction) { return std::stod(format_fixed(fraction * 100.0, 2)); }

inline PerClassTable make_table(const EvalReport& r) {
  PerClassTable t;
  for (double d : r.deltas) t.columns.push_back(threshold_label(d));
  if (r.sweep && !r.sweep->thresholds.empty())
    t.columns.push_back(threshold_label(r.sweep->thresholds.front()) + ":" + threshold_label(r.sweep->thresholds.back()));
  for (const auto& c : r.classes) {
    PerClassTable::Row row{c.name, {}};
    for (double ap : c.ap) row.values.push_back(c.evaluated() ? std::optional(percent(ap)) : std::nullopt);
    if (r.sweep && !r.sweep->thresholds.empty())
      row.values.push_back(c.evaluated() && c.sweep_mean ? std::optional(percent(*c.sweep_mean)) : std::nullopt);
    t.rows.push_back(std::move(row));
  }
  PerClassTable::Row mean{"mAP", {}};
  for (double m : r.map) mean.values.push_back(percent(m));
  if (r.sweep && !r.sweep->thresholds.empty()) mean.values.push_back(percent(r.sweep->mean));
  t.mean = std::move(mean);
  return t;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string cell(const std::optional<double>& v) { return v ? format_fixed(*v, 2) : "-"; }

}  // namespace detail

inline void write_table_csv(std::ostream& out, const PerClassTable& t) {
  auto row_out = [&](const PerClassTable::Row& r) {
    out << detail::csv_field(r.name);
    for (const auto& v : r.values) out << ',' << detail::cell(v);
    out << '\n';
  };
  out << "class";
  for (const auto& c : t.columns) out << ',' << detail::csv_field(c);
  out << '\n';
  for (const auto& r : t.rows) row_out(r);
  if (t.mean) row_out(*t.mean);
}

/// Reads a table written by write_table_csv; a trailing "mAP" row becomes `mean`.
inline PerClassTable read_table_csv(std::istream& in) {
  PerClassTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    auto cells = detail::csv_split(line);
    if (lineno == 1) {
      if (cells.empty() || cells[0] != "class") throw Error(ErrorCode::Parse, "line 1: table header must start with 'class'");
      t.columns.assign(cells.begin() + 1, cells.end());
      continue;
    }
    if (cells.size() != t.columns.size() + 1)
      throw Error(ErrorCode::Parse, "line " + std::to_string(lineno) + ": expected " + std::to_string(t.columns.size() + 1) + " cells");
    PerClassTable::Row row{cells[0], {}};
    for (std::size_t k = 1; k < cells.size(); ++k) {
      if (cells[k] == "-") {
        row.values.push_back(std::nullopt);
        continue;
      }
      try {
        std::size_t used = 0;
        row.values.push_back(std::stod(cells[k], &used));
        if (used != cells[k].size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw Error(ErrorCode::Parse, "line " + std::to_string(lineno) + ": bad number '" + cells[k] + "'");
      }
    }
    if (row.name == "mAP") t.mean = std::move(row);
    else t.rows.push_back(std::move(row));
  }
  if (lineno == 0) throw Error(ErrorCode::Parse, "empty table");
  return t;
}

/// Aligned plain-text rendering for terminals.
inline std::string render_table(const PerClassTable& t) {
  std::size_t name_w = 5;
  for (const auto& r : t.rows) name_w = std::max(name_w, r.name.size());
  std::size_t col_w = 8;
  for (const auto& c : t.columns) col_w = std::max(col_w, c.size() + 1);
  std::ostringstream os;
  auto pad = [](const std::string& s, std::size_t w, bool right) {
    if (s.size() >= w) return s;
    return right ? std::string(w - s.size(), ' ') + s : s + std::string(w - s.size(), ' ');
  };
  os << pad("class", name_w, false);
  for (const auto& c : t.columns) os << pad(c, col_w, true);
  os << '\n';
  auto row_out = [&](const PerClassTable::Row& r) {
    os << pad(r.name, name_w, false);
    for (const auto& v : r.values) os << pad(detail::cell(v), col_w, true);
    os << '\n';
  };
  for (const auto& r : t.rows) row_out(r);
  if (t.mean) row_out(*t.mean);
  return os.str();
}

// ---------------------------------------------------------------------------
// Simulation config: {"scenario": {...}, "noise": {...}}; unknown keys are rejected.

struct SimulationConfig {
  ScenarioConfig scenario;
  NoiseConfig noise;
};

namespace detail {

template <class F>
void for_keys(const Json& obj, const char* what, F&& f) {
  if (!obj.is_object()) throw Error(ErrorCode::Config, std::string(what) + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!f(it.key(), it.value())) throw Error(ErrorCode::Config, std::string("unknown ") + what + " key '" + it.key() + "'");
}

inline Interval interval_from(const Json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw Error(ErrorCode::Config, key + " must be [min, max]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

inline SimulationConfig simulation_config_from_json(const Json& doc) {
  SimulationConfig cfg;
  auto num = [](const Json& v, const std::string& k) {
    if (!v.is_number()) throw Error(ErrorCode::Config, k + " must be a number");
    return v.get<double>();
  };
  auto whole = [](const Json& v, const std::string& k) {
    if (!v.is_number_integer()) throw Error(ErrorCode::Config, k + " must be an integer");
    return v.get<int>();
  };
  detail::for_keys(doc, "config", [&](const std::string& key, const Json& section) {
    if (key == "scenario") {
      auto& s = cfg.scenario;
      detail::for_keys(section, "scenario", [&](const std::string& k, const Json& v) {
        if (k == "num_videos") s.num_videos = whole(v, k);
        else if (k == "num_frames") s.num_frames = whole(v, k);
        else if (k == "num_classes") s.num_classes = whole(v, k);
        else if (k == "instances") {
          const Interval r = detail::interval_from(v, k);
          s.instances_min = static_cast<int>(r.min);
          s.instances_max = static_cast<int>(r.max);
        } else if (k == "waypoints") s.waypoints = whole(v, k);
        else if (k == "box_width") s.box_width = detail::interval_from(v, k);
        else if (k == "box_height") s.box_height = detail::interval_from(v, k);
        else if (k == "span_fraction") s.span_fraction = detail::interval_from(v, k);
        else if (k == "frame_bounds") {
          try {
            s.frame_bounds = detail::box_from(v);
          } catch (const Error&) {
            throw Error(ErrorCode::Config, "frame_bounds must be [x1, y1, x2, y2]");
          }
        } else if (k == "width") s.width = whole(v, k);
        else if (k == "height") s.height = whole(v, k);
        else if (k == "single_class_per_video") {
          if (!v.is_boolean()) throw Error(ErrorCode::Config, k + " must be a boolean");
          s.single_class_per_video = v.get<bool>();
        } else return false;
        return true;
      });
    } else if (key == "noise") {
      auto& n = cfg.noise;
      detail::for_keys(section, "noise", [&](const std::string& k, const Json& v) {
        if (k == "center_sigma") n.center_sigma = num(v, k);
        else if (k == "scale_sigma") n.scale_sigma = num(v, k);
        else if (k == "score_mean") n.score_mean = num(v, k);
        else if (k == "score_sigma") n.score_sigma = num(v, k);
        else if (k == "drop_prob") n.drop_prob = num(v, k);
        else if (k == "fp_rate") n.fp_rate = num(v, k);
        else if (k == "fp_score_max") n.fp_score_max = num(v, k);
        else if (k == "confusion_prob") n.confusion_prob = num(v, k);
        else if (k == "confusion_mass") n.confusion_mass = num(v, k);
        else return false;
        return true;
      });
    } else {
      return false;
    }
    return true;
  });
  cfg.scenario.validate();
  cfg.noise.validate();
  return cfg;
}

inline SimulationConfig read_simulation_config(std::istream& in) {
  try {
    return simulation_config_from_json(Json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, e.what());
  }
}

}  // namespace tubelink::io
