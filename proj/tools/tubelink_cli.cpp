// tubelink command-line front end: simulate, link, eval, bench, report.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tubelink/io/serialization.hpp"
#include "tubelink/tubelink.hpp"

namespace fs = std::filesystem;
using namespace tubelink;

namespace {

constexpr int kExitFlags = 2;
constexpr int kExitInput = 3;

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::Config, "bad threshold '" + item + "' in --deltas");
    }
  }
  if (out.empty()) throw Error(ErrorCode::Config, "--deltas is empty");
  return out;
}

std::optional<ThresholdSweep> parse_sweep(const std::string& text) {
  if (text == "none") return std::nullopt;
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      parts.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::Config, "bad --sweep '" + text + "'");
    }
  }
  if (parts.size() != 3) throw Error(ErrorCode::Config, "--sweep expects start:step:stop or none");
  return ThresholdSweep{parts[0], parts[1], parts[2]};
}

void add_linker_flags(CLI::App* cmd, LinkerConfig& cfg, std::optional<double>& trim) {
  cmd->add_option("--delta", cfg.delta, "frame gap of the micro-tubes")->capture_default_str();
  cmd->add_option("--nms", cfg.nms_threshold, "micro-tube NMS overlap threshold")->capture_default_str();
  cmd->add_option("--topk", cfg.top_k, "candidates kept per class after NMS")->capture_default_str();
  cmd->add_option("--link-iou", cfg.link_iou_min, "minimum IoU to extend a tube")->capture_default_str();
  cmd->add_option("--start-score", cfg.start_score_min, "minimum class score to start a tube")->capture_default_str();
  cmd->add_option("--patience", cfg.patience, "missed steps before a tube terminates")->capture_default_str();
  cmd->add_option("--lambda-iou", cfg.lambda_iou, "IoU weight in the match score")->capture_default_str();
  cmd->add_option("--trim", trim, "trim tube ends whose step scores fall below this value");
}

LinkerConfig finish_linker(LinkerConfig cfg, const std::optional<double>& trim) {
  if (trim) {
    cfg.trim_enabled = true;
    cfg.trim_threshold = *trim;
  }
  cfg.validate();
  return cfg;
}

// The class count comes from the annotations when given, else from the score width.
struct LinkInputs {
  DetectionStream stream;
  ClassVocabulary vocabulary;
  std::vector<VideoMeta> videos;
};

LinkInputs load_link_inputs(const std::string& detections, const std::string& annotations) {
  LinkInputs in;
  in.stream = io::read_detections_file(detections);
  if (!annotations.empty()) {
    io::Annotations ann = io::read_annotations_file(annotations);
    in.vocabulary = ann.vocabulary;
    in.videos = std::move(ann.videos);
    return in;
  }
  for (const auto& vs : in.stream)
    if (!vs.groups.empty()) {
      const auto width = vs.groups.front().microtubes.front().scores.size();
      in.vocabulary = ClassVocabulary::numbered(static_cast<int>(width) - 1);
      return in;
    }
  throw Error(ErrorCode::Schema, "empty detection stream; pass --annotations to define the classes");
}

template <class W>
void write_file(const std::string& path, W&& writer) {
  auto out = io::detail::open_out(path);
  writer(out);
  if (!out) throw Error(ErrorCode::Config, "failed writing '" + path + "'");
}

int run_simulate(const std::string& config, std::uint64_t seed, int delta, const std::string& out_dir) {
  io::SimulationConfig cfg;
  if (!config.empty()) {
    std::ifstream in(config);
    if (!in) throw Error(ErrorCode::Config, "cannot open config '" + config + "'");
    cfg = io::read_simulation_config(in);
  }
  const Scenario s = generate_scenario(cfg.scenario, seed);
  const DetectionStream stream = emit_detections(s.ground_truth, s.videos, cfg.scenario.num_classes, delta, cfg.noise, seed);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::Config, "cannot create '" + out_dir + "'");
  write_file((fs::path(out_dir) / "annotations.json").string(), [&](std::ostream& o) {
    io::write_annotations(o, {s.vocabulary, s.videos, s.ground_truth});
  });
  write_file((fs::path(out_dir) / "detections.jsonl").string(), [&](std::ostream& o) { io::write_detections(o, stream); });
  std::size_t n = 0;
  for (const auto& vs : stream) n += vs.microtube_count();
  std::printf("simulated %zu videos, %zu instances, %zu micro-tubes (delta %d) into %s\n", s.videos.size(),
              s.ground_truth.size(), n, delta, out_dir.c_str());
  return 0;
}

int run_link(const std::string& detections, const std::string& annotations, const std::string& out_path,
             const std::string& events_path, const LinkerConfig& cfg, int jobs) {
  const LinkInputs in = load_link_inputs(detections, annotations);
  const LinkedStream linked = link_stream(in.stream, in.videos, in.vocabulary.size(), cfg, jobs);
  write_file(out_path, [&](std::ostream& o) { io::write_tubes(o, {in.vocabulary, linked.tubes}); });
  if (!events_path.empty()) write_file(events_path, [&](std::ostream& o) { io::write_events(o, linked.events); });
  std::printf("linked %zu tubes from %zu pairs, %zu candidates\n", linked.tubes.size(), linked.timing.pairs,
              linked.timing.microtubes);
  return 0;
}

int run_eval(const std::string& tubes_path, const std::string& annotations, const std::string& deltas,
             const std::string& sweep, const std::string& frame_dets, const std::string& out_path,
             const std::string& table_path) {
  EvalConfig cfg;
  cfg.deltas = parse_list(deltas);
  cfg.sweep = parse_sweep(sweep);
  cfg.validate();
  auto tin = io::detail::open_in(tubes_path);
  const io::TubeSet tubes = io::read_tubes(tin);
  const io::Annotations ann = io::read_annotations_file(annotations);
  if (!(tubes.vocabulary == ann.vocabulary))
    throw Error(ErrorCode::Vocabulary, "tube classes differ from annotation classes");

  EvalReport r = video_map(tubes.tubes, ann.ground_truth, ann.vocabulary, cfg);
  r.videos = ann.videos.size();
  const auto gt_frames = slice_ground_truth(ann.ground_truth);
  if (!frame_dets.empty()) {
    auto fin = io::detail::open_in(frame_dets);
    r.frame_map = frame_map(io::read_frame_detections(fin), gt_frames, ann.vocabulary, cfg.frame_map_delta);
    r.frame_map_source = FrameMapSource::FrameDetections;
  } else {
    r.frame_map = frame_map(slice_tubes(tubes.tubes), gt_frames, ann.vocabulary, cfg.frame_map_delta);
    r.frame_map_source = FrameMapSource::TubeSlices;
  }
  r.accuracy = classification_accuracy(tubes.tubes, ann.videos);

  const io::PerClassTable table = io::make_table(r);
  if (!out_path.empty()) write_file(out_path, [&](std::ostream& o) { io::write_report(o, r); });
  if (!table_path.empty()) write_file(table_path, [&](std::ostream& o) { io::write_table_csv(o, table); });
  std::cout << io::render_table(table);
  if (r.frame_map) std::printf("frame-mAP@%g: %.2f (%s)\n", cfg.frame_map_delta, io::percent(*r.frame_map),
                               std::string(to_string(r.frame_map_source)).c_str());
  if (r.accuracy) std::printf("accuracy: %.2f\n", io::percent(*r.accuracy));
  return 0;
}

int run_bench(const std::string& detections, const std::string& annotations, const LinkerConfig& cfg, int repeat,
              const std::string& out_path) {
  const LinkInputs in = load_link_inputs(detections, annotations);
  const BenchResult b = bench_link(in.stream, in.videos, in.vocabulary.size(), cfg, repeat);
  io::Json runs = io::Json::array();
  for (const auto& t : b.runs) runs.push_back(t.wall_seconds);
  const TimingStats& m = b.median;
  const io::Json doc{{"format_version", io::kFormatVersion},
                     {"kind", "bench"},
                     {"repeat", repeat},
                     {"delta", m.delta},
                     {"pairs", m.pairs},
                     {"microtubes", m.microtubes},
                     {"wall_seconds", runs},
                     {"median_wall_seconds", m.wall_seconds},
                     {"pairs_per_second", m.pairs_per_second()},
                     {"associations_per_second", m.associations_per_second()},
                     {"frames_per_second", m.frames_per_second()}};
  if (!out_path.empty()) write_file(out_path, [&](std::ostream& o) { o << io::dump(doc, 2) << '\n'; });
  std::printf("%d runs, median %.6f s: %.0f pairs/s, %.0f associations/s, %.0f frames/s\n", repeat, m.wall_seconds,
              m.pairs_per_second(), m.associations_per_second(), m.frames_per_second());
  return 0;
}

int run_report(const std::string& report_path, const std::string& csv_path) {
  auto in = io::detail::open_in(report_path);
  const EvalReport r = io::read_report(in);
  const io::PerClassTable table = io::make_table(r);
  if (!csv_path.empty()) write_file(csv_path, [&](std::ostream& o) { io::write_table_csv(o, table); });
  std::cout << io::render_table(table);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online action-tube linking and evaluation"};
  app.require_subcommand(1);

  std::string config, out_dir = ".";
  std::uint64_t seed = 0;
  int sim_delta = 1;
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic scenario and its micro-tube stream");
  simulate->add_option("--config", config, "simulation config (JSON)");
  simulate->add_option("--seed", seed, "master seed")->capture_default_str();
  simulate->add_option("--delta", sim_delta, "micro-tube frame gap")->capture_default_str();
  simulate->add_option("--out-dir", out_dir, "output directory")->capture_default_str();

  LinkerConfig link_cfg;
  std::optional<double> link_trim;
  std::string detections, annotations, tubes_out, events_out;
  int jobs = 1;
  auto* link = app.add_subcommand("link", "build action tubes from a micro-tube stream");
  link->add_option("--detections", detections, "micro-tube stream (JSONL)")->required();
  link->add_option("--annotations", annotations, "annotations supplying classes and video lengths");
  link->add_option("--out", tubes_out, "tubes file")->required();
  link->add_option("--events", events_out, "event log (JSONL)");
  link->add_option("--jobs", jobs, "videos linked in parallel")->capture_default_str();
  add_linker_flags(link, link_cfg, link_trim);

  std::string eval_tubes, eval_ann, deltas = "0.2,0.5,0.75", sweep = "0.5:0.05:0.95", frame_dets, report_out, table_out;
  auto* eval = app.add_subcommand("eval", "score tubes against ground truth");
  eval->add_option("--tubes", eval_tubes, "tubes file")->required();
  eval->add_option("--annotations", eval_ann, "annotations file")->required();
  eval->add_option("--deltas", deltas, "comma-separated ST-IoU thresholds")->capture_default_str();
  eval->add_option("--sweep", sweep, "start:step:stop threshold sweep, or none")->capture_default_str();
  eval->add_option("--frame-detections", frame_dets, "frame-level detections for frame-mAP (JSONL)");
  eval->add_option("--out", report_out, "report file");
  eval->add_option("--table", table_out, "per-class table (CSV)");

  LinkerConfig bench_cfg;
  std::optional<double> bench_trim;
  std::string bench_dets, bench_ann, bench_out;
  int repeat = 5;
  auto* bench = app.add_subcommand("bench", "time linking over repeated runs");
  bench->add_option("--detections", bench_dets, "micro-tube stream (JSONL)")->required();
  bench->add_option("--annotations", bench_ann, "annotations supplying classes and video lengths");
  bench->add_option("--repeat", repeat, "number of runs")->capture_default_str();
  bench->add_option("--out", bench_out, "timing file");
  add_linker_flags(bench, bench_cfg, bench_trim);

  std::string report_in, csv_out;
  auto* report = app.add_subcommand("report", "render a report's per-class table");
  report->add_option("--report", report_in, "report file")->required();
  report->add_option("--csv", csv_out, "per-class table (CSV)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitFlags;
  }

  try {
    if (*simulate) return run_simulate(config, seed, sim_delta, out_dir);
    if (*link) return run_link(detections, annotations, tubes_out, events_out, finish_linker(link_cfg, link_trim), jobs);
    if (*eval) return run_eval(eval_tubes, eval_ann, deltas, sweep, frame_dets, report_out, table_out);
    if (*bench) return run_bench(bench_dets, bench_ann, finish_linker(bench_cfg, bench_trim), repeat, bench_out);
    if (*report) return run_report(report_in, csv_out);
  } catch (const Error& e) {
    std::fprintf(stderr, "tubelink: %s\n", e.what());
    return e.code() == ErrorCode::Config ? kExitFlags : kExitInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "tubelink: %s\n", e.what());
    return kExitInput;
  }
  return kExitFlags;
}
