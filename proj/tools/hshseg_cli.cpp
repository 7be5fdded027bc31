// hshseg: segment detections against a region hierarchy, evaluate masks,
// generate synthetic scenes and inspect LSH bucket statistics.

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hshseg/eval.hpp"
#include "hshseg/hsh.hpp"
#include "hshseg/io.hpp"
#include "hshseg/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hshseg;

namespace {

/// Exit code for malformed or inconsistent inputs.
constexpr int kExitInput = 1;
/// Exit code when no hierarchy region is eligible for indexing.
constexpr int kExitEmptyHierarchy = 2;

struct RunConfig {
  CodeConfig code;
  HashParams hash;
  PruneConfig prune;
  double score_threshold = 0.5;
  bool fallback = true;
  bool require_overlap = false;
  int jobs = 1;

  std::string image;
  std::string ucm;
  std::string hierarchy;
  std::string image_id;
  std::string batch;
  std::string detections;
  std::string out;

  [[nodiscard]] SegmentParams segment_params() const {
    return {code, hash, prune, fallback, require_overlap};
  }

  void validate() const {
    code.validate();
    prune.validate();
    if (hash.bits < 1 || hash.bits > 64) throw InvalidArgument("--bits must be in [1, 64]");
    if (hash.tables < 1) throw InvalidArgument("--tables must be >= 1");
    if (hash.min_area < 1) throw InvalidArgument("--min-area must be >= 1");
    if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
      throw InvalidArgument("--score-threshold must lie in [0, 1]");
    }
    if (jobs < 1) throw InvalidArgument("--jobs must be >= 1");
  }
};

void add_code_options(CLI::App& app, RunConfig& cfg) {
  app.add_option("--grid", cfg.code.grid, "Descriptor cells per side")->capture_default_str();
  app.add_option("--channels", cfg.code.channels, "1 (luma) or 3 (RGB)")->capture_default_str();
  app.add_flag("--masked,!--no-masked", cfg.code.masked, "Zero pixels outside the region in region codes");
}

void add_hash_options(CLI::App& app, RunConfig& cfg) {
  app.add_option("--bits", cfg.hash.bits, "Stumps per hash key (k)")->capture_default_str();
  app.add_option("--tables", cfg.hash.tables, "Hash tables (l)")->capture_default_str();
  app.add_option("--seed", cfg.hash.seed, "Seed of the hash family (required)");
  app.add_option("--min-area", cfg.hash.min_area, "Smallest indexed region, in pixels")->capture_default_str();
}

void add_hierarchy_options(CLI::App& app, RunConfig& cfg) {
  app.add_option("--image", cfg.image, "Image (PNG, PPM or PGM)");
  auto* ucm = app.add_option("--ucm", cfg.ucm, "UCM grid as 16-bit PGM");
  auto* merges = app.add_option("--hierarchy", cfg.hierarchy, "Merge-list hierarchy manifest (JSON)");
  ucm->excludes(merges);
}

struct SceneInput {
  std::string image_id;
  fs::path image;
  fs::path ucm;
  fs::path hierarchy;
};

RegionTree load_tree(const SceneInput& s) {
  if (!s.hierarchy.empty()) return io::read_hierarchy(s.hierarchy);
  if (!s.ucm.empty()) return tree_from_ucm(io::read_ucm(s.ucm));
  throw InvalidArgument("image '" + s.image_id + "' needs --ucm or --hierarchy");
}

std::vector<SceneInput> scene_inputs(const RunConfig& cfg) {
  if (!cfg.batch.empty()) {
    if (!cfg.image.empty()) throw InvalidArgument("--batch and --image are exclusive");
    const fs::path batch(cfg.batch);
    json j;
    try {
      j = json::parse(io::read_file(batch));
    } catch (const json::exception& e) {
      throw ParseError(cfg.batch + ": " + e.what());
    }
    const auto resolve = [&](const json& e, const char* key) -> fs::path {
      if (!e.contains(key)) return {};
      const fs::path p(e.at(key).get<std::string>());
      return p.is_absolute() ? p : batch.parent_path() / p;
    };
    std::vector<SceneInput> out;
    try {
      for (const json& e : j.at("scenes")) {
        out.push_back({e.at("image_id").get<std::string>(), resolve(e, "image"), resolve(e, "ucm"),
                       resolve(e, "hierarchy")});
      }
    } catch (const json::exception& e) {
      throw ParseError(cfg.batch + ": " + e.what());
    }
    return out;
  }
  if (cfg.image.empty()) throw InvalidArgument("segment needs --image or --batch");
  const std::string id = cfg.image_id.empty() ? fs::path(cfg.image).stem().string() : cfg.image_id;
  return {{id, cfg.image, cfg.ucm, cfg.hierarchy}};
}

int cmd_segment(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.out.empty()) throw InvalidArgument("segment needs --out");
  if (cfg.detections.empty()) throw InvalidArgument("segment needs --detections");
  const auto scenes = scene_inputs(cfg);

  std::map<std::string, std::vector<Detection>> dets_by_image;
  for (Detection& d : io::read_detections(cfg.detections, cfg.score_threshold)) {
    dets_by_image[d.image_id].push_back(std::move(d));
  }
  for (const auto& [id, dets] : dets_by_image) {
    if (std::none_of(scenes.begin(), scenes.end(), [&](const SceneInput& s) { return s.image_id == id; })) {
      throw InvalidArgument("detections reference unknown image '" + id + "'");
    }
  }

  const fs::path out_dir(cfg.out);
  fs::create_directories(out_dir);
  const SegmentParams params = cfg.segment_params();

  std::vector<std::vector<io::ManifestEntry>> results(scenes.size());
  std::vector<std::exception_ptr> errors(scenes.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < scenes.size(); i = next++) {
      try {
        const SceneInput& s = scenes[i];
        const auto it = dets_by_image.find(s.image_id);
        if (it == dets_by_image.end()) continue;
        const RgbImage image = io::read_image(s.image);
        const RegionTree tree = load_tree(s);
        for (const Detection& d : it->second) {
          if (!d.box.inside(image.width(), image.height())) {
            throw BoxOutOfBounds("detection box of image '" + s.image_id + "' lies outside the image");
          }
        }
        const auto masks = segment_image(image, tree, it->second, params);
        for (std::size_t k = 0; k < masks.size(); ++k) {
          const InstanceMask& m = masks[k];
          const std::string name = s.image_id + "_" + std::to_string(k) + ".pgm";
          io::atomic_write(out_dir / name, io::encode_mask(m.mask));
          results[i].push_back({m.image_id, m.class_label, m.score, m.node_id, m.bbox, name});
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(cfg.jobs, std::max<std::size_t>(1, scenes.size())));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<io::ManifestEntry> entries;
  for (auto& r : results) entries.insert(entries.end(), r.begin(), r.end());
  io::atomic_write(out_dir / "manifest.json", io::encode_manifest(entries));
  std::cout << "wrote " << entries.size() << " instance masks to " << out_dir.string() << "\n";
  return 0;
}

struct EvalOptions {
  std::string predictions;
  std::string gt;
  std::string precomputed;
  std::string out;
  bool class_aware = true;
  double overlap = 0.5;
};

/// One-decimal percentage. Binary noise below 1e-9 is dropped first so that
/// values such as 43.0499999... round half up like their decimal form.
std::string percent(double v) {
  const double snapped = std::round(100.0 * v * 1e9) / 1e9;
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << std::floor(snapped * 10.0 + 0.5) / 10.0;
  return s.str();
}

/// Per-class columns plus Global, one row per metric.
std::string report_table(const EvalReport& r) {
  std::vector<std::string> header{""};
  std::vector<std::string> inst{"Instance Level"};
  std::vector<std::string> cls{"Class Level"};
  for (const auto& [name, v] : r.per_class_class) {
    header.push_back(name);
    const auto it = r.per_class_instance.find(name);
    inst.push_back(it == r.per_class_instance.end() ? "-" : percent(it->second));
    cls.push_back(percent(v));
  }
  header.emplace_back("Global");
  inst.push_back(percent(r.global_instance));
  cls.push_back(percent(r.global_class));

  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto* row : {&header, &inst, &cls}) {
    for (std::size_t i = 0; i < row->size(); ++i) widths[i] = std::max(widths[i], (*row)[i].size());
  }
  std::ostringstream s;
  for (const auto* row : {&header, &inst, &cls}) {
    for (std::size_t i = 0; i < row->size(); ++i) {
      if (i == 0) {
        s << std::left << std::setw(static_cast<int>(widths[i])) << (*row)[i];
      } else {
        s << "  " << std::right << std::setw(static_cast<int>(widths[i])) << (*row)[i];
      }
    }
    s << "\n";
  }
  std::ostringstream thr;
  thr << r.overlap_threshold;
  s << "Recall@" << thr.str() << ": " << percent(r.recall_at_half) << "\n";
  return s.str();
}

json report_json(const EvalReport& r) {
  return {{"per_class_instance", r.per_class_instance},
          {"per_class_class", r.per_class_class},
          {"instance_counts", r.instance_counts},
          {"global_instance", r.global_instance},
          {"global_class", r.global_class},
          {"recall", r.recall_at_half},
          {"overlap_threshold", r.overlap_threshold}};
}

/// Report from precomputed per-class values:
/// {"scale": "percent"|"fraction", "per_class_class": {...},
///  "per_class_instance": {...}, "instance_counts": {...}, "recall": r}.
EvalReport precomputed_report(const fs::path& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  EvalReport r;
  try {
    const double scale = j.value("scale", std::string("fraction")) == "percent" ? 0.01 : 1.0;
    for (const auto& [k, v] : j.at("per_class_class").items()) r.per_class_class[k] = scale * v.get<double>();
    const json& inst = j.contains("per_class_instance") ? j.at("per_class_instance") : j.at("per_class_class");
    for (const auto& [k, v] : inst.items()) r.per_class_instance[k] = scale * v.get<double>();
    if (j.contains("instance_counts")) {
      for (const auto& [k, v] : j.at("instance_counts").items()) r.instance_counts[k] = v.get<std::size_t>();
    }
    r.recall_at_half = scale * j.value("recall", 0.0);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  r.global_class = class_mean(r.per_class_class);
  r.global_instance = instance_weighted_mean(r.per_class_instance, r.instance_counts);
  return r;
}

int cmd_eval(const EvalOptions& opt) {
  EvalReport report;
  if (!opt.precomputed.empty()) {
    report = precomputed_report(opt.precomputed);
  } else {
    if (opt.predictions.empty() || opt.gt.empty()) {
      throw InvalidArgument("eval needs --predictions and --gt, or --precomputed");
    }
    const auto gts = io::read_ground_truth(opt.gt);
    const auto preds = io::read_predictions(opt.predictions);
    for (const InstanceMask& p : preds) {
      if (std::none_of(gts.begin(), gts.end(), [&](const auto& g) { return g.image_id == p.image_id; })) {
        throw MixedImages("prediction image '" + p.image_id + "' has no ground truth");
      }
    }
    report = evaluate(preds, gts, opt.class_aware, opt.overlap);
  }
  const std::string table = report_table(report);
  if (opt.out.empty()) {
    std::cout << table;
  } else {
    io::atomic_write(opt.out + ".json", report_json(report).dump(1) + "\n");
    io::atomic_write(opt.out + ".txt", table);
    std::cout << table;
  }
  return 0;
}

struct SynthOptions {
  SynthConfig scene;
  int count = 1;
  std::string out;
};

int cmd_synth(const SynthOptions& opt) {
  if (opt.out.empty()) throw InvalidArgument("synth needs --out");
  if (opt.count < 1) throw InvalidArgument("--count must be >= 1");
  const fs::path dir(opt.out);
  fs::create_directories(dir);
  json scenes = json::array();
  json gt_images = json::array();
  std::string detections;
  for (int i = 0; i < opt.count; ++i) {
    SynthConfig cfg = opt.scene;
    cfg.seed = substream_seed(opt.scene.seed, static_cast<std::uint64_t>(i));
    std::ostringstream id;
    id << "scene_" << std::setw(4) << std::setfill('0') << i;
    const SyntheticScene scene = make_scene(cfg, id.str());
    const SceneFiles files = write_scene(scene, dir);
    scenes.push_back({{"image_id", scene.image_id},
                      {"image", files.image},
                      {"hierarchy", files.hierarchy},
                      {"ucm", files.ucm}});
    json classes = json::object();
    for (std::size_t k = 0; k < scene.gt_classes.size(); ++k) classes[std::to_string(k + 1)] = scene.gt_classes[k];
    gt_images.push_back({{"image_id", scene.image_id}, {"labels", files.gt_labels}, {"classes", classes}});
    for (const Detection& d : scene.detections) detections += io::encode_detection(d) + "\n";
  }
  io::atomic_write(dir / "scenes.json", json{{"scenes", scenes}}.dump(1) + "\n");
  io::atomic_write(dir / "gt.json", json{{"images", gt_images}}.dump(1) + "\n");
  io::atomic_write(dir / "detections.jsonl", detections);
  std::cout << "wrote " << opt.count << " synthetic scenes to " << dir.string() << "\n";
  return 0;
}

struct StatsOptions {
  RunConfig run;
  std::string save_index;
  bool as_json = false;
};

int cmd_index_stats(const StatsOptions& opt) {
  const RunConfig& cfg = opt.run;
  cfg.validate();
  if (cfg.image.empty()) throw InvalidArgument("index-stats needs --image");
  const SceneInput scene{cfg.image_id, cfg.image, cfg.ucm, cfg.hierarchy};
  const RgbImage image = io::read_image(scene.image);
  const RegionTree tree = load_tree(scene);
  const HshMap hsh = build_hsh(image, tree, cfg.code, cfg.hash);
  const BucketStats stats = hsh.index().bucket_stats();
  if (!opt.save_index.empty()) {
    std::ostringstream bytes;
    hsh.index().save(bytes);
    io::atomic_write(opt.save_index, bytes.str());
  }
  if (opt.as_json) {
    json occupancy = json::object();
    for (const auto& [size, n] : stats.occupancy) occupancy[std::to_string(size)] = n;
    const json j = {{"regions", hsh.size()},       {"tree_nodes", tree.size()},
                    {"bits", cfg.hash.bits},       {"tables", cfg.hash.tables},
                    {"dim", hsh.index().dim()},    {"buckets_per_table", stats.buckets_per_table},
                    {"occupancy", occupancy},      {"largest_bucket", stats.largest_bucket},
                    {"mean_bucket", stats.mean_bucket}};
    std::cout << j.dump(1) << "\n";
    return 0;
  }
  std::cout << "regions indexed: " << hsh.size() << " of " << tree.size() << " tree nodes\n"
            << "k = " << cfg.hash.bits << ", l = " << cfg.hash.tables << ", dim = " << hsh.index().dim()
            << "\n"
            << "largest bucket: " << stats.largest_bucket << ", mean bucket: " << std::fixed
            << std::setprecision(3) << stats.mean_bucket << "\n"
            << "bucket size  buckets\n";
  for (const auto& [size, n] : stats.occupancy) {
    std::cout << std::setw(11) << size << "  " << std::setw(7) << n << "\n";
  }
  return 0;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  s = s.substr(first, last - first + 1);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

/// Fills options not given on the command line from a flat key=value file.
/// Keys are long option names without the leading dashes.
void apply_config(CLI::App& app, const std::string& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  for (int line_no = 1; std::getline(in, line); ++line_no) {
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    const std::string value = trim(line.substr(eq + 1));
    CLI::Option* opt = app.get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") {
      throw ParseError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (opt->count() > 0) continue;
    opt->add_result(value);
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void require(CLI::App& app, const char* name) {
  if (app.get_option(name)->count() == 0) {
    throw InvalidArgument(std::string(name) + " is required");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instance segmentation by hashing hierarchy regions against detection boxes"};
  app.require_subcommand(1);

  std::string config_path;

  RunConfig seg;
  auto* segment = app.add_subcommand("segment", "Resolve detections to hierarchy regions and write masks");
  segment->add_option("--config", config_path, "key=value configuration file; flags override it");
  add_hierarchy_options(*segment, seg);
  segment->add_option("--image-id", seg.image_id, "Image id (defaults to the image file stem)");
  segment->add_option("--batch", seg.batch, "JSON list of scenes {image_id, image, hierarchy|ucm}");
  segment->add_option("--detections", seg.detections, "Detections as JSON Lines");
  segment->add_option("--out", seg.out, "Output directory for masks and manifest.json");
  add_code_options(*segment, seg);
  add_hash_options(*segment, seg);
  segment->add_option("--score-threshold", seg.score_threshold, "Drop detections scoring below this")
      ->capture_default_str();
  segment->add_option("--iou-threshold", seg.prune.iou_threshold, "Box IoU that triggers pruning")
      ->capture_default_str();
  segment->add_option("--connectivity", seg.prune.connectivity, "4 or 8")->capture_default_str();
  segment->add_flag("--fallback,!--no-fallback", seg.fallback, "Exhaustive search when no bucket matches");
  segment->add_flag("--require-overlap,!--no-require-overlap", seg.require_overlap,
                    "Skip matches that do not touch the detection box");
  segment->add_option("--jobs", seg.jobs, "Images processed concurrently")->capture_default_str();

  EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "Jaccard and recall report for a prediction manifest");
  eval->add_option("--config", config_path, "key=value configuration file; flags override it");
  eval->add_option("--predictions", ev.predictions, "manifest.json written by segment");
  eval->add_option("--gt", ev.gt, "Ground-truth manifest");
  eval->add_option("--precomputed", ev.precomputed, "Aggregate precomputed per-class values instead");
  eval->add_option("--out", ev.out, "Report base path; writes <out>.json and <out>.txt");
  eval->add_flag("--class-aware,!--class-agnostic", ev.class_aware, "Match predictions within the class only");
  eval->add_option("--overlap", ev.overlap, "Overlap threshold for recall")->capture_default_str();

  SynthOptions sy;
  auto* synth = app.add_subcommand("synth", "Write deterministic synthetic scenes");
  synth->add_option("--config", config_path, "key=value configuration file; flags override it");
  synth->add_option("--seed", sy.scene.seed, "Generator seed (required)");
  synth->add_option("--out", sy.out, "Output directory");
  synth->add_option("--count", sy.count, "Number of scenes")->capture_default_str();
  synth->add_option("--width", sy.scene.width)->capture_default_str();
  synth->add_option("--height", sy.scene.height)->capture_default_str();
  synth->add_option("--min-shapes", sy.scene.min_shapes)->capture_default_str();
  synth->add_option("--max-shapes", sy.scene.max_shapes)->capture_default_str();
  synth->add_option("--jitter", sy.scene.jitter, "Detection box jitter radius in pixels")->capture_default_str();
  synth->add_option("--strips", sy.scene.background_strips, "Background leaves")->capture_default_str();

  StatsOptions st;
  auto* stats = app.add_subcommand("index-stats", "Bucket occupancy of the region index of one image");
  stats->add_option("--config", config_path, "key=value configuration file; flags override it");
  add_hierarchy_options(*stats, st.run);
  add_code_options(*stats, st.run);
  add_hash_options(*stats, st.run);
  stats->add_option("--save-index", st.save_index, "Write the index archive here");
  stats->add_flag("--json", st.as_json, "Print JSON instead of a table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    for (CLI::App* sub : app.get_subcommands()) {
      if (!config_path.empty()) apply_config(*sub, config_path);
    }
    if (*segment) {
      require(*segment, "--seed");
      return cmd_segment(seg);
    }
    if (*eval) return cmd_eval(ev);
    if (*synth) {
      require(*synth, "--seed");
      return cmd_synth(sy);
    }
    if (*stats) {
      require(*stats, "--seed");
      return cmd_index_stats(st);
    }
  } catch (const EmptyHierarchy& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEmptyHierarchy;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
