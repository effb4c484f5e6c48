#include "digcrowd/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "digcrowd/density.hpp"
#include "digcrowd/detect.hpp"
#include "digcrowd/io.hpp"

namespace digcrowd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::optional<fs::path> optional_path(const json& j, const char* key, const fs::path& base) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return base / it->get<std::string>();
}

json relative_or_null(const std::optional<fs::path>& p, const fs::path& base) {
  if (!p) return nullptr;
  return p->lexically_relative(base).generic_string();
}

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

std::string csv_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

SynthSpec synth_from_json(const json& j, std::mt19937_64* rng) {
  SynthSpec s;
  s.shape.width = j.value("width", s.shape.width);
  s.shape.height = j.value("height", s.shape.height);
  if (auto it = j.find("n_people"); it != j.end()) {
    if (it->is_array()) {
      if (it->size() != 2 || !rng) throw ConfigError("n_people range must be [lo, hi]");
      std::uniform_int_distribution<int> d((*it)[0].get<int>(), (*it)[1].get<int>());
      s.n_people = d(*rng);
    } else {
      s.n_people = it->get<int>();
    }
  }
  if (auto it = j.find("horizon_y"); it != j.end() && !it->is_null()) s.horizon_y = it->get<double>();
  s.near_head_size = j.value("near_head_size", s.near_head_size);
  s.far_head_size = j.value("far_head_size", s.far_head_size);
  s.clustering_intensity = j.value("clustering_intensity", s.clustering_intensity);
  s.seed = j.value("seed", s.seed);
  s.exclusion_margin = j.value("exclusion_margin", s.exclusion_margin);
  s.split_depth = j.value("split_depth", s.split_depth);
  s.depth_wobble = j.value("depth_wobble", s.depth_wobble);
  s.scene_id = j.value("scene_id", s.scene_id);
  return s;
}

NoiseSpec noise_from_json(const json& j) {
  NoiseSpec n;
  n.miss_rate = j.value("miss_rate", n.miss_rate);
  n.false_positive_rate = j.value("false_positive_rate", n.false_positive_rate);
  n.box_jitter = j.value("box_jitter", n.box_jitter);
  n.density_noise_sigma = j.value("density_noise_sigma", n.density_noise_sigma);
  return n;
}

json polyline_echo(const std::optional<Polyline>& p) {
  return p ? polyline_to_json(*p) : json(nullptr);
}

}  // namespace

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  Manifest m;
  try {
    const json j = json::parse(in);
    m.dataset_id = j.value("dataset_id", std::string("dataset"));
    std::set<std::string> seen;
    for (const auto& s : j.at("scenes")) {
      ManifestEntry e;
      e.scene_id = s.at("scene_id").get<std::string>();
      if (!seen.insert(e.scene_id).second) {
        throw ConfigError("manifest: duplicate scene_id '" + e.scene_id + "'");
      }
      e.config = base / s.at("config").get<std::string>();
      e.depth = base / s.at("depth").get<std::string>();
      e.annotations = optional_path(s, "annotations", base);
      e.predictions.tensor = optional_path(s, "tensor", base);
      e.predictions.detections = optional_path(s, "detections", base);
      e.predictions.density = optional_path(s, "density", base);
      for (const auto* p : {&e.config, &e.depth}) {
        if (!fs::exists(*p)) {
          throw ConfigError("manifest: scene '" + e.scene_id + "' references missing file " + p->string());
        }
      }
      m.scenes.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ConfigError("manifest " + path.string() + ": " + e.what());
  }
  return m;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  const fs::path base = path.parent_path();
  json scenes = json::array();
  for (const auto& e : manifest.scenes) {
    scenes.push_back({{"scene_id", e.scene_id},
                      {"config", relative_or_null(e.config, base)},
                      {"depth", relative_or_null(e.depth, base)},
                      {"annotations", relative_or_null(e.annotations, base)},
                      {"tensor", relative_or_null(e.predictions.tensor, base)},
                      {"detections", relative_or_null(e.predictions.detections, base)},
                      {"density", relative_or_null(e.predictions.density, base)}});
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << json{{"dataset_id", manifest.dataset_id}, {"scenes", scenes}}.dump(2) << '\n';
}

void ConfigOverrides::apply(SceneConfig& cfg) const {
  if (beta) cfg.beta = *beta;
  if (knn_k) cfg.knn_k = *knn_k;
  if (score_threshold) cfg.score_threshold = *score_threshold;
  if (nms_iou) cfg.nms_iou = *nms_iou;
  cfg.validate();
}

json ConfigOverrides::to_json() const {
  json j = json::object();
  if (beta) j["beta"] = *beta;
  if (knn_k) j["knn_k"] = *knn_k;
  if (score_threshold) j["score_threshold"] = *score_threshold;
  if (nms_iou) j["nms_iou"] = *nms_iou;
  return j;
}

std::size_t RunReport::failed_count() const {
  return static_cast<std::size_t>(
      std::count_if(scenes.begin(), scenes.end(), [](const auto& s) { return !s.succeeded; }));
}

SceneOutcome run_scene(const ManifestEntry& entry, const RunOptions& options) {
  SceneOutcome out;
  out.scene_id = entry.scene_id;
  auto fail = [&](std::string why) {
    spdlog::warn("scene {}: {}", entry.scene_id, why);
    if (out.failure.empty()) out.failure = std::move(why);
    else out.failure += "; " + why;
  };

  try {
    SceneConfig cfg = read_scene_config(entry.config);
    if (cfg.scene_id != entry.scene_id) {
      out.warnings.push_back("config scene_id '" + cfg.scene_id + "' differs from manifest");
    }
    options.overrides.apply(cfg);
    const DepthMap depth = read_depth(entry.depth);

    const PartitionResult part = partition(depth, cfg);
    out.manual_polyline = part.manual;
    out.polyline = part.polyline;
    out.threshold_used = part.threshold_used;
    out.warnings.insert(out.warnings.end(), part.warnings.begin(), part.warnings.end());

    DetectionSet dets;
    bool have_near = true;
    const auto& pred = entry.predictions;
    if (pred.tensor && fs::exists(*pred.tensor)) {
      const GridPrediction tensor = read_tensor(*pred.tensor);
      auto decoded = decode(tensor, cfg.score_threshold);
      if (decoded.clamped_values > 0) {
        out.warnings.push_back(std::to_string(decoded.clamped_values) +
                               " prediction tensor values outside [0,1] were clamped");
      }
      dets = nms(decoded.detections, cfg.nms_iou);
    } else if (pred.detections && fs::exists(*pred.detections)) {
      dets = read_detection_list(*pred.detections);
      std::erase_if(dets.boxes, [&](const BoundingBox& b) { return b.score < cfg.score_threshold; });
    } else {
      have_near = false;
      fail("near predictions absent");
    }

    const FilterReport filtered = apply_spatial_constraint(dets, part.polyline, cfg.scene_id);
    out.detections_in = dets.boxes.size();
    out.detections_deleted = filtered.deleted.size();
    out.detections_out_of_domain = filtered.out_of_domain.size();
    if (!filtered.out_of_domain.empty()) {
      out.warnings.push_back(std::to_string(filtered.out_of_domain.size()) +
                             " detections outside the polyline domain were kept");
    }

    double far_count = 0.0;
    bool have_far = false;
    if (pred.density && fs::exists(*pred.density)) {
      far_count = std::max(0.0, far_count_from_external(*pred.density, part.mask));
      have_far = true;
    } else {
      fail("far predictions absent");
    }

    if (entry.annotations) {
      if (fs::exists(*entry.annotations)) {
        out.ground_truth = read_annotations(*entry.annotations).count;
      } else {
        fail("annotation file missing");
      }
    } else if (options.require_ground_truth) {
      fail("ground truth absent");
    }

    out.estimate = fuse(filtered.kept, far_count, entry.scene_id, out.ground_truth.value_or(0.0));
    out.succeeded = have_near && have_far && out.failure.empty();

    if (options.render_debug && options.debug_dir) {
      const fs::path dir = *options.debug_dir;
      fs::create_directories(dir);
      write_pgm8(dir / (entry.scene_id + ".mask.pgm"), part.mask.shape(), render_mask(part.mask));
      if (part.clusters) {
        write_pgm8(dir / (entry.scene_id + ".clusters.pgm"), part.clusters->shape,
                   render_labels(part.clusters->assignments, part.clusters->cluster_count()));
      }
      if (have_far) {
        const auto field = read_density(*pred.density);
        write_pgm8(dir / (entry.scene_id + ".density.pgm"), field.shape, render_heatmap(field));
      }
    }
  } catch (const std::exception& e) {
    out.succeeded = false;
    fail(e.what());
  }
  return out;
}

RunReport run_dataset(const Manifest& manifest, const RunOptions& options) {
  if (manifest.scenes.empty()) throw std::invalid_argument("run_dataset: manifest has no scenes");
  RunReport report;
  report.dataset_id = manifest.dataset_id;
  report.scenes.resize(manifest.scenes.size());
  parallel_for(manifest.scenes.size(), options.workers, [&](std::size_t i) {
    report.scenes[i] = run_scene(manifest.scenes[i], options);
  });
  std::sort(report.scenes.begin(), report.scenes.end(),
            [](const auto& a, const auto& b) { return a.scene_id < b.scene_id; });

  std::vector<CountPair> pairs;
  for (const auto& s : report.scenes) {
    if (s.succeeded && s.estimate && s.ground_truth) {
      pairs.push_back({*s.ground_truth, s.estimate->total});
    }
  }
  if (!pairs.empty()) report.evaluation = evaluate(std::move(pairs));

  report.config_echo = {{"overrides", options.overrides.to_json()},
                        {"workers", options.workers},
                        {"render_debug", options.render_debug},
                        {"require_ground_truth", options.require_ground_truth}};
  return report;
}

json report_to_json(const RunReport& report) {
  json scenes = json::array();
  json failed = json::array();
  for (const auto& s : report.scenes) {
    json row{{"scene_id", s.scene_id},
             {"succeeded", s.succeeded},
             {"manual_polyline", s.manual_polyline},
             {"polyline", polyline_echo(s.polyline)},
             {"threshold_used", s.threshold_used ? json(*s.threshold_used) : json(nullptr)},
             {"filter", {{"input", s.detections_in},
                         {"deleted", s.detections_deleted},
                         {"out_of_domain", s.detections_out_of_domain}}},
             {"warnings", s.warnings}};
    if (s.estimate) {
      row["near_count"] = s.estimate->near_count;
      row["far_count"] = s.estimate->far_count;
      row["total"] = s.estimate->total;
    }
    row["ground_truth"] = s.ground_truth ? json(*s.ground_truth) : json(nullptr);
    if (s.estimate && s.ground_truth) row["abs_error"] = std::abs(*s.ground_truth - s.estimate->total);
    if (!s.succeeded) {
      row["failure"] = s.failure;
      failed.push_back({{"scene_id", s.scene_id}, {"reason", s.failure}});
    }
    scenes.push_back(std::move(row));
  }
  json j{{"dataset_id", report.dataset_id},
         {"tool_version", report.tool_version},
         {"config", report.config_echo},
         {"N", report.evaluation ? report.evaluation->n : 0},
         {"mae", report.evaluation ? json(report.evaluation->mae) : json(nullptr)},
         {"mse", report.evaluation ? json(report.evaluation->mse) : json(nullptr)},
         {"mse_form", "MSE (RMSE form: square root of the mean squared error)"},
         {"scene_count", report.scenes.size()},
         {"failed_count", report.failed_count()},
         {"scenes", scenes},
         {"failed", failed}};
  return j;
}

void write_reports(const RunReport& report, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  {
    std::ofstream csv(out_dir / "report.csv", std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + (out_dir / "report.csv").string());
    csv << "scene_id,near_count,far_count,total,ground_truth,abs_error\n";
    for (const auto& s : report.scenes) {
      if (!s.succeeded || !s.estimate) continue;
      csv << s.scene_id << ',' << s.estimate->near_count << ',' << csv_number(s.estimate->far_count)
          << ',' << csv_number(s.estimate->total) << ',';
      if (s.ground_truth) {
        csv << csv_number(*s.ground_truth) << ','
            << csv_number(std::abs(*s.ground_truth - s.estimate->total));
      } else {
        csv << ',';
      }
      csv << '\n';
    }
  }
  std::ofstream js(out_dir / "report.json", std::ios::trunc);
  if (!js) throw std::runtime_error("cannot write " + (out_dir / "report.json").string());
  js << report_to_json(report).dump(2) << '\n';
}

BenchSpec bench_spec_from_json(const json& j) {
  BenchSpec spec;
  try {
    spec.dataset_id = j.value("dataset_id", spec.dataset_id);
    const json shared_noise = j.value("noise", json::object());
    if (auto it = j.find("config"); it != j.end()) spec.config_overrides = *it;

    if (auto it = j.find("scenes"); it != j.end()) {
      for (const auto& s : *it) {
        BenchSceneSpec b;
        b.synth = synth_from_json(s, nullptr);
        b.noise = noise_from_json(s.value("noise", shared_noise));
        spec.scenes.push_back(std::move(b));
      }
    } else {
      const int count = j.at("count").get<int>();
      const auto base_seed = j.value("seed", std::uint64_t{0});
      const json tmpl = j.value("template", json::object());
      for (int i = 0; i < count; ++i) {
        const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
        std::mt19937_64 rng(seed);
        BenchSceneSpec b;
        b.synth = synth_from_json(tmpl, &rng);
        b.synth.seed = seed;
        char id[32];
        std::snprintf(id, sizeof(id), "scene-%05d", i);
        b.synth.scene_id = id;
        b.noise = noise_from_json(shared_noise);
        spec.scenes.push_back(std::move(b));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bench spec: ") + e.what());
  }
  return spec;
}

BenchSpec read_bench_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open bench spec " + path.string());
  try {
    return bench_spec_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

BenchResult bench_generate(const BenchSpec& spec, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw std::runtime_error("cannot create output directory " + out_dir.string());
  }
  {
    const fs::path probe = out_dir / ".write-probe";
    std::ofstream p(probe);
    if (!p) throw std::runtime_error("output directory " + out_dir.string() + " is not writable");
    p.close();
    fs::remove(probe, ec);
  }

  BenchResult result;
  result.manifest.dataset_id = spec.dataset_id;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < spec.scenes.size(); ++i) {
    const auto& sc = spec.scenes[i];
    std::string id = sc.synth.scene_id.empty() ? "synth-" + std::to_string(sc.synth.seed) : sc.synth.scene_id;
    if (!ids.insert(id).second) {
      result.failures.emplace_back(id, "duplicate scene_id");
      continue;
    }
    try {
      SynthSpec synth = sc.synth;
      synth.scene_id = id;
      SyntheticScene scene = generate_scene(synth);
      json cfg_json = scene_config_to_json(scene.record.config);
      cfg_json.merge_patch(spec.config_overrides);
      scene.record.config = scene_config_from_json(cfg_json);

      const PartitionResult part = partition(scene.record.depth, scene.record.config);
      const OraclePredictions pred = oracle_predictions(scene, part, sc.noise);

      const fs::path dir = out_dir / id;
      fs::create_directories(dir);
      ManifestEntry e;
      e.scene_id = id;
      e.config = dir / "config.json";
      e.depth = dir / "depth.digd";
      e.annotations = dir / "annotations.json";
      e.predictions.detections = dir / "detections.txt";
      e.predictions.density = dir / "density.digf";
      write_scene_config(e.config, scene.record.config);
      write_depth(e.depth, scene.record.depth);
      write_annotations(*e.annotations, {scene.record.heads, scene.record.ground_truth_count});
      write_detection_list(*e.predictions.detections, pred.detections);
      write_density(*e.predictions.density, pred.density);
      result.manifest.scenes.push_back(std::move(e));
      spdlog::debug("generated {}: {} people ({} near, {} far)", id, scene.record.heads.size(),
                    pred.near_heads, pred.far_heads);
    } catch (const std::exception& ex) {
      spdlog::warn("scene {}: generation failed: {}", id, ex.what());
      result.failures.emplace_back(id, ex.what());
    }
  }
  result.manifest_path = out_dir / "manifest.json";
  write_manifest(result.manifest_path, result.manifest);
  return result;
}

}  // namespace digcrowd
