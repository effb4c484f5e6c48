#pragma once

// Dataset manifests, per-scene pipeline runs, batch evaluation and synthetic
// benchmark generation.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "digcrowd/fusion.hpp"
#include "digcrowd/partition.hpp"
#include "digcrowd/scene.hpp"
#include "digcrowd/spatial_filter.hpp"
#include "digcrowd/synth.hpp"

namespace digcrowd {

inline constexpr const char* kToolVersion = "digcrowd 0.1.0";

struct ManifestEntry {
  std::string scene_id;
  std::filesystem::path config;
  std::filesystem::path depth;
  std::optional<std::filesystem::path> annotations;
  PredictionRefs predictions;
};

struct Manifest {
  std::string dataset_id;
  std::vector<ManifestEntry> scenes;
};

/// Paths are resolved against the manifest's directory. Throws ConfigError on
/// duplicate scene ids or when a config or depth file does not exist. Missing
/// prediction files are left for run_scene to report.
Manifest read_manifest(const std::filesystem::path& path);
/// Paths are written relative to the manifest's directory when possible.
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// Command-line values that take precedence over per-scene config files.
struct ConfigOverrides {
  std::optional<double> beta;
  std::optional<int> knn_k;
  std::optional<double> score_threshold;
  std::optional<double> nms_iou;

  void apply(SceneConfig& cfg) const;
  nlohmann::json to_json() const;
};

struct RunOptions {
  ConfigOverrides overrides;
  int workers = 1;
  bool render_debug = false;
  std::optional<std::filesystem::path> debug_dir;
  bool require_ground_truth = true;
};

struct SceneOutcome {
  std::string scene_id;
  bool succeeded = false;
  std::string failure;                     ///< empty on success
  std::optional<SceneEstimate> estimate;   ///< may be partial on failure
  std::optional<double> ground_truth;
  std::size_t detections_in = 0;
  std::size_t detections_deleted = 0;
  std::size_t detections_out_of_domain = 0;
  bool manual_polyline = false;
  std::optional<Polyline> polyline;
  std::optional<double> threshold_used;
  std::vector<std::string> warnings;
};

struct RunReport {
  std::string dataset_id;
  std::vector<SceneOutcome> scenes;              ///< ordered by scene_id
  std::optional<EvaluationRecord> evaluation;    ///< over succeeded scenes
  std::string tool_version = kToolVersion;
  nlohmann::json config_echo;

  std::size_t failed_count() const;
};

/// Runs partition, detection decoding or loading, the spatial constraint, far
/// count integration and fusion. Never throws for scene-level problems; they
/// are recorded in the outcome.
SceneOutcome run_scene(const ManifestEntry& entry, const RunOptions& options = {});

/// Throws std::invalid_argument for an empty manifest.
RunReport run_dataset(const Manifest& manifest, const RunOptions& options = {});

nlohmann::json report_to_json(const RunReport& report);
/// Writes <out_dir>/report.csv and <out_dir>/report.json.
void write_reports(const RunReport& report, const std::filesystem::path& out_dir);

struct BenchSceneSpec {
  SynthSpec synth;
  NoiseSpec noise;
};

struct BenchSpec {
  std::string dataset_id = "synthetic";
  std::vector<BenchSceneSpec> scenes;
  /// Applied to every generated scene config (knn_k, beta, ...).
  nlohmann::json config_overrides = nlohmann::json::object();
};

/// Accepts either {"scenes": [...]} or {"count": n, "seed": s, "template": {...}}
/// where template fields may give n_people as [lo, hi]. Shared "noise" and
/// "config" blocks apply to every scene unless a scene overrides them.
BenchSpec bench_spec_from_json(const nlohmann::json& j);
BenchSpec read_bench_spec(const std::filesystem::path& path);

struct BenchResult {
  std::filesystem::path manifest_path;
  Manifest manifest;
  std::vector<std::pair<std::string, std::string>> failures;  ///< scene_id, reason
};

/// Writes one directory per scene (config, depth, annotations, detections,
/// density) and a manifest.json listing the scenes that generated.
BenchResult bench_generate(const BenchSpec& spec, const std::filesystem::path& out_dir);

}  // namespace digcrowd
