// digcrowd: partition scenes, count people, evaluate against ground truth,
// generate synthetic benchmarks and render debug rasters.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "digcrowd/io.hpp"
#include "digcrowd/partition.hpp"
#include "digcrowd/pipeline.hpp"
#include "digcrowd/simd/kernels.hpp"

namespace fs = std::filesystem;
using namespace digcrowd;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("digcrowd");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* lvl = std::getenv("DIGCROWD_LOG")) {
    spdlog::set_level(spdlog::level::from_str(lvl));
  }
}

void print_summary(const RunReport& report) {
  std::cout << "scenes: " << report.scenes.size() << ", failed: " << report.failed_count() << '\n';
  for (const auto& s : report.scenes) {
    if (!s.succeeded) std::cout << "  failed " << s.scene_id << ": " << s.failure << '\n';
  }
  if (report.evaluation) {
    std::cout << "N=" << report.evaluation->n << " MAE=" << report.evaluation->mae
              << " MSE=" << report.evaluation->mse << '\n';
  }
}

int run_partition(const fs::path& manifest_path, const fs::path& out_dir, const ConfigOverrides& ov) {
  const Manifest manifest = read_manifest(manifest_path);
  fs::create_directories(out_dir);
  int failures = 0;
  nlohmann::json all = nlohmann::json::array();
  for (const auto& e : manifest.scenes) {
    try {
      SceneConfig cfg = read_scene_config(e.config);
      ov.apply(cfg);
      const PartitionResult part = partition(read_depth(e.depth), cfg);
      write_pgm8(out_dir / (e.scene_id + ".mask.pgm"), part.mask.shape(), render_mask(part.mask));
      all.push_back({{"scene_id", e.scene_id},
                     {"manual", part.manual},
                     {"polyline", polyline_to_json(part.polyline)},
                     {"threshold_used", part.threshold_used ? nlohmann::json(*part.threshold_used) : nlohmann::json(nullptr)},
                     {"cluster_mean_depths", part.cluster_mean_depths},
                     {"warnings", part.warnings}});
    } catch (const std::exception& ex) {
      ++failures;
      std::cerr << "scene " << e.scene_id << ": " << ex.what() << '\n';
      all.push_back({{"scene_id", e.scene_id}, {"failure", ex.what()}});
    }
  }
  std::ofstream(out_dir / "partition.json") << all.dump(2) << '\n';
  return failures == 0 ? 0 : 1;
}

int run_count(const fs::path& manifest_path, const fs::path& out_dir, RunOptions opts) {
  const Manifest manifest = read_manifest(manifest_path);
  if (opts.render_debug) opts.debug_dir = out_dir / "debug";
  const RunReport report = run_dataset(manifest, opts);
  write_reports(report, out_dir);
  print_summary(report);
  return report.failed_count() == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Depth-aware crowd counting: detection in the near view, density in the far view"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  fs::path manifest_path;
  fs::path out_dir = "out";
  fs::path spec_path;
  int workers = 1;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  bool render_debug = false;
  ConfigOverrides ov;

  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("--beta", ov.beta, "Kernel width factor")->check(CLI::PositiveNumber);
    sub->add_option("--knn-k", ov.knn_k, "Neighbours used for kernel widths")->check(CLI::PositiveNumber);
    sub->add_option("--score-threshold", ov.score_threshold, "Minimum detection score")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--nms-iou", ov.nms_iou, "Suppression overlap")->check(CLI::Range(0.0, 1.0));
  };
  auto add_run_flags = [&](CLI::App* sub, bool with_debug) {
    sub->add_option("--manifest", manifest_path, "Dataset manifest")->required()->check(CLI::ExistingFile);
    sub->add_option("--out-dir", out_dir, "Output directory");
    sub->add_option("--workers", workers, "Scenes processed in parallel")->check(CLI::PositiveNumber);
    if (with_debug) sub->add_flag("--render-debug", render_debug, "Write mask, cluster and density rasters");
    add_overrides(sub);
  };

  app.add_flag("--deterministic", deterministic, "Use scalar kernels only");

  auto* part = app.add_subcommand("partition", "Split each scene into near and far regions");
  part->add_option("--manifest", manifest_path, "Dataset manifest")->required()->check(CLI::ExistingFile);
  part->add_option("--out-dir", out_dir, "Output directory");
  add_overrides(part);

  auto* count = app.add_subcommand("count", "Count people per scene");
  add_run_flags(count, true);
  auto* eval = app.add_subcommand("evaluate", "Count and score against annotations");
  add_run_flags(eval, true);
  auto* render = app.add_subcommand("render", "Write debug rasters for every scene");
  add_run_flags(render, false);

  auto* bench = app.add_subcommand("bench-gen", "Generate a synthetic benchmark");
  bench->add_option("spec", spec_path, "Benchmark spec (JSON)")->required()->check(CLI::ExistingFile);
  bench->add_option("--out-dir", out_dir, "Output directory");
  bench->add_option("--seed", seed, "Replace the spec's base seed");

  for (auto* sub : {part, count, eval, render, bench}) {
    sub->add_flag("--deterministic", deterministic, "Use scalar kernels only");
  }

  CLI11_PARSE(app, argc, argv);

  if (deterministic) simd::select_isa(simd::Isa::Scalar);
  spdlog::debug("kernels: {}", simd::to_string(simd::kernels().isa));

  try {
    if (*part) return run_partition(manifest_path, out_dir, ov);

    if (*bench) {
      std::ifstream in(spec_path);
      nlohmann::json j = nlohmann::json::parse(in);
      if (seed) j["seed"] = *seed;
      const BenchResult r = bench_generate(bench_spec_from_json(j), out_dir);
      std::cout << "wrote " << r.manifest.scenes.size() << " scenes to " << r.manifest_path.string() << '\n';
      for (const auto& [id, why] : r.failures) std::cout << "  failed " << id << ": " << why << '\n';
      return r.failures.empty() ? 0 : 1;
    }

    RunOptions opts;
    opts.overrides = ov;
    opts.workers = workers;
    opts.render_debug = render_debug || *render;
    opts.require_ground_truth = static_cast<bool>(*eval);
    const int rc = run_count(manifest_path, out_dir, opts);
    return rc;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
