#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "digcrowd/io.hpp"
#include "digcrowd/pipeline.hpp"
#include "support.hpp"

using namespace digcrowd;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

BenchSpec small_bench(int scenes, std::uint64_t seed = 100) {
  nlohmann::json j{{"dataset_id", "unit"},
                   {"count", scenes},
                   {"seed", seed},
                   {"template", {{"width", 160}, {"height", 120}, {"n_people", {20, 40}},
                                 {"near_head_size", 16}, {"far_head_size", 4}}}};
  return bench_spec_from_json(j);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Manifest, RoundTripAndRelativePaths) {
  TempDir dir;
  const auto r = bench_generate(small_bench(3), dir.path());
  const auto m = read_manifest(r.manifest_path);
  ASSERT_EQ(m.scenes.size(), 3u);
  EXPECT_EQ(m.dataset_id, "unit");
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(fs::weakly_canonical(m.scenes[i].depth), fs::weakly_canonical(r.manifest.scenes[i].depth));
  }
  const auto text = slurp(r.manifest_path);
  EXPECT_EQ(text.find(dir.path().string()), std::string::npos);
}

TEST(Manifest, DuplicateIdsAndMissingFiles) {
  TempDir dir;
  const auto r = bench_generate(small_bench(2), dir.path());
  auto m = r.manifest;
  m.scenes[1].scene_id = m.scenes[0].scene_id;
  write_manifest(dir / "dup.json", m);
  EXPECT_THROW(read_manifest(dir / "dup.json"), ConfigError);

  m = r.manifest;
  m.scenes[0].depth = dir / "nope.digd";
  write_manifest(dir / "missing.json", m);
  EXPECT_THROW(read_manifest(dir / "missing.json"), ConfigError);
}

TEST(RunScene, OracleSceneMatchesGroundTruth) {
  TempDir dir;
  const auto r = bench_generate(small_bench(4), dir.path());
  for (const auto& e : r.manifest.scenes) {
    const auto out = run_scene(e);
    ASSERT_TRUE(out.succeeded) << out.failure;
    EXPECT_EQ(out.estimate->total, *out.ground_truth);
    EXPECT_TRUE(out.manual_polyline);
    ASSERT_TRUE(out.polyline.has_value());
    EXPECT_EQ(*out.polyline, *read_scene_config(e.config).polyline);
    EXPECT_EQ(out.detections_deleted, 0u);
  }
}

TEST(RunScene, MissingDensityFailsButReportsNearCount) {
  TempDir dir;
  const auto r = bench_generate(small_bench(1), dir.path());
  auto e = r.manifest.scenes[0];
  fs::remove(*e.predictions.density);
  const auto out = run_scene(e);
  EXPECT_FALSE(out.succeeded);
  EXPECT_NE(out.failure.find("far predictions absent"), std::string::npos);
  ASSERT_TRUE(out.estimate.has_value());
  EXPECT_EQ(out.estimate->near_count,
            static_cast<int>(read_detection_list(*e.predictions.detections).boxes.size()));
  EXPECT_EQ(out.estimate->far_count, 0.0);
}

TEST(RunScene, MissingDetectionsFails) {
  TempDir dir;
  const auto r = bench_generate(small_bench(1), dir.path());
  auto e = r.manifest.scenes[0];
  e.predictions.detections.reset();
  const auto out = run_scene(e);
  EXPECT_FALSE(out.succeeded);
  EXPECT_NE(out.failure.find("near predictions absent"), std::string::npos);
}

TEST(RunScene, TensorPredictionsAreDecodedAndFiltered) {
  TempDir dir;
  const GridShape shape{700, 700};
  SceneConfig cfg;
  cfg.scene_id = "tensor";
  cfg.polyline = Polyline::horizontal(300, 0, 700);
  write_scene_config(dir / "c.json", cfg);
  write_depth(dir / "d.digd", DepthMap(shape, std::vector<float>(shape.pixel_count(), 0.5f)));
  // Two near boxes, one far box (deleted by the line), one duplicate suppressed by NMS.
  const std::vector<BoundingBox> boxes{{330, 530, 370, 570, 0.9}, {120, 420, 160, 460, 0.8},
                                       {332, 532, 372, 572, 0.7}, {450, 50, 490, 90, 0.95}};
  write_tensor(dir / "t.digy", encode_tensor(boxes, {7, 2, 1}, shape));
  write_density(dir / "f.digf", DensityField{shape, std::vector<double>(shape.pixel_count(), 0.0)});
  ManifestEntry e{"tensor", dir / "c.json", dir / "d.digd", std::nullopt, {}};
  e.predictions.tensor = dir / "t.digy";
  e.predictions.density = dir / "f.digf";
  RunOptions opt;
  opt.require_ground_truth = false;
  const auto out = run_scene(e, opt);
  ASSERT_TRUE(out.succeeded) << out.failure;
  EXPECT_EQ(out.detections_in, 3u);
  EXPECT_EQ(out.detections_deleted, 1u);
  EXPECT_EQ(out.estimate->near_count, 2);
}

TEST(RunScene, OverridesTakePrecedence) {
  TempDir dir;
  const auto r = bench_generate(small_bench(1), dir.path());
  RunOptions opt;
  opt.overrides.score_threshold = 1.0;
  // Oracle boxes score exactly 1.0 and survive a threshold of 1.
  EXPECT_TRUE(run_scene(r.manifest.scenes[0], opt).succeeded);
  SceneConfig cfg;
  cfg.scene_id = "x";
  ConfigOverrides ov;
  ov.beta = 0.5;
  ov.knn_k = 7;
  ov.apply(cfg);
  EXPECT_EQ(cfg.beta, 0.5);
  EXPECT_EQ(cfg.knn_k, 7);
  ov.beta = -1;
  EXPECT_THROW(ov.apply(cfg), ConfigError);
}

TEST(RunDataset, CompleteOrderedAndParallelSafe) {
  TempDir dir;
  const auto r = bench_generate(small_bench(12), dir.path());
  auto m = r.manifest;
  std::reverse(m.scenes.begin(), m.scenes.end());
  fs::remove(*m.scenes[3].predictions.density);
  RunOptions serial;
  RunOptions parallel;
  parallel.workers = 4;
  const auto a = run_dataset(m, serial);
  const auto b = run_dataset(m, parallel);
  ASSERT_EQ(a.scenes.size(), 12u);
  EXPECT_TRUE(std::is_sorted(a.scenes.begin(), a.scenes.end(),
                             [](const auto& x, const auto& y) { return x.scene_id < y.scene_id; }));
  EXPECT_EQ(a.failed_count(), 1u);
  ASSERT_TRUE(a.evaluation.has_value());
  EXPECT_EQ(a.evaluation->n, 11u);
  EXPECT_EQ(a.evaluation->mae, 0.0);
  EXPECT_EQ(report_to_json(a).at("scenes"), report_to_json(b).at("scenes"));
  EXPECT_EQ(b.evaluation->mae, a.evaluation->mae);
}

TEST(RunDataset, EmptyManifestIsError) {
  EXPECT_THROW(run_dataset(Manifest{"empty", {}}), std::invalid_argument);
}

TEST(Reports, CsvAndJsonSchemas) {
  TempDir dir;
  const auto r = bench_generate(small_bench(3), dir / "data");
  const auto report = run_dataset(read_manifest(r.manifest_path));
  write_reports(report, dir / "out");
  const auto csv = slurp(dir / "out" / "report.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "scene_id,near_count,far_count,total,ground_truth,abs_error");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  const auto j = nlohmann::json::parse(slurp(dir / "out" / "report.json"));
  EXPECT_EQ(j.at("N"), 3);
  EXPECT_EQ(j.at("mae"), 0.0);
  EXPECT_EQ(j.at("mse"), 0.0);
  EXPECT_EQ(j.at("tool_version"), kToolVersion);
  EXPECT_EQ(j.at("scenes").size(), 3u);
  EXPECT_TRUE(j.at("scenes")[0].contains("filter"));
}

TEST(BenchGenerate, TenScenesRoundTrip) {
  TempDir dir;
  const auto r = bench_generate(small_bench(10), dir.path());
  EXPECT_TRUE(r.failures.empty());
  ASSERT_EQ(r.manifest.scenes.size(), 10u);
  for (const auto& e : r.manifest.scenes) {
    const auto d = read_depth(e.depth);
    write_depth(dir / "copy.digd", d);
    EXPECT_EQ(slurp(dir / "copy.digd"), slurp(e.depth));
    const auto f = read_density(*e.predictions.density);
    write_density(dir / "copy.digf", f);
    EXPECT_EQ(slurp(dir / "copy.digf"), slurp(*e.predictions.density));
    const auto dets = read_detection_list(*e.predictions.detections);
    write_detection_list(dir / "copy.txt", dets);
    EXPECT_EQ(slurp(dir / "copy.txt"), slurp(*e.predictions.detections));
    const auto cfg = read_scene_config(e.config);
    write_scene_config(dir / "copy.json", cfg);
    EXPECT_EQ(slurp(dir / "copy.json"), slurp(e.config));
    const auto ann = read_annotations(*e.annotations);
    write_annotations(dir / "copy-ann.json", ann);
    EXPECT_EQ(slurp(dir / "copy-ann.json"), slurp(*e.annotations));
  }
}

TEST(BenchGenerate, SameSeedIsByteIdentical) {
  TempDir a, b;
  const auto ra = bench_generate(small_bench(4, 9), a.path());
  const auto rb = bench_generate(small_bench(4, 9), b.path());
  for (const auto& entry : fs::recursive_directory_iterator(a.path())) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a.path());
    ASSERT_EQ(slurp(entry.path()), slurp(b.path() / rel)) << rel;
  }
}

TEST(BenchGenerate, ZeroPeopleFailsPerScene) {
  TempDir dir;
  nlohmann::json j{{"scenes", {{{"scene_id", "ok"}, {"width", 160}, {"height", 120}, {"n_people", 20},
                                {"near_head_size", 16}, {"far_head_size", 4}},
                               {{"scene_id", "empty"}, {"n_people", 0}}}}};
  const auto r = bench_generate(bench_spec_from_json(j), dir.path());
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0].first, "empty");
  EXPECT_EQ(r.manifest.scenes.size(), 1u);
}

TEST(BenchGenerate, UnwritableOutputIsError) {
  TempDir dir;
  std::ofstream(dir / "file") << "x";
  EXPECT_THROW(bench_generate(small_bench(1), dir / "file" / "sub"), std::runtime_error);
}

TEST(BenchGenerate, ConfigBlockAppliesToScenes) {
  TempDir dir;
  auto spec = small_bench(2);
  spec.config_overrides = {{"beta", 0.4}, {"knn_k", 4}};
  const auto r = bench_generate(spec, dir.path());
  const auto cfg = read_scene_config(r.manifest.scenes[0].config);
  EXPECT_EQ(cfg.beta, 0.4);
  EXPECT_EQ(cfg.knn_k, 4);
  EXPECT_TRUE(run_scene(r.manifest.scenes[0]).succeeded);
}

#ifdef DIGCROWD_CLI_PATH
TEST(Cli, ExitCodeReflectsSceneFailures) {
  TempDir dir;
  const std::string cli = DIGCROWD_CLI_PATH;
  nlohmann::json spec{{"dataset_id", "cli"}, {"count", 3}, {"seed", 5},
                      {"template", {{"width", 160}, {"height", 120}, {"n_people", 30},
                                    {"near_head_size", 16}, {"far_head_size", 4}}}};
  std::ofstream(dir / "spec.json") << spec.dump();
  const auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
  ASSERT_EQ(std::system((cli + " bench-gen " + q(dir / "spec.json") + " --out-dir " + q(dir / "data") +
                         " > /dev/null").c_str()), 0);
  const std::string eval = cli + " evaluate --deterministic --workers 2 --manifest " +
                           q(dir / "data" / "manifest.json") + " --out-dir " + q(dir / "out") + " > /dev/null 2>&1";
  EXPECT_EQ(std::system(eval.c_str()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "report.json"));
  fs::remove(dir / "data" / "scene-00001" / "density.digf");
  EXPECT_NE(std::system(eval.c_str()), 0);
  EXPECT_EQ(std::system((cli + " partition --manifest " + q(dir / "data" / "manifest.json") + " --out-dir " +
                         q(dir / "part") + " > /dev/null").c_str()), 0);
  EXPECT_TRUE(fs::exists(dir / "part" / "scene-00000.mask.pgm"));
}
#endif
