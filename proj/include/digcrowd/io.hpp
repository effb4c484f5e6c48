#pragma once

// File formats.
//
//   depth    "DIGD" u32 width, u32 height, u32 reserved, then width*height f32
//            (little-endian, row-major); or a 16-bit binary PGM (P5, maxval 65535)
//   tensor   "DIGY" u32 S, u32 B, u32 C, u32 width, u32 height, then S*S*(B*5+C) f32
//   density  "DIGF" u32 width, u32 height, u64 reserved, then width*height f32
//   detections  text, one box per line: x_min y_min x_max y_max score
//   config, annotations  JSON

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"

#include "digcrowd/density.hpp"
#include "digcrowd/detect.hpp"
#include "digcrowd/scene.hpp"

namespace digcrowd {

/// Reads either depth format, chosen by the leading magic bytes.
DepthMap read_depth(const std::filesystem::path& path);
void write_depth(const std::filesystem::path& path, const DepthMap& depth);
/// 16-bit PGM; values are quantized to round(d * 65535).
void write_depth_pgm16(const std::filesystem::path& path, const DepthMap& depth);

GridPrediction read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const GridPrediction& pred);

DetectionSet read_detection_list(const std::filesystem::path& path);
void write_detection_list(const std::filesystem::path& path, const DetectionSet& dets);

DensityField read_density(const std::filesystem::path& path);
/// Values are stored as f32.
void write_density(const std::filesystem::path& path, const DensityField& field);

nlohmann::json polyline_to_json(const Polyline& p);
Polyline polyline_from_json(const nlohmann::json& j);

nlohmann::json scene_config_to_json(const SceneConfig& cfg);
/// Missing optional fields take their defaults; "depth_threshold" may be a
/// number or "auto". Throws ConfigError on malformed input.
SceneConfig scene_config_from_json(const nlohmann::json& j);
SceneConfig read_scene_config(const std::filesystem::path& path);
void write_scene_config(const std::filesystem::path& path, const SceneConfig& cfg);

struct Annotations {
  std::vector<HeadPoint> heads;
  double count = 0.0;
};

/// {"count": n, "heads": [{"x": .., "y": ..}, ...]}; count defaults to the
/// number of heads.
Annotations read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path, const Annotations& ann);

void write_pgm8(const std::filesystem::path& path, const GridShape& shape,
                std::span<const std::uint8_t> pixels);

/// Linear heat map scaled so the maximum maps to 255.
std::vector<std::uint8_t> render_heatmap(const DensityField& field);
/// Far = 255, near = 0.
std::vector<std::uint8_t> render_mask(const RegionMask& mask);
/// Cluster ids spread over the gray range.
std::vector<std::uint8_t> render_labels(std::span<const std::int32_t> labels, int label_count);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace digcrowd
