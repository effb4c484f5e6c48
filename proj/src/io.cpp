#include "digcrowd/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

namespace digcrowd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<char, 4> kDepthMagic{'D', 'I', 'G', 'D'};
constexpr std::array<char, 4> kTensorMagic{'D', 'I', 'G', 'Y'};
constexpr std::array<char, 4> kDensityMagic{'D', 'I', 'G', 'F'};

class ByteWriter {
 public:
  void magic(const std::array<char, 4>& m) {
    for (char c : m) buf_.push_back(static_cast<std::uint8_t>(c));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void reserve(std::size_t n) { buf_.reserve(n); }
  const std::vector<std::uint8_t>& bytes() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::string what)
      : data_(data), what_(std::move(what)) {}

  void expect_magic(const std::array<char, 4>& m) {
    need(4);
    if (std::memcmp(data_.data() + pos_, m.data(), 4) != 0) {
      throw FormatError(what_ + ": bad magic, expected '" + std::string(m.data(), 4) + "'");
    }
    pos_ += 4;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::vector<float> f32_array(std::size_t n) {
    if (n > remaining() / 4) {
      throw FormatError(what_ + ": payload holds " + std::to_string(remaining() / 4) +
                        " floats, header declares " + std::to_string(n));
    }
    std::vector<float> out(n);
    for (auto& v : out) v = f32();
    return out;
  }
  std::size_t remaining() const { return data_.size() - pos_; }
  void expect_end() {
    if (remaining() != 0) {
      throw FormatError(what_ + ": " + std::to_string(remaining()) + " trailing bytes");
    }
  }

 private:
  void need(std::size_t n) {
    if (remaining() < n) throw FormatError(what_ + ": truncated");
  }
  std::span<const std::uint8_t> data_;
  std::string what_;
  std::size_t pos_ = 0;
};

GridShape checked_shape(std::uint32_t w, std::uint32_t h, const std::string& what) {
  if (w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20)) {
    throw FormatError(what + ": implausible grid shape " + std::to_string(w) + "x" +
                      std::to_string(h));
  }
  return {static_cast<int>(w), static_cast<int>(h)};
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

// PGM header token reader: skips whitespace and '#' comments.
class PgmHeader {
 public:
  explicit PgmHeader(std::span<const std::uint8_t> data) : data_(data) {}

  unsigned long number() {
    skip();
    unsigned long v = 0;
    std::size_t digits = 0;
    while (pos_ < data_.size() && data_[pos_] >= '0' && data_[pos_] <= '9') {
      v = v * 10 + (data_[pos_] - '0');
      ++pos_;
      ++digits;
    }
    if (digits == 0) throw FormatError("pgm: malformed header");
    return v;
  }
  std::size_t pixel_offset() {
    if (pos_ >= data_.size()) throw FormatError("pgm: truncated header");
    return pos_ + 1;  // exactly one whitespace byte separates header and raster
  }

 private:
  void skip() {
    while (pos_ < data_.size()) {
      const auto c = data_[pos_];
      if (c == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++pos_;
      } else {
        break;
      }
    }
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 2;
};

DepthMap parse_pgm_depth(std::span<const std::uint8_t> data, const std::string& what) {
  PgmHeader hdr(data);
  const auto w = hdr.number();
  const auto h = hdr.number();
  const auto maxval = hdr.number();
  if (maxval == 0 || maxval > 65535) throw FormatError(what + ": bad PGM maxval");
  const GridShape shape = checked_shape(static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(h), what);
  const std::size_t bpp = maxval > 255 ? 2 : 1;
  const std::size_t offset = hdr.pixel_offset();
  if (data.size() < offset + shape.pixel_count() * bpp) throw FormatError(what + ": truncated PGM raster");
  std::vector<float> values(shape.pixel_count());
  for (std::size_t i = 0; i < values.size(); ++i) {
    unsigned v = data[offset + i * bpp];
    if (bpp == 2) v = (v << 8) | data[offset + i * bpp + 1];
    if (v > maxval) throw FormatError(what + ": PGM sample above maxval");
    values[i] = static_cast<float>(static_cast<double>(v) / static_cast<double>(maxval));
  }
  return DepthMap(shape, std::move(values));
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

DepthMap read_depth(const fs::path& path) {
  const auto data = read_file_bytes(path);
  const std::string what = "depth " + path.string();
  if (data.size() >= 2 && data[0] == 'P' && data[1] == '5') return parse_pgm_depth(data, what);
  ByteReader r(data, what);
  r.expect_magic(kDepthMagic);
  const auto w = r.u32();
  const auto h = r.u32();
  r.u32();  // reserved
  const GridShape shape = checked_shape(w, h, what);
  auto values = r.f32_array(shape.pixel_count());
  r.expect_end();
  try {
    return DepthMap(shape, std::move(values));
  } catch (const std::invalid_argument& e) {
    throw FormatError(what + ": " + e.what());
  }
}

void write_depth(const fs::path& path, const DepthMap& depth) {
  ByteWriter w;
  w.reserve(16 + depth.values().size() * 4);
  w.magic(kDepthMagic);
  w.u32(static_cast<std::uint32_t>(depth.shape().width));
  w.u32(static_cast<std::uint32_t>(depth.shape().height));
  w.u32(0);
  for (float v : depth.values()) w.f32(v);
  write_file_bytes(path, w.bytes());
}

void write_depth_pgm16(const fs::path& path, const DepthMap& depth) {
  std::ostringstream hdr;
  hdr << "P5\n" << depth.shape().width << " " << depth.shape().height << "\n65535\n";
  const std::string h = hdr.str();
  std::vector<std::uint8_t> bytes(h.begin(), h.end());
  bytes.reserve(bytes.size() + depth.values().size() * 2);
  for (float v : depth.values()) {
    const auto q = static_cast<std::uint16_t>(std::lround(static_cast<double>(v) * 65535.0));
    bytes.push_back(static_cast<std::uint8_t>(q >> 8));
    bytes.push_back(static_cast<std::uint8_t>(q & 0xff));
  }
  write_file_bytes(path, bytes);
}

GridPrediction read_tensor(const fs::path& path) {
  const auto data = read_file_bytes(path);
  const std::string what = "tensor " + path.string();
  ByteReader r(data, what);
  r.expect_magic(kTensorMagic);
  GridPrediction pred;
  pred.spec.cells = static_cast<int>(r.u32());
  pred.spec.boxes_per_cell = static_cast<int>(r.u32());
  pred.spec.classes = static_cast<int>(r.u32());
  if (pred.spec.cells < 1 || pred.spec.cells > 4096 || pred.spec.boxes_per_cell < 1 ||
      pred.spec.boxes_per_cell > 1024 || pred.spec.classes < 1 || pred.spec.classes > 4096) {
    throw FormatError(what + ": implausible S/B/C header");
  }
  const auto w = r.u32();
  const auto h = r.u32();
  pred.shape = checked_shape(w, h, what);
  pred.values = r.f32_array(pred.spec.tensor_length());
  r.expect_end();
  return pred;
}

void write_tensor(const fs::path& path, const GridPrediction& pred) {
  pred.validate();
  ByteWriter w;
  w.magic(kTensorMagic);
  w.u32(static_cast<std::uint32_t>(pred.spec.cells));
  w.u32(static_cast<std::uint32_t>(pred.spec.boxes_per_cell));
  w.u32(static_cast<std::uint32_t>(pred.spec.classes));
  w.u32(static_cast<std::uint32_t>(pred.shape.width));
  w.u32(static_cast<std::uint32_t>(pred.shape.height));
  for (float v : pred.values) w.f32(v);
  write_file_bytes(path, w.bytes());
}

DetectionSet read_detection_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  DetectionSet out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::array<double, 5> v{};
    const char* p = line.data();
    const char* end = line.data() + line.size();
    std::size_t fields = 0;
    while (true) {
      while (p < end && (*p == ' ' || *p == '\t' || *p == '\r' || *p == ',')) ++p;
      if (p == end) break;
      if (fields == v.size()) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": too many fields");
      }
      auto [next, ec] = std::from_chars(p, end, v[fields]);
      if (ec != std::errc()) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": not a number");
      }
      p = next;
      ++fields;
    }
    if (fields == 0) continue;
    if (fields != v.size()) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected x_min y_min x_max y_max score");
    }
    BoundingBox box{v[0], v[1], v[2], v[3], v[4]};
    if (!box.valid()) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": invalid box");
    }
    out.boxes.push_back(box);
  }
  return out;
}

void write_detection_list(const fs::path& path, const DetectionSet& dets) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# x_min y_min x_max y_max score\n";
  for (const auto& b : dets.boxes) {
    out << format_double(b.x_min) << ' ' << format_double(b.y_min) << ' ' << format_double(b.x_max)
        << ' ' << format_double(b.y_max) << ' ' << format_double(b.score) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

DensityField read_density(const fs::path& path) {
  const auto data = read_file_bytes(path);
  const std::string what = "density " + path.string();
  ByteReader r(data, what);
  r.expect_magic(kDensityMagic);
  const auto w = r.u32();
  const auto h = r.u32();
  r.u64();  // reserved
  DensityField field;
  field.shape = checked_shape(w, h, what);
  const auto values = r.f32_array(field.shape.pixel_count());
  r.expect_end();
  field.values.assign(values.begin(), values.end());
  for (double v : field.values) {
    if (!std::isfinite(v) || v < 0.0) throw FormatError(what + ": negative or non-finite density");
  }
  return field;
}

void write_density(const fs::path& path, const DensityField& field) {
  ByteWriter w;
  w.reserve(20 + field.values.size() * 4);
  w.magic(kDensityMagic);
  w.u32(static_cast<std::uint32_t>(field.shape.width));
  w.u32(static_cast<std::uint32_t>(field.shape.height));
  w.u64(0);
  for (double v : field.values) w.f32(static_cast<float>(v));
  write_file_bytes(path, w.bytes());
}

json polyline_to_json(const Polyline& p) {
  json arr = json::array();
  for (const auto& s : p.segments()) {
    arr.push_back({{"x_start", s.x_start}, {"x_end", s.x_end}, {"k", s.slope}, {"b", s.intercept}});
  }
  return arr;
}

Polyline polyline_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("polyline must be an array of segments");
  std::vector<PolylineSegment> segs;
  try {
    for (const auto& s : j) {
      segs.push_back({s.at("x_start").get<double>(), s.at("x_end").get<double>(),
                      s.at("k").get<double>(), s.at("b").get<double>()});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("polyline segment: ") + e.what());
  }
  return Polyline(std::move(segs));
}

json scene_config_to_json(const SceneConfig& cfg) {
  json j;
  j["scene_id"] = cfg.scene_id;
  j["polyline"] = cfg.polyline ? polyline_to_json(*cfg.polyline) : json(nullptr);
  j["depth_threshold"] = cfg.depth_threshold ? json(*cfg.depth_threshold) : json("auto");
  j["knn_k"] = cfg.knn_k;
  j["beta"] = cfg.beta;
  j["truncation_radius"] = cfg.truncation_radius;
  j["sigma_floor"] = cfg.sigma_floor;
  j["score_threshold"] = cfg.score_threshold;
  j["nms_iou"] = cfg.nms_iou;
  j["clustering"] = {{"target_cluster_count", cfg.clustering.target_cluster_count},
                     {"compactness", cfg.clustering.compactness},
                     {"max_iters", cfg.clustering.max_iters},
                     {"simplify_tol", cfg.clustering.simplify_tol}};
  return j;
}

SceneConfig scene_config_from_json(const json& j) {
  SceneConfig cfg;
  try {
    if (!j.is_object()) throw ConfigError("scene config must be a JSON object");
    cfg.scene_id = j.at("scene_id").get<std::string>();
    if (auto it = j.find("polyline"); it != j.end() && !it->is_null()) {
      cfg.polyline = polyline_from_json(*it);
    }
    if (auto it = j.find("depth_threshold"); it != j.end() && !it->is_null()) {
      if (it->is_string()) {
        if (it->get<std::string>() != "auto") throw ConfigError("depth_threshold must be a number or \"auto\"");
      } else {
        cfg.depth_threshold = it->get<double>();
      }
    }
    cfg.knn_k = get_or(j, "knn_k", cfg.knn_k);
    cfg.beta = get_or(j, "beta", cfg.beta);
    cfg.truncation_radius = get_or(j, "truncation_radius", cfg.truncation_radius);
    cfg.sigma_floor = get_or(j, "sigma_floor", cfg.sigma_floor);
    cfg.score_threshold = get_or(j, "score_threshold", cfg.score_threshold);
    cfg.nms_iou = get_or(j, "nms_iou", cfg.nms_iou);
    if (auto it = j.find("clustering"); it != j.end() && it->is_object()) {
      auto& c = cfg.clustering;
      c.target_cluster_count = get_or(*it, "target_cluster_count", c.target_cluster_count);
      c.compactness = get_or(*it, "compactness", c.compactness);
      c.max_iters = get_or(*it, "max_iters", c.max_iters);
      c.simplify_tol = get_or(*it, "simplify_tol", c.simplify_tol);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

SceneConfig read_scene_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return scene_config_from_json(j);
}

void write_scene_config(const fs::path& path, const SceneConfig& cfg) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << scene_config_to_json(cfg).dump(2) << '\n';
}

Annotations read_annotations(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Annotations ann;
  try {
    const json j = json::parse(in);
    for (const auto& h : j.at("heads")) {
      ann.heads.push_back({h.at("x").get<double>(), h.at("y").get<double>()});
    }
    ann.count = get_or(j, "count", static_cast<double>(ann.heads.size()));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (!ann.heads.empty() && ann.count != static_cast<double>(ann.heads.size())) {
    throw FormatError(path.string() + ": count disagrees with the number of heads");
  }
  return ann;
}

void write_annotations(const fs::path& path, const Annotations& ann) {
  json heads = json::array();
  for (const auto& h : ann.heads) heads.push_back({{"x", h.x}, {"y", h.y}});
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << json{{"count", ann.count}, {"heads", heads}}.dump() << '\n';
}

void write_pgm8(const fs::path& path, const GridShape& shape, std::span<const std::uint8_t> pixels) {
  if (pixels.size() != shape.pixel_count()) throw std::invalid_argument("pgm: pixel count mismatch");
  std::ostringstream hdr;
  hdr << "P5\n" << shape.width << " " << shape.height << "\n255\n";
  const std::string h = hdr.str();
  std::vector<std::uint8_t> bytes(h.begin(), h.end());
  bytes.insert(bytes.end(), pixels.begin(), pixels.end());
  write_file_bytes(path, bytes);
}

std::vector<std::uint8_t> render_heatmap(const DensityField& field) {
  const double peak = field.values.empty() ? 0.0 : *std::max_element(field.values.begin(), field.values.end());
  std::vector<std::uint8_t> out(field.values.size(), 0);
  if (peak <= 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(field.values[i] / peak, 0.0, 1.0) * 255.0));
  }
  return out;
}

std::vector<std::uint8_t> render_mask(const RegionMask& mask) {
  std::vector<std::uint8_t> out(mask.labels().size());
  std::transform(mask.labels().begin(), mask.labels().end(), out.begin(),
                 [](std::uint8_t l) { return static_cast<std::uint8_t>(l ? 255 : 0); });
  return out;
}

std::vector<std::uint8_t> render_labels(std::span<const std::int32_t> labels, int label_count) {
  std::vector<std::uint8_t> out(labels.size());
  const int n = std::max(label_count, 1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    // Scatter neighbouring ids across the gray range so adjacent clusters differ.
    const auto scattered = (static_cast<std::int64_t>(labels[i]) * 97) % n;
    out[i] = static_cast<std::uint8_t>(scattered * 255 / std::max(n - 1, 1));
  }
  return out;
}

}  // namespace digcrowd
