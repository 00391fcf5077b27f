#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "coff/error.hpp"
#include "coff/features.hpp"
#include "coff/geometry.hpp"
#include "coff/image.hpp"
#include "coff/log.hpp"
#include "coff/metrics.hpp"

namespace coff::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct PointCloud {
  PointList points;
  std::vector<std::array<std::uint8_t, 3>> colors;  // empty when the file has none
  std::size_t dropped_rows = 0;                     // non-finite rows skipped at load
};

namespace detail {

inline std::string read_file(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode | std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool parse_double(std::string_view tok, double& out) {
  if (tok == "nan" || tok == "NaN" || tok == "-nan") {
    out = std::numeric_limits<double>::quiet_NaN();
    return true;
  }
  if (tok == "inf" || tok == "Inf") {
    out = std::numeric_limits<double>::infinity();
    return true;
  }
  if (tok == "-inf" || tok == "-Inf") {
    out = -std::numeric_limits<double>::infinity();
    return true;
  }
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}
  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    std::size_t end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    line = text_.substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = end + 1;
    ++number_;
    return true;
  }
  std::size_t line_number() const { return number_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t number_ = 0;
};

inline std::string with_line(const fs::path& path, std::size_t line, const std::string& msg) {
  return path.string() + ":" + std::to_string(line) + ": " + msg;
}

}  // namespace detail

/// ASCII PLY with float/double x, y, z vertex properties and optional
/// red/green/blue. Elements before "vertex" are skipped line by line.
inline PointCloud parse_ply(std::string_view text, const fs::path& origin = "<memory>") {
  detail::LineReader reader(text);
  std::string_view line;
  if (!reader.next(line) || line != "ply") throw Error(ErrorCode::ParseError, detail::with_line(origin, 1, "missing ply magic"));

  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> props;
  };
  std::vector<Element> elements;
  bool ascii = false;
  for (;;) {
    if (!reader.next(line)) throw Error(ErrorCode::ParseError, detail::with_line(origin, reader.line_number(), "unterminated header"));
    const auto tok = detail::split_ws(line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "format") {
      if (tok.size() < 2) throw Error(ErrorCode::ParseError, detail::with_line(origin, reader.line_number(), "bad format line"));
      if (tok[1] != "ascii") throw Error(ErrorCode::UnsupportedFormat, "only ascii PLY is supported: " + origin.string());
      ascii = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw Error(ErrorCode::ParseError, detail::with_line(origin, reader.line_number(), "bad element line"));
      Element e;
      e.name = std::string(tok[1]);
      if (std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), e.count).ec != std::errc()) {
        throw Error(ErrorCode::ParseError, detail::with_line(origin, reader.line_number(), "bad element count"));
      }
      elements.push_back(std::move(e));
    } else if (tok[0] == "property") {
      if (elements.empty() || tok.size() < 3) {
        throw Error(ErrorCode::ParseError, detail::with_line(origin, reader.line_number(), "property outside element"));
      }
      if (tok[1] == "list") {
        elements.back().props.emplace_back("<list>");
      } else {
        elements.back().props.emplace_back(tok.back());
      }
    } else {
      throw Error(ErrorCode::ParseError, detail::with_line(origin, reader.line_number(), "unknown header keyword"));
    }
  }
  if (!ascii) throw Error(ErrorCode::ParseError, "PLY header has no format line: " + origin.string());

  PointCloud cloud;
  for (const auto& e : elements) {
    if (e.name != "vertex") {
      for (std::size_t k = 0; k < e.count; ++k)
        if (!reader.next(line)) throw Error(ErrorCode::ParseError, detail::with_line(origin, reader.line_number(), "truncated element"));
      continue;
    }
    auto find = [&](std::string_view n) -> long {
      for (std::size_t i = 0; i < e.props.size(); ++i)
        if (e.props[i] == n) return static_cast<long>(i);
      return -1;
    };
    const long ix = find("x"), iy = find("y"), iz = find("z");
    const long ir = find("red"), ig = find("green"), ib = find("blue");
    if (ix < 0 || iy < 0 || iz < 0) throw Error(ErrorCode::ParseError, "PLY vertex element lacks x/y/z: " + origin.string());
    const bool has_rgb = ir >= 0 && ig >= 0 && ib >= 0;
    cloud.points.reserve(e.count);
    for (std::size_t k = 0; k < e.count; ++k) {
      if (!reader.next(line)) throw Error(ErrorCode::ParseError, detail::with_line(origin, reader.line_number(), "truncated vertex list"));
      const auto tok = detail::split_ws(line);
      if (tok.size() < e.props.size()) throw Error(ErrorCode::ParseError, detail::with_line(origin, reader.line_number(), "too few vertex values"));
      double v[6];
      const long cols[6] = {ix, iy, iz, ir, ig, ib};
      for (int c = 0; c < (has_rgb ? 6 : 3); ++c) {
        if (!detail::parse_double(tok[static_cast<std::size_t>(cols[c])], v[c])) {
          throw Error(ErrorCode::ParseError, detail::with_line(origin, reader.line_number(), "bad number"));
        }
      }
      const Point3 p(v[0], v[1], v[2]);
      if (!is_finite(p)) {
        ++cloud.dropped_rows;
        continue;
      }
      cloud.points.push_back(p);
      if (has_rgb) {
        cloud.colors.push_back({static_cast<std::uint8_t>(std::clamp(v[3], 0.0, 255.0)),
                                static_cast<std::uint8_t>(std::clamp(v[4], 0.0, 255.0)),
                                static_cast<std::uint8_t>(std::clamp(v[5], 0.0, 255.0))});
      }
    }
  }
  return cloud;
}

/// Whitespace-separated "x y z [...]" rows; blank lines and '#' comments skipped.
inline PointCloud parse_xyz(std::string_view text, const fs::path& origin = "<memory>") {
  PointCloud cloud;
  detail::LineReader reader(text);
  std::string_view line;
  while (reader.next(line)) {
    const auto tok = detail::split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    if (tok.size() < 3) throw Error(ErrorCode::ParseError, detail::with_line(origin, reader.line_number(), "expected x y z"));
    double v[3];
    for (int c = 0; c < 3; ++c)
      if (!detail::parse_double(tok[static_cast<std::size_t>(c)], v[c])) {
        throw Error(ErrorCode::ParseError, detail::with_line(origin, reader.line_number(), "bad number"));
      }
    const Point3 p(v[0], v[1], v[2]);
    if (!is_finite(p)) {
      ++cloud.dropped_rows;
      continue;
    }
    cloud.points.push_back(p);
  }
  return cloud;
}

/// Dispatches on extension: .ply, or .xyz / .txt.
inline PointCloud load_cloud(const fs::path& path) {
  const std::string ext = path.extension().string();
  PointCloud cloud;
  if (ext == ".ply") {
    cloud = parse_ply(detail::read_file(path), path);
  } else if (ext == ".xyz" || ext == ".txt") {
    cloud = parse_xyz(detail::read_file(path), path);
  } else {
    throw Error(ErrorCode::UnsupportedFormat, "unknown point cloud extension: " + path.string());
  }
  if (cloud.dropped_rows > 0) log::warn(path.string(), ": dropped ", cloud.dropped_rows, " non-finite rows");
  return cloud;
}

inline std::string format_ply(const PointCloud& cloud) {
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.points.size()) +
                    "\nproperty double x\nproperty double y\nproperty double z\n";
  const bool rgb = !cloud.colors.empty();
  if (rgb) out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out += "end_header\n";
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    out += format_number(p.x()) + ' ' + format_number(p.y()) + ' ' + format_number(p.z());
    if (rgb) {
      out += ' ' + std::to_string(cloud.colors[i][0]) + ' ' + std::to_string(cloud.colors[i][1]) + ' ' +
             std::to_string(cloud.colors[i][2]);
    }
    out += '\n';
  }
  return out;
}

inline void save_ply(const fs::path& path, const PointCloud& cloud) { detail::write_file(path, format_ply(cloud)); }

inline void save_xyz(const fs::path& path, const PointList& points) {
  std::string out;
  for (const auto& p : points) out += format_number(p.x()) + ' ' + format_number(p.y()) + ' ' + format_number(p.z()) + '\n';
  detail::write_file(path, out);
}

/// Binary PPM (P6) with maxval 255.
inline RgbImage parse_ppm(std::string_view bytes, const fs::path& origin = "<memory>") {
  std::size_t pos = 0;
  auto skip = [&] {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto token = [&]() -> std::string_view {
    skip();
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  auto number = [&](const char* what) {
    const auto t = token();
    int v = 0;
    if (std::from_chars(t.data(), t.data() + t.size(), v).ec != std::errc() || v <= 0) {
      throw Error(ErrorCode::ParseError, origin.string() + ": bad PPM " + what);
    }
    return v;
  };
  const auto magic = token();
  if (magic != "P6") {
    if (magic == "P3") throw Error(ErrorCode::UnsupportedFormat, origin.string() + ": ASCII PPM (P3) not supported");
    throw Error(ErrorCode::ParseError, origin.string() + ": missing P6 magic");
  }
  const int w = number("width");
  const int h = number("height");
  const int maxval = number("maxval");
  if (maxval != 255) throw Error(ErrorCode::UnsupportedFormat, origin.string() + ": PPM maxval must be 255");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw Error(ErrorCode::ParseError, origin.string() + ": PPM header not terminated");
  }
  ++pos;
  RgbImage img(w, h);
  if (bytes.size() - pos < img.data.size()) throw Error(ErrorCode::ParseError, origin.string() + ": truncated PPM data");
  std::memcpy(img.data.data(), bytes.data() + pos, img.data.size());
  return img;
}

inline RgbImage load_image(const fs::path& path) { return parse_ppm(detail::read_file(path), path); }

/// Loads a PPM and checks it against the expected camera raster size.
inline RgbImage load_image(const fs::path& path, int expected_width, int expected_height) {
  RgbImage img = load_image(path);
  if (img.width != expected_width || img.height != expected_height) {
    throw Error(ErrorCode::DimensionMismatch, path.string() + ": image is " + std::to_string(img.width) + "x" +
                                                  std::to_string(img.height) + ", camera expects " +
                                                  std::to_string(expected_width) + "x" + std::to_string(expected_height));
  }
  return img;
}

inline std::string format_ppm(const RgbImage& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.data.data()), img.data.size());
  return out;
}

inline void save_image(const fs::path& path, const RgbImage& img) { detail::write_file(path, format_ppm(img)); }

// Feature raster: "COFF2D", u32 H, u32 W, u32 dim, then H*W*dim float32, all little-endian.
inline constexpr std::string_view kRasterMagic = "COFF2D";

namespace detail {

inline std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void append_u32le(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

}  // namespace detail

inline FeatureRaster parse_raster(std::string_view bytes, const fs::path& origin = "<memory>") {
  constexpr std::size_t kHeader = 6 + 12;
  if (bytes.size() < kHeader || bytes.substr(0, 6) != kRasterMagic) {
    throw Error(ErrorCode::ParseError, origin.string() + ": missing COFF2D magic");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  FeatureRaster r;
  r.height = static_cast<int>(detail::read_u32le(p + 6));
  r.width = static_cast<int>(detail::read_u32le(p + 10));
  r.dim = static_cast<int>(detail::read_u32le(p + 14));
  const std::size_t count = static_cast<std::size_t>(r.height) * r.width * r.dim;
  if (bytes.size() != kHeader + count * 4) throw Error(ErrorCode::ParseError, origin.string() + ": raster size mismatch");
  r.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = detail::read_u32le(p + kHeader + 4 * i);
    std::memcpy(&r.data[i], &bits, 4);
  }
  return r;
}

inline std::string format_raster(const FeatureRaster& r) {
  std::string out(kRasterMagic);
  detail::append_u32le(out, static_cast<std::uint32_t>(r.height));
  detail::append_u32le(out, static_cast<std::uint32_t>(r.width));
  detail::append_u32le(out, static_cast<std::uint32_t>(r.dim));
  out.reserve(out.size() + r.data.size() * 4);
  for (float f : r.data) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    detail::append_u32le(out, bits);
  }
  return out;
}

inline FeatureRaster load_raster(const fs::path& path) { return parse_raster(detail::read_file(path), path); }
inline void save_raster(const fs::path& path, const FeatureRaster& r) { detail::write_file(path, format_raster(r)); }

// ---------------------------------------------------------------------------
// Manifest

struct ImageEntry {
  std::string image;
  Eigen::Matrix3d intrinsic = Eigen::Matrix3d::Identity();
  Eigen::Matrix4d extrinsic = Eigen::Matrix4d::Identity();  // cloud frame -> camera frame
  std::optional<std::string> features;
  std::optional<int> width;
  std::optional<int> height;

  bool operator==(const ImageEntry&) const = default;
};

struct CloudEntry {
  std::string cloud;
  std::vector<ImageEntry> images;

  bool operator==(const CloudEntry&) const = default;
};

struct PairEntry {
  std::string id;
  std::string cloud_p;
  std::string cloud_q;
  Eigen::Matrix4d gt = Eigen::Matrix4d::Identity();  // maps P coordinates into Q coordinates
  std::optional<double> overlap;
  std::optional<json> planarity;

  bool operator==(const PairEntry&) const = default;
};

struct DatasetManifest {
  std::map<std::string, CloudEntry> clouds;
  std::vector<PairEntry> pairs;
  fs::path base_dir;  // relative paths resolve against this

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }

  bool operator==(const DatasetManifest& o) const { return clouds == o.clouds && pairs == o.pairs; }
};

namespace detail {

template <int R, int C>
Eigen::Matrix<double, R, C> matrix_from_json(const json& j, const std::string& field) {
  Eigen::Matrix<double, R, C> m;
  if (!j.is_array() || j.size() != R) throw Error(ErrorCode::SchemaError, field);
  for (int r = 0; r < R; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || row.size() != C) throw Error(ErrorCode::SchemaError, field);
    for (int c = 0; c < C; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw Error(ErrorCode::SchemaError, field);
      m(r, c) = v.get<double>();
      if (!std::isfinite(m(r, c))) throw Error(ErrorCode::SchemaError, field);
    }
  }
  return m;
}

template <typename Derived>
json matrix_to_json(const Eigen::MatrixBase<Derived>& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline const json& require(const json& obj, const char* key, const std::string& field) {
  if (!obj.is_object() || !obj.contains(key)) throw Error(ErrorCode::SchemaError, field);
  return obj.at(key);
}

inline std::string require_string(const json& obj, const char* key, const std::string& field) {
  const auto& v = require(obj, key, field);
  if (!v.is_string()) throw Error(ErrorCode::SchemaError, field);
  return v.get<std::string>();
}

inline void check_homogeneous(const Eigen::Matrix4d& m, const std::string& field) {
  if (m(3, 0) != 0.0 || m(3, 1) != 0.0 || m(3, 2) != 0.0 || m(3, 3) != 1.0) throw Error(ErrorCode::SchemaError, field);
}

}  // namespace detail

/// Validates and converts manifest JSON. SchemaError messages name the
/// offending field, e.g. "pairs[0].gt".
inline DatasetManifest manifest_from_json(const json& j) {
  DatasetManifest m;
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, "<root>");
  const auto& clouds = detail::require(j, "clouds", "clouds");
  if (!clouds.is_object()) throw Error(ErrorCode::SchemaError, "clouds");
  for (const auto& [id, entry] : clouds.items()) {
    const std::string base = "clouds." + id;
    CloudEntry c;
    c.cloud = detail::require_string(entry, "cloud", base + ".cloud");
    if (entry.contains("images")) {
      const auto& imgs = entry.at("images");
      if (!imgs.is_array()) throw Error(ErrorCode::SchemaError, base + ".images");
      for (std::size_t k = 0; k < imgs.size(); ++k) {
        const std::string f = base + ".images[" + std::to_string(k) + "]";
        const auto& ij = imgs[k];
        ImageEntry e;
        e.image = detail::require_string(ij, "image", f + ".image");
        e.intrinsic = detail::matrix_from_json<3, 3>(detail::require(ij, "intrinsic", f + ".intrinsic"), f + ".intrinsic");
        e.extrinsic = detail::matrix_from_json<4, 4>(detail::require(ij, "extrinsic", f + ".extrinsic"), f + ".extrinsic");
        detail::check_homogeneous(e.extrinsic, f + ".extrinsic");
        if (ij.contains("features")) {
          if (!ij.at("features").is_string()) throw Error(ErrorCode::SchemaError, f + ".features");
          e.features = ij.at("features").get<std::string>();
        }
        for (const char* key : {"width", "height"}) {
          if (!ij.contains(key)) continue;
          const auto& v = ij.at(key);
          if (!v.is_number_integer() || v.get<int>() <= 0) throw Error(ErrorCode::SchemaError, f + "." + key);
          (std::string_view(key) == "width" ? e.width : e.height) = v.get<int>();
        }
        c.images.push_back(std::move(e));
      }
    }
    m.clouds.emplace(id, std::move(c));
  }
  const auto& pairs = detail::require(j, "pairs", "pairs");
  if (!pairs.is_array()) throw Error(ErrorCode::SchemaError, "pairs");
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const std::string f = "pairs[" + std::to_string(k) + "]";
    const auto& pj = pairs[k];
    PairEntry p;
    p.id = pj.contains("id") && pj.at("id").is_string() ? pj.at("id").get<std::string>() : std::to_string(k);
    p.cloud_p = detail::require_string(pj, "p", f + ".p");
    p.cloud_q = detail::require_string(pj, "q", f + ".q");
    if (!m.clouds.contains(p.cloud_p)) throw Error(ErrorCode::SchemaError, f + ".p");
    if (!m.clouds.contains(p.cloud_q)) throw Error(ErrorCode::SchemaError, f + ".q");
    p.gt = detail::matrix_from_json<4, 4>(detail::require(pj, "gt", f + ".gt"), f + ".gt");
    detail::check_homogeneous(p.gt, f + ".gt");
    if (pj.contains("overlap")) {
      if (!pj.at("overlap").is_number()) throw Error(ErrorCode::SchemaError, f + ".overlap");
      p.overlap = pj.at("overlap").get<double>();
    }
    if (pj.contains("planarity")) p.planarity = pj.at("planarity");
    m.pairs.push_back(std::move(p));
  }
  return m;
}

inline json manifest_to_json(const DatasetManifest& m) {
  json j;
  j["clouds"] = json::object();
  for (const auto& [id, c] : m.clouds) {
    json cj;
    cj["cloud"] = c.cloud;
    cj["images"] = json::array();
    for (const auto& e : c.images) {
      json ij;
      ij["image"] = e.image;
      ij["intrinsic"] = detail::matrix_to_json(e.intrinsic);
      ij["extrinsic"] = detail::matrix_to_json(e.extrinsic);
      if (e.features) ij["features"] = *e.features;
      if (e.width) ij["width"] = *e.width;
      if (e.height) ij["height"] = *e.height;
      cj["images"].push_back(std::move(ij));
    }
    j["clouds"][id] = std::move(cj);
  }
  j["pairs"] = json::array();
  for (const auto& p : m.pairs) {
    json pj;
    pj["id"] = p.id;
    pj["p"] = p.cloud_p;
    pj["q"] = p.cloud_q;
    pj["gt"] = detail::matrix_to_json(p.gt);
    if (p.overlap) pj["overlap"] = *p.overlap;
    if (p.planarity) pj["planarity"] = *p.planarity;
    j["pairs"].push_back(std::move(pj));
  }
  return j;
}

/// Loads a manifest; with `check_paths`, every referenced file must exist.
inline DatasetManifest load_manifest(const fs::path& path, bool check_paths = true) {
  json j;
  try {
    j = json::parse(detail::read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  DatasetManifest m = manifest_from_json(j);
  m.base_dir = path.parent_path();
  if (check_paths) {
    for (const auto& [id, c] : m.clouds) {
      if (!fs::exists(m.resolve(c.cloud))) throw Error(ErrorCode::SchemaError, "clouds." + id + ".cloud: file not found");
      for (std::size_t k = 0; k < c.images.size(); ++k) {
        const std::string f = "clouds." + id + ".images[" + std::to_string(k) + "]";
        if (!fs::exists(m.resolve(c.images[k].image))) throw Error(ErrorCode::SchemaError, f + ".image: file not found");
        if (c.images[k].features && !fs::exists(m.resolve(*c.images[k].features))) {
          throw Error(ErrorCode::SchemaError, f + ".features: file not found");
        }
      }
    }
  }
  return m;
}

inline void save_manifest(const fs::path& path, const DatasetManifest& m) {
  detail::write_file(path, manifest_to_json(m).dump(2) + "\n");
}

inline void save_metrics_csv(const fs::path& path, std::span<const PairEvaluation> evals) {
  std::ostringstream os;
  write_metrics_csv(os, evals);
  detail::write_file(path, os.str());
}

/// Loads every image of a manifest cloud entry, checking raster sizes.
inline std::vector<PosedImage> load_posed_images(const DatasetManifest& m, const CloudEntry& entry) {
  std::vector<PosedImage> out;
  out.reserve(entry.images.size());
  for (const auto& e : entry.images) {
    PosedImage img;
    img.pixels = load_image(m.resolve(e.image));
    const int w = e.width.value_or(img.pixels.width);
    const int h = e.height.value_or(img.pixels.height);
    if (img.pixels.width != w || img.pixels.height != h) {
      throw Error(ErrorCode::DimensionMismatch, e.image + ": raster size differs from manifest camera size");
    }
    img.camera.intrinsic = e.intrinsic;
    img.camera.extrinsic = RigidTransform::from_matrix(e.extrinsic);
    img.camera.width = w;
    img.camera.height = h;
    if (e.features) {
      img.feature_map = load_raster(m.resolve(*e.features));
      if (img.feature_map->width != w || img.feature_map->height != h) {
        throw Error(ErrorCode::DimensionMismatch, *e.features + ": feature raster size differs from image");
      }
    }
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace coff::io

namespace coff::io {

/// Copy of `m` whose relative paths resolve from `new_dir` instead.
inline DatasetManifest rebase_manifest(const DatasetManifest& m, const fs::path& new_dir) {
  DatasetManifest out = m;
  const fs::path target = fs::absolute(new_dir).lexically_normal();
  auto fix = [&](std::string& p) {
    const fs::path abs = fs::absolute(m.resolve(p)).lexically_normal();
    p = abs.lexically_relative(target).generic_string();
  };
  for (auto& [id, c] : out.clouds) {
    fix(c.cloud);
    for (auto& img : c.images) {
      fix(img.image);
      if (img.features) fix(*img.features);
    }
  }
  out.base_dir = new_dir;
  return out;
}

}  // namespace coff::io
