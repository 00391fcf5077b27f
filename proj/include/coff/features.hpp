#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "coff/error.hpp"
#include "coff/geometry.hpp"
#include "coff/image.hpp"
#include "coff/sampling.hpp"
#include "coff/spatial_hash.hpp"

namespace coff {

inline constexpr std::size_t kPixelFeatureDim = 128;
inline constexpr std::size_t kPatchFeatureDim = 256;
inline constexpr std::size_t kPointFeatureDim = 256;
inline constexpr std::size_t kFusedFeatureDim = 256;
inline constexpr int kPatchSize = 64;

enum class FeatureRole { Point3D, Pixel2D, Patch2D, Fused };

using FeatureRows = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Row-per-point descriptor block.
struct FeatureMatrix {
  FeatureRole role = FeatureRole::Point3D;
  FeatureRows rows;
  std::vector<std::uint8_t> valid;

  static FeatureMatrix zeros(FeatureRole role, std::size_t n, std::size_t dim) {
    return {role, FeatureRows::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim)),
            std::vector<std::uint8_t>(n, 1)};
  }

  std::size_t size() const { return static_cast<std::size_t>(rows.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(rows.cols()); }
};

/// L2-normalizes every nonzero row in place.
inline void normalize_rows(FeatureRows& rows) {
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double n = rows.row(i).norm();
    if (n > 0.0) rows.row(i) /= n;
  }
}

// ---------------------------------------------------------------------------
// 3D descriptors

/// Covariance shape of a radius neighborhood.
struct LocalGeometry {
  Point3 normal = Point3::UnitZ();
  double linearity = 0.0;
  double planarity = 0.0;
  double sphericity = 0.0;
  double height_spread = 0.0;  // std of offsets along the normal, in radius units
  std::array<double, 8> density{};
  std::size_t neighbor_count = 0;
};

/// Shape features of the neighborhood around `center`; absent with fewer
/// than 3 neighbors or when they are coincident. Normals face `viewpoint`.
inline std::optional<LocalGeometry> local_geometry(const Point3& center, std::span<const Point3> cloud,
                                                   std::span<const std::size_t> neighbors, double radius,
                                                   const Point3& viewpoint = Point3::Zero()) {
  if (neighbors.size() < 3) return std::nullopt;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (std::size_t i : neighbors) mean += cloud[i];
  mean /= static_cast<double>(neighbors.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i : neighbors) {
    const Eigen::Vector3d d = cloud[i] - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(neighbors.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Vector3d ev = eig.eigenvalues().cwiseMax(0.0);  // ascending
  const double l1 = ev(2), l2 = ev(1), l3 = ev(0);
  if (!(l1 > 0.0)) return std::nullopt;

  LocalGeometry g;
  g.neighbor_count = neighbors.size();
  g.linearity = (l1 - l2) / l1;
  g.planarity = (l2 - l3) / l1;
  g.sphericity = l3 / l1;
  g.normal = eig.eigenvectors().col(0).normalized();
  if (g.normal.dot(viewpoint - center) < 0.0) g.normal = -g.normal;

  double var = 0.0;
  for (std::size_t i : neighbors) {
    const double h = (cloud[i] - mean).dot(g.normal);
    var += h * h;
  }
  g.height_spread = std::sqrt(var / static_cast<double>(neighbors.size())) / radius;

  for (std::size_t i : neighbors) {
    const double r = (cloud[i] - center).norm() / radius;
    const auto bin = std::min<std::size_t>(g.density.size() - 1, static_cast<std::size_t>(r * g.density.size()));
    g.density[bin] += 1.0;
  }
  for (auto& d : g.density) d /= static_cast<double>(neighbors.size());
  return g;
}

inline constexpr std::size_t kGeometryDescriptorLength = 15;

/// Hand-crafted per-point geometry descriptor at one hierarchy level:
/// [normal, linearity, planarity, sphericity, height spread, 8-bin radial
/// density], zero-padded to `dim` and L2-normalized. Rows whose neighborhood
/// is too small are zero and flagged invalid.
inline FeatureMatrix point_descriptor(const HierarchicalCloud& cloud, std::size_t level, double radius,
                                      std::size_t dim, const Point3& viewpoint = Point3::Zero()) {
  if (level >= cloud.num_levels()) throw Error(ErrorCode::InvalidArgument, "point_descriptor: level out of range");
  if (dim < kGeometryDescriptorLength) throw Error(ErrorCode::DimensionMismatch, "point_descriptor: dim too small");
  const PointList& pts = cloud.levels[level].points;
  SpatialHash index(pts, radius);
  FeatureMatrix out = FeatureMatrix::zeros(FeatureRole::Point3D, pts.size(), dim);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto nb = index.radius(pts[i], radius);
    const auto g = local_geometry(pts[i], pts, nb, radius, viewpoint);
    if (!g) {
      out.valid[i] = 0;
      continue;
    }
    auto row = out.rows.row(static_cast<Eigen::Index>(i));
    row(0) = g->normal.x();
    row(1) = g->normal.y();
    row(2) = g->normal.z();
    row(3) = g->linearity;
    row(4) = g->planarity;
    row(5) = g->sphericity;
    row(6) = g->height_spread;
    for (std::size_t b = 0; b < g->density.size(); ++b) row(7 + static_cast<Eigen::Index>(b)) = g->density[b];
    row.normalize();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Images

struct PosedImage {
  RgbImage pixels;
  CameraModel camera;
  std::optional<FeatureRaster> feature_map;
};

/// Ascending distance between `cloud_origin` and each camera center; ties
/// keep input order.
inline std::vector<std::size_t> rank_images_by_proximity(const Point3& cloud_origin,
                                                         std::span<const PosedImage> images) {
  std::vector<std::size_t> order(images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> dist(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) dist[i] = (images[i].camera.center() - cloud_origin).norm();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  return order;
}

inline constexpr std::size_t kColorDescriptorLength = 17;

inline double luminance(const RgbImage& img, int x, int y) {
  const auto* p = img.at(x, y);
  return (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0;
}

/// Local color descriptor at a pixel: RGB, 5x5 mean and std per channel, and
/// an 8-bin magnitude-weighted gradient orientation histogram.
inline std::array<double, kColorDescriptorLength> color_descriptor(const RgbImage& img, int x, int y) {
  std::array<double, kColorDescriptorLength> d{};
  for (int c = 0; c < 3; ++c) d[c] = img.value(x, y, c);
  std::array<double, 3> sum{}, sq{};
  int count = 0;
  std::array<double, 8> hist{};
  double mag_total = 0.0;
  for (int dy = -2; dy <= 2; ++dy) {
    for (int dx = -2; dx <= 2; ++dx) {
      const int px = std::clamp(x + dx, 0, img.width - 1);
      const int py = std::clamp(y + dy, 0, img.height - 1);
      for (int c = 0; c < 3; ++c) {
        const double v = img.value(px, py, c);
        sum[c] += v;
        sq[c] += v * v;
      }
      ++count;
      const double gx = luminance(img, std::min(px + 1, img.width - 1), py) - luminance(img, std::max(px - 1, 0), py);
      const double gy = luminance(img, px, std::min(py + 1, img.height - 1)) - luminance(img, px, std::max(py - 1, 0));
      const double mag = std::hypot(gx, gy);
      if (mag > 0.0) {
        double angle = std::atan2(gy, gx);
        if (angle < 0.0) angle += 2.0 * std::numbers::pi;
        const auto bin = std::min<std::size_t>(7, static_cast<std::size_t>(angle / (2.0 * std::numbers::pi) * 8.0));
        hist[bin] += mag;
        mag_total += mag;
      }
    }
  }
  for (int c = 0; c < 3; ++c) {
    const double mean = sum[c] / count;
    d[3 + c] = mean;
    d[6 + c] = std::sqrt(std::max(0.0, sq[c] / count - mean * mean));
  }
  if (mag_total > 0.0)
    for (std::size_t b = 0; b < 8; ++b) d[9 + b] = hist[b] / mag_total;
  return d;
}

struct SelectionStrategy {
  enum class Kind { Random, Mean, Complement };
  Kind kind = Kind::Complement;
  std::uint64_t seed = 0;

  static SelectionStrategy random(std::uint64_t seed) { return {Kind::Random, seed}; }
  static SelectionStrategy mean() { return {Kind::Mean, 0}; }
  static SelectionStrategy complement() { return {Kind::Complement, 0}; }
};

namespace detail {

/// Feature of `img` at the pixel nearest to the projection, written into out.
inline void sample_image_feature(const PosedImage& img, const PixelCoord& px, Eigen::Ref<Eigen::RowVectorXd> out) {
  const int x = std::clamp(static_cast<int>(std::floor(px.u)), 0, img.camera.width - 1);
  const int y = std::clamp(static_cast<int>(std::floor(px.v)), 0, img.camera.height - 1);
  out.setZero();
  if (img.feature_map) {
    const auto& fm = *img.feature_map;
    const float* f = fm.at(x, y);
    for (int k = 0; k < fm.dim; ++k) out(k) = f[k];
  } else {
    const auto d = color_descriptor(img.pixels, x, y);
    for (std::size_t k = 0; k < d.size(); ++k) out(static_cast<Eigen::Index>(k)) = d[k];
  }
}

inline void check_image(const PosedImage& img, std::size_t dim) {
  img.camera.validate();
  if (img.pixels.width != img.camera.width || img.pixels.height != img.camera.height) {
    throw Error(ErrorCode::DimensionMismatch, "image raster does not match camera size");
  }
  if (img.feature_map) {
    if (img.feature_map->width != img.camera.width || img.feature_map->height != img.camera.height) {
      throw Error(ErrorCode::DimensionMismatch, "feature raster does not match image size");
    }
    if (static_cast<std::size_t>(img.feature_map->dim) > dim) {
      throw Error(ErrorCode::DimensionMismatch, "feature raster dim exceeds pixel feature dim");
    }
  } else if (dim < kColorDescriptorLength) {
    throw Error(ErrorCode::DimensionMismatch, "pixel feature dim too small for the color descriptor");
  }
}

}  // namespace detail

/// Pixel-wise image feature per point, reduced across views by `strategy`.
/// Points seen by no image get the all-ones vector and are flagged invalid.
/// Complement walks the images in proximity order to `cloud_origin`.
inline FeatureMatrix pixelwise_features(std::span<const Point3> points, std::span<const PosedImage> images,
                                        const SelectionStrategy& strategy, std::size_t dim = kPixelFeatureDim,
                                        const Point3& cloud_origin = Point3::Zero()) {
  FeatureMatrix out{FeatureRole::Pixel2D,
                    FeatureRows::Ones(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(dim)),
                    std::vector<std::uint8_t>(points.size(), 0)};
  if (images.empty()) return out;
  for (const auto& img : images) detail::check_image(img, dim);

  const auto order = rank_images_by_proximity(cloud_origin, images);
  std::mt19937_64 rng(strategy.seed);
  Eigen::RowVectorXd feat(static_cast<Eigen::Index>(dim));
  Eigen::RowVectorXd acc(static_cast<Eigen::Index>(dim));
  std::vector<std::pair<std::size_t, PixelCoord>> seen;
  for (std::size_t i = 0; i < points.size(); ++i) {
    seen.clear();
    for (std::size_t k : order) {
      if (auto px = project(images[k].camera, points[i])) {
        seen.emplace_back(k, *px);
        if (strategy.kind == SelectionStrategy::Kind::Complement) break;
      }
    }
    if (seen.empty()) continue;
    auto row = out.rows.row(static_cast<Eigen::Index>(i));
    switch (strategy.kind) {
      case SelectionStrategy::Kind::Complement:
        detail::sample_image_feature(images[seen[0].first], seen[0].second, feat);
        row = feat;
        break;
      case SelectionStrategy::Kind::Random: {
        std::uniform_int_distribution<std::size_t> pick(0, seen.size() - 1);
        const auto& s = seen[pick(rng)];
        detail::sample_image_feature(images[s.first], s.second, feat);
        row = feat;
        break;
      }
      case SelectionStrategy::Kind::Mean:
        acc.setZero();
        for (const auto& s : seen) {
          detail::sample_image_feature(images[s.first], s.second, feat);
          acc += feat;
        }
        row = acc / static_cast<double>(seen.size());
        break;
    }
    out.valid[i] = 1;
  }
  return out;
}

struct ImagePatch {
  std::size_t image_index = 0;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive source box
  RgbImage raster;

  long area() const { return static_cast<long>(x1 - x0 + 1) * (y1 - y0 + 1); }
};

/// Projects the radius neighborhood of `center` into every image, keeps the
/// image whose bounding box of visible projections has the largest pixel
/// area (ties: lower index), and crops/resizes that box to patch_size^2.
inline std::optional<ImagePatch> extract_patch(const Point3& center, const SpatialHash& cloud,
                                               std::span<const PosedImage> images, double radius,
                                               int patch_size = kPatchSize) {
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "extract_patch: radius must be positive");
  auto members = cloud.radius(center, radius);
  std::optional<ImagePatch> best;
  for (std::size_t k = 0; k < images.size(); ++k) {
    const auto& cam = images[k].camera;
    bool any = false;
    double umin = 0, umax = 0, vmin = 0, vmax = 0;
    auto visit = [&](const Point3& p) {
      auto px = project(cam, p);
      if (!px) return;
      if (!any) {
        umin = umax = px->u;
        vmin = vmax = px->v;
        any = true;
      } else {
        umin = std::min(umin, px->u);
        umax = std::max(umax, px->u);
        vmin = std::min(vmin, px->v);
        vmax = std::max(vmax, px->v);
      }
    };
    visit(center);
    for (std::size_t i : members) visit(cloud.points()[i]);
    if (!any) continue;
    ImagePatch cand;
    cand.image_index = k;
    cand.x0 = static_cast<int>(std::floor(umin));
    cand.x1 = static_cast<int>(std::floor(umax));
    cand.y0 = static_cast<int>(std::floor(vmin));
    cand.y1 = static_cast<int>(std::floor(vmax));
    if (!best || cand.area() > best->area()) best = cand;
  }
  if (best) {
    best->raster = crop_resize_bilinear(images[best->image_index].pixels, best->x0, best->y0, best->x1, best->y1,
                                        patch_size, patch_size);
  }
  return best;
}

/// Deterministic patch descriptor: an 8x8 grid of block-mean (Y, Cb, Cr) and
/// a 4x4x4 joint RGB histogram. Each part is L2-normalized, the two are
/// concatenated, normalized again and zero-padded to `dim`.
inline Eigen::VectorXd patch_descriptor(const RgbImage& patch, std::size_t dim = kPatchFeatureDim) {
  constexpr int kGrid = 8;
  constexpr std::size_t kGridLen = 3 * kGrid * kGrid;
  constexpr std::size_t kHistLen = 64;
  if (patch.width < kGrid || patch.height < kGrid) throw Error(ErrorCode::InvalidArgument, "patch too small");
  if (dim < kGridLen + kHistLen) throw Error(ErrorCode::DimensionMismatch, "patch descriptor dim too small");

  Eigen::VectorXd grid = Eigen::VectorXd::Zero(kGridLen);
  Eigen::VectorXd hist = Eigen::VectorXd::Zero(kHistLen);
  for (int by = 0; by < kGrid; ++by) {
    const int ya = by * patch.height / kGrid, yb = (by + 1) * patch.height / kGrid;
    for (int bx = 0; bx < kGrid; ++bx) {
      const int xa = bx * patch.width / kGrid, xb = (bx + 1) * patch.width / kGrid;
      double ys = 0, cbs = 0, crs = 0;
      for (int y = ya; y < yb; ++y) {
        for (int x = xa; x < xb; ++x) {
          const double r = patch.value(x, y, 0), g = patch.value(x, y, 1), b = patch.value(x, y, 2);
          const double lum = 0.299 * r + 0.587 * g + 0.114 * b;
          ys += lum;
          cbs += 0.564 * (b - lum);
          crs += 0.713 * (r - lum);
        }
      }
      const double n = static_cast<double>((yb - ya) * (xb - xa));
      const Eigen::Index cell = by * kGrid + bx;
      grid(cell) = ys / n;
      grid(kGrid * kGrid + cell) = cbs / n;
      grid(2 * kGrid * kGrid + cell) = crs / n;
    }
  }
  for (int y = 0; y < patch.height; ++y) {
    for (int x = 0; x < patch.width; ++x) {
      const auto* p = patch.at(x, y);
      hist((p[0] / 64) * 16 + (p[1] / 64) * 4 + (p[2] / 64)) += 1.0;
    }
  }
  if (grid.norm() > 0.0) grid.normalize();
  hist.normalize();

  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  out.head(kGridLen) = grid;
  out.segment(kGridLen, kHistLen) = hist;
  out.normalize();
  return out;
}

// ---------------------------------------------------------------------------
// Fusion

/// Stage one: per level-0 point, [geometry | pixel] with each block
/// L2-normalized, mean-pooled along the parent maps up to `target_level`,
/// then re-normalized.
inline FeatureMatrix fuse_stage1(const FeatureMatrix& point_feats, const FeatureMatrix& pixel_feats,
                                 const HierarchicalCloud& cloud, std::size_t target_level) {
  const std::size_t n0 = cloud.levels.at(0).points.size();
  if (point_feats.size() != n0 || pixel_feats.size() != n0) {
    throw Error(ErrorCode::DimensionMismatch, "fuse_stage1: feature rows must match level-0 points");
  }
  if (target_level >= cloud.num_levels()) throw Error(ErrorCode::InvalidArgument, "fuse_stage1: bad level");
  const Eigen::Index dg = point_feats.rows.cols(), dp = pixel_feats.rows.cols();

  FeatureRows current(static_cast<Eigen::Index>(n0), dg + dp);
  current.leftCols(dg) = point_feats.rows;
  current.rightCols(dp) = pixel_feats.rows;
  for (Eigen::Index i = 0; i < current.rows(); ++i) {
    const double ng = current.row(i).head(dg).norm();
    const double np = current.row(i).tail(dp).norm();
    if (ng > 0.0) current.row(i).head(dg) /= ng;
    if (np > 0.0) current.row(i).tail(dp) /= np;
  }
  for (std::size_t k = 0; k < target_level; ++k) {
    const auto& parents = cloud.levels[k].parent_index;
    const auto n_next = static_cast<Eigen::Index>(cloud.levels[k + 1].points.size());
    FeatureRows pooled = FeatureRows::Zero(n_next, current.cols());
    std::vector<double> counts(static_cast<std::size_t>(n_next), 0.0);
    for (std::size_t i = 0; i < parents.size(); ++i) {
      pooled.row(static_cast<Eigen::Index>(parents[i])) += current.row(static_cast<Eigen::Index>(i));
      counts[parents[i]] += 1.0;
    }
    for (Eigen::Index j = 0; j < n_next; ++j)
      if (counts[static_cast<std::size_t>(j)] > 0.0) pooled.row(j) /= counts[static_cast<std::size_t>(j)];
    current = std::move(pooled);
  }
  normalize_rows(current);
  FeatureMatrix out{FeatureRole::Point3D, std::move(current), {}};
  out.valid.assign(out.size(), 1);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out.rows.row(static_cast<Eigen::Index>(i)).norm() == 0.0) out.valid[i] = 0;
  return out;
}

/// Single linear layer with ReLU mapping [f3d | f2d] to the fused dimension.
/// Rows are samples: out = relu(x * weight + bias).
struct FusionMap {
  Eigen::MatrixXd weight;  // (dim_3d + dim_2d) x dim_fused
  Eigen::RowVectorXd bias;
  std::uint64_t seed = 0;

  /// Gaussian weights in a concatenated-ReLU layout: the second half of the
  /// output columns is the negation of the first, so relu keeps both signs.
  static FusionMap seeded(std::size_t dim_3d, std::size_t dim_2d, std::size_t dim_fused, std::uint64_t seed) {
    const auto in = static_cast<Eigen::Index>(dim_3d + dim_2d);
    const auto half = static_cast<Eigen::Index>(dim_fused / 2);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(half)));
    FusionMap map;
    map.seed = seed;
    map.weight = Eigen::MatrixXd::Zero(in, static_cast<Eigen::Index>(dim_fused));
    for (Eigen::Index r = 0; r < in; ++r) {
      for (Eigen::Index c = 0; c < half; ++c) {
        const double w = gauss(rng);
        map.weight(r, c) = w;
        map.weight(r, c + half) = -w;
      }
    }
    map.bias = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(dim_fused));
    return map;
  }

  /// Passes the 3D block through unchanged (up to relu) and drops the 2D block.
  static FusionMap identity_block(std::size_t dim_3d, std::size_t dim_2d, std::size_t dim_fused) {
    FusionMap map;
    map.weight = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim_3d + dim_2d), static_cast<Eigen::Index>(dim_fused));
    for (std::size_t i = 0; i < std::min(dim_3d, dim_fused); ++i)
      map.weight(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0;
    map.bias = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(dim_fused));
    return map;
  }
};

/// Stage two: f* = normalize(relu([f3d | f2d] W + b)). Rows whose patch
/// feature is invalid use a zero 2D block and stay flagged invalid.
inline FeatureMatrix fuse_stage2(const FeatureMatrix& super_feats, const FeatureMatrix& patch_feats,
                                 const FusionMap& map) {
  if (super_feats.size() != patch_feats.size()) {
    throw Error(ErrorCode::DimensionMismatch, "fuse_stage2: row counts differ");
  }
  const auto d3 = static_cast<Eigen::Index>(super_feats.dim());
  const auto d2 = static_cast<Eigen::Index>(patch_feats.dim());
  if (map.weight.rows() != d3 + d2 || map.bias.size() != map.weight.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "fuse_stage2: fusion map shape does not match inputs");
  }
  FeatureRows input(super_feats.rows.rows(), d3 + d2);
  input.leftCols(d3) = super_feats.rows;
  input.rightCols(d2) = patch_feats.rows;
  FeatureMatrix out{FeatureRole::Fused, FeatureRows(input.rows(), map.weight.cols()), {}};
  out.valid.assign(super_feats.size(), 1);
  for (std::size_t i = 0; i < super_feats.size(); ++i) {
    if (!patch_feats.valid[i]) {
      input.row(static_cast<Eigen::Index>(i)).tail(d2).setZero();
      out.valid[i] = 0;
    }
  }
  out.rows = ((input * map.weight).rowwise() + map.bias).cwiseMax(0.0);
  normalize_rows(out.rows);
  return out;
}

}  // namespace coff
