#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coff/error.hpp"
#include "coff/geometry.hpp"
#include "coff/image.hpp"
#include "coff/io.hpp"

namespace coff::synth {

enum class SceneKind { TexturedPlane, SymmetricPair, Cluttered, SphereShell, MixedPlanarity };

inline std::string to_string(SceneKind k) {
  switch (k) {
    case SceneKind::TexturedPlane: return "textured_plane";
    case SceneKind::SymmetricPair: return "symmetric_pair";
    case SceneKind::Cluttered: return "cluttered";
    case SceneKind::SphereShell: return "sphere_shell";
    case SceneKind::MixedPlanarity: return "mixed_planarity";
  }
  return "unknown";
}

inline SceneKind parse_kind(const std::string& s) {
  for (auto k : {SceneKind::TexturedPlane, SceneKind::SymmetricPair, SceneKind::Cluttered, SceneKind::SphereShell,
                 SceneKind::MixedPlanarity})
    if (to_string(k) == s) return k;
  throw Error(ErrorCode::InvalidArgument, "unknown scene kind: " + s);
}

struct GeneratorParams {
  std::size_t num_pairs = 20;
  double region_size = 1.6;    // side of the square each cloud covers (m)
  double pair_offset = 0.5;    // distance between the P and Q region centers (m)
  double spacing = 0.02;       // surface sampling step (m)
  double noise_sigma = 0.002;  // Gaussian noise on point coordinates (m)
  double sensor_height = 1.5;
  std::size_t images_per_cloud = 5;
  int image_width = 160;
  int image_height = 120;
  double focal = 110.0;
  double cell_size = 0.1;      // texture checker cell (m)
  std::size_t planar_pairs = 4;  // mixed_planarity: number of floor-only pairs
};

// ---------------------------------------------------------------------------
// Scene description in world coordinates.

struct Box {
  Eigen::Vector3d lo, hi;
  std::uint64_t texture = 0;
};

struct Sphere {
  Eigen::Vector3d center;
  double radius = 0.0;
  std::uint64_t texture = 0;
};

struct Scene {
  bool has_floor = true;
  std::uint64_t floor_texture = 0;
  std::vector<Box> boxes;
  std::vector<Sphere> spheres;
};

namespace detail {

inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_cell(std::int64_t a, std::int64_t b, std::int64_t c, std::uint64_t seed) {
  std::uint64_t h = mix(seed);
  h = mix(h ^ static_cast<std::uint64_t>(a));
  h = mix(h ^ static_cast<std::uint64_t>(b));
  h = mix(h ^ static_cast<std::uint64_t>(c));
  return h;
}

// Random-colour checker cells plus a low-frequency sinusoid, keyed on world
// position so every view of a surface point sees the same colour.
inline Eigen::Vector3d texture_color(const Eigen::Vector3d& x, std::uint64_t texture, double cell) {
  const auto ix = static_cast<std::int64_t>(std::floor(x.x() / cell));
  const auto iy = static_cast<std::int64_t>(std::floor(x.y() / cell));
  const auto iz = static_cast<std::int64_t>(std::floor(x.z() / cell));
  const std::uint64_t h = hash_cell(ix, iy, iz, texture);
  Eigen::Vector3d c(static_cast<double>(h & 0xFF), static_cast<double>((h >> 8) & 0xFF),
                    static_cast<double>((h >> 16) & 0xFF));
  c /= 255.0;
  const double phase = static_cast<double>((texture >> 24) & 0xFF) / 255.0 * 2.0 * std::numbers::pi;
  const double wave = 0.5 + 0.5 * std::sin(7.0 * x.x() + 5.0 * x.y() + 3.0 * x.z() + phase);
  return (0.75 * c + 0.25 * Eigen::Vector3d::Constant(wave)).cwiseMax(0.0).cwiseMin(1.0);
}

struct Hit {
  double t = 0.0;
  Eigen::Vector3d point;
  std::uint64_t texture = 0;
};

inline std::optional<Hit> cast(const Scene& scene, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  std::optional<Hit> best;
  auto offer = [&](double t, std::uint64_t tex) {
    if (!(t > 1e-9)) return;
    if (!best || t < best->t) best = Hit{t, o + t * d, tex};
  };
  if (scene.has_floor && std::abs(d.z()) > 1e-12) offer(-o.z() / d.z(), scene.floor_texture);
  for (const auto& b : scene.boxes) {
    double t0 = -std::numeric_limits<double>::infinity(), t1 = std::numeric_limits<double>::infinity();
    bool miss = false;
    for (int a = 0; a < 3 && !miss; ++a) {
      if (std::abs(d[a]) < 1e-12) {
        if (o[a] < b.lo[a] || o[a] > b.hi[a]) miss = true;
        continue;
      }
      double ta = (b.lo[a] - o[a]) / d[a], tb = (b.hi[a] - o[a]) / d[a];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    }
    if (!miss && t0 <= t1) offer(t0, b.texture);
  }
  for (const auto& s : scene.spheres) {
    const Eigen::Vector3d oc = o - s.center;
    const double bq = oc.dot(d), cq = oc.squaredNorm() - s.radius * s.radius;
    const double disc = bq * bq - cq;
    if (disc < 0.0) continue;
    const double r = std::sqrt(disc);
    offer(-bq - r > 1e-9 ? -bq - r : -bq + r, s.texture);
  }
  return best;
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q.toRotationMatrix();
}

// Camera frame: x right, y down, z forward; world "up" is +y in the image.
inline RigidTransform look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
  const Eigen::Vector3d fwd = (target - eye).normalized();
  Eigen::Vector3d up = Eigen::Vector3d::UnitY();
  if (std::abs(fwd.dot(up)) > 0.99) up = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d right = fwd.cross(up).normalized();
  const Eigen::Vector3d down = fwd.cross(right);
  Eigen::Matrix3d r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = fwd.transpose();
  return {r, -r * eye};
}

inline void sample_rect_floor(const Eigen::Vector2d& lo, const Eigen::Vector2d& hi, double step, PointList& out) {
  for (double y = lo.y() + 0.5 * step; y < hi.y(); y += step)
    for (double x = lo.x() + 0.5 * step; x < hi.x(); x += step) out.emplace_back(x, y, 0.0);
}

inline void sample_box(const Box& b, double step, PointList& out) {
  auto face = [&](int fixed, double value, int a, int c) {
    for (double u = b.lo[a] + 0.5 * step; u < b.hi[a]; u += step) {
      for (double v = b.lo[c] + 0.5 * step; v < b.hi[c]; v += step) {
        Eigen::Vector3d p;
        p[fixed] = value;
        p[a] = u;
        p[c] = v;
        out.push_back(p);
      }
    }
  };
  face(2, b.hi.z(), 0, 1);  // top; the bottom rests on the floor
  face(0, b.lo.x(), 1, 2);
  face(0, b.hi.x(), 1, 2);
  face(1, b.lo.y(), 0, 2);
  face(1, b.hi.y(), 0, 2);
}

inline void sample_sphere(const Sphere& s, double step, PointList& out) {
  const double area = 4.0 * std::numbers::pi * s.radius * s.radius;
  const auto n = static_cast<std::size_t>(std::ceil(area / (step * step)));
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(i);
    out.push_back(s.center + s.radius * Eigen::Vector3d(r * std::cos(phi), r * std::sin(phi), z));
  }
}

inline bool in_rect(const Point3& p, const Eigen::Vector2d& lo, const Eigen::Vector2d& hi) {
  return p.x() >= lo.x() && p.x() < hi.x() && p.y() >= lo.y() && p.y() < hi.y();
}

}  // namespace detail

/// One generated cloud: world-frame sensor pose, points in the cloud frame,
/// and posed renders of the scene.
struct SyntheticCloud {
  RigidTransform world_from_cloud;
  PointList points;
  std::vector<RgbImage> images;
  std::vector<CameraModel> cameras;  // extrinsics map cloud coordinates to camera coordinates
};

struct SyntheticPair {
  Scene scene;
  SyntheticCloud p, q;
  RigidTransform gt;  // P coordinates -> Q coordinates
  SceneKind kind = SceneKind::TexturedPlane;
};

inline RgbImage render(const Scene& scene, const RigidTransform& cam_from_world, const Eigen::Matrix3d& k, int w,
                       int h, double cell) {
  RgbImage img(w, h);
  const RigidTransform world_from_cam = invert(cam_from_world);
  const Eigen::Matrix3d kinv = k.inverse();
  const Eigen::Vector3d eye = world_from_cam.translation();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector3d ray_cam = kinv * Eigen::Vector3d(x + 0.5, y + 0.5, 1.0);
      const Eigen::Vector3d dir = (world_from_cam.rotation() * ray_cam).normalized();
      Eigen::Vector3d c(0.05, 0.05, 0.08);
      if (const auto hit = detail::cast(scene, eye, dir)) c = detail::texture_color(hit->point, hit->texture, cell);
      auto* px = img.at(x, y);
      for (int ch = 0; ch < 3; ++ch) px[ch] = static_cast<std::uint8_t>(std::lround(255.0 * c[ch]));
    }
  }
  return img;
}

namespace detail {

struct Region {
  Eigen::Vector2d lo, hi;
  Eigen::Vector3d focus;  // point the sensor and cameras aim at
};

inline SyntheticCloud make_cloud(const Scene& scene, const PointList& world_points, const Region& region,
                                 const GeneratorParams& prm, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, prm.noise_sigma);
  SyntheticCloud cloud;
  const Eigen::Vector3d sensor = region.focus + Eigen::Vector3d(0.0, 0.0, prm.sensor_height);
  cloud.world_from_cloud = RigidTransform(random_rotation(rng), sensor);
  const RigidTransform cloud_from_world = invert(cloud.world_from_cloud);
  for (const auto& w : world_points) {
    if (!in_rect(w, region.lo, region.hi)) continue;
    Eigen::Vector3d p = w;
    if (prm.noise_sigma > 0.0) p += Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
    cloud.points.push_back(cloud_from_world(p));
  }
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  k(0, 0) = k(1, 1) = prm.focal;
  k(0, 2) = 0.5 * prm.image_width;
  k(1, 2) = 0.5 * prm.image_height;
  for (std::size_t c = 0; c < prm.images_per_cloud; ++c) {
    const Eigen::Vector3d eye = sensor + Eigen::Vector3d(0.3 * jitter(rng), 0.3 * jitter(rng), 0.2 * jitter(rng));
    const Eigen::Vector3d target = region.focus + Eigen::Vector3d(0.4 * jitter(rng), 0.4 * jitter(rng), 0.0);
    const RigidTransform cam_from_world = look_at(eye, target);
    cloud.images.push_back(render(scene, cam_from_world, k, prm.image_width, prm.image_height, prm.cell_size));
    CameraModel cam;
    cam.intrinsic = k;
    cam.extrinsic = compose(cam_from_world, cloud.world_from_cloud);
    cam.width = prm.image_width;
    cam.height = prm.image_height;
    cloud.cameras.push_back(cam);
  }
  return cloud;
}

inline SyntheticPair make_sphere_pair(const GeneratorParams& prm, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  SyntheticPair pair;
  pair.kind = SceneKind::SphereShell;
  pair.scene.has_floor = false;
  const Sphere s{Eigen::Vector3d(0.0, 0.0, 0.5), 0.5, rng()};
  pair.scene.spheres.push_back(s);
  PointList world;
  sample_sphere(s, prm.spacing, world);
  // P and Q see overlapping caps from two directions 60 degrees apart.
  const double az = 2.0 * std::numbers::pi * u01(rng);
  const Eigen::Vector3d dp(std::cos(az), std::sin(az), 0.6);
  const Eigen::Vector3d dq(std::cos(az + std::numbers::pi / 3.0), std::sin(az + std::numbers::pi / 3.0), 0.6);
  std::normal_distribution<double> noise(0.0, prm.noise_sigma);
  auto make = [&](const Eigen::Vector3d& dir) {
    Region r;
    r.focus = s.center;
    const Eigen::Vector3d d = dir.normalized();
    SyntheticCloud cloud;
    const Eigen::Vector3d sensor = s.center + d * (s.radius + prm.sensor_height);
    cloud.world_from_cloud = RigidTransform(random_rotation(rng), sensor);
    const RigidTransform cloud_from_world = invert(cloud.world_from_cloud);
    for (const auto& w : world) {
      if ((w - s.center).normalized().dot(d) < 0.1) continue;
      Eigen::Vector3d p = w;
      if (prm.noise_sigma > 0.0) p += Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
      cloud.points.push_back(cloud_from_world(p));
    }
    Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
    k(0, 0) = k(1, 1) = prm.focal;
    k(0, 2) = 0.5 * prm.image_width;
    k(1, 2) = 0.5 * prm.image_height;
    for (std::size_t c = 0; c < prm.images_per_cloud; ++c) {
      const Eigen::Vector3d eye = sensor + 0.2 * Eigen::Vector3d(u01(rng) - 0.5, u01(rng) - 0.5, u01(rng) - 0.5);
      const RigidTransform cam_from_world = look_at(eye, s.center);
      cloud.images.push_back(render(pair.scene, cam_from_world, k, prm.image_width, prm.image_height, prm.cell_size));
      CameraModel cam;
      cam.intrinsic = k;
      cam.extrinsic = compose(cam_from_world, cloud.world_from_cloud);
      cam.width = prm.image_width;
      cam.height = prm.image_height;
      cloud.cameras.push_back(cam);
    }
    return cloud;
  };
  pair.p = make(dp);
  pair.q = make(dq);
  pair.gt = compose(invert(pair.q.world_from_cloud), pair.p.world_from_cloud);
  return pair;
}

}  // namespace detail

/// Builds one synthetic pair. All randomness flows from `seed`.
inline SyntheticPair make_pair(SceneKind kind, const GeneratorParams& prm, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  if (kind == SceneKind::SphereShell) return detail::make_sphere_pair(prm, rng);
  if (kind == SceneKind::MixedPlanarity) throw Error(ErrorCode::InvalidArgument, "make_pair: mixed is a manifest kind");

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  SyntheticPair pair;
  pair.kind = kind;
  pair.scene.floor_texture = rng();
  const Eigen::Vector2d center(4.0 * u01(rng) - 2.0, 4.0 * u01(rng) - 2.0);
  const double theta = 2.0 * std::numbers::pi * u01(rng);
  const Eigen::Vector2d shift = prm.pair_offset * Eigen::Vector2d(std::cos(theta), std::sin(theta));
  const Eigen::Vector2d half = Eigen::Vector2d::Constant(0.5 * prm.region_size);
  const Eigen::Vector2d cp = center - 0.5 * shift, cq = center + 0.5 * shift;

  if (kind == SceneKind::SymmetricPair) {
    // Two identical boxes mirrored about the overlap center, textured differently.
    const Eigen::Vector2d axis(-std::sin(theta), std::cos(theta));
    const double side = 0.3, height = 0.3, gap = 0.35;
    for (double sgn : {-1.0, 1.0}) {
      const Eigen::Vector2d c = center + sgn * gap * axis;
      Box b;
      b.lo = Eigen::Vector3d(c.x() - 0.5 * side, c.y() - 0.5 * side, 0.0);
      b.hi = Eigen::Vector3d(c.x() + 0.5 * side, c.y() + 0.5 * side, height);
      b.texture = rng();
      pair.scene.boxes.push_back(b);
    }
  } else if (kind == SceneKind::Cluttered) {
    const int n_boxes = 2 + static_cast<int>(u01(rng) * 3.0);
    for (int i = 0; i < n_boxes; ++i) {
      const Eigen::Vector2d c = center + Eigen::Vector2d(1.2 * u01(rng) - 0.6, 1.2 * u01(rng) - 0.6);
      const Eigen::Vector3d size(0.15 + 0.25 * u01(rng), 0.15 + 0.25 * u01(rng), 0.1 + 0.3 * u01(rng));
      Box b;
      b.lo = Eigen::Vector3d(c.x() - 0.5 * size.x(), c.y() - 0.5 * size.y(), 0.0);
      b.hi = Eigen::Vector3d(c.x() + 0.5 * size.x(), c.y() + 0.5 * size.y(), size.z());
      b.texture = rng();
      pair.scene.boxes.push_back(b);
    }
    const int n_spheres = 1 + static_cast<int>(u01(rng) * 2.0);
    for (int i = 0; i < n_spheres; ++i) {
      const Eigen::Vector2d c = center + Eigen::Vector2d(1.2 * u01(rng) - 0.6, 1.2 * u01(rng) - 0.6);
      const double r = 0.08 + 0.12 * u01(rng);
      pair.scene.spheres.push_back({Eigen::Vector3d(c.x(), c.y(), r), r, rng()});
    }
  }

  PointList world;
  const Eigen::Vector2d lo = center - half - 0.5 * shift.cwiseAbs(), hi = center + half + 0.5 * shift.cwiseAbs();
  detail::sample_rect_floor(lo, hi, prm.spacing, world);
  if (!pair.scene.boxes.empty() || !pair.scene.spheres.empty()) {
    // Drop floor samples hidden under objects, then add object surfaces.
    std::erase_if(world, [&](const Point3& p) {
      for (const auto& b : pair.scene.boxes)
        if (p.x() > b.lo.x() && p.x() < b.hi.x() && p.y() > b.lo.y() && p.y() < b.hi.y()) return true;
      return false;
    });
    for (const auto& b : pair.scene.boxes) detail::sample_box(b, prm.spacing, world);
    for (const auto& s : pair.scene.spheres) detail::sample_sphere(s, prm.spacing, world);
  }

  const detail::Region rp{cp - half, cp + half, Eigen::Vector3d(cp.x(), cp.y(), 0.0)};
  const detail::Region rq{cq - half, cq + half, Eigen::Vector3d(cq.x(), cq.y(), 0.0)};
  pair.p = detail::make_cloud(pair.scene, world, rp, prm, rng);
  pair.q = detail::make_cloud(pair.scene, world, rq, prm, rng);
  pair.gt = compose(invert(pair.q.world_from_cloud), pair.p.world_from_cloud);
  return pair;
}

/// Seed for pair `index` of a benchmark generated with `seed`.
inline std::uint64_t pair_seed(std::uint64_t seed, std::size_t index) {
  return detail::mix(seed * 0x100000001B3ULL + index);
}

/// Kind of pair `index` in a generated benchmark. The mixed manifest puts
/// its planar pairs at evenly spread indices.
inline SceneKind pair_kind(SceneKind kind, const GeneratorParams& prm, std::size_t index) {
  if (kind != SceneKind::MixedPlanarity) return kind;
  const std::size_t n = prm.num_pairs, k = std::min(prm.planar_pairs, prm.num_pairs);
  for (std::size_t j = 0; j < k; ++j)
    if (index == j * n / k) return SceneKind::TexturedPlane;
  return SceneKind::SphereShell;
}

/// Writes clouds, images and a manifest under `out_dir`; returns the manifest.
/// Identical arguments produce identical bytes.
inline io::DatasetManifest generate(SceneKind kind, const GeneratorParams& prm, std::uint64_t seed,
                                    const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "clouds");
  fs::create_directories(out_dir / "images");
  io::DatasetManifest manifest;
  manifest.base_dir = out_dir;
  for (std::size_t i = 0; i < prm.num_pairs; ++i) {
    const SceneKind k = pair_kind(kind, prm, i);
    const SyntheticPair pair = make_pair(k, prm, pair_seed(seed, i));
    char pid[32];
    std::snprintf(pid, sizeof pid, "pair_%03zu", i);
    for (int side = 0; side < 2; ++side) {
      const SyntheticCloud& cloud = side == 0 ? pair.p : pair.q;
      const std::string cid = std::string(pid) + (side == 0 ? "_p" : "_q");
      io::CloudEntry entry;
      entry.cloud = "clouds/" + cid + ".ply";
      io::PointCloud pc;
      pc.points = cloud.points;
      io::save_ply(out_dir / entry.cloud, pc);
      for (std::size_t c = 0; c < cloud.images.size(); ++c) {
        io::ImageEntry img;
        img.image = "images/" + cid + "_" + std::to_string(c) + ".ppm";
        io::save_image(out_dir / img.image, cloud.images[c]);
        img.intrinsic = cloud.cameras[c].intrinsic;
        img.extrinsic = cloud.cameras[c].extrinsic.matrix();
        img.width = cloud.cameras[c].width;
        img.height = cloud.cameras[c].height;
        entry.images.push_back(std::move(img));
      }
      manifest.clouds.emplace(cid, std::move(entry));
    }
    io::PairEntry pe;
    pe.id = pid;
    pe.cloud_p = std::string(pid) + "_p";
    pe.cloud_q = std::string(pid) + "_q";
    pe.gt = pair.gt.matrix();
    manifest.pairs.push_back(std::move(pe));
  }
  io::save_manifest(out_dir / "manifest.json", manifest);
  return manifest;
}

}  // namespace coff::synth
