#pragma once

// Shared fixtures and brute-force oracles for the test suites.

#include "surfmap/geometry.hpp"
#include "surfmap/mesh.hpp"
#include "surfmap/plan.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <queue>
#include <random>
#include <vector>

namespace surfmap::test {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline RigidTransformd random_transform(std::mt19937_64& rng, double max_translation = 5.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return {q, Vec3(uniform(rng, -max_translation, max_translation), uniform(rng, -max_translation, max_translation),
                  uniform(rng, -max_translation, max_translation))};
}

// Rotation matrix from a unit quaternion, written out term by term.
inline Eigen::Matrix3d quaternion_matrix(const Eigen::Quaterniond& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

inline Eigen::Matrix4d homogeneous(const RigidTransformd& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = quaternion_matrix(t.rotation());
  m.topRightCorner<3, 1>() = t.translation();
  return m;
}

// Camera looking straight down from height h, image x along world +x.
inline RigidTransformd downward_camera(double h) {
  Eigen::Matrix3d r;  // columns: camera axes in world
  r.col(0) = Vec3(1, 0, 0);
  r.col(1) = Vec3(0, -1, 0);
  r.col(2) = Vec3(0, 0, -1);
  return RigidTransformd(Eigen::Quaterniond(r), Vec3(0, 0, h)).inverse();  // world_to_cam
}

// Finalized map where `cls(i, j)` > 0 marks an observed cell of that class
// and `z(i, j)` gives its elevation.
template <typename ClassFn, typename ElevFn>
FinalizedMap make_finalized(const GridGeometry& g, ClassFn cls, ElevFn z) {
  FinalizedMap m;
  m.grid.geometry = g;
  m.grid.classes = make_annotation(g.width, g.height);
  m.elevation = Raster<double>::Constant(g.height, g.width, std::numeric_limits<double>::quiet_NaN());
  m.counts = Raster<std::uint32_t>::Zero(g.height, g.width);
  m.low_confidence = Raster<std::uint8_t>::Zero(g.height, g.width);
  for (int j = 0; j < g.height; ++j)
    for (int i = 0; i < g.width; ++i) {
      const int c = cls(i, j);
      if (c <= 0) continue;
      m.grid.classes(j, i) = static_cast<std::uint8_t>(c);
      m.counts(j, i) = 1;
      m.elevation(j, i) = z(i, j);
    }
  return m;
}

// Mesh of an n x n block of cells (resolution 1) on z = 0 plus Gaussian noise.
inline SemanticMesh noisy_plane_mesh(int n, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  Raster<double> z(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) z(j, i) = noise(rng);
  return triangulate_map(make_finalized(GridGeometry{0, 0, 1.0, n, n}, [](int, int) { return 2; },
                                        [&](int i, int j) { return z(j, i); }));
}

// Brute-force render: one ray per pixel centre, Moller-Trumbore against
// every face in camera coordinates. Nearest hit with z >= near wins; the
// lower face index wins equal depths.
inline RenderedLabelImage raycast_mesh(const SemanticMesh& mesh, const CameraView& view, double near = 0.1) {
  const auto& K = view.K;
  RenderedLabelImage out{make_annotation(K.width, K.height),
                         Raster<double>::Constant(K.height, K.width, std::numeric_limits<double>::infinity())};
  std::vector<Vec3> cam(static_cast<std::size_t>(mesh.num_vertices()));
  for (Eigen::Index v = 0; v < mesh.num_vertices(); ++v)
    cam[static_cast<std::size_t>(v)] = view.world_to_cam * Vec3(mesh.vertices.col(v));
  for (int r = 0; r < K.height; ++r)
    for (int c = 0; c < K.width; ++c) {
      const Vec3 d((c - K.cx) / K.fx, (r - K.cy) / K.fy, 1.0);
      for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) {
        const Vec3& a = cam[static_cast<std::size_t>(mesh.faces(0, f))];
        const Vec3 e1 = cam[static_cast<std::size_t>(mesh.faces(1, f))] - a;
        const Vec3 e2 = cam[static_cast<std::size_t>(mesh.faces(2, f))] - a;
        const Vec3 pv = d.cross(e2);
        const double det = e1.dot(pv);
        if (std::abs(det) < 1e-14) continue;
        const Vec3 tv = -a;
        const double u = tv.dot(pv) / det;
        if (u < 0 || u > 1) continue;
        const Vec3 qv = tv.cross(e1);
        const double v = d.dot(qv) / det;
        if (v < 0 || u + v > 1) continue;
        const double t = e2.dot(qv) / det;  // equals camera z because d.z() == 1
        if (t < near || !(t < out.depth(r, c))) continue;
        out.depth(r, c) = t;
        out.labels(r, c) = mesh.face_classes[static_cast<std::size_t>(f)];
      }
    }
  return out;
}

// Plain Dijkstra over the same 8-connected graph and step rule.
inline double dijkstra(const Costmap& cm, const Eigen::Vector2i& s, const Eigen::Vector2i& t) {
  const int w = static_cast<int>(cm.cost.cols()), h = static_cast<int>(cm.cost.rows());
  std::vector<double> dist(static_cast<std::size_t>(w * h), kImpassable);
  using E = std::pair<double, int>;
  std::priority_queue<E, std::vector<E>, std::greater<>> q;
  dist[s.y() * w + s.x()] = 0;
  q.emplace(0.0, s.y() * w + s.x());
  while (!q.empty()) {
    const auto [d, u] = q.top();
    q.pop();
    if (d > dist[u]) continue;
    const int ui = u % w, uj = u / w;
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        const int vi = ui + di, vj = uj + dj;
        if ((di == 0 && dj == 0) || vi < 0 || vj < 0 || vi >= w || vj >= h || !std::isfinite(cm.cost(vj, vi)))
          continue;
        const double nd = d + std::sqrt(static_cast<double>(di * di + dj * dj)) * 0.5 * (cm.cost(uj, ui) + cm.cost(vj, vi));
        if (nd < dist[vj * w + vi]) {
          dist[vj * w + vi] = nd;
          q.emplace(nd, vj * w + vi);
        }
      }
  }
  return dist[t.y() * w + t.x()];
}

}  // namespace surfmap::test
