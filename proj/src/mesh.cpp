#include "surfmap/mesh.hpp"

#include "surfmap/raster.hpp"

#include <boost/polygon/voronoi.hpp>

#include <algorithm>
#include <limits>
#include <unordered_map>

namespace surfmap {

namespace bp = boost::polygon;

std::vector<std::array<int, 3>> delaunay_triangles(const std::vector<Eigen::Vector2i>& points) {
  std::vector<bp::point_data<int>> sites;
  sites.reserve(points.size());
  for (const auto& p : points) sites.emplace_back(p.x(), p.y());
  bp::voronoi_diagram<double> vd;
  bp::construct_voronoi(sites.begin(), sites.end(), &vd);

  auto cross = [&](int a, int b, int c) {
    const std::int64_t abx = points[b].x() - points[a].x(), aby = points[b].y() - points[a].y();
    const std::int64_t acx = points[c].x() - points[a].x(), acy = points[c].y() - points[a].y();
    return abx * acy - aby * acx;
  };

  std::vector<std::array<int, 3>> tris;
  std::vector<int> ring;
  for (const auto& vertex : vd.vertices()) {
    // Each Voronoi vertex is dual to a Delaunay cell; cocircular lattice
    // points give cells with more than three sites, which are fanned.
    ring.clear();
    const auto* start = vertex.incident_edge();
    const auto* e = start;
    do {
      ring.push_back(static_cast<int>(e->cell()->source_index()));
      e = e->rot_next();
    } while (e != start);
    for (std::size_t k = 1; k + 1 < ring.size(); ++k) {
      std::array<int, 3> t{ring[0], ring[k], ring[k + 1]};
      const std::int64_t area = cross(t[0], t[1], t[2]);
      if (area == 0) continue;
      if (area < 0) std::swap(t[1], t[2]);
      tris.push_back(t);
    }
  }
  return tris;
}

namespace {

std::uint8_t majority_class(std::uint8_t a, std::uint8_t b, std::uint8_t c) {
  if (a == b || a == c) return a;
  if (b == c) return b;
  return std::min({a, b, c});
}

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

SemanticMesh triangulate_map(const FinalizedMap& map, const TriangulateOptions& options) {
  const GridGeometry& g = map.grid.geometry;
  std::vector<Eigen::Vector2i> cells;
  std::vector<std::uint8_t> classes;
  std::vector<double> elevations;
  for (int j = 0; j < g.height; ++j) {
    for (int i = 0; i < g.width; ++i) {
      if (map.counts(j, i) == 0) continue;
      cells.emplace_back(i, j);
      classes.push_back(map.grid.classes(j, i));
      elevations.push_back(map.elevation(j, i));
    }
  }
  if (cells.size() < 3) throw Error(ErrorKind::TooFewPatches, "fewer than three observed map cells");

  SemanticMesh mesh;
  mesh.vertices.resize(3, static_cast<Eigen::Index>(cells.size()));
  for (std::size_t n = 0; n < cells.size(); ++n) {
    const Eigen::Vector2d c = g.cell_center(cells[n].x(), cells[n].y());
    mesh.vertices.col(static_cast<Eigen::Index>(n)) << c.x(), c.y(), elevations[n];
  }

  const double max_len2 = options.max_edge_factor * options.max_edge_factor;
  auto too_long = [&](int a, int b) { return (cells[a] - cells[b]).cast<double>().squaredNorm() > max_len2; };
  std::vector<std::array<int, 3>> kept;
  for (const auto& t : delaunay_triangles(cells)) {
    if (too_long(t[0], t[1]) || too_long(t[1], t[2]) || too_long(t[2], t[0])) continue;
    kept.push_back(t);
  }
  std::sort(kept.begin(), kept.end());
  mesh.faces.resize(3, static_cast<Eigen::Index>(kept.size()));
  mesh.face_classes.reserve(kept.size());
  for (std::size_t f = 0; f < kept.size(); ++f) {
    mesh.faces.col(static_cast<Eigen::Index>(f)) << kept[f][0], kept[f][1], kept[f][2];
    mesh.face_classes.push_back(majority_class(classes[kept[f][0]], classes[kept[f][1]], classes[kept[f][2]]));
  }
  return mesh;
}

std::vector<bool> boundary_vertices(const SemanticMesh& mesh) {
  std::unordered_map<std::uint64_t, int> uses;
  for (Eigen::Index f = 0; f < mesh.num_faces(); ++f)
    for (int k = 0; k < 3; ++k) ++uses[edge_key(mesh.faces(k, f), mesh.faces((k + 1) % 3, f))];
  std::vector<bool> boundary(static_cast<std::size_t>(mesh.num_vertices()), false);
  for (const auto& [key, n] : uses) {
    if (n != 1) continue;
    boundary[key >> 32] = true;
    boundary[key & 0xffffffffu] = true;
  }
  return boundary;
}

Eigen::SparseMatrix<double> umbrella_operator(const SemanticMesh& mesh) {
  const auto n = static_cast<std::size_t>(mesh.num_vertices());
  std::vector<std::vector<int>> ring(n);
  for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const int a = mesh.faces(k, f);
      const int b = mesh.faces((k + 1) % 3, f);
      ring[a].push_back(b);
      ring[b].push_back(a);
    }
  }
  const std::vector<bool> boundary = boundary_vertices(mesh);
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t v = 0; v < n; ++v) {
    auto& nb = ring[v];
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    if (boundary[v] || nb.empty()) continue;
    const double w = 1.0 / static_cast<double>(nb.size());
    for (int u : nb) triplets.emplace_back(static_cast<int>(v), u, w);
    triplets.emplace_back(static_cast<int>(v), static_cast<int>(v), -1.0);
  }
  Eigen::SparseMatrix<double> L(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  L.setFromTriplets(triplets.begin(), triplets.end());
  return L;
}

Eigen::Matrix3Xd umbrella_laplacian(const SemanticMesh& mesh) {
  const Eigen::SparseMatrix<double> Lt = umbrella_operator(mesh).transpose();
  return mesh.vertices * Lt;
}

SemanticMesh taubin_smooth(const SemanticMesh& mesh, const TaubinOptions& options) {
  if (!(options.lambda > 0.0) || !(options.mu < -options.lambda))
    throw Error(ErrorKind::InvalidArgument, "Taubin requires lambda > 0 and mu < -lambda");
  if (options.iterations < 0) throw Error(ErrorKind::InvalidArgument, "negative iteration count");
  SemanticMesh out = mesh;
  if (options.iterations == 0 || mesh.num_vertices() == 0) return out;
  const Eigen::SparseMatrix<double> Lt = umbrella_operator(mesh).transpose();
  for (int it = 0; it < options.iterations; ++it) {
    out.vertices += options.lambda * (out.vertices * Lt);
    out.vertices += options.mu * (out.vertices * Lt);
  }
  return out;
}

RenderedLabelImage render_mesh(const SemanticMesh& mesh, const CameraView& view, double near) {
  const int w = view.K.width;
  const int h = view.K.height;
  RenderedLabelImage out{make_annotation(w, h),
                         Raster<double>::Constant(h, w, std::numeric_limits<double>::infinity())};
  if (mesh.num_faces() == 0) return out;
  const Eigen::Matrix3Xd cam =
      (view.world_to_cam.rotation_matrix() * mesh.vertices).colwise() + view.world_to_cam.translation();
  for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) {
    const std::uint8_t cls = mesh.face_classes[static_cast<std::size_t>(f)];
    rasterize_camera_triangle(cam.col(mesh.faces(0, f)), cam.col(mesh.faces(1, f)), cam.col(mesh.faces(2, f)),
                              view.K, near, [&](int c, int r, double depth) {
                                if (depth < out.depth(r, c)) {
                                  out.depth(r, c) = depth;
                                  out.labels(r, c) = cls;
                                }
                              });
  }
  return out;
}

}  // namespace surfmap
