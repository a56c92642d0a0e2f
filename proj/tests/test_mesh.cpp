#include "support.hpp"

#include "surfmap/mesh.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

using namespace surfmap;

namespace {

using P = Eigen::Vector2i;

std::int64_t cross(const P& o, const P& a, const P& b) {
  return static_cast<std::int64_t>(a.x() - o.x()) * (b.y() - o.y()) -
         static_cast<std::int64_t>(a.y() - o.y()) * (b.x() - o.x());
}

// > 0 when d is strictly inside the circumcircle of counter-clockwise abc.
__int128 incircle(const P& a, const P& b, const P& c, const P& d) {
  auto row = [&](const P& p) {
    const __int128 x = p.x() - d.x(), y = p.y() - d.y();
    return std::array<__int128, 3>{x, y, x * x + y * y};
  };
  const auto A = row(a), B = row(b), C = row(c);
  return A[0] * (B[1] * C[2] - B[2] * C[1]) - A[1] * (B[0] * C[2] - B[2] * C[0]) + A[2] * (B[0] * C[1] - B[1] * C[0]);
}

// Strict convex hull (Andrew's monotone chain), counter-clockwise.
std::vector<P> hull(std::vector<P> pts) {
  std::sort(pts.begin(), pts.end(), [](const P& a, const P& b) { return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y(); });
  std::vector<P> h(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

std::size_t points_on_hull(const std::vector<P>& pts, const std::vector<P>& h) {
  std::size_t n = 0;
  for (const auto& p : pts) {
    for (std::size_t e = 0; e < h.size(); ++e) {
      const P& a = h[e];
      const P& b = h[(e + 1) % h.size()];
      if (cross(a, b, p) == 0 && std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
          std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y())) {
        ++n;
        break;
      }
    }
  }
  return n;
}

// Connected components of the face adjacency through shared vertices.
int components(const SemanticMesh& m) {
  std::vector<int> parent(static_cast<std::size_t>(m.num_vertices()));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  std::set<int> used;
  for (Eigen::Index f = 0; f < m.num_faces(); ++f)
    for (int k = 0; k < 3; ++k) {
      used.insert(m.faces(k, f));
      parent[find(m.faces(k, f))] = find(m.faces((k + 1) % 3, f));
    }
  std::set<int> roots;
  for (int v : used) roots.insert(find(v));
  return static_cast<int>(roots.size());
}

double mean_interior_laplacian(const SemanticMesh& m) {
  const Eigen::Matrix3Xd L = umbrella_laplacian(m);
  const auto boundary = boundary_vertices(m);
  double sum = 0;
  int n = 0;
  for (Eigen::Index v = 0; v < m.num_vertices(); ++v) {
    if (boundary[static_cast<std::size_t>(v)]) continue;
    sum += L.col(v).norm();
    ++n;
  }
  return sum / n;
}

double bbox_diagonal(const SemanticMesh& m) {
  return (m.vertices.rowwise().maxCoeff() - m.vertices.rowwise().minCoeff()).norm();
}

}  // namespace

TEST_CASE("three observed cells give one triangle") {
  const GridGeometry g{0, 0, 0.25, 4, 4};
  const auto map = test::make_finalized(
      g, [](int i, int j) { return (i == 0 && j == 0) || (i == 1 && j == 0) || (i == 0 && j == 1) ? 1 + i + 2 * j : 0; },
      [](int i, int) { return 0.1 * i; });
  const SemanticMesh m = triangulate_map(map);
  REQUIRE(m.num_vertices() == 3);
  REQUIRE(m.num_faces() == 1);
  CHECK(m.face_classes[0] == 1);  // classes 1, 2, 3 all differ: lowest
  const Vec3 a = m.vertices.col(m.faces(0, 0)), b = m.vertices.col(m.faces(1, 0)), c = m.vertices.col(m.faces(2, 0));
  CHECK((b - a).cross(c - a).z() > 0);  // counter-clockwise seen from above
  // vertices sit on cell centres, lifted to the elevation
  std::set<std::pair<double, double>> xy;
  for (int v = 0; v < 3; ++v) {
    xy.insert({m.vertices(0, v), m.vertices(1, v)});
    CHECK(m.vertices(2, v) == doctest::Approx(0.1 * std::lround((m.vertices(0, v) - 0.125) / 0.25)));
  }
  CHECK(xy == std::set<std::pair<double, double>>{{0.125, 0.125}, {0.375, 0.125}, {0.125, 0.375}});
}

TEST_CASE("too few cells") {
  const GridGeometry g{0, 0, 1, 3, 3};
  CHECK_THROWS_AS(triangulate_map(test::make_finalized(g, [](int i, int j) { return j == 0 && (i == 0 || i == 2); },
                                                       [](int, int) { return 0.0; })),
                  Error);
  try {
    triangulate_map(test::make_finalized(g, [](int i, int j) { return i == 1 && j == 1; }, [](int, int) { return 0.0; }));
    FAIL("expected TooFewPatches");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TooFewPatches);
  }
  // three collinear cells are enough cells but span no triangle
  CHECK(triangulate_map(test::make_finalized(g, [](int i, int) { return i == 1; }, [](int, int) { return 0.0; }))
            .num_faces() == 0);
}

TEST_CASE("regular grid face count") {
  for (int n : {2, 3, 5, 10, 17}) {
    const GridGeometry g{0, 0, 0.25, n + 2, n + 2};
    const auto map = test::make_finalized(
        g, [&](int i, int j) { return i >= 1 && j >= 1 && i <= n && j <= n; }, [](int, int) { return 0.0; });
    const SemanticMesh m = triangulate_map(map);
    CHECK(m.num_vertices() == n * n);
    CHECK(m.num_faces() == 2 * (n - 1) * (n - 1));
    // every face is a half cell: area res^2 / 2
    for (Eigen::Index f = 0; f < m.num_faces(); ++f) {
      const Vec3 a = m.vertices.col(m.faces(0, f)), b = m.vertices.col(m.faces(1, f)),
                 c = m.vertices.col(m.faces(2, f));
      CHECK(0.5 * (b - a).cross(c - a).z() == doctest::Approx(0.25 * 0.25 / 2));
    }
  }
}

TEST_CASE("Delaunay triangles: empty circles and full hull cover") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const int span = trial < 20 ? 8 : 60;
    std::set<std::pair<int, int>> unique;
    const int want = 10 + static_cast<int>(rng() % 60);
    while (static_cast<int>(unique.size()) < std::min(want, span * span / 2))
      unique.insert({static_cast<int>(rng() % span), static_cast<int>(rng() % span)});
    std::vector<P> pts;
    for (auto [x, y] : unique) pts.emplace_back(x, y);
    const auto h = hull(pts);
    if (h.size() < 3) continue;
    const auto tris = delaunay_triangles(pts);

    std::int64_t area2 = 0;
    for (const auto& t : tris) {
      const std::int64_t a = cross(pts[t[0]], pts[t[1]], pts[t[2]]);
      CHECK(a > 0);
      area2 += a;
      for (std::size_t q = 0; q < pts.size(); ++q) {
        if (static_cast<int>(q) == t[0] || static_cast<int>(q) == t[1] || static_cast<int>(q) == t[2]) continue;
        CHECK(incircle(pts[t[0]], pts[t[1]], pts[t[2]], pts[q]) <= 0);
      }
    }
    std::int64_t hull2 = 0;
    for (std::size_t e = 1; e + 1 < h.size(); ++e) hull2 += cross(h[0], h[e], h[e + 1]);
    CHECK(area2 == hull2);
    CHECK(tris.size() == 2 * pts.size() - 2 - points_on_hull(pts, h));
  }
}

TEST_CASE("long edges are dropped, separating clusters") {
  const GridGeometry g{0, 0, 0.5, 20, 6};
  // two 3x3 blocks, four empty columns apart
  const auto map = test::make_finalized(
      g, [](int i, int j) { return j >= 1 && j <= 3 && (i <= 2 || (i >= 7 && i <= 9)); },
      [](int, int) { return 0.0; });
  const SemanticMesh m = triangulate_map(map);
  CHECK(m.num_faces() == 16);
  CHECK(components(m) == 2);
  for (Eigen::Index f = 0; f < m.num_faces(); ++f)
    for (int k = 0; k < 3; ++k) {
      const double len = (m.vertices.col(m.faces(k, f)) - m.vertices.col(m.faces((k + 1) % 3, f))).norm();
      CHECK(len <= 3 * 0.5 + 1e-12);
    }

  // an edge of exactly three cells is kept, four is not
  auto faces_with_span = [&](int span) {
    const GridGeometry g2{0, 0, 1, 12, 3};
    return triangulate_map(test::make_finalized(
                               g2, [&](int i, int j) { return (j == 0 && (i == 0 || i == span)) || (j == 2 && i == 1); },
                               [](int, int) { return 0.0; }))
        .num_faces();
  };
  CHECK(faces_with_span(3) == 1);
  CHECK(faces_with_span(4) == 0);
}

TEST_CASE("face class is the vertex majority") {
  const GridGeometry g{0, 0, 1, 2, 2};
  auto face_class = [&](int a, int b, int c) {
    const int cls[4] = {a, b, c, 0};
    const auto m = triangulate_map(
        test::make_finalized(g, [&](int i, int j) { return cls[j * 2 + i]; }, [](int, int) { return 0.0; }));
    REQUIRE(m.num_faces() == 1);
    return static_cast<int>(m.face_classes[0]);
  };
  CHECK(face_class(3, 3, 1) == 3);
  CHECK(face_class(2, 4, 4) == 4);
  CHECK(face_class(1, 2, 1) == 1);
  CHECK(face_class(4, 2, 3) == 2);
}

TEST_CASE("umbrella Laplacian against a one-ring oracle") {
  const SemanticMesh m = test::noisy_plane_mesh(8, 0.1, 4);
  const Eigen::Matrix3Xd L = umbrella_laplacian(m);
  const auto boundary = boundary_vertices(m);
  std::vector<std::set<int>> ring(static_cast<std::size_t>(m.num_vertices()));
  for (Eigen::Index f = 0; f < m.num_faces(); ++f)
    for (int k = 0; k < 3; ++k) {
      ring[m.faces(k, f)].insert(m.faces((k + 1) % 3, f));
      ring[m.faces((k + 1) % 3, f)].insert(m.faces(k, f));
    }
  int interior = 0;
  for (Eigen::Index v = 0; v < m.num_vertices(); ++v) {
    // grid boundary: x or y equal to the extreme cell centres
    const bool on_edge = m.vertices(0, v) == 0.5 || m.vertices(0, v) == 7.5 || m.vertices(1, v) == 0.5 ||
                         m.vertices(1, v) == 7.5;
    CHECK(boundary[static_cast<std::size_t>(v)] == on_edge);
    if (on_edge) {
      CHECK(L.col(v).isZero());
      continue;
    }
    ++interior;
    Vec3 mean = Vec3::Zero();
    for (int u : ring[v]) mean += m.vertices.col(u);
    mean /= static_cast<double>(ring[v].size());
    CHECK((L.col(v) - (mean - m.vertices.col(v))).norm() < 1e-12);
  }
  CHECK(interior == 36);
}

TEST_CASE("Taubin keeps planes planar and is the identity at zero iterations") {
  const GridGeometry g{0, 0, 0.5, 12, 12};
  const auto map = test::make_finalized(
      g, [](int i, int j) { return 1 + (i + j) % 4; },
      [&](int i, int j) { return 0.3 * g.cell_center(i, j).x() - 0.2 * g.cell_center(i, j).y() + 1.0; });
  const SemanticMesh m = triangulate_map(map);
  const SemanticMesh s = taubin_smooth(m);
  for (Eigen::Index v = 0; v < s.num_vertices(); ++v)
    CHECK(s.vertices(2, v) == doctest::Approx(0.3 * s.vertices(0, v) - 0.2 * s.vertices(1, v) + 1.0).epsilon(1e-12));
  CHECK(s.faces == m.faces);
  CHECK(s.face_classes == m.face_classes);
  const auto boundary = boundary_vertices(m);
  for (Eigen::Index v = 0; v < m.num_vertices(); ++v)
    if (boundary[static_cast<std::size_t>(v)]) CHECK(s.vertices.col(v) == m.vertices.col(v));

  // a flat level grid is a fixed point
  const auto flat = triangulate_map(test::make_finalized(g, [](int, int) { return 2; }, [](int, int) { return 0.0; }));
  const auto flat_s = taubin_smooth(flat);
  CHECK((flat_s.vertices - flat.vertices).cwiseAbs().maxCoeff() < 1e-12);

  TaubinOptions none;
  none.iterations = 0;
  CHECK(taubin_smooth(m, none).vertices == m.vertices);
}

TEST_CASE("Taubin rejects the shrinking regime") {
  const SemanticMesh m = test::noisy_plane_mesh(4, 0.05, 1);
  CHECK_THROWS_AS(taubin_smooth(m, {0.5, -0.4, 10}), Error);
  CHECK_THROWS_AS(taubin_smooth(m, {0.0, -0.53, 10}), Error);
  CHECK_THROWS_AS(taubin_smooth(m, {0.5, -0.53, -1}), Error);
  CHECK_NOTHROW(taubin_smooth(m, {0.5, -0.53, 1}));
}

TEST_CASE("Taubin removes noise from a plane without shrinking it") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const SemanticMesh m = test::noisy_plane_mesh(50, 0.05, seed);
    const SemanticMesh s = taubin_smooth(m);
    CHECK(mean_interior_laplacian(s) < 0.25 * mean_interior_laplacian(m));
    CHECK(bbox_diagonal(s) > 0.98 * bbox_diagonal(m));
    // noise amplitude drops as well
    CHECK(s.vertices.row(2).cwiseAbs().mean() < m.vertices.row(2).cwiseAbs().mean());
  }
}

TEST_CASE("render: triangle behind the camera draws nothing") {
  const CameraIntrinsics K{50, 50, 19.5, 14.5, 40, 30};
  SemanticMesh m;
  m.vertices.resize(3, 3);
  m.vertices << -1, 1, 0, -1, -1, 1, -5, -5, -5;  // camera frame z < 0
  m.faces.resize(3, 1);
  m.faces << 0, 1, 2;
  m.face_classes = {2};
  const CameraView view{RigidTransformd(), K};
  const auto img = render_mesh(m, view);
  CHECK((img.labels.array() == 0).all());
  CHECK(img.depth.array().isInf().all());
}

TEST_CASE("render: frustum-filling triangle at constant depth") {
  const CameraIntrinsics K{50, 50, 19.5, 14.5, 40, 30};
  SemanticMesh m;
  m.vertices.resize(3, 3);
  m.vertices << -100, 100, 0, -100, -100, 100, 5, 5, 5;
  m.faces.resize(3, 1);
  m.faces << 0, 2, 1;
  m.face_classes = {3};
  const auto img = render_mesh(m, CameraView{RigidTransformd(), K});
  CHECK((img.labels.array() == 3).all());
  CHECK((img.depth.array() - 5.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("render agrees with ray casting on random scenes") {
  std::mt19937_64 rng(2024);
  const CameraIntrinsics K{120, 120, 79.5, 59.5, 160, 120};
  std::size_t agree = 0, total = 0;
  for (int scene = 0; scene < 5; ++scene) {
    SemanticMesh m;
    m.vertices.resize(3, 150);
    m.faces.resize(3, 50);
    for (int f = 0; f < 50; ++f) {
      const Vec3 c(test::uniform(rng, -3, 3), test::uniform(rng, -2, 2), test::uniform(rng, 2, 12));
      for (int k = 0; k < 3; ++k) {
        m.vertices.col(3 * f + k) = c + Vec3(test::uniform(rng, -1.5, 1.5), test::uniform(rng, -1.5, 1.5),
                                             test::uniform(rng, -1.5, 1.5));
        m.faces(k, f) = 3 * f + k;
      }
      m.face_classes.push_back(static_cast<std::uint8_t>(1 + rng() % 4));
    }
    const CameraView view{test::random_transform(rng, 0.0) * RigidTransformd(), K};
    const CameraView front{RigidTransformd(), K};
    for (const auto& v : {front, view}) {
      const auto a = render_mesh(m, v);
      const auto b = test::raycast_mesh(m, v);
      for (int r = 0; r < K.height; ++r)
        for (int c = 0; c < K.width; ++c) {
          ++total;
          const bool both_empty = std::isinf(a.depth(r, c)) && std::isinf(b.depth(r, c));
          if (a.labels(r, c) == b.labels(r, c) &&
              (both_empty || std::abs(a.depth(r, c) - b.depth(r, c)) <= 1e-6 * b.depth(r, c)))
            ++agree;
        }
      CHECK(((a.labels.array() != 0) == a.depth.array().isFinite()).all());
    }
  }
  CHECK(static_cast<double>(agree) / total >= 0.995);
}

TEST_CASE("render is deterministic") {
  const SemanticMesh m = test::noisy_plane_mesh(20, 0.05, 9);
  const CameraView view{test::downward_camera(8.0) * RigidTransformd(Eigen::Quaterniond::Identity(), Vec3(-10, -10, 0)),
                        CameraIntrinsics{80, 80, 79.5, 59.5, 160, 120}};
  const auto a = render_mesh(m, view);
  const auto b = render_mesh(m, view);
  CHECK(a.labels == b.labels);
  CHECK(a.depth == b.depth);
  CHECK((a.labels.array() == 2).count() > 1000);
}
