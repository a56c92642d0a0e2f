#include "support.hpp"

#include "surfmap/plan.hpp"

#include <doctest.h>

#include <random>

using namespace surfmap;

namespace {

Costmap costmap_of(const Raster<double>& cost) {
  return {GridGeometry{0, 0, 1, static_cast<int>(cost.cols()), static_cast<int>(cost.rows())}, cost};
}

void check_path_shape(const Costmap& cm, const Path& p, const Eigen::Vector2i& s, const Eigen::Vector2i& t) {
  REQUIRE(!p.cells.empty());
  CHECK(p.cells.front() == s);
  CHECK(p.cells.back() == t);
  double sum = 0;
  for (std::size_t k = 1; k < p.cells.size(); ++k) {
    const Eigen::Vector2i d = p.cells[k] - p.cells[k - 1];
    CHECK(d.cwiseAbs().maxCoeff() == 1);
    CHECK(cm.passable(p.cells[k].x(), p.cells[k].y()));
    sum += step_cost(cm, p.cells[k - 1], p.cells[k]);
  }
  CHECK(sum == doctest::Approx(p.cost).epsilon(1e-12));
}

}  // namespace

TEST_CASE("costmap is a table lookup") {
  ClassGrid map{GridGeometry{0, 0, 0.25, 5, 1}, make_annotation(5, 1)};
  map.classes << 0, 1, 2, 3, 4;
  const Costmap cm = map_to_costmap(map);
  CHECK(cm.cost(0, 0) == 100.0);
  CHECK(cm.cost(0, 1) == 100.0);
  CHECK(cm.cost(0, 2) == 1.0);
  CHECK(cm.cost(0, 3) == 5.0);
  CHECK(std::isinf(cm.cost(0, 4)));
  CHECK_FALSE(cm.passable(4, 0));
  CHECK(cm.geometry == map.geometry);

  ClassGrid ped{GridGeometry{0, 0, 1, 6, 4}, AnnotationImage::Constant(4, 6, 2)};
  CHECK((map_to_costmap(ped).cost.array() == 1.0).all());

  CostTable t;
  t.cost[3] = 7.5;
  CHECK(map_to_costmap(map, t).cost(0, 3) == 7.5);
  t.cost[2].reset();
  try {
    map_to_costmap(map, t);
    FAIL("expected MissingClassCost");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingClassCost);
  }
}

TEST_CASE("smoothing a constant costmap changes nothing") {
  const Costmap cm = costmap_of(Raster<double>::Constant(9, 14, 3.25));
  for (double sigma : {0.5, 1.0, 2.5}) {
    const Costmap s = gaussian_smooth(cm, sigma);
    CHECK((s.cost.array() - 3.25).abs().maxCoeff() < 1e-9);
  }
  CHECK_THROWS_AS(gaussian_smooth(cm, 0.0), Error);
}

TEST_CASE("smoothing a spike gives the sampled Gaussian") {
  const double sigma = 1.5;
  const int n = 31, c = 15;
  Raster<double> cost = Raster<double>::Zero(n, n);
  cost(c, c) = 1.0;
  const Costmap s = gaussian_smooth(costmap_of(cost), sigma);
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  double norm = 0;
  for (int k = -radius; k <= radius; ++k) norm += std::exp(-0.5 * k * k / (sigma * sigma));
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int dx = i - c, dy = j - c;
      const double expect = std::abs(dx) <= radius && std::abs(dy) <= radius
                                ? std::exp(-0.5 * (dx * dx + dy * dy) / (sigma * sigma)) / (norm * norm)
                                : 0.0;
      CHECK(s.cost(j, i) == doctest::Approx(expect).epsilon(1e-6).scale(1e-6));
      CHECK(s.cost(j, i) == doctest::Approx(s.cost(i, j)).epsilon(1e-12));
    }
  CHECK(s.cost.sum() == doctest::Approx(1.0));
}

TEST_CASE("smoothing reflects at the border") {
  Raster<double> cost(1, 6);
  cost << 0, 0, 0, 0, 0, 6;
  const Costmap s = gaussian_smooth(costmap_of(cost), 1.0);
  // mass is conserved by reflection on a 1-row map (rows reflect onto themselves)
  CHECK(s.cost.sum() == doctest::Approx(6.0));
  CHECK(s.cost(0, 5) > s.cost(0, 4));
  // the border cell folds its own mirror image back in: weight w0 + w1
  double norm = 0;
  for (int k = -3; k <= 3; ++k) norm += std::exp(-0.5 * k * k);
  CHECK(s.cost(0, 5) == doctest::Approx(6 * (1 + std::exp(-0.5)) / norm));
  CHECK(s.cost(0, 0) == 0.0);
}

TEST_CASE("smoothing keeps impassable cells and excludes them from kernels") {
  Raster<double> cost = Raster<double>::Constant(7, 7, 2.0);
  cost(3, 3) = kImpassable;
  cost(0, 6) = kImpassable;
  const Costmap s = gaussian_smooth(costmap_of(cost), 1.0);
  CHECK(std::isinf(s.cost(3, 3)));
  CHECK(std::isinf(s.cost(0, 6)));
  for (int j = 0; j < 7; ++j)
    for (int i = 0; i < 7; ++i)
      if (std::isfinite(cost(j, i))) CHECK(s.cost(j, i) == doctest::Approx(2.0));
}

TEST_CASE("start equal to goal") {
  const Costmap cm = costmap_of(Raster<double>::Constant(5, 5, 4.0));
  const Path p = astar(cm, {2, 3}, {2, 3});
  CHECK(p.cells.size() == 1);
  CHECK(p.cost == 0.0);
}

TEST_CASE("uniform costmap gives a straight geodesic") {
  const Costmap cm = costmap_of(Raster<double>::Constant(20, 20, 1.0));
  const Path p = astar(cm, {1, 2}, {15, 9});
  check_path_shape(cm, p, {1, 2}, {15, 9});
  CHECK(p.cells.size() == 15);  // max(|dx|, |dy|) + 1
  CHECK(p.cost == doctest::Approx(7 * std::sqrt(2.0) + 7));
}

TEST_CASE("A* cost equals Dijkstra on random costmaps") {
  std::mt19937_64 rng(77);
  int exact = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Raster<double> cost(30, 30);
    for (Eigen::Index n = 0; n < cost.size(); ++n)
      cost.data()[n] = rng() % 6 == 0 ? kImpassable : test::uniform(rng, 1.0, 20.0);
    Eigen::Vector2i s(static_cast<int>(rng() % 30), static_cast<int>(rng() % 30));
    Eigen::Vector2i t(static_cast<int>(rng() % 30), static_cast<int>(rng() % 30));
    cost(s.y(), s.x()) = 1.0;
    cost(t.y(), t.x()) = 1.0;
    const Costmap cm = costmap_of(cost);
    const double d = test::dijkstra(cm, s, t);
    if (!std::isfinite(d)) {
      CHECK_THROWS_AS(astar(cm, s, t), Error);
      ++exact;
      continue;
    }
    const Path p = astar(cm, s, t);
    check_path_shape(cm, p, s, t);
    CHECK(p.cost == d);
    exact += p.cost == d;
  }
  CHECK(exact == 100);
}

TEST_CASE("smoothing keeps the path off the corridor walls") {
  // corridor rows 5..9 cost 1, flanked by cost 100
  Raster<double> cost = Raster<double>::Constant(15, 40, 100.0);
  cost.middleRows(5, 5).setConstant(1.0);
  const Costmap raw = costmap_of(cost);
  const Costmap smooth = gaussian_smooth(raw, 1.0);
  const Path p = astar(smooth, {0, 7}, {39, 7});
  for (const auto& c : p.cells) {
    CHECK(c.y() != 5);
    CHECK(c.y() != 9);
  }
  // the raw map has no such preference: hugging row 5 costs the same as row 7
  const Path q = astar(raw, {0, 5}, {39, 5});
  CHECK(q.cost == doctest::Approx(39.0));
}

TEST_CASE("endpoint and reachability errors") {
  Raster<double> cost = Raster<double>::Constant(5, 5, 1.0);
  cost.col(2).setConstant(kImpassable);
  const Costmap cm = costmap_of(cost);
  auto kind_of = [&](const Eigen::Vector2i& s, const Eigen::Vector2i& t) {
    try {
      astar(cm, s, t);
    } catch (const Error& e) {
      return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::InvalidArgument;
  };
  CHECK(kind_of({0, 0}, {4, 4}) == ErrorKind::NoPath);
  CHECK(kind_of({2, 0}, {4, 4}) == ErrorKind::InvalidEndpoint);
  CHECK(kind_of({0, 0}, {5, 4}) == ErrorKind::InvalidEndpoint);
  CHECK(kind_of({-1, 0}, {0, 0}) == ErrorKind::InvalidEndpoint);
}

TEST_CASE("cheap detours beat expensive shortcuts") {
  // Road band across the middle, Crossing column at i = 12
  ClassGrid map{GridGeometry{0, 0, 1, 20, 11}, AnnotationImage::Constant(11, 20, 2)};
  map.classes.middleRows(4, 3).setConstant(1);
  map.classes.block(4, 12, 3, 1).setConstant(3);
  const Costmap cm = map_to_costmap(map);
  const Path p = astar(cm, {2, 0}, {2, 10});
  for (const auto& c : p.cells) CHECK(map.at(c.x(), c.y()) != SurfaceClass::Road);
  CHECK(p.cost == doctest::Approx(test::dijkstra(cm, {2, 0}, {2, 10})));
}
