#include "surfmap/plan.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <tuple>

namespace surfmap {

Costmap map_to_costmap(const ClassGrid& map, const CostTable& table) {
  for (int c = 0; c < kNumRasterClasses; ++c)
    if (!table.cost[c])
      throw Error(ErrorKind::MissingClassCost,
                  "no cost for class " + std::string(class_name(static_cast<SurfaceClass>(c))));
  Costmap cm{map.geometry, Raster<double>(map.classes.rows(), map.classes.cols())};
  for (Eigen::Index n = 0; n < map.classes.size(); ++n) {
    const int c = std::min<int>(map.classes.data()[n], kNumRasterClasses - 1);
    const double v = *table.cost[c];
    if (v < 0) throw Error(ErrorKind::InvalidArgument, "negative class cost");
    cm.cost.data()[n] = v;
  }
  return cm;
}

namespace {

int reflect(int idx, int n) {
  while (idx < 0 || idx >= n) {
    if (idx < 0) idx = -idx - 1;
    if (idx >= n) idx = 2 * n - idx - 1;
  }
  return idx;
}

// One separable pass along rows (horizontal) or columns.
Raster<double> blur_pass(const Raster<double>& in, const std::vector<double>& kernel, bool horizontal) {
  const int rows = static_cast<int>(in.rows());
  const int cols = static_cast<int>(in.cols());
  const int radius = static_cast<int>(kernel.size() / 2);
  Raster<double> out = in;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!std::isfinite(in(r, c))) continue;
      double acc = 0.0, wsum = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int rr = horizontal ? r : reflect(r + k, rows);
        const int cc = horizontal ? reflect(c + k, cols) : c;
        const double v = in(rr, cc);
        if (!std::isfinite(v)) continue;
        acc += kernel[k + radius] * v;
        wsum += kernel[k + radius];
      }
      out(r, c) = acc / wsum;
    }
  }
  return out;
}

}  // namespace

Costmap gaussian_smooth(const Costmap& cm, double sigma_cells) {
  if (!(sigma_cells > 0)) throw Error(ErrorKind::InvalidArgument, "sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma_cells));
  std::vector<double> kernel(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k) kernel[k + radius] = std::exp(-0.5 * k * k / (sigma_cells * sigma_cells));
  Costmap out{cm.geometry, blur_pass(blur_pass(cm.cost, kernel, true), kernel, false)};
  return out;
}

double step_cost(const Costmap& cm, const Eigen::Vector2i& a, const Eigen::Vector2i& b) {
  const double len = (a - b).cast<double>().norm();
  return len * 0.5 * (cm.cost(a.y(), a.x()) + cm.cost(b.y(), b.x()));
}

Path astar(const Costmap& cm, const Eigen::Vector2i& start, const Eigen::Vector2i& goal) {
  for (const auto& e : {start, goal})
    if (!cm.in_bounds(e.x(), e.y()) || !cm.passable(e.x(), e.y()))
      throw Error(ErrorKind::InvalidEndpoint, "endpoint out of bounds or impassable");

  const int w = static_cast<int>(cm.cost.cols());
  const int h = static_cast<int>(cm.cost.rows());
  const std::size_t n = static_cast<std::size_t>(w) * h;
  double min_cost = kImpassable;
  for (Eigen::Index k = 0; k < cm.cost.size(); ++k)
    if (std::isfinite(cm.cost.data()[k])) min_cost = std::min(min_cost, cm.cost.data()[k]);

  auto index = [w](const Eigen::Vector2i& p) { return static_cast<std::size_t>(p.y()) * w + p.x(); };
  auto heuristic = [&](const Eigen::Vector2i& p) { return (p - goal).cast<double>().norm() * min_cost; };

  std::vector<double> g(n, kImpassable);
  std::vector<int> steps(n, 0);
  std::vector<std::int64_t> parent(n, -1);
  std::vector<char> closed(n, 0);
  // (f, steps, cell index); smallest first.
  using Entry = std::tuple<double, int, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;

  const std::size_t s = index(start);
  const std::size_t t = index(goal);
  g[s] = 0.0;
  open.emplace(heuristic(start), 0, s);
  static constexpr int kDi[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
  static constexpr int kDj[8] = {-1, -1, -1, 0, 0, 1, 1, 1};

  while (!open.empty()) {
    const auto [f, st, u] = open.top();
    open.pop();
    if (closed[u]) continue;
    closed[u] = 1;
    if (u == t) break;
    const Eigen::Vector2i pu(static_cast<int>(u % w), static_cast<int>(u / w));
    for (int k = 0; k < 8; ++k) {
      const Eigen::Vector2i pv(pu.x() + kDi[k], pu.y() + kDj[k]);
      if (!cm.in_bounds(pv.x(), pv.y()) || !cm.passable(pv.x(), pv.y())) continue;
      const std::size_t v = index(pv);
      if (closed[v]) continue;
      const double cand = g[u] + step_cost(cm, pu, pv);
      if (cand < g[v] || (cand == g[v] && steps[u] + 1 < steps[v])) {
        g[v] = cand;
        steps[v] = steps[u] + 1;
        parent[v] = static_cast<std::int64_t>(u);
        open.emplace(cand + heuristic(pv), steps[v], v);
      }
    }
  }
  if (!closed[t]) throw Error(ErrorKind::NoPath, "goal unreachable");

  Path path;
  path.cost = g[t];
  for (std::int64_t c = static_cast<std::int64_t>(t); c >= 0; c = parent[c])
    path.cells.emplace_back(static_cast<int>(c % w), static_cast<int>(c / w));
  std::reverse(path.cells.begin(), path.cells.end());
  return path;
}

}  // namespace surfmap
