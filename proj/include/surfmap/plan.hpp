#pragma once

// Costmaps from semantic maps and 8-connected A* search.
//
// Step cost between neighbouring cells a and b is
//   |a - b| * (cost(a) + cost(b)) / 2
// in cell units. The heuristic |n - goal| * min passable cost never
// overestimates, so A* returns a minimum-cost path.

#include "surfmap/fuse.hpp"
#include "surfmap/types.hpp"

#include <array>
#include <limits>
#include <optional>
#include <vector>

namespace surfmap {

inline constexpr double kImpassable = std::numeric_limits<double>::infinity();

struct Costmap {
  GridGeometry geometry;
  Raster<double> cost;  // row j, column i

  bool passable(int i, int j) const { return std::isfinite(cost(j, i)); }
  bool in_bounds(int i, int j) const { return i >= 0 && j >= 0 && i < cost.cols() && j < cost.rows(); }
};

/// Per-class traversal cost indexed by raster class; nullopt marks a missing entry.
struct CostTable {
  std::array<std::optional<double>, kNumRasterClasses> cost{100.0, 100.0, 1.0, 5.0, kImpassable};

  static CostTable defaults() { return {}; }
};

/// Throws MissingClassCost when any of the five classes lacks a cost.
Costmap map_to_costmap(const ClassGrid& map, const CostTable& table = CostTable::defaults());

/// Separable Gaussian blur, kernel radius ceil(3 sigma), reflective borders.
/// Impassable cells are left out of every kernel and stay impassable.
Costmap gaussian_smooth(const Costmap& cm, double sigma_cells);

struct Path {
  std::vector<Eigen::Vector2i> cells;  // (i, j), start first
  double cost = 0.0;
};

double step_cost(const Costmap& cm, const Eigen::Vector2i& a, const Eigen::Vector2i& b);

/// Throws InvalidEndpoint for out-of-bounds or impassable endpoints and NoPath
/// when the goal cannot be reached.
Path astar(const Costmap& cm, const Eigen::Vector2i& start, const Eigen::Vector2i& goal);

}  // namespace surfmap
