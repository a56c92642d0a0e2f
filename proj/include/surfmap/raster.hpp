#pragma once

// Software scan conversion shared by ribbon annotation and mesh rendering.
//
// A pixel is covered when its centre lies inside the projected polygon.
// Centres exactly on an edge follow the top-left rule, so two triangles
// sharing an edge never both claim a pixel on it. Depth is interpolated
// perspective-correctly (1/z is affine in screen space).

#include "surfmap/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace surfmap {

inline constexpr double kDefaultNearPlane = 0.1;

/// Sutherland-Hodgman clip of a camera-frame polygon against z >= near.
std::vector<Vec3> clip_near(const std::vector<Vec3>& polygon, double near);

namespace detail {

struct ScreenVertex {
  double u, v, inv_z;
};

inline double edge(const ScreenVertex& a, const ScreenVertex& b, double px, double py) {
  return (b.u - a.u) * (py - a.v) - (b.v - a.v) * (px - a.u);
}

// Top-left rule for edges traversed with positive triangle area in this
// edge-function convention.
inline bool owns_edge(const ScreenVertex& a, const ScreenVertex& b) {
  const double dy = b.v - a.v;
  const double dx = b.u - a.u;
  return dy < 0.0 || (dy == 0.0 && dx > 0.0);
}

template <typename Emit>
void fill_screen_triangle(ScreenVertex a, ScreenVertex b, ScreenVertex c, int width, int height,
                          Emit&& emit) {
  double area = edge(a, b, c.u, c.v);
  if (area == 0.0 || !std::isfinite(area)) return;
  if (area < 0.0) {
    std::swap(b, c);
    area = -area;
  }
  const double min_u = std::min({a.u, b.u, c.u});
  const double max_u = std::max({a.u, b.u, c.u});
  const double min_v = std::min({a.v, b.v, c.v});
  const double max_v = std::max({a.v, b.v, c.v});
  const int c0 = std::max(0, static_cast<int>(std::ceil(min_u)));
  const int c1 = std::min(width - 1, static_cast<int>(std::floor(max_u)));
  const int r0 = std::max(0, static_cast<int>(std::ceil(min_v)));
  const int r1 = std::min(height - 1, static_cast<int>(std::floor(max_v)));
  if (c0 > c1 || r0 > r1) return;

  const bool own_ab = owns_edge(a, b);
  const bool own_bc = owns_edge(b, c);
  const bool own_ca = owns_edge(c, a);
  for (int r = r0; r <= r1; ++r) {
    const double py = r;
    for (int col = c0; col <= c1; ++col) {
      const double px = col;
      const double w_c = edge(a, b, px, py);
      const double w_a = edge(b, c, px, py);
      const double w_b = edge(c, a, px, py);
      if (w_a < 0.0 || w_b < 0.0 || w_c < 0.0) continue;
      if ((w_c == 0.0 && !own_ab) || (w_a == 0.0 && !own_bc) || (w_b == 0.0 && !own_ca)) continue;
      const double inv_z = (w_a * a.inv_z + w_b * b.inv_z + w_c * c.inv_z) / area;
      emit(col, r, 1.0 / inv_z);
    }
  }
}

}  // namespace detail

/// Scan-converts a planar convex camera-frame polygon. emit(col, row, depth)
/// is called once per covered pixel.
template <typename Emit>
void rasterize_camera_polygon(const std::vector<Vec3>& polygon, const CameraIntrinsics& K,
                              double near, Emit&& emit) {
  const std::vector<Vec3> clipped = clip_near(polygon, near);
  if (clipped.size() < 3) return;
  std::vector<detail::ScreenVertex> screen;
  screen.reserve(clipped.size());
  for (const auto& p : clipped)
    screen.push_back({K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy, 1.0 / p.z()});
  for (std::size_t i = 1; i + 1 < screen.size(); ++i)
    detail::fill_screen_triangle(screen[0], screen[i], screen[i + 1], K.width, K.height, emit);
}

template <typename Emit>
void rasterize_camera_triangle(const Vec3& a, const Vec3& b, const Vec3& c,
                               const CameraIntrinsics& K, double near, Emit&& emit) {
  if (a.z() >= near && b.z() >= near && c.z() >= near) {
    detail::fill_screen_triangle({K.fx * a.x() / a.z() + K.cx, K.fy * a.y() / a.z() + K.cy, 1.0 / a.z()},
                                 {K.fx * b.x() / b.z() + K.cx, K.fy * b.y() / b.z() + K.cy, 1.0 / b.z()},
                                 {K.fx * c.x() / c.z() + K.cx, K.fy * c.y() / c.z() + K.cy, 1.0 / c.z()},
                                 K.width, K.height, emit);
    return;
  }
  if (a.z() < near && b.z() < near && c.z() < near) return;
  rasterize_camera_polygon({a, b, c}, K, near, emit);
}

}  // namespace surfmap
