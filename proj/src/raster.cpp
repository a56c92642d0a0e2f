#include "surfmap/raster.hpp"

namespace surfmap {

std::vector<Vec3> clip_near(const std::vector<Vec3>& polygon, double near) {
  std::vector<Vec3> out;
  const std::size_t n = polygon.size();
  out.reserve(n + 2);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& cur = polygon[i];
    const Vec3& next = polygon[(i + 1) % n];
    const bool cur_in = cur.z() >= near;
    const bool next_in = next.z() >= near;
    if (cur_in) out.push_back(cur);
    if (cur_in != next_in) {
      const double t = (near - cur.z()) / (next.z() - cur.z());
      Vec3 p = cur + t * (next - cur);
      p.z() = near;
      out.push_back(p);
    }
  }
  return out;
}

}  // namespace surfmap
