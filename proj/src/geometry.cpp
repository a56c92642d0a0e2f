#include "surfmap/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <limits>
#include <random>

namespace surfmap {

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  return k;
}

Eigen::Matrix3d CameraIntrinsics::inverse_matrix() const {
  Eigen::Matrix3d k;
  k << 1 / fx, 0, -cx / fx, 0, 1 / fy, -cy / fy, 0, 0, 1;
  return k;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw Error(ErrorKind::InvalidArgument, "focal lengths must be positive");
  if (width <= 0 || height <= 0) throw Error(ErrorKind::InvalidArgument, "image size must be positive");
  if (!(cx >= 0 && cx < width && cy >= 0 && cy < height))
    throw Error(ErrorKind::InvalidArgument, "principal point outside image");
}

DepthImage densify_depth(const DepthImage& sparse, int radius_px) {
  if (!has_valid_depth(sparse)) throw Error(ErrorKind::EmptyDepthImage, "no valid depth samples");
  const int h = static_cast<int>(sparse.rows());
  const int w = static_cast<int>(sparse.cols());
  const long r2max = static_cast<long>(radius_px) * radius_px;
  DepthImage out = DepthImage::Zero(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (sparse(r, c) > 0.0f) {
        out(r, c) = sparse(r, c);
        continue;
      }
      long best = r2max + 1;
      float value = 0.0f;
      // Row-major scan with strict improvement keeps the earliest sample on ties.
      for (int rr = std::max(0, r - radius_px); rr <= std::min(h - 1, r + radius_px); ++rr) {
        for (int cc = std::max(0, c - radius_px); cc <= std::min(w - 1, c + radius_px); ++cc) {
          if (!(sparse(rr, cc) > 0.0f)) continue;
          const long d2 = static_cast<long>(rr - r) * (rr - r) + static_cast<long>(cc - c) * (cc - c);
          if (d2 < best) {
            best = d2;
            value = sparse(rr, cc);
          }
        }
      }
      out(r, c) = value;
    }
  }
  return out;
}

namespace {

bool plane_through(const Vec3& a, const Vec3& b, const Vec3& c, GroundPlane& plane) {
  Vec3 n = (b - a).cross(c - a);
  const double len = n.norm();
  const double scale = std::max({(b - a).norm(), (c - a).norm(), 1e-300});
  if (!(len > 1e-12 * scale * scale)) return false;
  n /= len;
  if (n.z() < 0) n = -n;
  plane.normal = n;
  plane.offset = n.dot(a);
  return true;
}

std::size_t count_inliers(std::span<const Vec3> pts, const GroundPlane& plane, double thr) {
  std::size_t n = 0;
  for (const auto& p : pts)
    if (std::abs(plane.signed_distance(p)) <= thr) ++n;
  return n;
}

}  // namespace

GroundPlane fit_plane_least_squares(std::span<const Vec3> points) {
  if (points.size() < 3) throw Error(ErrorKind::DegenerateCloud, "need at least 3 points");
  Vec3 mean = Vec3::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (const auto& p : points) scatter += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(scatter);
  const auto& ev = es.eigenvalues();
  if (!(ev(1) > 1e-12 * std::max(ev(2), 1e-300)))
    throw Error(ErrorKind::DegenerateCloud, "points are collinear");
  GroundPlane plane;
  plane.normal = es.eigenvectors().col(0).normalized();
  if (plane.normal.z() < 0) plane.normal = -plane.normal;
  plane.offset = plane.normal.dot(mean);
  plane.inliers = points.size();
  return plane;
}

GroundPlane fit_ground_plane(std::span<const Vec3> points, const RansacOptions& options) {
  const std::size_t n = points.size();
  if (n < 3) throw Error(ErrorKind::DegenerateCloud, "need at least 3 points");
  if (n == 3) {
    GroundPlane plane;
    if (!plane_through(points[0], points[1], points[2], plane))
      throw Error(ErrorKind::DegenerateCloud, "points are collinear");
    plane.inliers = 3;
    return plane;
  }

  std::mt19937_64 rng(options.seed);
  GroundPlane best;
  bool found = false;
  for (int it = 0; it < options.iterations; ++it) {
    const std::size_t i = rng() % n;
    const std::size_t j = rng() % n;
    const std::size_t k = rng() % n;
    if (i == j || j == k || i == k) continue;
    GroundPlane candidate;
    if (!plane_through(points[i], points[j], points[k], candidate)) continue;
    candidate.inliers = count_inliers(points, candidate, options.inlier_threshold);
    if (!found || candidate.inliers > best.inliers) {
      best = candidate;
      found = true;
    }
  }
  if (!found) {
    // Sampling never hit a non-degenerate triple; fall back to a global fit,
    // which throws for genuinely collinear input.
    best = fit_plane_least_squares(points);
    best.inliers = count_inliers(points, best, options.inlier_threshold);
    return best;
  }

  std::vector<Vec3> inliers;
  inliers.reserve(best.inliers);
  for (const auto& p : points)
    if (std::abs(best.signed_distance(p)) <= options.inlier_threshold) inliers.push_back(p);
  try {
    GroundPlane refined = fit_plane_least_squares(inliers);
    refined.inliers = count_inliers(points, refined, options.inlier_threshold);
    if (refined.inliers >= best.inliers) return refined;
  } catch (const Error&) {
  }
  return best;
}

}  // namespace surfmap
