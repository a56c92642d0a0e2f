#pragma once

// Camera model and rigid-body geometry.
//
// Frames: the world is right-handed with z up. The camera frame is x right,
// y down, z forward. Pixel (c, r) has its centre at continuous coordinate
// (c, r), so an image of width W spans u in [-0.5, W - 0.5).
//
// A transform named `a_to_b` maps coordinates expressed in frame a into
// frame b: p_b = a_to_b * p_a.

#include "surfmap/types.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace surfmap {

template <typename Scalar>
class RigidTransform {
 public:
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
  using Mat4 = Eigen::Matrix<Scalar, 4, 4>;
  using Quat = Eigen::Quaternion<Scalar>;

  RigidTransform() : rotation_(Quat::Identity()), translation_(Vec3::Zero()) {}

  /// The quaternion is normalized on construction.
  RigidTransform(const Quat& rotation, const Vec3& translation)
      : rotation_(rotation.normalized()), translation_(translation) {
    if (rotation_.w() < Scalar(0)) rotation_.coeffs() = -rotation_.coeffs();
  }

  static RigidTransform Identity() { return {}; }

  static RigidTransform FromTranslation(const Vec3& t) { return {Quat::Identity(), t}; }

  /// Builds from a homogeneous matrix; the rotation block is re-orthonormalized
  /// through the quaternion.
  static RigidTransform FromMatrix(const Mat4& m) {
    Quat q(Mat3(m.template topLeftCorner<3, 3>()));
    return {q, m.template topRightCorner<3, 1>()};
  }

  const Quat& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Mat3 rotation_matrix() const { return rotation_.toRotationMatrix(); }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.template topLeftCorner<3, 3>() = rotation_matrix();
    m.template topRightCorner<3, 1>() = translation_;
    return m;
  }

  Vec3 operator*(const Vec3& p) const { return rotation_ * p + translation_; }

  /// (a * b) applies b first.
  RigidTransform operator*(const RigidTransform& other) const {
    return {rotation_ * other.rotation_, rotation_ * other.translation_ + translation_};
  }

  RigidTransform inverse() const {
    Quat inv = rotation_.conjugate();
    return {inv, -(inv * translation_)};
  }

  template <typename Other>
  RigidTransform<Other> cast() const {
    return {rotation_.template cast<Other>(), translation_.template cast<Other>()};
  }

 private:
  Quat rotation_;
  Vec3 translation_;
};

using RigidTransformd = RigidTransform<double>;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using WorldPoint = Eigen::Vector3d;
using PixelPoint = Eigen::Vector2d;

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  Eigen::Matrix3d matrix() const;
  Eigen::Matrix3d inverse_matrix() const;
  /// Throws InvalidArgument unless fx, fy > 0 and the principal point lies in the image.
  void validate() const;
  bool contains(const PixelPoint& u) const {
    return u.x() >= -0.5 && u.x() < width - 0.5 && u.y() >= -0.5 && u.y() < height - 0.5;
  }
};

template <typename Scalar>
struct Projection {
  Eigen::Matrix<Scalar, 2, 1> pixel;
  Scalar depth;   // camera-frame z
  bool in_frame;  // callers clip; not an error
};

/// Pinhole projection of a camera-frame point. Throws BehindCamera for z <= 0.
template <typename Scalar>
Projection<Scalar> project_camera_point(const Eigen::Matrix<Scalar, 3, 1>& pc,
                                        const CameraIntrinsics& K) {
  if (!(pc.z() > Scalar(0))) throw Error(ErrorKind::BehindCamera, "point behind camera");
  Eigen::Matrix<Scalar, 2, 1> uv(Scalar(K.fx) * pc.x() / pc.z() + Scalar(K.cx),
                                 Scalar(K.fy) * pc.y() / pc.z() + Scalar(K.cy));
  return {uv, pc.z(), K.contains(uv.template cast<double>())};
}

/// u = K * base_to_cam * world_to_base * p, followed by perspective division.
template <typename Scalar>
Projection<Scalar> project_world_to_pixel(const Eigen::Matrix<Scalar, 3, 1>& p,
                                          const RigidTransform<Scalar>& world_to_base,
                                          const RigidTransform<Scalar>& base_to_cam,
                                          const CameraIntrinsics& K) {
  return project_camera_point<Scalar>(base_to_cam * (world_to_base * p), K);
}

/// Projects a homogeneous pixel vector [s*u, s*v, s]; any positive scale s gives the same pixel.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 2, 1> dehomogenize(const Eigen::MatrixBase<Derived>& h) {
  return h.template head<2>() / h(2);
}

/// Camera-frame point d * K^-1 [u, v, 1].
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> backproject_to_camera(const Eigen::Matrix<Scalar, 2, 1>& u, Scalar d,
                                                  const CameraIntrinsics& K) {
  if (!(d > Scalar(0))) throw Error(ErrorKind::NonPositiveDepth, "depth must be positive");
  return {d * (u.x() - Scalar(K.cx)) / Scalar(K.fx), d * (u.y() - Scalar(K.cy)) / Scalar(K.fy), d};
}

/// x = base_to_world * cam_to_base * d * K^-1 [u, v, 1].
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> backproject_pixel_to_world(const Eigen::Matrix<Scalar, 2, 1>& u,
                                                       Scalar d,
                                                       const RigidTransform<Scalar>& base_to_world,
                                                       const RigidTransform<Scalar>& cam_to_base,
                                                       const CameraIntrinsics& K) {
  return base_to_world * (cam_to_base * backproject_to_camera<Scalar>(u, d, K));
}

/// Metric depth in metres, camera-frame z; 0 marks an invalid pixel.
using DepthImage = Raster<float>;

inline bool has_valid_depth(const DepthImage& d) { return (d.array() > 0.0f).any(); }

/// Each pixel takes the depth of the nearest valid sample within radius_px
/// (Euclidean pixel distance; equal distances resolved by row-major scan order).
DepthImage densify_depth(const DepthImage& sparse, int radius_px);

struct GroundPlane {
  Vec3 normal = Vec3::UnitZ();  // unit, z >= 0
  double offset = 0.0;          // n . p = offset
  std::size_t inliers = 0;

  double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
  /// Height of the plane at (x, y); requires a non-vertical normal.
  double height_at(double x, double y) const {
    return (offset - normal.x() * x - normal.y() * y) / normal.z();
  }
  /// Vertical drop of p onto the plane.
  Vec3 drop(const Vec3& p) const { return {p.x(), p.y(), height_at(p.x(), p.y())}; }
};

struct RansacOptions {
  int iterations = 100;
  double inlier_threshold = 0.05;
  std::uint64_t seed = 0;
};

/// Seeded RANSAC plane fit followed by a least-squares refit on the inliers.
/// Throws DegenerateCloud for fewer than 3 points or a collinear cloud.
GroundPlane fit_ground_plane(std::span<const Vec3> points, const RansacOptions& options);

/// Least-squares plane through the points (smallest-eigenvalue normal of the scatter).
GroundPlane fit_plane_least_squares(std::span<const Vec3> points);

}  // namespace surfmap
