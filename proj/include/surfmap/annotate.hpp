#pragma once

// Sparse pixel annotations from trajectories, obstacle geometry and the
// crossing rule: pixels used by both pedestrians (ego included) and
// vehicles are labelled Crossing.

#include "surfmap/geometry.hpp"
#include "surfmap/raster.hpp"
#include "surfmap/types.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace surfmap {

enum class AgentClass : std::uint8_t { Pedestrian, Vehicle, Ego };

std::string_view agent_class_name(AgentClass c);
/// Accepts "pedestrian", "vehicle" and "ego"; throws FormatError otherwise.
AgentClass parse_agent_class(std::string_view s);

struct TrackPoint {
  double timestamp;
  WorldPoint position;
};

struct Tracklet {
  int id = 0;
  AgentClass agent_class = AgentClass::Pedestrian;
  std::vector<TrackPoint> points;  // strictly increasing timestamps
  double base_width = 0.5;
};

/// Object base widths in metres.
struct AgentWidths {
  double pedestrian = 0.5;
  double vehicle = 2.0;
  double ego = 0.6;

  double of(AgentClass c) const {
    switch (c) {
      case AgentClass::Pedestrian: return pedestrian;
      case AgentClass::Vehicle: return vehicle;
      case AgentClass::Ego: return ego;
    }
    return pedestrian;
  }
};

struct DetectionBox {
  int track_id = 0;
  AgentClass agent_class = AgentClass::Pedestrian;
  double timestamp = 0.0;
  double u_min = 0, v_min = 0, u_max = 0, v_max = 0;
};

/// Pose and camera for one image: world_to_cam = base_to_cam * world_to_base.
struct CameraView {
  RigidTransformd world_to_cam;
  CameraIntrinsics K;

  static CameraView from_pose(const RigidTransformd& base_to_world, const RigidTransformd& base_to_cam,
                              const CameraIntrinsics& K) {
    return {base_to_cam * base_to_world.inverse(), K};
  }
  RigidTransformd cam_to_world() const { return world_to_cam.inverse(); }
};

/// Image-sized pixel set with set semantics.
class PixelSet {
 public:
  PixelSet() = default;
  PixelSet(int width, int height) : mask_(Raster<std::uint8_t>::Zero(height, width)) {}

  int width() const { return static_cast<int>(mask_.cols()); }
  int height() const { return static_cast<int>(mask_.rows()); }
  bool same_shape(const PixelSet& o) const { return width() == o.width() && height() == o.height(); }

  void insert(int col, int row) { mask_(row, col) = 1; }
  bool contains(int col, int row) const { return mask_(row, col) != 0; }
  std::size_t size() const { return static_cast<std::size_t>(mask_.cast<int>().sum()); }
  bool empty() const { return size() == 0; }

  const Raster<std::uint8_t>& mask() const { return mask_; }

  PixelSet& operator|=(const PixelSet& o);
  PixelSet& operator&=(const PixelSet& o);
  friend PixelSet operator|(PixelSet a, const PixelSet& b) { return a |= b; }
  friend PixelSet operator&(PixelSet a, const PixelSet& b) { return a &= b; }
  bool operator==(const PixelSet& o) const { return same_shape(o) && mask_ == o.mask_; }

 private:
  Raster<std::uint8_t> mask_;
};

struct Quad {
  std::array<WorldPoint, 4> corners;  // polygon order
};

struct Ribbon {
  std::vector<Quad> quads;
  AgentClass source = AgentClass::Pedestrian;
};

/// One quad per consecutive point pair, offset by +-half_width perpendicular to
/// the segment in the ground plane. Segments with zero horizontal length are skipped.
Ribbon build_ribbon(const Tracklet& track, double half_width);

/// Pixels whose centres fall inside any projected quad, near-plane clipped.
PixelSet rasterize_ribbon(const Ribbon& ribbon, const CameraView& view,
                          double near = kDefaultNearPlane);

/// S_C := S_P intersect S_V. Throws DimensionMismatch.
PixelSet derive_crossing(const PixelSet& pedestrian, const PixelSet& vehicle);

struct ObservedPoint {
  WorldPoint world;
  PixelPoint pixel;
};

struct ObstacleOptions {
  double height_threshold = 0.20;  // strictly above
  int splat_radius = 2;
};

/// Points more than height_threshold above the plane, splatted as disks, plus
/// every pixel inside the given detection boxes.
PixelSet label_obstacles(std::span<const ObservedPoint> points, const GroundPlane& plane,
                         std::span<const DetectionBox> boxes, int width, int height,
                         const ObstacleOptions& options = {});

/// Precedence: Obstacle > Crossing > Pedestrian | Road > Unknown, where
/// pedestrian evidence is ego union pedestrian tracklets.
AnnotationImage compose_annotation(const PixelSet& ego, const PixelSet& pedestrian,
                                   const PixelSet& vehicle, const PixelSet& obstacle);

struct TrackletFromDetectionsFrame {
  double timestamp;
  RigidTransformd base_to_world;
  const DepthImage* depth;  // densified
  GroundPlane plane;
};

/// Backprojects each box centre with the frame depth and drops it onto the
/// ground plane. Boxes without a matching frame or valid depth are skipped.
/// Throws TooFewPoints when fewer than two boxes survive.
Tracklet tracklet_from_detections(std::span<const DetectionBox> boxes,
                                  std::span<const TrackletFromDetectionsFrame> frames,
                                  const RigidTransformd& base_to_cam, const CameraIntrinsics& K,
                                  const AgentWidths& widths = {}, double time_tolerance = 1e-4);

/// Pixels with valid depth backprojected to world points.
std::vector<ObservedPoint> backproject_depth(const DepthImage& depth, const CameraView& view,
                                             int stride = 1);

struct FrameLabels {
  PixelSet ego;
  PixelSet pedestrian;
  PixelSet vehicle;
  PixelSet obstacle;
  AnnotationImage annotation;  // all evidence
  AnnotationImage ego_only;    // ego and obstacles only
};

struct AnnotateOptions {
  AgentWidths widths;
  ObstacleOptions obstacles;
  double near_plane = 0.1;
};

/// Full per-frame annotation given prepared ribbons and obstacle evidence.
FrameLabels annotate_frame(const CameraView& view, std::span<const Ribbon> ego_ribbons,
                           std::span<const Ribbon> agent_ribbons, std::span<const ObservedPoint> points,
                           const GroundPlane& plane, std::span<const DetectionBox> frame_boxes,
                           const AnnotateOptions& options = {});

}  // namespace surfmap
