#pragma once

// Synthetic street scenes with known ground truth.
//
// The world spans [-extent/2, extent/2]^2. A road band runs along x around
// y = 0, sidewalks flank it and the rest is pedestrian area. Crossings cut
// across the road band, box obstacles stand in the pedestrian area. Agents
// follow sidewalk, crossing and lane centrelines with bounded lateral jitter,
// so every trajectory stays on its legal surface.

#include "surfmap/annotate.hpp"
#include "surfmap/fuse.hpp"
#include "surfmap/geometry.hpp"
#include "surfmap/types.hpp"

#include <cstdint>
#include <vector>

namespace surfmap {

struct WorldSpec {
  std::uint64_t seed = 0;
  double extent = 40.0;
  double resolution = 0.25;
  double road_width = 7.0;
  double sidewalk_width = 3.0;
  int crossings = 1;
  double crossing_width = 4.0;
  int obstacles = 6;
  double obstacle_size = 1.0;
  double obstacle_height = 1.0;
  double terrain_amplitude = 0.0;
  double terrain_wavelength = 16.0;
};

struct Box3 {
  Vec3 min;
  Vec3 max;
};

struct GroundTruthWorld {
  WorldSpec spec;
  ClassGrid raster;
  std::vector<Box3> obstacles;
  std::vector<double> crossing_centers;  // x of each crossing

  double height(double x, double y) const;
  bool flat() const { return spec.terrain_amplitude == 0.0; }
  bool contains(double x, double y) const {
    return std::abs(x) < 0.5 * spec.extent && std::abs(y) < 0.5 * spec.extent;
  }
  SurfaceClass class_at(double x, double y) const;
  /// Centreline y of the sidewalk on the given side (+1 or -1).
  double sidewalk_center(int side) const { return side * (0.5 * spec.road_width + 0.5 * spec.sidewalk_width); }
};

/// Deterministic in spec.seed. Throws InfeasibleLayout when the street does not fit.
GroundTruthWorld generate_world(const WorldSpec& spec);

struct RouteSpec {
  std::vector<Vec2> waypoints;
  double speed = 1.2;  // m/s
  double dwell = 0.0;  // seconds spent standing at the first waypoint before walking
};

/// Along the +y sidewalk to the first crossing, across, then along the -y
/// sidewalk. Without crossings the route stays on the +y sidewalk.
RouteSpec default_route(const GroundTruthWorld& world);

struct SimOptions {
  double frame_rate = 2.0;
  double camera_height = 1.5;
  double camera_pitch_deg = 15.0;
  CameraIntrinsics intrinsics{100.0, 100.0, 80.0, 60.0, 160, 120};
  int pedestrians = 4;
  int vehicles = 2;
  double pedestrian_speed = 1.3;
  double vehicle_speed = 5.0;
  double jitter_sigma = 0.1;
  double max_range = 60.0;
  double detection_range = 30.0;
  int depth_row_stride = 1;  // keep every n-th depth row, a scan-line pattern
};

struct SimFrame {
  double timestamp = 0.0;
  RigidTransformd base_to_world;
  DepthImage depth;
  AnnotationImage labels;  // per-pixel truth; agents and obstacles are Obstacle
};

struct SimRun {
  std::vector<SimFrame> frames;
  RigidTransformd base_to_cam;
  CameraIntrinsics intrinsics;
  std::vector<Tracklet> tracklets;  // observed agent ground positions
  std::vector<DetectionBox> detections;
  Tracklet ego;
};

/// Camera mounted camera_height above the base origin, looking along base +x
/// and pitched down.
RigidTransformd make_base_to_cam(double camera_height, double pitch_deg);

/// Throws RouteOffSurface when the route leaves Pedestrian/Crossing ground.
SimRun simulate_run(const GroundTruthWorld& world, const RouteSpec& route, const SimOptions& options,
                    std::uint64_t seed);

/// Per pixel: with probability `accuracy` the emitted class is the true one,
/// otherwise a uniformly drawn wrong class; the emitted vector puts `accuracy`
/// on that class and spreads the rest evenly. With resample = false the true
/// class is always emitted. Unknown pixels get a uniform vector.
PredictionImage prediction_oracle(const AnnotationImage& truth, double accuracy, std::uint64_t seed,
                                  bool resample = true);

/// Splitmix-style mixing used to derive per-frame seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace surfmap
