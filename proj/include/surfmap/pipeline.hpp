#pragma once

// Command implementations behind the `surfmap` tool. Every command writes its
// artifacts plus the effective config.json into its output directory.

#include "surfmap/annotate.hpp"
#include "surfmap/evaluate.hpp"
#include "surfmap/fuse.hpp"
#include "surfmap/io.hpp"
#include "surfmap/mesh.hpp"
#include "surfmap/plan.hpp"
#include "surfmap/sim.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace surfmap::pipeline {

namespace fs = std::filesystem;

/// Every tunable of the pipeline. Serialized as a flat JSON object whose keys
/// are the member names; unknown keys are rejected. Impassable costs are null.
struct PipelineConfig {
  std::uint64_t seed = 0;
  int workers = 0;  // 0: one per hardware thread

  // mapping
  double resolution = 0.25;
  double map_margin = 20.0;
  double eps = kDefaultProbabilityEps;
  double ground_band = 0.20;

  // annotation
  double obstacle_height = 0.20;
  int splat_radius = 2;
  int densify_radius = 8;
  double near_plane = 0.1;
  int ransac_iterations = 100;
  double ransac_threshold = 0.05;
  double pedestrian_width = 0.5;
  double vehicle_width = 2.0;
  double ego_width = 0.6;
  int tracklets_from_detections = 0;  // 1: rebuild agent tracklets from boxes and depth

  // mesh
  double max_edge_factor = 3.0;
  double taubin_lambda = 0.5;
  double taubin_mu = -0.53;
  int taubin_iterations = 10;

  // planning
  double cost_unknown = 100.0;
  double cost_road = 100.0;
  double cost_pedestrian = 1.0;
  double cost_crossing = 5.0;
  double cost_obstacle = kImpassable;
  double smoothing_sigma = 1.0;  // cells; 0 disables smoothing

  // loss weights
  double alpha_unknown = 0.0;
  double alpha_road = 1.0;
  double alpha_pedestrian = 1.0;
  double alpha_crossing = 5.0;
  double alpha_obstacle = 0.2;

  // simulator
  double sim_extent = 40.0;
  double sim_resolution = 0.25;
  double sim_road_width = 7.0;
  double sim_sidewalk_width = 3.0;
  int sim_crossings = 1;
  double sim_crossing_width = 4.0;
  int sim_obstacles = 6;
  double sim_obstacle_size = 1.0;
  double sim_obstacle_height = 1.0;
  double sim_terrain_amplitude = 0.0;
  double sim_terrain_wavelength = 16.0;
  double sim_speed = 1.2;
  double sim_frame_rate = 2.0;
  double sim_camera_height = 1.5;
  double sim_camera_pitch = 15.0;
  double sim_fx = 100.0;
  double sim_fy = 100.0;
  double sim_cx = 80.0;
  double sim_cy = 60.0;
  int sim_width = 160;
  int sim_height = 120;
  int sim_pedestrians = 4;
  int sim_vehicles = 2;
  double sim_pedestrian_speed = 1.3;
  double sim_vehicle_speed = 5.0;
  double sim_jitter = 0.1;
  double sim_max_range = 60.0;
  double sim_detection_range = 30.0;
  int sim_depth_row_stride = 1;
  double oracle_accuracy = 0.8;

  /// Throws ConfigError on unknown keys, wrong types or out-of-range values.
  static PipelineConfig from_json(const std::string& text);
  static PipelineConfig load(const fs::path& path);
  /// Applies one `key=value` override; the value is parsed as JSON.
  void set(const std::string& assignment);
  std::string to_json() const;
  void validate() const;

  int worker_count() const;
  AnnotateOptions annotate_options() const;
  AgentWidths widths() const;
  FuseOptions fuse_options() const;
  TaubinOptions taubin_options() const;
  TriangulateOptions triangulate_options() const;
  CostTable cost_table() const;
  LossWeights loss_weights() const;
  WorldSpec world_spec() const;
  SimOptions sim_options() const;
  RansacOptions ransac_options(std::uint64_t frame) const;
};

struct RunInputs {
  io::Calibration calib;
  std::vector<io::StampedPose> poses;
};

/// Reads calib.txt and poses.txt; throws MissingInput naming an absent file.
RunInputs load_run(const fs::path& run);

/// Ground plane of one frame from its depth points; a level plane through the
/// base origin when the frame has too few points.
GroundPlane frame_plane(const std::vector<ObservedPoint>& points, const RigidTransformd& base_to_world,
                        const RansacOptions& options);

/// Grid covering every pose of the given runs plus the configured margin,
/// with origin snapped to multiples of the resolution.
GridGeometry map_grid(const std::vector<RunInputs>& runs, const PipelineConfig& cfg);

void cmd_simulate(const PipelineConfig& cfg, const fs::path& out);
void cmd_annotate(const PipelineConfig& cfg, const fs::path& run, const fs::path& out);
void cmd_fuse(const PipelineConfig& cfg, const std::vector<fs::path>& runs, const fs::path& out);
/// `d0` optionally names a D0 mask directory for the coverage comparison.
void cmd_render(const PipelineConfig& cfg, const fs::path& map, const fs::path& run, const fs::path& out,
                const std::optional<fs::path>& d0 = std::nullopt);

struct EvalInputs {
  std::optional<fs::path> masks;        // directory of class PNGs
  std::optional<fs::path> predictions;  // directory of .sprb files
  std::optional<fs::path> gt;           // directory of ground-truth class PNGs
  std::optional<fs::path> map;          // .tmap or class PNG with .geo
  std::optional<fs::path> bev;          // ground-truth BEV class PNG with .geo
};
void cmd_eval(const PipelineConfig& cfg, const EvalInputs& inputs, const fs::path& out);

/// Start and goal are world (x, y); both must fall on passable cells.
void cmd_plan(const PipelineConfig& cfg, const fs::path& map, const Vec2& start, const Vec2& goal,
              const fs::path& out);

/// A .tmap is finalized; anything else is read as a class PNG with .geo sidecar.
ClassGrid load_class_map(const fs::path& map);

}  // namespace surfmap::pipeline
