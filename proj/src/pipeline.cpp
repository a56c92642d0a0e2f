#include "surfmap/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <variant>

namespace surfmap::pipeline {

using nlohmann::json;

namespace {

using Member = std::variant<double PipelineConfig::*, int PipelineConfig::*, std::uint64_t PipelineConfig::*>;

struct Field {
  const char* name;
  Member member;
  bool infinite_as_null = false;
};

#define SURFMAP_FIELD(name) Field{#name, &PipelineConfig::name}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      SURFMAP_FIELD(seed),
      SURFMAP_FIELD(workers),
      SURFMAP_FIELD(resolution),
      SURFMAP_FIELD(map_margin),
      SURFMAP_FIELD(eps),
      SURFMAP_FIELD(ground_band),
      SURFMAP_FIELD(obstacle_height),
      SURFMAP_FIELD(splat_radius),
      SURFMAP_FIELD(densify_radius),
      SURFMAP_FIELD(near_plane),
      SURFMAP_FIELD(ransac_iterations),
      SURFMAP_FIELD(ransac_threshold),
      SURFMAP_FIELD(pedestrian_width),
      SURFMAP_FIELD(vehicle_width),
      SURFMAP_FIELD(ego_width),
      SURFMAP_FIELD(tracklets_from_detections),
      SURFMAP_FIELD(max_edge_factor),
      SURFMAP_FIELD(taubin_lambda),
      SURFMAP_FIELD(taubin_mu),
      SURFMAP_FIELD(taubin_iterations),
      Field{"cost_unknown", &PipelineConfig::cost_unknown, true},
      Field{"cost_road", &PipelineConfig::cost_road, true},
      Field{"cost_pedestrian", &PipelineConfig::cost_pedestrian, true},
      Field{"cost_crossing", &PipelineConfig::cost_crossing, true},
      Field{"cost_obstacle", &PipelineConfig::cost_obstacle, true},
      SURFMAP_FIELD(smoothing_sigma),
      SURFMAP_FIELD(alpha_unknown),
      SURFMAP_FIELD(alpha_road),
      SURFMAP_FIELD(alpha_pedestrian),
      SURFMAP_FIELD(alpha_crossing),
      SURFMAP_FIELD(alpha_obstacle),
      SURFMAP_FIELD(sim_extent),
      SURFMAP_FIELD(sim_resolution),
      SURFMAP_FIELD(sim_road_width),
      SURFMAP_FIELD(sim_sidewalk_width),
      SURFMAP_FIELD(sim_crossings),
      SURFMAP_FIELD(sim_crossing_width),
      SURFMAP_FIELD(sim_obstacles),
      SURFMAP_FIELD(sim_obstacle_size),
      SURFMAP_FIELD(sim_obstacle_height),
      SURFMAP_FIELD(sim_terrain_amplitude),
      SURFMAP_FIELD(sim_terrain_wavelength),
      SURFMAP_FIELD(sim_speed),
      SURFMAP_FIELD(sim_frame_rate),
      SURFMAP_FIELD(sim_camera_height),
      SURFMAP_FIELD(sim_camera_pitch),
      SURFMAP_FIELD(sim_fx),
      SURFMAP_FIELD(sim_fy),
      SURFMAP_FIELD(sim_cx),
      SURFMAP_FIELD(sim_cy),
      SURFMAP_FIELD(sim_width),
      SURFMAP_FIELD(sim_height),
      SURFMAP_FIELD(sim_pedestrians),
      SURFMAP_FIELD(sim_vehicles),
      SURFMAP_FIELD(sim_pedestrian_speed),
      SURFMAP_FIELD(sim_vehicle_speed),
      SURFMAP_FIELD(sim_jitter),
      SURFMAP_FIELD(sim_max_range),
      SURFMAP_FIELD(sim_detection_range),
      SURFMAP_FIELD(sim_depth_row_stride),
      SURFMAP_FIELD(oracle_accuracy),
  };
  return table;
}

#undef SURFMAP_FIELD

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::ConfigError, msg); }

void assign(PipelineConfig& cfg, const Field& f, const json& v) {
  const std::string key = f.name;
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(cfg.*member)>;
        if constexpr (std::is_same_v<T, double>) {
          if (v.is_null() && f.infinite_as_null) {
            cfg.*member = kImpassable;
          } else if (v.is_number()) {
            cfg.*member = v.get<double>();
          } else {
            config_error(key + " must be a number" + (f.infinite_as_null ? " or null" : ""));
          }
        } else if constexpr (std::is_same_v<T, int>) {
          if (!v.is_number_integer()) config_error(key + " must be an integer");
          const auto n = v.get<std::int64_t>();
          if (n < std::numeric_limits<int>::min() || n > std::numeric_limits<int>::max())
            config_error(key + " out of range");
          cfg.*member = static_cast<int>(n);
        } else {
          if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
            config_error(key + " must be a non-negative integer");
          cfg.*member = v.get<std::uint64_t>();
        }
      },
      f.member);
}

const Field& find_field(const std::string& key) {
  for (const auto& f : fields())
    if (key == f.name) return f;
  config_error("unknown config key '" + key + "'");
}

// Runs fn(i) for i in [0, n) on up to `workers` threads; rethrows the first failure.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const std::size_t threads = std::min<std::size_t>(std::max(1, workers), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::size_t failed_at = n;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

json metrics_json(const ClassMetrics& m, std::int64_t pixels) {
  json classes = json::object();
  for (int k = 0; k < kNumBeliefClasses; ++k) {
    const ClassScore& s = m.classes[k];
    std::string name(class_name(class_from_belief_index(k)));
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    classes[name] = {{"iou", s.iou},     {"precision", s.precision}, {"recall", s.recall},
                     {"tp", s.tp},       {"fp", s.fp},               {"fn", s.fn},
                     {"supported", s.supported}, {"precision_defined", s.precision_defined}};
  }
  return {{"mean_iou", m.mean_iou}, {"supported_classes", m.supported_classes}, {"pixels", pixels},
          {"classes", classes}};
}

std::string metrics_table(const std::string& title, const ClassMetrics& m) {
  std::ostringstream ss;
  char line[128];
  ss << title << "\n";
  std::snprintf(line, sizeof line, "  %-11s %7s %9s %7s\n", "class", "IoU", "precision", "recall");
  ss << line;
  for (int k = 0; k < kNumBeliefClasses; ++k) {
    const ClassScore& s = m.classes[k];
    std::snprintf(line, sizeof line, "  %-11s %6.1f%% %8.1f%% %6.1f%%%s\n",
                  std::string(class_name(class_from_belief_index(k))).c_str(), 100 * s.iou, 100 * s.precision,
                  100 * s.recall, s.supported ? "" : "  (no support)");
    ss << line;
  }
  std::snprintf(line, sizeof line, "  mean IoU %.1f%% over %d classes\n", 100 * m.mean_iou, m.supported_classes);
  ss << line;
  return ss.str();
}

void write_json(const fs::path& path, const json& j) { io::write_text(path, j.dump(2) + "\n"); }

void write_config(const PipelineConfig& cfg, const fs::path& out) { io::write_text(out / "config.json", cfg.to_json()); }

void write_mask_pair(const fs::path& out, const std::string& set, std::size_t frame, const AnnotationImage& mask) {
  io::write_png8(out / set / io::frame_name(frame, ".png"), mask);
  io::write_png_rgb(out / (set + "_color") / io::frame_name(frame, ".png"), io::colorize(mask));
}

std::vector<fs::path> sorted_files(const fs::path& dir, const std::string& extension) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::MissingInput, "missing directory " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == extension) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

PredictionImage load_prediction(const fs::path& dir, std::size_t frame) {
  const fs::path sprb = dir / io::frame_name(frame, ".sprb");
  if (fs::exists(sprb)) return io::read_prediction(sprb);
  const fs::path cls = dir / io::frame_name(frame, ".png");
  const fs::path conf = dir / io::frame_name(frame, "_conf.png");
  if (fs::exists(cls) && fs::exists(conf))
    return prediction_from_classes(io::read_png8(cls), io::read_png8(conf).cast<float>() / 255.0f);
  throw Error(ErrorKind::MissingInput, "missing " + sprb.string());
}

DepthImage load_depth(const fs::path& run, std::size_t frame) {
  return io::read_depth(run / "depth" / io::frame_name(frame, ".png"));
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    config_error(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) config_error("config must be a JSON object");
  PipelineConfig cfg;
  for (const auto& [key, value] : j.items()) assign(cfg, find_field(key), value);
  cfg.validate();
  return cfg;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  io::require_file(path);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void PipelineConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) config_error("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  json v;
  try {
    v = json::parse(assignment.substr(eq + 1));
  } catch (const json::parse_error&) {
    config_error("override '" + assignment + "' has an invalid value");
  }
  assign(*this, find_field(key), v);
  validate();
}

std::string PipelineConfig::to_json() const {
  json j = json::object();
  for (const auto& f : fields()) {
    std::visit(
        [&](auto member) {
          const auto v = this->*member;
          if constexpr (std::is_same_v<std::remove_const_t<decltype(v)>, double>) {
            if (std::isinf(v) && f.infinite_as_null) {
              j[f.name] = nullptr;
              return;
            }
          }
          j[f.name] = v;
        },
        f.member);
  }
  return j.dump(2) + "\n";
}

void PipelineConfig::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) config_error(msg);
  };
  require(workers >= 0, "workers must be >= 0");
  require(resolution > 0, "resolution must be positive");
  require(map_margin >= 0, "map_margin must be >= 0");
  require(eps > 0 && eps < 0.5, "eps must lie in (0, 0.5)");
  require(ground_band > 0, "ground_band must be positive");
  require(splat_radius >= 0 && densify_radius >= 0, "radii must be >= 0");
  require(near_plane > 0, "near_plane must be positive");
  require(ransac_iterations > 0 && ransac_threshold > 0, "RANSAC settings must be positive");
  require(pedestrian_width > 0 && vehicle_width > 0 && ego_width > 0, "agent widths must be positive");
  require(max_edge_factor > 0, "max_edge_factor must be positive");
  require(taubin_lambda > 0 && taubin_mu < -taubin_lambda && taubin_iterations >= 0,
          "Taubin needs lambda > 0, mu < -lambda, iterations >= 0");
  for (double c : {cost_unknown, cost_road, cost_pedestrian, cost_crossing, cost_obstacle})
    require(c >= 0, "costs must be >= 0");
  require(smoothing_sigma >= 0, "smoothing_sigma must be >= 0");
  for (double a : {alpha_road, alpha_pedestrian, alpha_crossing, alpha_obstacle}) require(a >= 0, "alpha must be >= 0");
  require(alpha_unknown == 0.0, "alpha_unknown must be 0");
  require(sim_frame_rate > 0 && sim_speed > 0, "simulator rates must be positive");
  require(sim_width > 0 && sim_height > 0 && sim_depth_row_stride > 0, "simulator image settings must be positive");
  require(sim_pedestrians >= 0 && sim_vehicles >= 0, "agent counts must be >= 0");
  require(oracle_accuracy >= 1.0 / kNumBeliefClasses && oracle_accuracy <= 1.0,
          "oracle_accuracy must lie in [1/K, 1]");
}

int PipelineConfig::worker_count() const {
  if (workers > 0) return workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

AgentWidths PipelineConfig::widths() const { return {pedestrian_width, vehicle_width, ego_width}; }

AnnotateOptions PipelineConfig::annotate_options() const {
  return {widths(), {obstacle_height, splat_radius}, near_plane};
}

FuseOptions PipelineConfig::fuse_options() const { return {eps, ground_band}; }

TaubinOptions PipelineConfig::taubin_options() const { return {taubin_lambda, taubin_mu, taubin_iterations}; }

TriangulateOptions PipelineConfig::triangulate_options() const { return {max_edge_factor}; }

CostTable PipelineConfig::cost_table() const {
  CostTable t;
  t.cost = {cost_unknown, cost_road, cost_pedestrian, cost_crossing, cost_obstacle};
  return t;
}

LossWeights PipelineConfig::loss_weights() const {
  return {{alpha_unknown, alpha_road, alpha_pedestrian, alpha_crossing, alpha_obstacle}};
}

WorldSpec PipelineConfig::world_spec() const {
  WorldSpec w;
  w.seed = seed;
  w.extent = sim_extent;
  w.resolution = sim_resolution;
  w.road_width = sim_road_width;
  w.sidewalk_width = sim_sidewalk_width;
  w.crossings = sim_crossings;
  w.crossing_width = sim_crossing_width;
  w.obstacles = sim_obstacles;
  w.obstacle_size = sim_obstacle_size;
  w.obstacle_height = sim_obstacle_height;
  w.terrain_amplitude = sim_terrain_amplitude;
  w.terrain_wavelength = sim_terrain_wavelength;
  return w;
}

SimOptions PipelineConfig::sim_options() const {
  SimOptions o;
  o.frame_rate = sim_frame_rate;
  o.camera_height = sim_camera_height;
  o.camera_pitch_deg = sim_camera_pitch;
  o.intrinsics = {sim_fx, sim_fy, sim_cx, sim_cy, sim_width, sim_height};
  o.pedestrians = sim_pedestrians;
  o.vehicles = sim_vehicles;
  o.pedestrian_speed = sim_pedestrian_speed;
  o.vehicle_speed = sim_vehicle_speed;
  o.jitter_sigma = sim_jitter;
  o.max_range = sim_max_range;
  o.detection_range = sim_detection_range;
  o.depth_row_stride = sim_depth_row_stride;
  return o;
}

RansacOptions PipelineConfig::ransac_options(std::uint64_t frame) const {
  return {ransac_iterations, ransac_threshold, mix_seed(mix_seed(seed, 0x9a7e), frame)};
}

RunInputs load_run(const fs::path& run) {
  RunInputs in;
  in.calib = io::read_calibration(run / "calib.txt");
  in.poses = io::read_poses(run / "poses.txt");
  return in;
}

GroundPlane frame_plane(const std::vector<ObservedPoint>& points, const RigidTransformd& base_to_world,
                        const RansacOptions& options) {
  std::vector<Vec3> cloud;
  cloud.reserve(points.size());
  for (const auto& p : points) cloud.push_back(p.world);
  try {
    return fit_ground_plane(cloud, options);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateCloud) throw;
    return {Vec3::UnitZ(), base_to_world.translation().z(), 0};
  }
}

GridGeometry map_grid(const std::vector<RunInputs>& runs, const PipelineConfig& cfg) {
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
  for (const auto& run : runs)
    for (const auto& p : run.poses) {
      const Vec3& t = p.base_to_world.translation();
      x0 = std::min(x0, t.x());
      y0 = std::min(y0, t.y());
      x1 = std::max(x1, t.x());
      y1 = std::max(y1, t.y());
    }
  if (!std::isfinite(x0)) throw Error(ErrorKind::MissingInput, "no poses to build a map from");
  GridGeometry g;
  g.resolution = cfg.resolution;
  g.origin_x = std::floor((x0 - cfg.map_margin) / cfg.resolution) * cfg.resolution;
  g.origin_y = std::floor((y0 - cfg.map_margin) / cfg.resolution) * cfg.resolution;
  g.width = static_cast<int>(std::ceil((x1 + cfg.map_margin - g.origin_x) / cfg.resolution)) + 1;
  g.height = static_cast<int>(std::ceil((y1 + cfg.map_margin - g.origin_y) / cfg.resolution)) + 1;
  return g;
}

ClassGrid load_class_map(const fs::path& map) {
  if (map.extension() == ".tmap") return finalize_map(io::read_map(map)).grid;
  return io::read_class_grid(map);
}

void cmd_simulate(const PipelineConfig& cfg, const fs::path& out) {
  const GroundTruthWorld world = generate_world(cfg.world_spec());
  RouteSpec route = default_route(world);
  route.speed = cfg.sim_speed;
  const SimRun run = simulate_run(world, route, cfg.sim_options(), mix_seed(cfg.seed, 1));

  io::write_calibration(out / "calib.txt", {run.intrinsics, run.base_to_cam});
  std::vector<io::StampedPose> poses;
  for (const auto& f : run.frames) poses.push_back({f.timestamp, f.base_to_world});
  io::write_poses(out / "poses.txt", poses);
  io::write_tracklets(out / "tracklets.csv", run.tracklets);
  io::write_detections(out / "detections.csv", run.detections);
  io::write_class_grid(out / "gt" / "bev.png", world.raster);
  io::write_png_rgb(out / "gt" / "bev_color.png", io::colorize(world.raster.classes));

  const std::uint64_t oracle_seed = mix_seed(cfg.seed, 2);
  parallel_for(run.frames.size(), cfg.worker_count(), [&](std::size_t f) {
    const SimFrame& frame = run.frames[f];
    io::write_depth(out / "depth" / io::frame_name(f, ".png"), frame.depth);
    io::write_png8(out / "gt" / "labels" / io::frame_name(f, ".png"), frame.labels);
    io::write_prediction(out / "predictions" / io::frame_name(f, ".sprb"),
                         prediction_oracle(frame.labels, cfg.oracle_accuracy, mix_seed(oracle_seed, f)));
  });

  json w = {{"crossing_centers", world.crossing_centers}, {"obstacles", json::array()}};
  for (const auto& b : world.obstacles)
    w["obstacles"].push_back({{"min", {b.min.x(), b.min.y(), b.min.z()}}, {"max", {b.max.x(), b.max.y(), b.max.z()}}});
  w["frames"] = run.frames.size();
  w["tracklets"] = run.tracklets.size();
  w["detections"] = run.detections.size();
  write_json(out / "gt" / "world.json", w);
  write_config(cfg, out);
}

void cmd_annotate(const PipelineConfig& cfg, const fs::path& run_dir, const fs::path& out) {
  const RunInputs run = load_run(run_dir);
  io::require_file(run_dir / "tracklets.csv");
  io::require_file(run_dir / "detections.csv");
  const auto detections = io::read_detections(run_dir / "detections.csv");
  const auto& K = run.calib.K;
  const std::size_t n = run.poses.size();
  const AnnotateOptions opts = cfg.annotate_options();
  const int workers = cfg.worker_count();

  for (std::size_t f = 0; f < n; ++f) io::require_file(run_dir / "depth" / io::frame_name(f, ".png"));

  // Per-frame ground planes; densified depth only when tracklets are rebuilt from boxes.
  std::vector<GroundPlane> planes(n);
  std::vector<DepthImage> dense(cfg.tracklets_from_detections ? n : 0);
  parallel_for(n, workers, [&](std::size_t f) {
    const DepthImage depth = load_depth(run_dir, f);
    const CameraView view = CameraView::from_pose(run.poses[f].base_to_world, run.calib.base_to_cam, K);
    planes[f] = frame_plane(backproject_depth(depth, view, 2), run.poses[f].base_to_world, cfg.ransac_options(f));
    if (!dense.empty()) dense[f] = has_valid_depth(depth) ? densify_depth(depth, cfg.densify_radius) : depth;
  });

  std::vector<Tracklet> agents;
  if (cfg.tracklets_from_detections) {
    std::vector<TrackletFromDetectionsFrame> frames;
    for (std::size_t f = 0; f < n; ++f)
      frames.push_back({run.poses[f].timestamp, run.poses[f].base_to_world, &dense[f], planes[f]});
    std::map<int, std::vector<DetectionBox>> by_track;
    for (const auto& b : detections) by_track[b.track_id].push_back(b);
    for (const auto& [id, boxes] : by_track) {
      try {
        agents.push_back(tracklet_from_detections(boxes, frames, run.calib.base_to_cam, K, opts.widths));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::TooFewPoints) throw;
      }
    }
  } else {
    agents = io::read_tracklets(run_dir / "tracklets.csv", opts.widths);
  }

  Tracklet ego;
  ego.agent_class = AgentClass::Ego;
  ego.base_width = opts.widths.ego;
  for (const auto& p : run.poses) ego.points.push_back({p.timestamp, p.base_to_world.translation()});
  std::vector<Ribbon> ego_ribbons;
  if (ego.points.size() >= 2) ego_ribbons.push_back(build_ribbon(ego, 0.5 * ego.base_width));
  std::vector<Ribbon> agent_ribbons;
  for (const auto& t : agents)
    if (t.points.size() >= 2) agent_ribbons.push_back(build_ribbon(t, 0.5 * t.base_width));

  std::vector<double> ego_cov(n), full_cov(n);
  parallel_for(n, workers, [&](std::size_t f) {
    const DepthImage depth = load_depth(run_dir, f);
    const CameraView view = CameraView::from_pose(run.poses[f].base_to_world, run.calib.base_to_cam, K);
    std::vector<DetectionBox> boxes;
    for (const auto& b : detections)
      if (std::abs(b.timestamp - run.poses[f].timestamp) <= 1e-4) boxes.push_back(b);
    const auto points = backproject_depth(depth, view, 1);
    const FrameLabels labels = annotate_frame(view, ego_ribbons, agent_ribbons, points, planes[f], boxes, opts);
    write_mask_pair(out, "d0", f, labels.annotation);
    ego_cov[f] = coverage_fraction(labels.ego_only);
    full_cov[f] = coverage_fraction(labels.annotation);
  });

  json frames = json::array();
  double ego_sum = 0, full_sum = 0;
  for (std::size_t f = 0; f < n; ++f) {
    frames.push_back({{"frame", f}, {"ego_only", ego_cov[f]}, {"ego_tracklets", full_cov[f]}});
    ego_sum += ego_cov[f];
    full_sum += full_cov[f];
  }
  write_json(out / "coverage.json", {{"frames", frames},
                                     {"mean_ego_only", n ? ego_sum / n : 0.0},
                                     {"mean_ego_tracklets", n ? full_sum / n : 0.0},
                                     {"tracklets", agents.size()}});
  write_config(cfg, out);
}

void cmd_fuse(const PipelineConfig& cfg, const std::vector<fs::path>& run_dirs, const fs::path& out) {
  if (run_dirs.empty()) throw Error(ErrorKind::MissingInput, "no run directories given");
  std::vector<RunInputs> runs;
  for (const auto& dir : run_dirs) runs.push_back(load_run(dir));
  const GridGeometry grid = map_grid(runs, cfg);
  SurfaceMap map(grid);
  const FuseOptions opts = cfg.fuse_options();
  const int workers = cfg.worker_count();

  json report = json::array();
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const RunInputs& run = runs[r];
    const fs::path& dir = run_dirs[r];
    const std::size_t n = run.poses.size();
    for (std::size_t f = 0; f < n; ++f) {
      io::require_file(dir / "depth" / io::frame_name(f, ".png"));
      if (!fs::exists(dir / "predictions" / io::frame_name(f, ".sprb")) &&
          !fs::exists(dir / "predictions" / io::frame_name(f, ".png")))
        io::require_file(dir / "predictions" / io::frame_name(f, ".sprb"));
    }
    // Frames are reduced to sparse deltas in parallel and merged in frame order.
    std::vector<FrameDelta> deltas(n);
    parallel_for(n, workers, [&](std::size_t f) {
      const DepthImage raw = load_depth(dir, f);
      const CameraView view = CameraView::from_pose(run.poses[f].base_to_world, run.calib.base_to_cam, run.calib.K);
      const GroundPlane plane =
          frame_plane(backproject_depth(raw, view, 2), run.poses[f].base_to_world, cfg.ransac_options(f));
      const DepthImage depth =
          cfg.densify_radius > 0 && has_valid_depth(raw) ? densify_depth(raw, cfg.densify_radius) : raw;
      const PredictionImage pred = load_prediction(dir / "predictions", f);
      if (pred.width != run.calib.K.width || pred.height != run.calib.K.height)
        throw Error(ErrorKind::DimensionMismatch, "prediction size differs from calibration for frame " +
                                                      std::to_string(f));
      deltas[f] = frame_delta(grid, map.prior(), pred, depth, view, plane, opts);
    });
    std::size_t used = 0, outside_frames = 0;
    for (const auto& d : deltas) {
      apply_delta(map, d);
      used += d.result.used_pixels;
      outside_frames += d.result.outside_map ? 1 : 0;
    }
    report.push_back({{"run", r}, {"frames", n}, {"used_pixels", used}, {"frames_outside_map", outside_frames}});
  }

  const FinalizedMap fin = finalize_map(map);
  io::write_map(out / "map.tmap", map);
  io::write_class_grid(out / "map.png", fin.grid);
  io::write_png_rgb(out / "map_color.png", io::colorize(fin.grid.classes));
  std::size_t observed = 0;
  for (std::uint32_t c : map.counts()) observed += c > 0;
  write_json(out / "fuse.json", {{"runs", report},
                                 {"width", grid.width},
                                 {"height", grid.height},
                                 {"origin_x", grid.origin_x},
                                 {"origin_y", grid.origin_y},
                                 {"resolution", grid.resolution},
                                 {"observed_cells", observed}});
  write_config(cfg, out);
}

void cmd_render(const PipelineConfig& cfg, const fs::path& map_path, const fs::path& run_dir, const fs::path& out,
                const std::optional<fs::path>& d0) {
  const SurfaceMap map = io::read_map(map_path);
  const RunInputs run = load_run(run_dir);
  const FinalizedMap fin = finalize_map(map);
  const bool empty = std::none_of(map.counts().begin(), map.counts().end(), [](std::uint32_t c) { return c > 0; });
  SemanticMesh mesh;
  if (!empty) mesh = taubin_smooth(triangulate_map(fin, cfg.triangulate_options()), cfg.taubin_options());
  io::write_mesh(out / "mesh.tmesh", mesh);

  const std::size_t n = run.poses.size();
  std::vector<double> d1_cov(n), d0_cov(n, 0.0);
  parallel_for(n, cfg.worker_count(), [&](std::size_t f) {
    const CameraView view = CameraView::from_pose(run.poses[f].base_to_world, run.calib.base_to_cam, run.calib.K);
    const AnnotationImage labels = empty ? make_annotation(run.calib.K.width, run.calib.K.height)
                                         : render_mesh(mesh, view, cfg.near_plane).labels;
    write_mask_pair(out, "d1", f, labels);
    d1_cov[f] = coverage_fraction(labels);
    if (d0) d0_cov[f] = coverage_fraction(io::read_png8(*d0 / io::frame_name(f, ".png")));
  });

  json frames = json::array();
  double d1_sum = 0, d0_sum = 0;
  std::size_t denser = 0;
  for (std::size_t f = 0; f < n; ++f) {
    json row = {{"frame", f}, {"d1", d1_cov[f]}};
    if (d0) {
      row["d0"] = d0_cov[f];
      denser += d1_cov[f] > d0_cov[f];
    }
    frames.push_back(row);
    d1_sum += d1_cov[f];
    d0_sum += d0_cov[f];
  }
  json report = {{"frames", frames},
                 {"mean_d1", n ? d1_sum / n : 0.0},
                 {"mesh_vertices", mesh.num_vertices()},
                 {"mesh_faces", mesh.num_faces()}};
  if (d0) {
    report["mean_d0"] = n ? d0_sum / n : 0.0;
    report["frames_d1_denser"] = denser;
    report["fraction_d1_denser"] = n ? static_cast<double>(denser) / n : 0.0;
  }
  write_json(out / "coverage.json", report);
  write_config(cfg, out);
}

void cmd_eval(const PipelineConfig& cfg, const EvalInputs& in, const fs::path& out) {
  json report = json::object();
  std::string table;
  if ((in.masks || in.predictions) && !in.gt)
    throw Error(ErrorKind::MissingInput, "--gt is required to evaluate masks or predictions");
  if (in.masks) {
    ConfusionMatrix cm;
    for (const auto& file : sorted_files(*in.masks, ".png")) {
      const fs::path gt = *in.gt / file.filename();
      cm += confusion(io::read_png8(file), io::read_png8(gt));
    }
    const ClassMetrics m = class_metrics(cm);
    report["masks"] = metrics_json(m, cm.total());
    table += metrics_table("masks " + in.masks->filename().string(), m);
  }
  if (in.predictions) {
    ConfusionMatrix cm;
    double loss = 0.0;
    std::int64_t labelled = 0;
    const LossWeights w = cfg.loss_weights();
    for (const auto& file : sorted_files(*in.predictions, ".sprb")) {
      fs::path gt_name = file.filename();
      gt_name.replace_extension(".png");
      const AnnotationImage gt = io::read_png8(*in.gt / gt_name);
      const PredictionImage pred = io::read_prediction(file);
      AnnotationImage argmax = make_annotation(pred.width, pred.height);
      for (int r = 0; r < pred.height; ++r)
        for (int c = 0; c < pred.width; ++c) argmax(r, c) = to_index(pred.argmax(c, r));
      cm += confusion(argmax, gt);
      loss += weighted_cross_entropy(pred, gt, w);
      labelled += (gt.array() != 0).count();
    }
    const ClassMetrics m = class_metrics(cm);
    report["predictions"] = metrics_json(m, cm.total());
    report["predictions"]["weighted_cross_entropy"] = loss;
    report["predictions"]["weighted_cross_entropy_per_pixel"] = labelled ? loss / labelled : 0.0;
    table += metrics_table("predictions (argmax)", m);
  }
  if (in.map || in.bev) {
    if (!in.map || !in.bev) throw Error(ErrorKind::MissingInput, "--map and --bev go together");
    const BevComparison cmp = compare_bev(load_class_map(*in.map), io::read_class_grid(*in.bev));
    report["bev_observed"] = metrics_json(cmp.observed, cmp.observed_confusion.total());
    report["bev_full"] = metrics_json(cmp.full, cmp.full_confusion.total());
    report["bev_observed_cells"] = cmp.observed_cells;
    table += metrics_table("map, observed cells", cmp.observed);
    table += metrics_table("map, all cells", cmp.full);
  }
  if (report.empty()) throw Error(ErrorKind::MissingInput, "nothing to evaluate");
  write_json(out / "metrics.json", report);
  io::write_text(out / "metrics.txt", table);
  write_config(cfg, out);
}

void cmd_plan(const PipelineConfig& cfg, const fs::path& map_path, const Vec2& start, const Vec2& goal,
              const fs::path& out) {
  const ClassGrid map = load_class_map(map_path);
  Costmap cm = map_to_costmap(map, cfg.cost_table());
  if (cfg.smoothing_sigma > 0) cm = gaussian_smooth(cm, cfg.smoothing_sigma);
  const auto s = map.geometry.cell_of(start.x(), start.y());
  const auto g = map.geometry.cell_of(goal.x(), goal.y());
  if (!s || !g) throw Error(ErrorKind::InvalidEndpoint, "start or goal outside the map");
  const Path path = astar(cm, *s, *g);

  char buf[96];
  std::snprintf(buf, sizeof buf, "# cost %.17g cells %zu\n", path.cost, path.cells.size());
  std::string text = buf;
  json cells = json::array();
  io::RgbImage overlay = io::colorize(map.classes);
  std::array<std::int64_t, kNumRasterClasses> per_class{};
  for (const auto& c : path.cells) {
    const Eigen::Vector2d w = map.geometry.cell_center(c.x(), c.y());
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", w.x(), w.y());
    text += buf;
    cells.push_back({c.x(), c.y()});
    overlay.set(c.x(), c.y(), {255, 255, 255});
    per_class[map.classes(c.y(), c.x())] += 1;
  }
  json classes = json::object();
  for (int k = 0; k < kNumRasterClasses; ++k) {
    std::string name(class_name(static_cast<SurfaceClass>(k)));
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
    classes[name] = per_class[k];
  }
  io::write_text(out / "path.txt", text);
  io::write_png_rgb(out / "path_overlay.png", overlay);
  write_json(out / "plan.json", {{"cost", path.cost}, {"cells", cells}, {"cells_per_class", classes}});
  write_config(cfg, out);
}

}  // namespace surfmap::pipeline
