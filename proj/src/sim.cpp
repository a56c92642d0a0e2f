#include "surfmap/sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

namespace surfmap {

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

double snap(double v, double res) { return std::round(v / res) * res; }

// Slab test; returns the entry distance along the ray, or +inf.
double intersect_box(const Vec3& o, const Vec3& d, const Box3& box) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d(a) == 0.0) {
      if (o(a) < box.min(a) || o(a) > box.max(a)) return std::numeric_limits<double>::infinity();
      continue;
    }
    double ta = (box.min(a) - o(a)) / d(a);
    double tb = (box.max(a) - o(a)) / d(a);
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::numeric_limits<double>::infinity();
  }
  return t0 > 0.0 ? t0 : std::numeric_limits<double>::infinity();
}

struct Polyline {
  std::vector<Vec2> pts;
  std::vector<double> cum;  // arc length at each vertex

  explicit Polyline(std::vector<Vec2> p) : pts(std::move(p)) {
    cum.push_back(0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) cum.push_back(cum.back() + (pts[i] - pts[i - 1]).norm());
  }
  double length() const { return cum.back(); }
  // Position and unit direction at arc length s.
  std::pair<Vec2, Vec2> at(double s) const {
    std::size_t seg = 0;
    while (seg + 2 < pts.size() && s > cum[seg + 1]) ++seg;
    const Vec2 d = pts[seg + 1] - pts[seg];
    const double len = d.norm();
    const double u = len > 0 ? std::clamp((s - cum[seg]) / len, 0.0, 1.0) : 0.0;
    return {pts[seg] + u * d, len > 0 ? Vec2(d / len) : Vec2(1, 0)};
  }
};

struct AgentMotion {
  AgentClass cls;
  Vec2 a, b;
  bool loop;  // vehicles wrap around, pedestrians walk back and forth
  double speed;
  double phase;
  double w1, w2, p1, p2;
  Vec3 size;  // extent along x, y, z
  int id_base;
};

struct AgentState {
  Vec3 ground;  // on the terrain
  int track_id;
};

AgentState agent_state(const AgentMotion& m, double t, double sigma, const GroundTruthWorld& world) {
  const Vec2 ab = m.b - m.a;
  const double len = ab.norm();
  const double s = m.phase + m.speed * t;
  Vec2 pos;
  int pass = 0;
  if (m.loop) {
    pass = static_cast<int>(std::floor(s / len));
    pos = m.a + ab * (std::fmod(s, len) / len);
  } else {
    const double u = std::fmod(s, 2.0 * len);
    pos = u < len ? Vec2(m.a + ab * (u / len)) : Vec2(m.b - ab * ((u - len) / len));
  }
  const Vec2 lateral(-ab.y() / len, ab.x() / len);
  const double jitter = sigma * (std::sin(m.w1 * t + m.p1) + std::sin(m.w2 * t + m.p2));
  pos += jitter * lateral;
  return {Vec3(pos.x(), pos.y(), world.height(pos.x(), pos.y())), m.id_base + pass};
}

Box3 agent_box(const AgentMotion& m, const Vec3& ground) {
  const Vec3 half(0.5 * m.size.x(), 0.5 * m.size.y(), 0.0);
  return {ground - half, ground + half + Vec3(0, 0, m.size.z())};
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double GroundTruthWorld::height(double x, double y) const {
  if (flat()) return 0.0;
  const double k = 2.0 * std::numbers::pi / spec.terrain_wavelength;
  return spec.terrain_amplitude * std::sin(k * x) * std::cos(k * y);
}

SurfaceClass GroundTruthWorld::class_at(double x, double y) const {
  const auto cell = raster.geometry.cell_of(x, y);
  return cell ? raster.at(cell->x(), cell->y()) : SurfaceClass::Unknown;
}

GroundTruthWorld generate_world(const WorldSpec& spec) {
  if (!(spec.extent > 0) || !(spec.resolution > 0) || !(spec.road_width > 0) || !(spec.sidewalk_width > 0) ||
      !(spec.crossing_width > 0) || !(spec.obstacle_size > 0) || spec.crossings < 0 || spec.obstacles < 0)
    throw Error(ErrorKind::InfeasibleLayout, "widths and sizes must be positive");
  if (spec.road_width + 2 * spec.sidewalk_width >= spec.extent)
    throw Error(ErrorKind::InfeasibleLayout, "road and sidewalks exceed the world extent");
  if (spec.crossings * spec.crossing_width >= spec.extent)
    throw Error(ErrorKind::InfeasibleLayout, "crossings exceed the world extent");

  GroundTruthWorld world;
  world.spec = spec;
  const int n = static_cast<int>(std::lround(spec.extent / spec.resolution));
  const double half = 0.5 * spec.extent;
  world.raster.geometry = {-half, -half, spec.resolution, n, n};
  world.raster.classes = make_annotation(n, n);
  for (int k = 0; k < spec.crossings; ++k)
    world.crossing_centers.push_back(snap(-half + spec.extent * (k + 0.5) / spec.crossings, spec.resolution));

  const double road_half = 0.5 * spec.road_width;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector2d c = world.raster.geometry.cell_center(i, j);
      SurfaceClass cls = SurfaceClass::Pedestrian;
      if (std::abs(c.y()) < road_half) {
        cls = SurfaceClass::Road;
        for (double xc : world.crossing_centers)
          if (std::abs(c.x() - xc) < 0.5 * spec.crossing_width) cls = SurfaceClass::Crossing;
      }
      world.raster.classes(j, i) = to_index(cls);
    }
  }

  // Obstacles: whole-cell squares in the pedestrian area beyond the sidewalks,
  // kept clear of crossing approaches.
  std::mt19937_64 rng(mix_seed(spec.seed, 0x0b57));
  const double size = snap(spec.obstacle_size, spec.resolution);
  const double y_lo = road_half + spec.sidewalk_width + 0.5;
  const double y_hi = std::min(y_lo + 4.0, half - size - 0.5);
  const double x_lo = -half + 1.0;
  const double x_hi = half - 1.0 - size;
  if (spec.obstacles > 0 && (y_hi < y_lo || x_hi < x_lo))
    throw Error(ErrorKind::InfeasibleLayout, "no room for obstacles");
  std::vector<Eigen::Vector2d> corners;
  for (int attempt = 0; attempt < 10000 && static_cast<int>(corners.size()) < spec.obstacles; ++attempt) {
    const int side = (rng() & 1) ? 1 : -1;
    const double x0 = snap(uniform(rng, x_lo, x_hi), spec.resolution);
    const double y_in = snap(uniform(rng, y_lo, y_hi), spec.resolution);
    const double y0 = side > 0 ? y_in : -y_in - size;
    bool ok = true;
    for (double xc : world.crossing_centers)
      if (std::abs(x0 + 0.5 * size - xc) < 0.5 * spec.crossing_width + 2.0) ok = false;
    for (const auto& c : corners)
      if (std::abs(c.x() - x0) < size + 0.5 && std::abs(c.y() - y0) < size + 0.5) ok = false;
    if (ok) corners.emplace_back(x0, y0);
  }
  if (static_cast<int>(corners.size()) < spec.obstacles)
    throw Error(ErrorKind::InfeasibleLayout, "could not place all obstacles");

  constexpr double kInset = 0.05;
  for (const auto& c : corners) {
    double z_lo = std::numeric_limits<double>::infinity();
    for (double dx : {0.0, size})
      for (double dy : {0.0, size}) z_lo = std::min(z_lo, world.height(c.x() + dx, c.y() + dy));
    const double base = world.flat() ? 0.0 : z_lo - 0.1;
    world.obstacles.push_back({Vec3(c.x() + kInset, c.y() + kInset, base),
                               Vec3(c.x() + size - kInset, c.y() + size - kInset,
                                    base + spec.obstacle_height + (world.flat() ? 0.0 : 0.1))});
    const auto first = world.raster.geometry.cell_of(c.x() + 0.5 * spec.resolution, c.y() + 0.5 * spec.resolution);
    const int m = static_cast<int>(std::lround(size / spec.resolution));
    for (int dj = 0; dj < m; ++dj)
      for (int di = 0; di < m; ++di) world.raster.classes(first->y() + dj, first->x() + di) = to_index(SurfaceClass::Obstacle);
  }
  return world;
}

RouteSpec default_route(const GroundTruthWorld& world) {
  const double half = 0.5 * world.spec.extent;
  const double y = world.sidewalk_center(1);
  RouteSpec route;
  if (world.crossing_centers.empty()) {
    route.waypoints = {{-half + 4.0, y}, {half - 4.0, y}};
    return route;
  }
  const double xc = world.crossing_centers.front();
  route.waypoints = {{-half + 4.0, y}, {xc, y}, {xc, -y}, {half - 4.0, -y}};
  return route;
}

RigidTransformd make_base_to_cam(double camera_height, double pitch_deg) {
  const double p = pitch_deg * std::numbers::pi / 180.0;
  const Vec3 z_c(std::cos(p), 0.0, -std::sin(p));
  const Vec3 x_c(0.0, -1.0, 0.0);
  const Vec3 y_c = z_c.cross(x_c);
  Eigen::Matrix3d r;
  r.col(0) = x_c;
  r.col(1) = y_c;
  r.col(2) = z_c;
  const RigidTransformd cam_to_base(Eigen::Quaterniond(r), Vec3(0, 0, camera_height));
  return cam_to_base.inverse();
}

SimRun simulate_run(const GroundTruthWorld& world, const RouteSpec& route, const SimOptions& options,
                    std::uint64_t seed) {
  if (route.waypoints.size() < 2 || !(route.speed > 0) || !(options.frame_rate > 0) || !(route.dwell >= 0))
    throw Error(ErrorKind::InvalidArgument, "route needs two waypoints, positive speed and nonnegative dwell");
  options.intrinsics.validate();
  const Polyline path(route.waypoints);
  for (double s = 0.0; s <= path.length(); s += 0.05) {
    const Vec2 p = path.at(s).first;
    const SurfaceClass c = world.class_at(p.x(), p.y());
    if (c != SurfaceClass::Pedestrian && c != SurfaceClass::Crossing)
      throw Error(ErrorKind::RouteOffSurface, "route leaves pedestrian surfaces");
  }

  const WorldSpec& spec = world.spec;
  const double half = 0.5 * spec.extent;
  std::mt19937_64 rng(mix_seed(seed, 0xa6e7));
  std::vector<AgentMotion> agents;
  const double walk_offset = 0.25 * spec.sidewalk_width;
  for (int k = 0; k < options.pedestrians; ++k) {
    AgentMotion m{AgentClass::Pedestrian, {}, {}, false, options.pedestrian_speed, 0, 0, 0, 0, 0,
                  Vec3(0.5, 0.5, 1.7), k * 1000};
    const bool crossing = !world.crossing_centers.empty() && k % 2 == 0;
    if (crossing) {
      const double xc = world.crossing_centers[(k / 2) % world.crossing_centers.size()];
      const double off = uniform(rng, -1.0, 1.0) * std::max(0.0, 0.5 * spec.crossing_width - 0.6);
      const double y = world.sidewalk_center(1) + walk_offset;
      m.a = {xc + off, y};
      m.b = {xc + off, -y};
    } else {
      const int side = (k / 2) % 2 == 0 ? 1 : -1;
      const double y = side * (world.sidewalk_center(1) + walk_offset);
      m.a = {-half + 2.0, y};
      m.b = {half - 2.0, y};
    }
    m.phase = uniform(rng, 0.0, 2.0 * (m.b - m.a).norm());
    m.w1 = uniform(rng, 0.3, 0.8);
    m.w2 = uniform(rng, 0.8, 1.5);
    m.p1 = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    m.p2 = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    agents.push_back(m);
  }
  for (int k = 0; k < options.vehicles; ++k) {
    const int side = k % 2 == 0 ? -1 : 1;
    const double y = side * 0.25 * spec.road_width;
    AgentMotion m{AgentClass::Vehicle, {}, {}, true, options.vehicle_speed, 0, 0, 0, 0, 0,
                  Vec3(4.0, 1.8, 1.5), (100 + k) * 1000};
    m.a = {side < 0 ? -half : half, y};
    m.b = {side < 0 ? half : -half, y};
    m.phase = uniform(rng, 0.0, spec.extent);
    m.w1 = uniform(rng, 0.2, 0.5);
    m.w2 = uniform(rng, 0.5, 1.0);
    m.p1 = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    m.p2 = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    agents.push_back(m);
  }

  SimRun run;
  run.intrinsics = options.intrinsics;
  run.base_to_cam = make_base_to_cam(options.camera_height, options.camera_pitch_deg);
  run.ego.id = -1;
  run.ego.agent_class = AgentClass::Ego;
  const CameraIntrinsics& K = options.intrinsics;
  const Eigen::Matrix3d k_inv = K.inverse_matrix();
  std::map<int, Tracklet> tracks;

  const double duration = route.dwell + path.length() / route.speed;
  const int frames = static_cast<int>(std::floor(duration * options.frame_rate + 1e-9)) + 1;
  for (int f = 0; f < frames; ++f) {
    const double t = f / options.frame_rate;
    const auto [xy, dir] = path.at(std::clamp(route.speed * (t - route.dwell), 0.0, path.length()));
    const Vec3 base(xy.x(), xy.y(), world.height(xy.x(), xy.y()));
    const double yaw = std::atan2(dir.y(), dir.x());
    SimFrame frame;
    frame.timestamp = t;
    frame.base_to_world = RigidTransformd(Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ())), base);
    run.ego.points.push_back({t, base});

    const CameraView view = CameraView::from_pose(frame.base_to_world, run.base_to_cam, K);
    const RigidTransformd cam_to_world = view.cam_to_world();
    const Vec3 origin = cam_to_world.translation();
    const Eigen::Matrix3d rot = cam_to_world.rotation_matrix();

    std::vector<Box3> agent_boxes;
    std::vector<AgentState> states;
    for (const auto& m : agents) {
      states.push_back(agent_state(m, t, options.jitter_sigma, world));
      agent_boxes.push_back(agent_box(m, states.back().ground));
    }

    frame.depth = DepthImage::Zero(K.height, K.width);
    frame.labels = make_annotation(K.width, K.height);
    for (int r = 0; r < K.height; ++r) {
      for (int c = 0; c < K.width; ++c) {
        // Direction with unit camera-frame z, so the hit distance is the depth.
        const Vec3 d = rot * (k_inv * Vec3(c, r, 1.0));
        double best = std::numeric_limits<double>::infinity();
        SurfaceClass cls = SurfaceClass::Unknown;
        if (world.flat()) {
          if (d.z() < 0.0) {
            const double tg = -origin.z() / d.z();
            const Vec3 p = origin + tg * d;
            if (world.contains(p.x(), p.y())) {
              best = tg;
              cls = world.class_at(p.x(), p.y());
            }
          }
        } else {
          auto above = [&](double s) {
            const Vec3 p = origin + s * d;
            return p.z() - world.height(p.x(), p.y());
          };
          double prev = 0.0;
          for (double s = 0.1; s <= options.max_range; s += 0.1) {
            if (above(s) <= 0.0) {
              double lo = prev, hi = s;
              for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                (above(mid) > 0.0 ? lo : hi) = mid;
              }
              const Vec3 p = origin + hi * d;
              if (world.contains(p.x(), p.y())) {
                best = hi;
                cls = world.class_at(p.x(), p.y());
              }
              break;
            }
            prev = s;
          }
        }
        for (const auto& box : world.obstacles) {
          const double tb = intersect_box(origin, d, box);
          if (tb < best) {
            best = tb;
            cls = SurfaceClass::Obstacle;
          }
        }
        for (const auto& box : agent_boxes) {
          const double tb = intersect_box(origin, d, box);
          if (tb < best) {
            best = tb;
            cls = SurfaceClass::Obstacle;
          }
        }
        if (best > options.max_range) continue;
        frame.labels(r, c) = to_index(cls);
        if (r % options.depth_row_stride == 0) frame.depth(r, c) = static_cast<float>(best);
      }
    }

    for (std::size_t a = 0; a < agents.size(); ++a) {
      const Box3& box = agent_boxes[a];
      if ((states[a].ground - origin).norm() > options.detection_range) continue;
      double u0 = std::numeric_limits<double>::infinity(), v0 = u0, u1 = -u0, v1 = -u0;
      bool in_front = true;
      for (int corner = 0; corner < 8; ++corner) {
        const Vec3 p((corner & 1) ? box.max.x() : box.min.x(), (corner & 2) ? box.max.y() : box.min.y(),
                     (corner & 4) ? box.max.z() : box.min.z());
        const Vec3 pc = view.world_to_cam * p;
        if (pc.z() < kDefaultNearPlane) {
          in_front = false;
          break;
        }
        const auto proj = project_camera_point(pc, K);
        u0 = std::min(u0, proj.pixel.x());
        u1 = std::max(u1, proj.pixel.x());
        v0 = std::min(v0, proj.pixel.y());
        v1 = std::max(v1, proj.pixel.y());
      }
      if (!in_front) continue;
      u0 = std::max(u0, -0.5);
      v0 = std::max(v0, -0.5);
      u1 = std::min(u1, K.width - 0.5);
      v1 = std::min(v1, K.height - 0.5);
      if (u1 - u0 < 2.0 || v1 - v0 < 2.0) continue;
      const AgentMotion& m = agents[a];
      run.detections.push_back({states[a].track_id, m.cls, t, u0, v0, u1, v1});
      Tracklet& tr = tracks[states[a].track_id];
      tr.id = states[a].track_id;
      tr.agent_class = m.cls;
      tr.base_width = m.cls == AgentClass::Vehicle ? 2.0 : 0.5;
      tr.points.push_back({t, states[a].ground});
    }
    run.frames.push_back(std::move(frame));
  }
  for (auto& [id, tr] : tracks) run.tracklets.push_back(std::move(tr));
  return run;
}

PredictionImage prediction_oracle(const AnnotationImage& truth, double accuracy, std::uint64_t seed, bool resample) {
  const int k = kNumBeliefClasses;
  if (!(accuracy >= 1.0 / k - 1e-12 && accuracy <= 1.0))
    throw Error(ErrorKind::InvalidArgument, "oracle accuracy must lie in [1/K, 1]");
  const int w = static_cast<int>(truth.cols());
  const int h = static_cast<int>(truth.rows());
  PredictionImage pred{w, h, Eigen::MatrixXf::Constant(k, static_cast<Eigen::Index>(w) * h, 1.0f / k)};
  std::mt19937_64 rng(seed);
  const float peak = static_cast<float>(accuracy);
  const float rest = static_cast<float>((1.0 - accuracy) / (k - 1));
  for (Eigen::Index n = 0; n < truth.size(); ++n) {
    const int cls = truth.data()[n];
    if (cls == 0 || cls >= kNumRasterClasses) continue;
    int emitted = cls - 1;
    if (resample && uniform01(rng) >= accuracy) {
      const int wrong = static_cast<int>(rng() % (k - 1));
      emitted = wrong >= cls - 1 ? wrong + 1 : wrong;
    }
    auto col = pred.probabilities.col(n);
    col.setConstant(rest);
    col(emitted) = peak;
  }
  return pred;
}

}  // namespace surfmap
