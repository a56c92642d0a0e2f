#include "surfmap/annotate.hpp"

#include <algorithm>
#include <cmath>

namespace surfmap {

std::string_view agent_class_name(AgentClass c) {
  switch (c) {
    case AgentClass::Pedestrian: return "pedestrian";
    case AgentClass::Vehicle: return "vehicle";
    case AgentClass::Ego: return "ego";
  }
  return "pedestrian";
}

AgentClass parse_agent_class(std::string_view s) {
  if (s == "pedestrian") return AgentClass::Pedestrian;
  if (s == "vehicle") return AgentClass::Vehicle;
  if (s == "ego") return AgentClass::Ego;
  throw Error(ErrorKind::FormatError, "unknown agent class '" + std::string(s) + "'");
}

PixelSet& PixelSet::operator|=(const PixelSet& o) {
  if (!same_shape(o)) throw Error(ErrorKind::DimensionMismatch, "pixel set sizes differ");
  mask_ = mask_.cwiseMax(o.mask_);
  return *this;
}

PixelSet& PixelSet::operator&=(const PixelSet& o) {
  if (!same_shape(o)) throw Error(ErrorKind::DimensionMismatch, "pixel set sizes differ");
  mask_ = mask_.cwiseMin(o.mask_);
  return *this;
}

Ribbon build_ribbon(const Tracklet& track, double half_width) {
  Ribbon ribbon;
  ribbon.source = track.agent_class;
  const auto& pts = track.points;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const WorldPoint& a = pts[i].position;
    const WorldPoint& b = pts[i + 1].position;
    const Vec2 dir = (b - a).head<2>();
    const double len = dir.norm();
    if (!(len > 1e-9)) continue;  // ZeroLengthSegment
    const Vec3 offset(-dir.y() / len * half_width, dir.x() / len * half_width, 0.0);
    ribbon.quads.push_back({{a + offset, b + offset, b - offset, a - offset}});
  }
  return ribbon;
}

PixelSet rasterize_ribbon(const Ribbon& ribbon, const CameraView& view, double near) {
  PixelSet set(view.K.width, view.K.height);
  std::vector<Vec3> poly(4);
  for (const auto& quad : ribbon.quads) {
    for (int k = 0; k < 4; ++k) poly[k] = view.world_to_cam * quad.corners[k];
    rasterize_camera_polygon(poly, view.K, near, [&](int c, int r, double) { set.insert(c, r); });
  }
  return set;
}

PixelSet derive_crossing(const PixelSet& pedestrian, const PixelSet& vehicle) {
  return pedestrian & vehicle;
}

PixelSet label_obstacles(std::span<const ObservedPoint> points, const GroundPlane& plane,
                         std::span<const DetectionBox> boxes, int width, int height,
                         const ObstacleOptions& options) {
  PixelSet set(width, height);
  const int rad = options.splat_radius;
  for (const auto& p : points) {
    if (!(plane.signed_distance(p.world) > options.height_threshold)) continue;
    const int cu = static_cast<int>(std::lround(p.pixel.x()));
    const int cv = static_cast<int>(std::lround(p.pixel.y()));
    for (int dv = -rad; dv <= rad; ++dv) {
      for (int du = -rad; du <= rad; ++du) {
        if (du * du + dv * dv > rad * rad) continue;
        const int c = cu + du;
        const int r = cv + dv;
        if (c >= 0 && c < width && r >= 0 && r < height) set.insert(c, r);
      }
    }
  }
  for (const auto& box : boxes) {
    const int c0 = std::max(0, static_cast<int>(std::ceil(box.u_min)));
    const int c1 = std::min(width - 1, static_cast<int>(std::floor(box.u_max)));
    const int r0 = std::max(0, static_cast<int>(std::ceil(box.v_min)));
    const int r1 = std::min(height - 1, static_cast<int>(std::floor(box.v_max)));
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c) set.insert(c, r);
  }
  return set;
}

AnnotationImage compose_annotation(const PixelSet& ego, const PixelSet& pedestrian,
                                   const PixelSet& vehicle, const PixelSet& obstacle) {
  if (!ego.same_shape(pedestrian) || !ego.same_shape(vehicle) || !ego.same_shape(obstacle))
    throw Error(ErrorKind::DimensionMismatch, "pixel set sizes differ");
  const PixelSet ped_evidence = ego | pedestrian;
  const PixelSet crossing = derive_crossing(ped_evidence, vehicle);
  AnnotationImage out = make_annotation(ego.width(), ego.height());
  for (int r = 0; r < ego.height(); ++r) {
    for (int c = 0; c < ego.width(); ++c) {
      SurfaceClass cls = SurfaceClass::Unknown;
      if (obstacle.contains(c, r))
        cls = SurfaceClass::Obstacle;
      else if (crossing.contains(c, r))
        cls = SurfaceClass::Crossing;
      else if (ped_evidence.contains(c, r))
        cls = SurfaceClass::Pedestrian;
      else if (vehicle.contains(c, r))
        cls = SurfaceClass::Road;
      out(r, c) = to_index(cls);
    }
  }
  return out;
}

Tracklet tracklet_from_detections(std::span<const DetectionBox> boxes,
                                  std::span<const TrackletFromDetectionsFrame> frames,
                                  const RigidTransformd& base_to_cam, const CameraIntrinsics& K,
                                  const AgentWidths& widths, double time_tolerance) {
  Tracklet track;
  if (!boxes.empty()) {
    track.id = boxes.front().track_id;
    track.agent_class = boxes.front().agent_class;
  }
  track.base_width = widths.of(track.agent_class);
  const RigidTransformd cam_to_base = base_to_cam.inverse();

  for (const auto& box : boxes) {
    const auto frame = std::find_if(frames.begin(), frames.end(), [&](const auto& f) {
      return std::abs(f.timestamp - box.timestamp) <= time_tolerance;
    });
    if (frame == frames.end() || frame->depth == nullptr) continue;
    const PixelPoint centre(0.5 * (box.u_min + box.u_max), 0.5 * (box.v_min + box.v_max));
    const int c = static_cast<int>(std::lround(centre.x()));
    const int r = static_cast<int>(std::lround(centre.y()));
    const DepthImage& depth = *frame->depth;
    if (r < 0 || c < 0 || r >= depth.rows() || c >= depth.cols()) continue;
    const double d = depth(r, c);
    if (!(d > 0.0)) continue;  // NoValidDepth: frame skipped
    const Vec3 world = backproject_pixel_to_world(centre, d, frame->base_to_world, cam_to_base, K);
    track.points.push_back({frame->timestamp, frame->plane.drop(world)});
  }
  std::sort(track.points.begin(), track.points.end(),
            [](const TrackPoint& a, const TrackPoint& b) { return a.timestamp < b.timestamp; });
  track.points.erase(std::unique(track.points.begin(), track.points.end(),
                                 [](const TrackPoint& a, const TrackPoint& b) {
                                   return a.timestamp == b.timestamp;
                                 }),
                     track.points.end());
  if (track.points.size() < 2)
    throw Error(ErrorKind::TooFewPoints, "track " + std::to_string(track.id) + " has fewer than 2 usable detections");
  return track;
}

std::vector<ObservedPoint> backproject_depth(const DepthImage& depth, const CameraView& view, int stride) {
  std::vector<ObservedPoint> pts;
  const RigidTransformd cam_to_world = view.cam_to_world();
  for (int r = 0; r < depth.rows(); r += stride) {
    for (int c = 0; c < depth.cols(); c += stride) {
      const double d = depth(r, c);
      if (!(d > 0.0)) continue;
      const PixelPoint u(c, r);
      pts.push_back({cam_to_world * backproject_to_camera(u, d, view.K), u});
    }
  }
  return pts;
}

FrameLabels annotate_frame(const CameraView& view, std::span<const Ribbon> ego_ribbons,
                           std::span<const Ribbon> agent_ribbons, std::span<const ObservedPoint> points,
                           const GroundPlane& plane, std::span<const DetectionBox> frame_boxes,
                           const AnnotateOptions& options) {
  const int w = view.K.width;
  const int h = view.K.height;
  FrameLabels out{PixelSet(w, h), PixelSet(w, h), PixelSet(w, h), PixelSet(w, h), {}, {}};
  for (const auto& ribbon : ego_ribbons) out.ego |= rasterize_ribbon(ribbon, view, options.near_plane);
  for (const auto& ribbon : agent_ribbons) {
    PixelSet s = rasterize_ribbon(ribbon, view, options.near_plane);
    if (ribbon.source == AgentClass::Vehicle)
      out.vehicle |= s;
    else
      out.pedestrian |= s;
  }
  out.obstacle = label_obstacles(points, plane, frame_boxes, w, h, options.obstacles);
  out.annotation = compose_annotation(out.ego, out.pedestrian, out.vehicle, out.obstacle);
  const PixelSet none(w, h);
  out.ego_only = compose_annotation(out.ego, none, none, out.obstacle);
  return out;
}

}  // namespace surfmap
