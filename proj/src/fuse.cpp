#include "surfmap/fuse.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace surfmap {

PatchBelief uniform_belief(int num_classes) {
  if (num_classes < 2) throw Error(ErrorKind::InvalidArgument, "need at least two classes");
  return {logodds_from_probs(Eigen::VectorXd::Constant(num_classes, 1.0 / num_classes)), 0, 0.0};
}

PatchBelief update_belief(const PatchBelief& h, const LogOdds& l, const PatchBelief& h0) {
  if (h.log_odds.size() != l.size() || h0.log_odds.size() != l.size())
    throw Error(ErrorKind::DimensionMismatch, "belief and observation sizes differ");
  return {h.log_odds + (l - h0.log_odds), h.count + 1, h.elevation_sum};
}

FinalizedPatch finalize_patch(const PatchBelief& h) {
  FinalizedPatch out;
  out.probabilities = softmax(h.log_odds);
  if (h.count == 0) return out;
  Eigen::Index best = 0;
  const double max = out.probabilities.maxCoeff(&best);  // first maximum
  out.cls = class_from_belief_index(static_cast<int>(best));
  out.low_confidence = (out.probabilities.array() == max).count() > 1;
  return out;
}

SurfaceClass PredictionImage::argmax(int col, int row) const {
  Eigen::Index best = 0;
  pixel(col, row).maxCoeff(&best);
  return class_from_belief_index(static_cast<int>(best));
}

PredictionImage prediction_from_classes(const AnnotationImage& classes, const Raster<float>& confidence) {
  if (classes.rows() != confidence.rows() || classes.cols() != confidence.cols())
    throw Error(ErrorKind::DimensionMismatch, "class and confidence rasters differ in size");
  const int k = kNumBeliefClasses;
  PredictionImage pred{static_cast<int>(classes.cols()), static_cast<int>(classes.rows()),
                       Eigen::MatrixXf::Constant(k, classes.size(), 1.0f / k)};
  for (int r = 0; r < pred.height; ++r) {
    for (int c = 0; c < pred.width; ++c) {
      const auto cls = static_cast<SurfaceClass>(classes(r, c));
      if (cls == SurfaceClass::Unknown || to_index(cls) >= kNumRasterClasses) continue;
      const float conf = std::clamp(confidence(r, c), 0.0f, 1.0f);
      auto col = pred.probabilities.col(static_cast<Eigen::Index>(r) * pred.width + c);
      col.setConstant((1.0f - conf) / (k - 1));
      col(belief_index(cls)) = conf;
    }
  }
  return pred;
}

SurfaceMap::SurfaceMap(const GridGeometry& geometry, int num_classes)
    : geometry_(geometry),
      prior_(uniform_belief(num_classes)),
      log_odds_(prior_.log_odds.replicate(1, static_cast<Eigen::Index>(geometry.size()))),
      counts_(geometry.size(), 0),
      elevation_sums_(geometry.size(), 0.0) {
  if (!(geometry.resolution > 0) || geometry.width <= 0 || geometry.height <= 0)
    throw Error(ErrorKind::InvalidArgument, "invalid map grid");
}

PatchBelief SurfaceMap::patch(int i, int j) const {
  const std::size_t idx = geometry_.index(i, j);
  return {log_odds_.col(static_cast<Eigen::Index>(idx)), counts_[idx], elevation_sums_[idx]};
}

void SurfaceMap::observe(int i, int j, const LogOdds& l, double z) {
  if (l.size() != num_classes()) throw Error(ErrorKind::DimensionMismatch, "observation size differs");
  const std::size_t idx = geometry_.index(i, j);
  log_odds_.col(static_cast<Eigen::Index>(idx)) += l - prior_.log_odds;
  counts_[idx] += 1;
  elevation_sums_[idx] += z;
}

void SurfaceMap::add_delta(std::size_t cell, const Eigen::Ref<const Eigen::VectorXd>& delta,
                           std::uint32_t count, double elevation_sum) {
  log_odds_.col(static_cast<Eigen::Index>(cell)) += delta;
  counts_[cell] += count;
  elevation_sums_[cell] += elevation_sum;
}

void SurfaceMap::merge(const SurfaceMap& other) {
  if (!(other.geometry_ == geometry_) || other.num_classes() != num_classes())
    throw Error(ErrorKind::GridMismatch, "maps do not share a grid");
  log_odds_ += other.log_odds_.colwise() - prior_.log_odds;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    counts_[i] += other.counts_[i];
    elevation_sums_[i] += other.elevation_sums_[i];
  }
}

void SurfaceMap::set_cell(std::size_t cell, const Eigen::Ref<const Eigen::VectorXd>& log_odds,
                          std::uint32_t count, double elevation_sum) {
  log_odds_.col(static_cast<Eigen::Index>(cell)) = log_odds;
  counts_[cell] = count;
  elevation_sums_[cell] = elevation_sum;
}

FrameDelta frame_delta(const GridGeometry& grid, const PatchBelief& prior, const PredictionImage& pred,
                       const DepthImage& depth, const CameraView& view, const GroundPlane& plane,
                       const FuseOptions& options) {
  if (pred.width != depth.cols() || pred.height != depth.rows())
    throw Error(ErrorKind::DimensionMismatch, "prediction and depth sizes differ");
  const int k = static_cast<int>(prior.log_odds.size());
  if (pred.probabilities.rows() != k) throw Error(ErrorKind::DimensionMismatch, "prediction class count differs");

  FrameDelta out;
  std::unordered_map<std::size_t, std::size_t> slot;
  std::vector<Eigen::VectorXd> sums;
  const RigidTransformd cam_to_world = view.cam_to_world();
  std::size_t valid = 0;

  for (int r = 0; r < pred.height; ++r) {
    for (int c = 0; c < pred.width; ++c) {
      const double d = depth(r, c);
      if (!(d > 0.0)) continue;
      ++valid;
      const Vec3 p = cam_to_world * backproject_to_camera(PixelPoint(c, r), d, view.K);
      const auto cell = grid.cell_of(p.x(), p.y());
      if (!cell) {
        ++out.result.outside_pixels;
        continue;
      }
      const auto probs = pred.pixel(c, r).cast<double>();
      const bool near_ground = std::abs(p.z() - plane.height_at(p.x(), p.y())) <= options.ground_band;
      Eigen::Index best = 0;
      probs.maxCoeff(&best);
      if (!near_ground && class_from_belief_index(static_cast<int>(best)) != SurfaceClass::Obstacle) continue;

      const std::size_t idx = grid.index(cell->x(), cell->y());
      auto [it, inserted] = slot.try_emplace(idx, sums.size());
      if (inserted) {
        sums.push_back(Eigen::VectorXd::Zero(k));
        out.counts.push_back(0);
        out.elevation_sums.push_back(0.0);
        out.cells.push_back(idx);
      }
      const std::size_t s = it->second;
      sums[s] += logodds_from_probs(probs, options.eps) - prior.log_odds;
      out.counts[s] += 1;
      out.elevation_sums[s] += p.z();
      ++out.result.used_pixels;
    }
  }
  out.result.outside_map = valid > 0 && out.result.outside_pixels == valid;

  std::vector<std::size_t> order(out.cells.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return out.cells[a] < out.cells[b]; });
  FrameDelta sorted;
  sorted.result = out.result;
  sorted.deltas.resize(k, static_cast<Eigen::Index>(order.size()));
  for (std::size_t n = 0; n < order.size(); ++n) {
    sorted.cells.push_back(out.cells[order[n]]);
    sorted.deltas.col(static_cast<Eigen::Index>(n)) = sums[order[n]];
    sorted.counts.push_back(out.counts[order[n]]);
    sorted.elevation_sums.push_back(out.elevation_sums[order[n]]);
  }
  return sorted;
}

void apply_delta(SurfaceMap& map, const FrameDelta& delta) {
  for (std::size_t n = 0; n < delta.cells.size(); ++n)
    map.add_delta(delta.cells[n], delta.deltas.col(static_cast<Eigen::Index>(n)), delta.counts[n],
                  delta.elevation_sums[n]);
}

AccumulateResult accumulate_frame(SurfaceMap& map, const PredictionImage& pred, const DepthImage& depth,
                                  const CameraView& view, const GroundPlane& plane, const FuseOptions& options) {
  FrameDelta delta = frame_delta(map.geometry(), map.prior(), pred, depth, view, plane, options);
  apply_delta(map, delta);
  return delta.result;
}

FinalizedMap finalize_map(const SurfaceMap& map) {
  const GridGeometry& g = map.geometry();
  FinalizedMap out;
  out.grid.geometry = g;
  out.grid.classes = make_annotation(g.width, g.height);
  out.elevation = Raster<double>::Constant(g.height, g.width, std::numeric_limits<double>::quiet_NaN());
  out.counts = Raster<std::uint32_t>::Zero(g.height, g.width);
  out.low_confidence = Raster<std::uint8_t>::Zero(g.height, g.width);
  for (int j = 0; j < g.height; ++j) {
    for (int i = 0; i < g.width; ++i) {
      const PatchBelief b = map.patch(i, j);
      out.counts(j, i) = b.count;
      if (b.count == 0) continue;
      const FinalizedPatch f = finalize_patch(b);
      out.grid.classes(j, i) = to_index(f.cls);
      out.low_confidence(j, i) = f.low_confidence ? 1 : 0;
      out.elevation(j, i) = b.elevation_sum / b.count;
    }
  }
  return out;
}

}  // namespace surfmap
