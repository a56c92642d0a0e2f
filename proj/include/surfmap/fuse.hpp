#pragma once

// Log-odds fusion of per-pixel class predictions into a bird's-eye-view grid.
//
// Each cell holds h in R^K (K = 4: Road, Pedestrian, Crossing, Obstacle),
// starts at the uniform prior h0 and receives h <- h + (l - h0) per
// observation, where l_k = log(p_k / (1 - p_k)).

#include "surfmap/annotate.hpp"
#include "surfmap/geometry.hpp"
#include "surfmap/types.hpp"

#include <Eigen/Core>

#include <cmath>
#include <optional>
#include <vector>

namespace surfmap {

using LogOdds = Eigen::VectorXd;
using ClassProbabilities = Eigen::VectorXd;

struct PatchBelief {
  LogOdds log_odds;
  std::uint32_t count = 0;
  double elevation_sum = 0.0;
};

inline constexpr double kDefaultProbabilityEps = 1e-6;

/// Every component log((1/K) / (1 - 1/K)); count 0.
PatchBelief uniform_belief(int num_classes);

/// Componentwise log(p / (1 - p)) with p clamped to [eps, 1 - eps].
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> logodds_from_probs(
    const Eigen::MatrixBase<Derived>& p, typename Derived::Scalar eps = kDefaultProbabilityEps) {
  using Scalar = typename Derived::Scalar;
  const auto clamped = p.array().max(eps).min(Scalar(1) - eps);
  return (clamped / (Scalar(1) - clamped)).log().matrix();
}

/// h + (l - h0), count + 1. Throws DimensionMismatch.
PatchBelief update_belief(const PatchBelief& h, const LogOdds& l, const PatchBelief& h0);

struct FinalizedPatch {
  SurfaceClass cls = SurfaceClass::Unknown;
  ClassProbabilities probabilities;
  bool low_confidence = false;  // argmax was tied
};

/// softmax then argmax (lowest index on ties); count 0 gives Unknown.
FinalizedPatch finalize_patch(const PatchBelief& h);

/// Numerically stable softmax.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(const Eigen::MatrixBase<Derived>& h) {
  const auto shifted = (h.array() - h.maxCoeff()).exp();
  return (shifted / shifted.sum()).matrix();
}

/// Geo-referencing of a grid: cell (i, j) covers
/// [origin_x + i*res, origin_x + (i+1)*res) x [origin_y + j*res, origin_y + (j+1)*res).
/// Rasters indexed by the grid store row j, column i.
struct GridGeometry {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double resolution = 0.25;
  int width = 0;
  int height = 0;

  std::optional<Eigen::Vector2i> cell_of(double x, double y) const {
    const double fi = std::floor((x - origin_x) / resolution);
    const double fj = std::floor((y - origin_y) / resolution);
    if (!(fi >= 0 && fj >= 0 && fi < width && fj < height)) return std::nullopt;
    return Eigen::Vector2i(static_cast<int>(fi), static_cast<int>(fj));
  }
  Eigen::Vector2d cell_center(int i, int j) const {
    return {origin_x + (i + 0.5) * resolution, origin_y + (j + 0.5) * resolution};
  }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * width + i; }
  std::size_t size() const { return static_cast<std::size_t>(width) * height; }
  bool operator==(const GridGeometry&) const = default;
};

/// Class raster on a grid (row j, column i), e.g. a finalized map or a ground-truth BEV map.
struct ClassGrid {
  GridGeometry geometry;
  AnnotationImage classes;

  SurfaceClass at(int i, int j) const { return static_cast<SurfaceClass>(classes(j, i)); }
};

/// Per-pixel class probabilities, one column per pixel (index row * width + col).
struct PredictionImage {
  int width = 0;
  int height = 0;
  Eigen::MatrixXf probabilities;  // K x (width * height)

  auto pixel(int col, int row) const { return probabilities.col(static_cast<Eigen::Index>(row) * width + col); }
  SurfaceClass argmax(int col, int row) const;
};

/// Expands a class raster plus confidence raster (values in [0, 1]) to
/// probabilities: confidence on the class, the remainder spread uniformly over
/// the other K-1 classes. Unknown pixels become uniform.
PredictionImage prediction_from_classes(const AnnotationImage& classes, const Raster<float>& confidence);

class SurfaceMap {
 public:
  SurfaceMap() = default;
  SurfaceMap(const GridGeometry& geometry, int num_classes = kNumBeliefClasses);

  const GridGeometry& geometry() const { return geometry_; }
  int num_classes() const { return static_cast<int>(log_odds_.rows()); }
  const PatchBelief& prior() const { return prior_; }

  PatchBelief patch(int i, int j) const;
  std::uint32_t count(int i, int j) const { return counts_[geometry_.index(i, j)]; }

  /// Applies one observation through the update rule.
  void observe(int i, int j, const LogOdds& l, double z);
  /// Adds summed (l - h0) deltas, a count and an elevation sum to a cell.
  void add_delta(std::size_t cell, const Eigen::Ref<const Eigen::VectorXd>& delta, std::uint32_t count,
                 double elevation_sum);
  /// Componentwise merge of another map's evidence on the same grid. Throws GridMismatch.
  void merge(const SurfaceMap& other);

  const Eigen::MatrixXd& log_odds() const { return log_odds_; }
  const std::vector<std::uint32_t>& counts() const { return counts_; }
  const std::vector<double>& elevation_sums() const { return elevation_sums_; }

  /// Direct state restore, used by the map file reader.
  void set_cell(std::size_t cell, const Eigen::Ref<const Eigen::VectorXd>& log_odds, std::uint32_t count,
                double elevation_sum);

 private:
  GridGeometry geometry_;
  PatchBelief prior_;
  Eigen::MatrixXd log_odds_;  // K x cells
  std::vector<std::uint32_t> counts_;
  std::vector<double> elevation_sums_;
};

struct FuseOptions {
  double eps = kDefaultProbabilityEps;
  double ground_band = 0.20;
};

struct AccumulateResult {
  std::size_t used_pixels = 0;
  std::size_t outside_pixels = 0;
  bool outside_map = false;  // FrameOutsideMap: every valid pixel fell off the grid
};

/// Sparse per-frame evidence: summed (l - h0), counts and elevation sums per touched cell.
struct FrameDelta {
  std::vector<std::size_t> cells;  // ascending
  Eigen::MatrixXd deltas;          // K x cells.size()
  std::vector<std::uint32_t> counts;
  std::vector<double> elevation_sums;
  AccumulateResult result;
};

/// Evidence of one frame. A pixel contributes when its backprojected point lies
/// within ground_band of the plane or its prediction argmax is Obstacle.
FrameDelta frame_delta(const GridGeometry& grid, const PatchBelief& prior, const PredictionImage& pred,
                       const DepthImage& depth, const CameraView& view, const GroundPlane& plane,
                       const FuseOptions& options = {});

void apply_delta(SurfaceMap& map, const FrameDelta& delta);

/// frame_delta followed by apply_delta.
AccumulateResult accumulate_frame(SurfaceMap& map, const PredictionImage& pred, const DepthImage& depth,
                                  const CameraView& view, const GroundPlane& plane,
                                  const FuseOptions& options = {});

struct FinalizedMap {
  ClassGrid grid;
  Raster<double> elevation;           // NaN where unobserved
  Raster<std::uint32_t> counts;
  Raster<std::uint8_t> low_confidence;
};

FinalizedMap finalize_map(const SurfaceMap& map);

}  // namespace surfmap
