#pragma once

#include "surfmap/fuse.hpp"
#include "surfmap/types.hpp"

#include <Eigen/Core>

#include <array>

namespace surfmap {

/// counts(gt, pred) over raster classes. Pixels with Unknown ground truth are
/// never counted; Unknown predictions on labelled ground truth are misses.
struct ConfusionMatrix {
  Eigen::Matrix<std::int64_t, kNumRasterClasses, kNumRasterClasses> counts =
      Eigen::Matrix<std::int64_t, kNumRasterClasses, kNumRasterClasses>::Zero();

  std::int64_t total() const { return counts.sum(); }
  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    counts += o.counts;
    return *this;
  }
};

struct ClassScore {
  double iou = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::int64_t tp = 0, fp = 0, fn = 0;
  bool supported = false;          // ground truth has this class
  bool precision_defined = false;  // the class was predicted at least once
};

/// Scores for Road, Pedestrian, Crossing, Obstacle (index = belief index).
struct ClassMetrics {
  std::array<ClassScore, kNumBeliefClasses> classes;
  double mean_iou = 0.0;  // over supported classes
  int supported_classes = 0;

  const ClassScore& operator[](SurfaceClass c) const { return classes[belief_index(c)]; }
};

ConfusionMatrix confusion(const AnnotationImage& pred, const AnnotationImage& gt);
ClassMetrics class_metrics(const ConfusionMatrix& cm);

/// Fraction of pixels that are not Unknown.
double coverage_fraction(const AnnotationImage& ann);

/// Per-class loss weights indexed by raster class.
struct LossWeights {
  std::array<double, kNumRasterClasses> alpha{0.0, 1.0, 1.0, 5.0, 0.2};

  double operator[](SurfaceClass c) const { return alpha[to_index(c)]; }
};

/// Sum over pixels of -alpha[gt] * log(max(p[gt], 1e-12)); Unknown pixels add 0.
double weighted_cross_entropy(const PredictionImage& pred, const AnnotationImage& gt, const LossWeights& w = {});

struct BevComparison {
  ClassMetrics observed;  // cells observed in the evaluated map
  ClassMetrics full;      // every cell with ground truth; unobserved cells count as misses
  ConfusionMatrix observed_confusion;
  ConfusionMatrix full_confusion;
  std::int64_t observed_cells = 0;
};

/// Nearest-neighbour resampling of `truth` onto the grid of `map`.
/// Cells that fall outside `truth` become Unknown.
AnnotationImage resample_onto(const ClassGrid& truth, const GridGeometry& target);

/// Compares an evaluated BEV map against ground truth on the evaluated map's grid.
/// Throws GridMismatch when the two extents are disjoint.
BevComparison compare_bev(const ClassGrid& map, const ClassGrid& truth);

}  // namespace surfmap
