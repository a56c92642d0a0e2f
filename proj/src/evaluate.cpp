#include "surfmap/evaluate.hpp"

#include <algorithm>
#include <cmath>

namespace surfmap {

ConfusionMatrix confusion(const AnnotationImage& pred, const AnnotationImage& gt) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols())
    throw Error(ErrorKind::DimensionMismatch, "prediction and ground truth sizes differ");
  ConfusionMatrix cm;
  for (Eigen::Index n = 0; n < gt.size(); ++n) {
    const int g = gt.data()[n];
    if (g == 0 || g >= kNumRasterClasses) continue;
    const int p = pred.data()[n];
    cm.counts(g, p < kNumRasterClasses ? p : 0) += 1;
  }
  return cm;
}

ClassMetrics class_metrics(const ConfusionMatrix& cm) {
  ClassMetrics m;
  double iou_sum = 0.0;
  for (int k = 0; k < kNumBeliefClasses; ++k) {
    const int c = k + 1;
    ClassScore& s = m.classes[k];
    s.tp = cm.counts(c, c);
    s.fp = cm.counts.col(c).sum() - s.tp;
    s.fn = cm.counts.row(c).sum() - s.tp;
    const auto ratio = [](std::int64_t num, std::int64_t den) {
      return den > 0 ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
    };
    s.iou = ratio(s.tp, s.tp + s.fp + s.fn);
    s.precision = ratio(s.tp, s.tp + s.fp);
    s.recall = ratio(s.tp, s.tp + s.fn);
    s.supported = s.tp + s.fn > 0;
    s.precision_defined = s.tp + s.fp > 0;
    if (s.supported) {
      iou_sum += s.iou;
      ++m.supported_classes;
    }
  }
  m.mean_iou = m.supported_classes > 0 ? iou_sum / m.supported_classes : 0.0;
  return m;
}

double coverage_fraction(const AnnotationImage& ann) {
  if (ann.size() == 0) return 0.0;
  return static_cast<double>((ann.array() != 0).count()) / static_cast<double>(ann.size());
}

double weighted_cross_entropy(const PredictionImage& pred, const AnnotationImage& gt, const LossWeights& w) {
  if (pred.width != gt.cols() || pred.height != gt.rows())
    throw Error(ErrorKind::DimensionMismatch, "prediction and ground truth sizes differ");
  double loss = 0.0;
  for (int r = 0; r < pred.height; ++r) {
    for (int c = 0; c < pred.width; ++c) {
      const auto cls = static_cast<SurfaceClass>(gt(r, c));
      if (cls == SurfaceClass::Unknown || to_index(cls) >= kNumRasterClasses) continue;
      const double alpha = w[cls];
      if (alpha == 0.0) continue;
      const double p = std::clamp(static_cast<double>(pred.pixel(c, r)(belief_index(cls))), 1e-12, 1.0);
      loss += -alpha * std::log(p);
    }
  }
  return loss;
}

AnnotationImage resample_onto(const ClassGrid& truth, const GridGeometry& target) {
  AnnotationImage out = make_annotation(target.width, target.height);
  for (int j = 0; j < target.height; ++j) {
    for (int i = 0; i < target.width; ++i) {
      const Eigen::Vector2d c = target.cell_center(i, j);
      if (const auto cell = truth.geometry.cell_of(c.x(), c.y())) out(j, i) = truth.classes(cell->y(), cell->x());
    }
  }
  return out;
}

BevComparison compare_bev(const ClassGrid& map, const ClassGrid& truth) {
  const GridGeometry& a = map.geometry;
  const GridGeometry& b = truth.geometry;
  const bool disjoint = a.origin_x + a.width * a.resolution <= b.origin_x ||
                        b.origin_x + b.width * b.resolution <= a.origin_x ||
                        a.origin_y + a.height * a.resolution <= b.origin_y ||
                        b.origin_y + b.height * b.resolution <= a.origin_y;
  if (disjoint) throw Error(ErrorKind::GridMismatch, "map extents are disjoint");

  const AnnotationImage gt = a == b ? truth.classes : resample_onto(truth, a);
  BevComparison out;
  out.full_confusion = confusion(map.classes, gt);
  AnnotationImage gt_observed = gt;
  for (Eigen::Index n = 0; n < gt.size(); ++n)
    if (map.classes.data()[n] == 0) gt_observed.data()[n] = 0;
  out.observed_confusion = confusion(map.classes, gt_observed);
  out.observed_cells = (map.classes.array() != 0).count();
  out.full = class_metrics(out.full_confusion);
  out.observed = class_metrics(out.observed_confusion);
  return out;
}

}  // namespace surfmap
