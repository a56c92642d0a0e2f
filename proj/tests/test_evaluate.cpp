#include "support.hpp"

#include "surfmap/evaluate.hpp"

#include <doctest.h>

#include <random>

using namespace surfmap;

namespace {

AnnotationImage random_mask(std::mt19937_64& rng, int w, int h, int max_class = 4) {
  AnnotationImage a(h, w);
  for (Eigen::Index n = 0; n < a.size(); ++n) a.data()[n] = static_cast<std::uint8_t>(rng() % (max_class + 1));
  return a;
}

ClassGrid grid_of(const GridGeometry& g, const AnnotationImage& classes) { return {g, classes}; }

}  // namespace

TEST_CASE("confusion of identical masks is diagonal") {
  std::mt19937_64 rng(1);
  const AnnotationImage a = random_mask(rng, 13, 7);
  const ConfusionMatrix cm = confusion(a, a);
  CHECK(cm.counts.row(0).sum() == 0);
  for (int g = 1; g < 5; ++g)
    for (int p = 0; p < 5; ++p)
      CHECK(cm.counts(g, p) == (g == p ? (a.array() == g).count() : 0));
  CHECK(cm.total() == (a.array() != 0).count());
  const ClassMetrics m = class_metrics(cm);
  for (const auto& s : m.classes) {
    CHECK(s.iou == 1.0);
    CHECK(s.precision == 1.0);
    CHECK(s.recall == 1.0);
  }
  CHECK(m.mean_iou == 1.0);
}

TEST_CASE("all-Unknown ground truth gives an empty matrix") {
  std::mt19937_64 rng(2);
  const ConfusionMatrix cm = confusion(random_mask(rng, 8, 8), make_annotation(8, 8));
  CHECK(cm.total() == 0);
  const ClassMetrics m = class_metrics(cm);
  CHECK(m.supported_classes == 0);
  CHECK(m.mean_iou == 0.0);
  for (const auto& s : m.classes) CHECK_FALSE(s.supported);
}

TEST_CASE("confusion and scores match per-pixel counting") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const AnnotationImage p = random_mask(rng, 8, 8), g = random_mask(rng, 8, 8);
    const ConfusionMatrix cm = confusion(p, g);
    std::int64_t expect[5][5] = {};
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c)
        if (g(r, c) != 0) ++expect[g(r, c)][p(r, c)];
    for (int a = 0; a < 5; ++a)
      for (int b = 0; b < 5; ++b) CHECK(cm.counts(a, b) == expect[a][b]);

    const ClassMetrics m = class_metrics(cm);
    double iou_sum = 0;
    int supported = 0;
    for (int k = 1; k <= 4; ++k) {
      std::int64_t tp = 0, fp = 0, fn = 0;
      for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) {
          if (g(r, c) == 0) continue;
          tp += g(r, c) == k && p(r, c) == k;
          fp += g(r, c) != k && p(r, c) == k;
          fn += g(r, c) == k && p(r, c) != k;
        }
      const ClassScore& s = m[static_cast<SurfaceClass>(k)];
      CHECK(s.tp == tp);
      CHECK(s.fp == fp);
      CHECK(s.fn == fn);
      const double iou = tp + fp + fn ? static_cast<double>(tp) / (tp + fp + fn) : 0.0;
      CHECK(s.iou == iou);
      if (tp + fn > 0) {
        iou_sum += iou;
        ++supported;
      }
      for (double v : {s.iou, s.precision, s.recall}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
    CHECK(m.mean_iou == doctest::Approx(supported ? iou_sum / supported : 0.0));
  }
  CHECK_THROWS_AS(confusion(make_annotation(3, 3), make_annotation(3, 4)), Error);
}

TEST_CASE("perfect precision with poor recall") {
  ConfusionMatrix cm;
  const int c = to_index(SurfaceClass::Crossing);
  cm.counts(c, c) = 2;
  cm.counts(c, to_index(SurfaceClass::Road)) = 74;
  const ClassScore& s = class_metrics(cm)[SurfaceClass::Crossing];
  CHECK(s.precision == 1.0);
  CHECK(s.iou == doctest::Approx(2.0 / 76.0));
  CHECK(s.iou == doctest::Approx(0.026).epsilon(0.02));
  CHECK(s.recall == doctest::Approx(2.0 / 76.0));
}

TEST_CASE("disjoint prediction has zero IoU") {
  AnnotationImage g = make_annotation(4, 1), p = make_annotation(4, 1);
  g << 1, 1, 2, 2;
  p << 2, 2, 1, 1;
  const ClassMetrics m = class_metrics(confusion(p, g));
  CHECK(m[SurfaceClass::Road].iou == 0.0);
  CHECK(m[SurfaceClass::Pedestrian].iou == 0.0);
  CHECK(m.supported_classes == 2);
  CHECK_FALSE(m[SurfaceClass::Crossing].supported);
  CHECK_FALSE(m[SurfaceClass::Crossing].precision_defined);
}

TEST_CASE("coverage fraction") {
  AnnotationImage a = make_annotation(4, 2);
  CHECK(coverage_fraction(a) == 0.0);
  a.topRows(1).setConstant(3);
  CHECK(coverage_fraction(a) == 0.5);
  a.setConstant(1);
  CHECK(coverage_fraction(a) == 1.0);
}

TEST_CASE("weighted cross-entropy fixtures") {
  const LossWeights w;
  CHECK(w[SurfaceClass::Unknown] == 0.0);
  CHECK(w[SurfaceClass::Crossing] == 5.0);
  CHECK(w[SurfaceClass::Obstacle] == 0.2);

  // one-hot predictions on the truth: zero loss
  AnnotationImage gt(2, 2);
  gt << 1, 2, 3, 4;
  PredictionImage onehot{2, 2, Eigen::MatrixXf::Zero(4, 4)};
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) onehot.probabilities(gt(r, c) - 1, r * 2 + c) = 1.0f;
  CHECK(weighted_cross_entropy(onehot, gt) == 0.0);

  // Unknown ground truth adds nothing, however bad the prediction
  PredictionImage bad{2, 2, Eigen::MatrixXf::Zero(4, 4)};
  CHECK(weighted_cross_entropy(bad, make_annotation(2, 2)) == 0.0);

  // single Crossing pixel at 0.5
  AnnotationImage one(1, 1);
  one << 3;
  PredictionImage half{1, 1, Eigen::MatrixXf::Constant(4, 1, 0.5f / 3)};
  half.probabilities(2, 0) = 0.5f;
  CHECK(weighted_cross_entropy(half, one) == doctest::Approx(5 * std::log(2.0)).epsilon(1e-12));
  CHECK(weighted_cross_entropy(half, one) == doctest::Approx(3.4657).epsilon(1e-4));

  // zero probability is clamped to 1e-12
  CHECK(weighted_cross_entropy(bad, gt) ==
        doctest::Approx(-(1 + 1 + 5 + 0.2) * std::log(1e-12)).epsilon(1e-12));
  CHECK_THROWS_AS(weighted_cross_entropy(half, gt), Error);
}

TEST_CASE("cross-entropy grows as the truth loses probability") {
  AnnotationImage gt(1, 1);
  gt << 2;
  double prev = -1;
  for (float p = 0.95f; p > 0.05f; p -= 0.1f) {
    PredictionImage pred{1, 1, Eigen::MatrixXf::Constant(4, 1, (1 - p) / 3)};
    pred.probabilities(1, 0) = p;
    const double l = weighted_cross_entropy(pred, gt);
    CHECK(l > prev);
    CHECK(l == doctest::Approx(-std::log(static_cast<double>(p))));
    prev = l;
  }
}

TEST_CASE("BEV comparison") {
  std::mt19937_64 rng(4);
  const GridGeometry g{-2, -2, 0.5, 8, 8};
  AnnotationImage truth = random_mask(rng, 8, 8, 4);
  for (Eigen::Index n = 0; n < truth.size(); ++n)
    if (truth.data()[n] == 0) truth.data()[n] = 1;

  SUBCASE("identical maps") {
    const BevComparison b = compare_bev(grid_of(g, truth), grid_of(g, truth));
    CHECK(b.observed.mean_iou == 1.0);
    CHECK(b.full.mean_iou == 1.0);
    CHECK(b.observed_cells == 64);
  }
  SUBCASE("partially observed map: observed scores stay perfect, full ones drop") {
    AnnotationImage part = truth;
    part.leftCols(4).setZero();
    const BevComparison b = compare_bev(grid_of(g, part), grid_of(g, truth));
    CHECK(b.observed_cells == 32);
    CHECK(b.observed_confusion.total() == 32);
    CHECK(b.full_confusion.total() == 64);
    for (const auto& s : b.observed.classes)
      if (s.supported) CHECK(s.iou == 1.0);
    for (const auto& s : b.full.classes)
      if (s.supported) CHECK(s.precision == 1.0);
    CHECK(b.full.mean_iou < 1.0);
  }
  SUBCASE("finer truth is resampled by nearest cell") {
    const GridGeometry fine{-2, -2, 0.25, 16, 16};
    AnnotationImage up(16, 16);
    for (int j = 0; j < 16; ++j)
      for (int i = 0; i < 16; ++i) up(j, i) = truth(j / 2, i / 2);
    CHECK(resample_onto(grid_of(fine, up), g) == truth);
    CHECK(compare_bev(grid_of(g, truth), grid_of(fine, up)).observed.mean_iou == 1.0);
  }
  SUBCASE("shifted truth only partly overlaps") {
    const GridGeometry shifted{0, 0, 0.5, 8, 8};
    const AnnotationImage r = resample_onto(grid_of(shifted, truth), g);
    for (int j = 0; j < 8; ++j)
      for (int i = 0; i < 8; ++i) CHECK(r(j, i) == (i >= 4 && j >= 4 ? truth(j - 4, i - 4) : 0));
  }
  SUBCASE("disjoint extents") {
    CHECK_THROWS_AS(compare_bev(grid_of(g, truth), grid_of(GridGeometry{100, 0, 0.5, 8, 8}, truth)), Error);
  }
  SUBCASE("relabelling cells consistently in both maps keeps the scores") {
    std::vector<int> order(64);
    for (int n = 0; n < 64; ++n) order[n] = n;
    std::shuffle(order.begin(), order.end(), rng);
    AnnotationImage pred = random_mask(rng, 8, 8, 4);
    AnnotationImage pp(8, 8), tp(8, 8);
    for (int n = 0; n < 64; ++n) {
      pp.data()[n] = pred.data()[order[n]];
      tp.data()[n] = truth.data()[order[n]];
    }
    const BevComparison a = compare_bev(grid_of(g, pred), grid_of(g, truth));
    const BevComparison b = compare_bev(grid_of(g, pp), grid_of(g, tp));
    CHECK(a.observed_confusion.counts == b.observed_confusion.counts);
    CHECK(a.full.mean_iou == b.full.mean_iou);
  }
}
