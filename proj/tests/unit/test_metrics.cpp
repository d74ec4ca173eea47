#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "alseg/metrics.hpp"
#include "oracles.hpp"

using namespace alseg;

namespace {

Mask square(int side, int r0, int c0, int len) {
  Mask m = Mask::Zero(side, side);
  m.block(r0, c0, len, len).setOnes();
  return m;
}

DistanceMetrics dist(const Mask& a, const Mask& b, double spacing = 1.0) {
  return distance_metrics(extract_surface(a), extract_surface(b), spacing);
}

}  // namespace

TEST(Binarize, Threshold) {
  EXPECT_TRUE((binarize(Image::Constant(3, 3, 0.5f)).array() == 1).all());
  Image gt(2, 2);
  gt << 0, 1, 1, 0;
  EXPECT_EQ(binarize(gt), Mask(gt.cast<std::uint8_t>()));
  EXPECT_TRUE((binarize(Image::Constant(3, 3, 1.0f), 1.1).array() == 0).all());
}

TEST(Overlap, IdentityAndDisjoint) {
  const auto m = square(8, 1, 1, 3);
  const auto same = overlap_metrics(m, m);
  EXPECT_EQ(same.dice, 1.0);
  EXPECT_EQ(same.precision, 1.0);
  EXPECT_EQ(same.sensitivity, 1.0);
  EXPECT_EQ(same.volumetric_similarity, 1.0);
  const auto apart = overlap_metrics(square(8, 0, 0, 2), square(8, 5, 5, 2));
  EXPECT_EQ(apart.dice, 0.0);
  EXPECT_EQ(apart.precision, 0.0);
  EXPECT_EQ(apart.sensitivity, 0.0);
  EXPECT_EQ(apart.volumetric_similarity, 1.0);
}

TEST(Overlap, HalfOverlap) {
  Mask gt = Mask::Zero(4, 4), pred = Mask::Zero(4, 4);
  gt.row(0).setOnes();
  pred.block(0, 2, 2, 2).setOnes();
  const auto o = overlap_metrics(pred, gt);
  EXPECT_DOUBLE_EQ(o.dice, 0.5);
  EXPECT_DOUBLE_EQ(o.precision, 0.5);
  EXPECT_DOUBLE_EQ(o.sensitivity, 0.5);
  EXPECT_DOUBLE_EQ(o.volumetric_similarity, 1.0);
  const auto c = confusion(pred, gt);
  EXPECT_EQ(c.tp + c.fp + c.fn + c.tn, 16);
}

TEST(Overlap, EmptyMasks) {
  const Mask empty = Mask::Zero(4, 4);
  const auto both = overlap_metrics(empty, empty);
  EXPECT_EQ(both.dice, 1.0);
  EXPECT_EQ(both.precision, 1.0);
  const auto one = overlap_metrics(empty, square(4, 0, 0, 2));
  EXPECT_EQ(one.dice, 0.0);
  EXPECT_EQ(one.precision, 0.0);
  EXPECT_EQ(one.sensitivity, 0.0);
  EXPECT_EQ(one.volumetric_similarity, 0.0);
}

TEST(Surface, HandCases) {
  const auto s = extract_surface(square(8, 2, 2, 3));
  EXPECT_EQ(s.points.size(), 8u);
  EXPECT_EQ(s.components, 1);
  EXPECT_EQ(std::count(s.points.begin(), s.points.end(), std::make_pair(3, 3)), 0);
  Mask dot = Mask::Zero(5, 5);
  dot(2, 2) = 1;
  const auto d = extract_surface(dot);
  ASSERT_EQ(d.points.size(), 1u);
  EXPECT_EQ(d.points[0], std::make_pair(2, 2));
  dot(0, 4) = 1;
  EXPECT_EQ(extract_surface(dot).components, 2);
  EXPECT_FALSE(extract_surface(dot).single_contour());
  const auto e = extract_surface(Mask::Zero(3, 3));
  EXPECT_TRUE(e.points.empty());
  EXPECT_EQ(e.components, 0);
  // Diagonal neighbours join under 8-connectivity.
  Mask diag = Mask::Zero(3, 3);
  diag(0, 0) = diag(1, 1) = diag(2, 2) = 1;
  EXPECT_EQ(extract_surface(diag).components, 1);
  // The image border counts as background.
  EXPECT_EQ(extract_surface(Mask::Ones(3, 3)).points.size(), 8u);
}

TEST(Distance, HandCases) {
  const auto m = square(8, 1, 1, 4);
  const auto same = dist(m, m);
  ASSERT_TRUE(same.defined);
  EXPECT_EQ(same.avg_hausdorff, 0.0);
  EXPECT_EQ(same.mean_surface_distance, 0.0);
  EXPECT_EQ(same.hd95, 0.0);
  Mask a = Mask::Zero(8, 8), b = Mask::Zero(8, 8);
  a(0, 0) = 1;
  b(3, 4) = 1;
  const auto d = dist(a, b);
  EXPECT_DOUBLE_EQ(d.avg_hausdorff, 5.0);
  EXPECT_DOUBLE_EQ(d.mean_surface_distance, 5.0);
  EXPECT_DOUBLE_EQ(d.hd95, 5.0);
  EXPECT_DOUBLE_EQ(dist(a, b, 0.5).hd95, 2.5);
  EXPECT_FALSE(dist(a, Mask::Zero(8, 8)).defined);
}

TEST(Distance, EdtMatchesBruteForce) {
  alseg::Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const auto m = oracle::random_mask(rng, 9, 13, 0.1);
    std::vector<std::pair<int, int>> pts;
    for (int r = 0; r < 9; ++r) {
      for (int c = 0; c < 13; ++c) {
        if (m(r, c)) pts.emplace_back(r, c);
      }
    }
    if (pts.empty()) continue;
    const auto edt = squared_distance_transform(9, 13, pts);
    for (int r = 0; r < 9; ++r) {
      for (int c = 0; c < 13; ++c) {
        double best = 1e300;
        for (auto [y, x] : pts) best = std::min(best, double((r - y) * (r - y) + (c - x) * (c - x)));
        EXPECT_EQ(edt[r * 13 + c], best);
      }
    }
  }
}

TEST(Oracle, ThousandRandomFixtures) {
  alseg::Rng rng(2);
  int distance_cases = 0;
  for (int t = 0; t < 1000; ++t) {
    const double density = 0.1 + 0.8 * rng.uniform();
    const auto pred = oracle::random_mask(rng, 8, 8, density);
    const auto gt = oracle::random_mask(rng, 8, 8, density);
    const auto o = overlap_metrics(pred, gt);
    const auto ref = oracle::overlap(pred, gt);
    EXPECT_NEAR(o.dice, ref.dice, 1e-9);
    EXPECT_NEAR(o.precision, ref.precision, 1e-9);
    EXPECT_NEAR(o.sensitivity, ref.sensitivity, 1e-9);
    EXPECT_NEAR(o.volumetric_similarity, ref.vs, 1e-9);

    const auto sp = extract_surface(pred);
    EXPECT_EQ(sp.points, oracle::boundary(pred));
    EXPECT_EQ(sp.components, oracle::components8(pred));
    if (!pred.any() || !gt.any()) continue;
    ++distance_cases;
    const auto d = dist(pred, gt);
    const auto r = oracle::distances(pred, gt);
    EXPECT_NEAR(d.avg_hausdorff, r.avg_hd, 1e-9);
    EXPECT_NEAR(d.mean_surface_distance, r.msd, 1e-9);
    EXPECT_NEAR(d.hd95, r.hd95, 1e-9);
  }
  EXPECT_GT(distance_cases, 900);
}

TEST(MetricProperties, SymmetryAndBounds) {
  alseg::Rng rng(3);
  for (int t = 0; t < 300; ++t) {
    const auto a = oracle::random_mask(rng, 10, 10, 0.3);
    const auto b = oracle::random_mask(rng, 10, 10, 0.3);
    if (!a.any() || !b.any()) continue;
    const auto ab = dist(a, b), ba = dist(b, a);
    EXPECT_DOUBLE_EQ(ab.avg_hausdorff, ba.avg_hausdorff);
    EXPECT_DOUBLE_EQ(ab.mean_surface_distance, ba.mean_surface_distance);
    EXPECT_DOUBLE_EQ(ab.hd95, ba.hd95);
    const auto sa = extract_surface(a), sb = extract_surface(b);
    auto d1 = directed_distances(sa, sb, 1.0), d2 = directed_distances(sb, sa, 1.0);
    const double hd = std::max(*std::max_element(d1.begin(), d1.end()), *std::max_element(d2.begin(), d2.end()));
    EXPECT_LE(ab.hd95, hd);
    EXPECT_GE(ab.mean_surface_distance, 0.0);
    const auto o = overlap_metrics(a, b);
    EXPECT_GE(o.dice, 0.0);
    EXPECT_LE(o.dice, 1.0);
  }
}

TEST(MetricProperties, FlippingFalseNegativeNeverLowersDice) {
  alseg::Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    auto pred = oracle::random_mask(rng, 8, 8, 0.3);
    const auto gt = oracle::random_mask(rng, 8, 8, 0.4);
    double prev = overlap_metrics(pred, gt).dice;
    for (Eigen::Index i = 0; i < gt.size(); ++i) {
      if (gt.data()[i] && !pred.data()[i]) {
        pred.data()[i] = 1;
        const double now = overlap_metrics(pred, gt).dice;
        EXPECT_GE(now, prev);
        prev = now;
      }
    }
  }
}

TEST(Sample, DistanceOnlyForSingleContour) {
  Image probs = Image::Zero(8, 8);
  probs.block(1, 1, 2, 2).setConstant(0.9f);
  const auto gt = square(8, 1, 1, 3);
  const auto one = evaluate_sample(3, probs, gt);
  EXPECT_EQ(one.sample_id, 3);
  EXPECT_TRUE(one.single_contour);
  EXPECT_TRUE(one.distance_valid());
  EXPECT_DOUBLE_EQ(one.value(Metric::dice), one.overlap.dice);
  EXPECT_DOUBLE_EQ(one.value(Metric::hd95), one.distance.hd95);
  probs(6, 6) = 0.9f;
  const auto two = evaluate_sample(3, probs, gt);
  EXPECT_FALSE(two.single_contour);
  EXPECT_FALSE(two.distance_valid());
  const auto none = evaluate_sample(3, Image::Zero(8, 8), gt);
  EXPECT_FALSE(none.distance_valid());
  EXPECT_EQ(none.value(Metric::dice), 0.0);
}

TEST(MetricNames, DistanceFamily) {
  int distance = 0;
  for (int i = 0; i < kMetricCount; ++i) distance += is_distance_metric(static_cast<Metric>(i));
  EXPECT_EQ(distance, 3);
  EXPECT_STREQ(to_string(Metric::volumetric_similarity), "volumetric_similarity");
}
