#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "alseg/corpus.hpp"

namespace alseg {

/// probs >= threshold.
Mask binarize(const Image& probs, double threshold = 0.5);

struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

ConfusionCounts confusion(const Mask& pred, const Mask& gt);

struct OverlapMetrics {
  double dice = 0.0;
  double precision = 0.0;
  double sensitivity = 0.0;
  double volumetric_similarity = 0.0;
};

/// Ratios from the confusion counts. A 0/0 ratio is 1 when both masks are
/// empty and 0 otherwise.
OverlapMetrics overlap_metrics(const Mask& pred, const Mask& gt);

/// Boundary of a binary mask: foreground pixels with at least one background
/// 4-neighbour, the outside of the image counting as background.
struct Surface {
  int height = 0;
  int width = 0;
  std::vector<std::pair<int, int>> points;  // (row, col), row-major order
  int components = 0;                       // 8-connected foreground components

  bool single_contour() const { return components == 1; }
};

Surface extract_surface(const Mask& mask);

struct DistanceMetrics {
  bool defined = false;  // false when either surface is empty
  double avg_hausdorff = 0.0;
  double mean_surface_distance = 0.0;
  double hd95 = 0.0;
};

/// avg_hausdorff = max of the two directed mean distances;
/// mean_surface_distance = pooled mean over both directions;
/// hd95 = nearest-rank 95th percentile of the pooled distances.
DistanceMetrics distance_metrics(const Surface& pred, const Surface& gt, double spacing = 1.0);

/// Per-pixel distance from each point of `from` to the nearest point of `to`.
std::vector<double> directed_distances(const Surface& from, const Surface& to, double spacing);

/// Exact squared Euclidean distance transform of a point set on an h x w grid
/// (distance of every pixel to the nearest set pixel).
std::vector<double> squared_distance_transform(int height, int width,
                                               const std::vector<std::pair<int, int>>& points);

enum class Metric {
  dice,
  precision,
  sensitivity,
  volumetric_similarity,
  avg_hausdorff,
  mean_surface_distance,
  hd95,
};

inline constexpr int kMetricCount = 7;
const char* to_string(Metric m);
bool is_distance_metric(Metric m);

struct SampleMetrics {
  std::int64_t sample_id = 0;
  OverlapMetrics overlap;
  DistanceMetrics distance;
  bool single_contour = false;

  /// Distance metrics count only for single-contour predictions.
  bool distance_valid() const { return single_contour && distance.defined; }
  double value(Metric m) const;
};

SampleMetrics evaluate_sample(std::int64_t sample_id, const Image& probs, const Mask& gt,
                              double spacing = 1.0);

}  // namespace alseg
