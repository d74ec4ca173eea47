#include "alseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "alseg/error.hpp"

namespace alseg {

namespace {

void check_same_shape(const Mask& a, const Mask& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("metrics: masks differ in shape");
  }
}

double ratio(double num, double den, bool both_empty) {
  if (den == 0.0) return both_empty ? 1.0 : 0.0;
  return num / den;
}

// One pass of the 1D lower-envelope transform (Felzenszwalb & Huttenlocher).
void edt_1d(const double* f, int n, double* d, std::vector<int>& v, std::vector<double>& z) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    double s;
    while (true) {
      const int p = v[static_cast<std::size_t>(k)];
      s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
          (2.0 * (q - p));
      if (s <= z[static_cast<std::size_t>(k)] && k > 0) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k) + 1] = inf;
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) d[q] = inf;
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(j) + 1] < q) ++j;
    const int p = v[static_cast<std::size_t>(j)];
    d[q] = static_cast<double>(q - p) * (q - p) + f[p];
  }
}

}  // namespace

Mask binarize(const Image& probs, double threshold) {
  Mask out(probs.rows(), probs.cols());
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    out.data()[i] = static_cast<double>(probs.data()[i]) >= threshold ? 1 : 0;
  }
  return out;
}

ConfusionCounts confusion(const Mask& pred, const Mask& gt) {
  check_same_shape(pred, gt);
  ConfusionCounts c;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const bool p = pred.data()[i] != 0, t = gt.data()[i] != 0;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

OverlapMetrics overlap_metrics(const Mask& pred, const Mask& gt) {
  const auto c = confusion(pred, gt);
  const auto tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp),
             fn = static_cast<double>(c.fn);
  const bool both_empty = c.tp + c.fp + c.fn == 0;
  OverlapMetrics m;
  m.dice = ratio(2.0 * tp, 2.0 * tp + fp + fn, both_empty);
  m.precision = ratio(tp, tp + fp, both_empty);
  m.sensitivity = ratio(tp, tp + fn, both_empty);
  const double vp = tp + fp, vg = tp + fn;
  m.volumetric_similarity = vp + vg == 0.0 ? 1.0 : 1.0 - std::abs(vp - vg) / (vp + vg);
  return m;
}

Surface extract_surface(const Mask& mask) {
  Surface s;
  s.height = static_cast<int>(mask.rows());
  s.width = static_cast<int>(mask.cols());
  auto fg = [&](int r, int c) {
    return r >= 0 && c >= 0 && r < s.height && c < s.width && mask(r, c) != 0;
  };
  for (int r = 0; r < s.height; ++r) {
    for (int c = 0; c < s.width; ++c) {
      if (!fg(r, c)) continue;
      if (!fg(r - 1, c) || !fg(r + 1, c) || !fg(r, c - 1) || !fg(r, c + 1)) {
        s.points.emplace_back(r, c);
      }
    }
  }

  std::vector<int> seen(static_cast<std::size_t>(s.height) * s.width, 0);
  std::vector<std::pair<int, int>> stack;
  for (int r = 0; r < s.height; ++r) {
    for (int c = 0; c < s.width; ++c) {
      if (!fg(r, c) || seen[static_cast<std::size_t>(r) * s.width + c]) continue;
      ++s.components;
      stack.assign(1, {r, c});
      seen[static_cast<std::size_t>(r) * s.width + c] = 1;
      while (!stack.empty()) {
        const auto [y, x] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = y + dy, nx = x + dx;
            if (!fg(ny, nx)) continue;
            auto& flag = seen[static_cast<std::size_t>(ny) * s.width + nx];
            if (flag) continue;
            flag = 1;
            stack.emplace_back(ny, nx);
          }
        }
      }
    }
  }
  return s;
}

std::vector<double> squared_distance_transform(int height, int width,
                                               const std::vector<std::pair<int, int>>& points) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto h = static_cast<std::size_t>(height), w = static_cast<std::size_t>(width);
  std::vector<double> grid(h * w, inf);
  for (const auto& [r, c] : points) grid[static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c)] = 0.0;

  const std::size_t n = std::max(h, w);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  for (std::size_t c = 0; c < w; ++c) {
    for (std::size_t r = 0; r < h; ++r) f[r] = grid[r * w + c];
    edt_1d(f.data(), height, d.data(), v, z);
    for (std::size_t r = 0; r < h; ++r) grid[r * w + c] = d[r];
  }
  for (std::size_t r = 0; r < h; ++r) {
    edt_1d(&grid[r * w], width, d.data(), v, z);
    std::copy(d.begin(), d.begin() + static_cast<long>(w), grid.begin() + static_cast<long>(r * w));
  }
  return grid;
}

std::vector<double> directed_distances(const Surface& from, const Surface& to, double spacing) {
  if (from.height != to.height || from.width != to.width) {
    throw ShapeError("distance_metrics: surfaces come from masks of different shape");
  }
  std::vector<double> out;
  if (to.points.empty()) return out;
  const auto dt = squared_distance_transform(to.height, to.width, to.points);
  out.reserve(from.points.size());
  for (const auto& [r, c] : from.points) {
    out.push_back(std::sqrt(dt[static_cast<std::size_t>(r) * static_cast<std::size_t>(to.width) +
                               static_cast<std::size_t>(c)]) *
                  spacing);
  }
  return out;
}

DistanceMetrics distance_metrics(const Surface& pred, const Surface& gt, double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("distance_metrics: spacing must be positive");
  DistanceMetrics m;
  if (pred.points.empty() || gt.points.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    m.avg_hausdorff = m.mean_surface_distance = m.hd95 = nan;
    return m;
  }
  auto pg = directed_distances(pred, gt, spacing);
  const auto gp = directed_distances(gt, pred, spacing);
  const double sum_pg = std::accumulate(pg.begin(), pg.end(), 0.0);
  const double sum_gp = std::accumulate(gp.begin(), gp.end(), 0.0);
  m.defined = true;
  m.avg_hausdorff = std::max(sum_pg / static_cast<double>(pg.size()),
                             sum_gp / static_cast<double>(gp.size()));
  m.mean_surface_distance = (sum_pg + sum_gp) / static_cast<double>(pg.size() + gp.size());
  pg.insert(pg.end(), gp.begin(), gp.end());
  std::sort(pg.begin(), pg.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(pg.size())));
  m.hd95 = pg[std::max<std::size_t>(rank, 1) - 1];
  return m;
}

const char* to_string(Metric m) {
  switch (m) {
    case Metric::dice: return "dice";
    case Metric::precision: return "precision";
    case Metric::sensitivity: return "sensitivity";
    case Metric::volumetric_similarity: return "volumetric_similarity";
    case Metric::avg_hausdorff: return "avg_hausdorff";
    case Metric::mean_surface_distance: return "mean_surface_distance";
    case Metric::hd95: return "hd95";
  }
  return "?";
}

bool is_distance_metric(Metric m) {
  return m == Metric::avg_hausdorff || m == Metric::mean_surface_distance || m == Metric::hd95;
}

double SampleMetrics::value(Metric m) const {
  switch (m) {
    case Metric::dice: return overlap.dice;
    case Metric::precision: return overlap.precision;
    case Metric::sensitivity: return overlap.sensitivity;
    case Metric::volumetric_similarity: return overlap.volumetric_similarity;
    case Metric::avg_hausdorff: return distance.avg_hausdorff;
    case Metric::mean_surface_distance: return distance.mean_surface_distance;
    case Metric::hd95: return distance.hd95;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

SampleMetrics evaluate_sample(std::int64_t sample_id, const Image& probs, const Mask& gt,
                              double spacing) {
  if (probs.rows() != gt.rows() || probs.cols() != gt.cols()) {
    throw ShapeError("evaluate_sample: prediction and mask differ in shape");
  }
  const Mask pred = binarize(probs);
  SampleMetrics s;
  s.sample_id = sample_id;
  s.overlap = overlap_metrics(pred, gt);
  const auto sp = extract_surface(pred);
  s.single_contour = sp.single_contour();
  s.distance = distance_metrics(sp, extract_surface(gt), spacing);
  return s;
}

}  // namespace alseg
