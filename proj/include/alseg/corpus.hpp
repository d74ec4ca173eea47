#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace alseg {

using Image = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One 2D grayscale slice with its binary ground truth.
struct SliceSample {
  std::int64_t id = 0;
  std::int64_t subject_id = 0;
  Image image;
  Mask mask;

  Eigen::Index height() const { return image.rows(); }
  Eigen::Index width() const { return image.cols(); }

  bool operator==(const SliceSample&) const = default;
};

/// Checks the SliceSample invariants; throws ValidationError naming the sample.
void validate_sample(const SliceSample& s);

struct DatasetSplits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> holdout;

  bool operator==(const DatasetSplits&) const = default;
};

/// A named collection of slices with a disjoint train / hold-out partition.
/// Split entries are positions into `samples`.
struct DatasetManifest {
  std::string name;
  std::vector<SliceSample> samples;
  DatasetSplits splits;
  double pixel_spacing = 1.0;

  bool operator==(const DatasetManifest&) const = default;
};

/// Checks sample invariants, id uniqueness and split disjointness / coverage.
void validate_manifest(const DatasetManifest& m);

struct SynthOptions {
  int n_subjects = 20;
  int slices_per_subject = 10;
  int side = 32;
  double noise_sd = 0.1;
  std::uint64_t seed = 0;
  /// Adds a second small ellipse to a slice with probability 0.25.
  bool hard_mode = false;
  double holdout_fraction = 0.20;
};

/// Ellipse phantoms: pose and size drawn per subject, jittered per slice.
DatasetManifest synth_dataset(const SynthOptions& opts);

/// Writes `<path>` (JSON) plus `images.f32` / `masks.f32` next to it.
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

struct QueryRecord {
  int iteration = 0;
  std::vector<std::size_t> queried;

  bool operator==(const QueryRecord&) const = default;
};

/// Labeled / unlabeled partition of the train split. Both sets are kept sorted.
struct PoolState {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
  std::vector<QueryRecord> history;

  bool operator==(const PoolState&) const = default;
};

PoolState init_pool(const DatasetManifest& m, double initial_fraction, std::uint64_t seed);

/// Same as above with an explicit labeled count.
PoolState init_pool_count(const DatasetManifest& m, std::size_t n_labeled, std::uint64_t seed);

/// Moves `queried` from unlabeled to labeled and appends a history entry.
PoolState apply_query(const PoolState& pool, const std::vector<std::size_t>& queried, int iteration);

/// Disjointness, conservation against `train` and history consistency.
/// Throws std::logic_error describing the first violation.
void check_pool_invariants(const PoolState& pool, const std::vector<std::size_t>& train,
                           std::size_t initial_labeled);

}  // namespace alseg
