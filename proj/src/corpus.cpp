#include "alseg/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "alseg/blob_io.hpp"
#include "alseg/error.hpp"
#include "alseg/random.hpp"

namespace alseg {

namespace fs = std::filesystem;
using nlohmann::json;

void validate_sample(const SliceSample& s) {
  const std::string who = "sample " + std::to_string(s.id);
  if (s.id < 0) throw ValidationError(who + ": negative id");
  if (s.image.rows() != s.mask.rows() || s.image.cols() != s.mask.cols()) {
    throw ValidationError(who + ": image is " + std::to_string(s.image.rows()) + "x" +
                          std::to_string(s.image.cols()) + " but mask is " +
                          std::to_string(s.mask.rows()) + "x" + std::to_string(s.mask.cols()));
  }
  if (s.image.rows() < 8 || s.image.cols() < 8) {
    throw ValidationError(who + ": dimensions must be at least 8x8");
  }
  if (!s.image.allFinite()) throw ValidationError(who + ": non-finite intensity");
  for (Eigen::Index i = 0; i < s.mask.size(); ++i) {
    if (s.mask.data()[i] > 1) {
      throw ValidationError(who + ": mask value " + std::to_string(s.mask.data()[i]) +
                            " is not binary");
    }
  }
}

void validate_manifest(const DatasetManifest& m) {
  std::set<std::int64_t> ids;
  for (const auto& s : m.samples) {
    validate_sample(s);
    if (!ids.insert(s.id).second) {
      throw ValidationError("duplicate sample id " + std::to_string(s.id));
    }
  }
  if (!(m.pixel_spacing > 0.0) || !std::isfinite(m.pixel_spacing)) {
    throw ValidationError("pixel_spacing must be positive");
  }
  std::vector<int> seen(m.samples.size(), 0);
  auto mark = [&](const std::vector<std::size_t>& idx, const char* split) {
    for (auto i : idx) {
      if (i >= m.samples.size()) {
        throw ValidationError(std::string("splits.") + split + ": index " + std::to_string(i) +
                              " out of range");
      }
      if (seen[i]++) {
        throw ValidationError(std::string("splits.") + split + ": index " + std::to_string(i) +
                              " appears twice");
      }
    }
  };
  mark(m.splits.train, "train");
  mark(m.splits.holdout, "holdout");
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw ValidationError("sample index " + std::to_string(i) + " is in no split");
  }
}

namespace {

struct EllipseParams {
  double cy, cx, ry, rx, theta;
};

void paint_ellipse(const EllipseParams& e, Mask& mask) {
  const double c = std::cos(e.theta), s = std::sin(e.theta);
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    for (Eigen::Index col = 0; col < mask.cols(); ++col) {
      const double dy = static_cast<double>(r) - e.cy;
      const double dx = static_cast<double>(col) - e.cx;
      const double u = c * dx + s * dy;
      const double v = -s * dx + c * dy;
      if ((u * u) / (e.rx * e.rx) + (v * v) / (e.ry * e.ry) <= 1.0) mask(r, col) = 1;
    }
  }
}

}  // namespace

DatasetManifest synth_dataset(const SynthOptions& opts) {
  if (opts.side < 16) throw std::invalid_argument("synth_dataset: side must be >= 16");
  if (opts.n_subjects < 1 || opts.slices_per_subject < 1) {
    throw std::invalid_argument("synth_dataset: subjects and slices must be positive");
  }
  if (opts.noise_sd < 0.0) throw std::invalid_argument("synth_dataset: noise_sd must be >= 0");
  if (opts.holdout_fraction < 0.0 || opts.holdout_fraction >= 1.0) {
    throw std::invalid_argument("synth_dataset: holdout_fraction must lie in [0, 1)");
  }

  Rng rng(opts.seed);
  const double side = opts.side;
  DatasetManifest m;
  m.name = "synthetic-ellipses";
  m.pixel_spacing = 1.0;

  std::int64_t next_id = 0;
  for (int subj = 0; subj < opts.n_subjects; ++subj) {
    const EllipseParams base{rng.uniform(0.35, 0.65) * side, rng.uniform(0.35, 0.65) * side,
                             rng.uniform(0.12, 0.28) * side, rng.uniform(0.12, 0.28) * side,
                             rng.uniform(0.0, M_PI)};
    const float background = static_cast<float>(rng.uniform(0.05, 0.35));
    const float foreground = static_cast<float>(rng.uniform(0.6, 0.95));

    for (int sl = 0; sl < opts.slices_per_subject; ++sl) {
      EllipseParams e = base;
      e.cy += rng.normal(0.0, 0.03 * side);
      e.cx += rng.normal(0.0, 0.03 * side);
      e.ry *= rng.uniform(0.85, 1.15);
      e.rx *= rng.uniform(0.85, 1.15);
      e.theta += rng.normal(0.0, 0.1);
      e.cy = std::clamp(e.cy, 0.25 * side, 0.75 * side);
      e.cx = std::clamp(e.cx, 0.25 * side, 0.75 * side);

      SliceSample s;
      s.id = next_id++;
      s.subject_id = subj;
      s.mask = Mask::Zero(opts.side, opts.side);
      paint_ellipse(e, s.mask);
      if (opts.hard_mode && rng.uniform() < 0.25) {
        const EllipseParams extra{rng.uniform(0.1, 0.9) * side, rng.uniform(0.1, 0.9) * side,
                                  rng.uniform(0.06, 0.1) * side, rng.uniform(0.06, 0.1) * side,
                                  rng.uniform(0.0, M_PI)};
        paint_ellipse(extra, s.mask);
      }
      s.image.resize(opts.side, opts.side);
      for (Eigen::Index i = 0; i < s.image.size(); ++i) {
        float v = s.mask.data()[i] ? foreground : background;
        if (opts.noise_sd > 0.0) v += static_cast<float>(rng.normal(0.0, opts.noise_sd));
        s.image.data()[i] = v;
      }
      m.samples.push_back(std::move(s));
    }
  }

  const std::size_t n = m.samples.size();
  const auto n_holdout = static_cast<std::size_t>(std::llround(opts.holdout_fraction * n));
  auto holdout = rng.sample_without_replacement(n, n_holdout);
  std::sort(holdout.begin(), holdout.end());
  std::vector<char> is_holdout(n, 0);
  for (auto i : holdout) is_holdout[i] = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_holdout[i]) m.splits.train.push_back(i);
  }
  m.splits.holdout = std::move(holdout);
  return m;
}

// ---------------------------------------------------------------------------
// Manifest container: JSON index + raw float32 little-endian blobs.

namespace {

constexpr const char* kFormat = "alseg.manifest";
constexpr int kVersion = 1;

template <typename T>
T field(const json& j, const std::string& key, const std::string& where) {
  const std::string name = where.empty() ? key : where + "." + key;
  if (!j.is_object() || !j.contains(key)) throw ParseError("manifest: missing field '" + name + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError("manifest: field '" + name + "' has the wrong type");
  }
}

std::pair<Eigen::Index, Eigen::Index> shape_field(const json& j, const std::string& key,
                                                  const std::string& where) {
  auto v = field<std::vector<std::int64_t>>(j, key, where);
  if (v.size() != 2 || v[0] <= 0 || v[1] <= 0) {
    throw ParseError("manifest: field '" + where + "." + key + "' must be [rows, cols]");
  }
  return {v[0], v[1]};
}

}  // namespace

void save_manifest(const DatasetManifest& m, const fs::path& path) {
  validate_manifest(m);
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  fs::create_directories(dir);

  std::vector<float> images, masks;

  json samples = json::array();
  std::size_t image_offset = 0, mask_offset = 0;
  for (const auto& s : m.samples) {
    samples.push_back({{"id", s.id},
                       {"subject_id", s.subject_id},
                       {"image_shape", {s.image.rows(), s.image.cols()}},
                       {"mask_shape", {s.mask.rows(), s.mask.cols()}},
                       {"image_offset", image_offset},
                       {"mask_offset", mask_offset}});
    images.insert(images.end(), s.image.data(), s.image.data() + s.image.size());
    for (Eigen::Index i = 0; i < s.mask.size(); ++i) {
      masks.push_back(static_cast<float>(s.mask.data()[i]));
    }
    image_offset += static_cast<std::size_t>(s.image.size());
    mask_offset += static_cast<std::size_t>(s.mask.size());
  }

  io::write_f32_blob(dir / "images.f32", images);
  io::write_f32_blob(dir / "masks.f32", masks);

  json j = {{"format", kFormat},
            {"version", kVersion},
            {"name", m.name},
            {"pixel_spacing", m.pixel_spacing},
            {"images", "images.f32"},
            {"masks", "masks.f32"},
            {"samples", samples},
            {"splits", {{"train", m.splits.train}, {"holdout", m.splits.holdout}}}};
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write manifest " + path.string());
  os << j.dump(1) << '\n';
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open manifest " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ParseError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  if (field<std::string>(j, "format", "") != kFormat) {
    throw ParseError("manifest: field 'format' is not '" + std::string(kFormat) + "'");
  }
  if (field<int>(j, "version", "") != kVersion) {
    throw ParseError("manifest: unsupported 'version'");
  }

  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  DatasetManifest m;
  m.name = field<std::string>(j, "name", "");
  m.pixel_spacing = field<double>(j, "pixel_spacing", "");
  const auto images = io::read_f32_blob(dir / field<std::string>(j, "images", ""));
  const auto masks = io::read_f32_blob(dir / field<std::string>(j, "masks", ""));

  if (!j.contains("samples") || !j["samples"].is_array()) {
    throw ParseError("manifest: missing field 'samples'");
  }
  const auto& js = j["samples"];
  for (std::size_t k = 0; k < js.size(); ++k) {
    const std::string where = "samples[" + std::to_string(k) + "]";
    const auto& e = js[k];
    SliceSample s;
    s.id = field<std::int64_t>(e, "id", where);
    s.subject_id = field<std::int64_t>(e, "subject_id", where);
    const auto [ih, iw] = shape_field(e, "image_shape", where);
    const auto [mh, mw] = shape_field(e, "mask_shape", where);
    const auto io = field<std::size_t>(e, "image_offset", where);
    const auto mo = field<std::size_t>(e, "mask_offset", where);
    if (io + static_cast<std::size_t>(ih * iw) > images.size()) {
      throw ParseError("manifest: " + where + ".image_offset runs past the end of the image blob");
    }
    if (mo + static_cast<std::size_t>(mh * mw) > masks.size()) {
      throw ParseError("manifest: " + where + ".mask_offset runs past the end of the mask blob");
    }
    s.image = Eigen::Map<const Image>(images.data() + io, ih, iw);
    s.mask.resize(mh, mw);
    for (Eigen::Index i = 0; i < mh * mw; ++i) {
      const float v = masks[mo + static_cast<std::size_t>(i)];
      if (v != 0.0f && v != 1.0f) {
        throw ValidationError("sample " + std::to_string(s.id) + ": mask value " +
                              std::to_string(v) + " is not binary");
      }
      s.mask.data()[i] = static_cast<std::uint8_t>(v);
    }
    m.samples.push_back(std::move(s));
  }
  if (!j.contains("splits")) throw ParseError("manifest: missing field 'splits'");
  m.splits.train = field<std::vector<std::size_t>>(j["splits"], "train", "splits");
  m.splits.holdout = field<std::vector<std::size_t>>(j["splits"], "holdout", "splits");
  validate_manifest(m);
  return m;
}

// ---------------------------------------------------------------------------
// Pool bookkeeping.

PoolState init_pool_count(const DatasetManifest& m, std::size_t n_labeled, std::uint64_t seed) {
  const auto& train = m.splits.train;
  if (train.empty()) throw std::invalid_argument("init_pool: train split is empty");
  if (n_labeled == 0) throw std::invalid_argument("init_pool: initial pool would be empty");
  if (n_labeled > train.size()) {
    throw std::invalid_argument("init_pool: initial pool larger than the train split");
  }
  Rng rng(seed);
  const auto pick = rng.sample_without_replacement(train.size(), n_labeled);
  std::vector<char> chosen(train.size(), 0);
  for (auto p : pick) chosen[p] = 1;

  PoolState pool;
  for (std::size_t p = 0; p < train.size(); ++p) {
    (chosen[p] ? pool.labeled : pool.unlabeled).push_back(train[p]);
  }
  std::sort(pool.labeled.begin(), pool.labeled.end());
  std::sort(pool.unlabeled.begin(), pool.unlabeled.end());
  return pool;
}

PoolState init_pool(const DatasetManifest& m, double initial_fraction, std::uint64_t seed) {
  if (!(initial_fraction > 0.0 && initial_fraction <= 1.0)) {
    throw std::invalid_argument("init_pool: fraction must lie in (0, 1]");
  }
  const double want = initial_fraction * static_cast<double>(m.splits.train.size());
  // Guard against 0.1 * 200 landing a hair above 20.
  const auto n = static_cast<std::size_t>(std::ceil(want - 1e-9));
  return init_pool_count(m, n, seed);
}

PoolState apply_query(const PoolState& pool, const std::vector<std::size_t>& queried,
                      int iteration) {
  if (queried.empty()) throw std::invalid_argument("apply_query: empty query");
  std::vector<std::size_t> q = queried;
  std::sort(q.begin(), q.end());
  if (std::adjacent_find(q.begin(), q.end()) != q.end()) {
    throw std::invalid_argument("apply_query: duplicate index in query");
  }
  for (auto i : q) {
    if (std::binary_search(pool.labeled.begin(), pool.labeled.end(), i)) {
      throw DoubleQueryError("apply_query: index " + std::to_string(i) + " is already labeled");
    }
    if (!std::binary_search(pool.unlabeled.begin(), pool.unlabeled.end(), i)) {
      throw std::invalid_argument("apply_query: index " + std::to_string(i) +
                                  " is not in the unlabeled pool");
    }
  }
  PoolState out;
  std::set_difference(pool.unlabeled.begin(), pool.unlabeled.end(), q.begin(), q.end(),
                      std::back_inserter(out.unlabeled));
  std::merge(pool.labeled.begin(), pool.labeled.end(), q.begin(), q.end(),
             std::back_inserter(out.labeled));
  out.history = pool.history;
  out.history.push_back({iteration, queried});
  return out;
}

void check_pool_invariants(const PoolState& pool, const std::vector<std::size_t>& train,
                           std::size_t initial_labeled) {
  std::vector<std::size_t> inter;
  std::set_intersection(pool.labeled.begin(), pool.labeled.end(), pool.unlabeled.begin(),
                        pool.unlabeled.end(), std::back_inserter(inter));
  if (!inter.empty()) throw std::logic_error("pool: labeled and unlabeled overlap");

  std::vector<std::size_t> all;
  std::merge(pool.labeled.begin(), pool.labeled.end(), pool.unlabeled.begin(),
             pool.unlabeled.end(), std::back_inserter(all));
  std::vector<std::size_t> t = train;
  std::sort(t.begin(), t.end());
  if (all != t) throw std::logic_error("pool: labeled + unlabeled does not equal the train split");

  std::size_t total = 0;
  std::set<std::size_t> seen;
  for (const auto& rec : pool.history) {
    total += rec.queried.size();
    for (auto i : rec.queried) {
      if (!seen.insert(i).second) {
        throw std::logic_error("pool: index " + std::to_string(i) + " queried twice");
      }
      if (!std::binary_search(pool.labeled.begin(), pool.labeled.end(), i)) {
        throw std::logic_error("pool: queried index " + std::to_string(i) + " is not labeled");
      }
    }
  }
  if (total + initial_labeled != pool.labeled.size()) {
    throw std::logic_error("pool: history does not account for labeled pool growth");
  }
}

}  // namespace alseg
