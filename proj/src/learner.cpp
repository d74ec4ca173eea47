#include "alseg/learner.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "json.hpp"

#include "alseg/blob_io.hpp"
#include "alseg/error.hpp"
#include "alseg/serialize.hpp"

namespace alseg {

using nlohmann::json;

void validate(const LearnerConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(cfg.loss.gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (cfg.shape.c1 < 1 || cfg.shape.c2 < 1 || cfg.shape.bottleneck < 1) {
    throw std::invalid_argument("channel counts must be positive");
  }
}

void adam_step(Eigen::VectorXf& params, const Eigen::VectorXf& grad, AdamState& s,
               const LearnerConfig& cfg) {
  if (s.m.size() != params.size()) {
    s.m = Eigen::VectorXf::Zero(params.size());
    s.v = Eigen::VectorXf::Zero(params.size());
  }
  ++s.step;
  const auto b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
  s.m = b1 * s.m + (1.0f - b1) * grad;
  s.v = b2 * s.v + (1.0f - b2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.step));
  const auto lr = static_cast<float>(cfg.learning_rate / c1);
  const auto inv_c2 = static_cast<float>(1.0 / c2);
  const auto eps = static_cast<float>(cfg.adam_epsilon);
  params.array() -= lr * s.m.array() / ((s.v.array() * inv_c2).sqrt() + eps);
}

Learner::Learner(const LearnerConfig& cfg)
    : cfg_(cfg), net_(cfg.shape), shuffle_rng_(derive_seed(cfg.seed, 1)) {
  validate(cfg_);
  net_.initialize(derive_seed(cfg.seed, 0));
  reset_optimizer();
}

void Learner::reset_optimizer() {
  adam_.m = Eigen::VectorXf::Zero(net_.parameter_count());
  adam_.v = Eigen::VectorXf::Zero(net_.parameter_count());
  adam_.step = 0;
}

PredictionBundle Learner::forward(const Image& image) const {
  Network<float>::Cache cache;
  net_.forward(image, cache);
  PredictionBundle out;
  out.probs = Eigen::Map<const Image>(cache.probs.data(), image.rows(), image.cols());
  out.features = net_.features(cache);
  return out;
}

PredictionBundle forward(const Learner& learner, const Image& image) {
  return learner.forward(image);
}

std::vector<double> Learner::train(std::span<const SliceSample* const> samples, int epochs,
                                   int batch_size) {
  if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (epochs == 0) return {};
  if (samples.empty()) throw std::invalid_argument("train: labeled set is empty");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Network<float>::Cache cache;
  Eigen::VectorXf grad(net_.parameter_count());
  std::vector<float> target, dlogits_buf;
  Network<float>::Mat dlogits;
  std::vector<double> trace;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    shuffle_rng_.shuffle(order);
    double epoch_loss = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size), ++batch_index) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
      grad.setZero();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const SliceSample& s = *samples[order[k]];
        net_.forward(s.image, cache);
        const auto n = static_cast<std::size_t>(cache.probs.size());
        target.resize(n);
        for (std::size_t i = 0; i < n; ++i) target[i] = s.mask.data()[i];
        dlogits.resize(1, static_cast<Eigen::Index>(n));
        const auto lv = loss_with_logit_grad<float>(
            std::span<const float>(cache.probs.data(), n), target, cfg_.loss,
            std::span<float>(dlogits.data(), n));
        if (!std::isfinite(lv.value)) {
          throw DivergedTraining(epoch, batch_index,
                                 "training diverged: non-finite loss at epoch " +
                                     std::to_string(epoch) + ", batch " +
                                     std::to_string(batch_index));
        }
        batch_loss += lv.value;
        net_.backward(cache, dlogits, grad);
      }
      const auto count = static_cast<float>(end - start);
      grad /= count;
      adam_step(net_.parameters(), grad, adam_, cfg_);
      if (!net_.parameters().allFinite()) {
        throw DivergedTraining(epoch, batch_index,
                               "training diverged: non-finite weights at epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index));
      }
      epoch_loss += batch_loss;
    }
    trace.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return trace;
}

double mean_hard_dice(const Learner& learner, std::span<const SliceSample* const> samples) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  for (const auto* s : samples) {
    const auto pred = learner.forward(s->image);
    double tp = 0, fp = 0, fn = 0;
    for (Eigen::Index i = 0; i < pred.probs.size(); ++i) {
      const bool p = pred.probs.data()[i] >= 0.5f;
      const bool t = s->mask.data()[i] != 0;
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
    const double denom = 2 * tp + fp + fn;
    total += denom == 0.0 ? 1.0 : 2 * tp / denom;
  }
  return total / static_cast<double>(samples.size());
}

// ---------------------------------------------------------------------------
// Gradient check.

double loss_and_gradient(const Network<double>& net, const SliceSample& sample,
                         const LossConfig& loss, Eigen::VectorXd* grad) {
  Network<double>::Cache cache;
  const Network<double>::Mat image = sample.image.cast<double>();
  net.forward(image, cache);
  const auto n = static_cast<std::size_t>(cache.probs.size());
  std::vector<double> target(n);
  for (std::size_t i = 0; i < n; ++i) target[i] = sample.mask.data()[i];
  if (!grad) {
    return evaluate_loss<double>(std::span<const double>(cache.probs.data(), n), target, loss).value;
  }
  Network<double>::Mat dlogits(1, static_cast<Eigen::Index>(n));
  const auto lv = loss_with_logit_grad<double>(std::span<const double>(cache.probs.data(), n),
                                               target, loss, std::span<double>(dlogits.data(), n));
  *grad = Eigen::VectorXd::Zero(net.parameter_count());
  net.backward(cache, dlogits, *grad);
  return lv.value;
}

double logit_sum_and_gradient(const Network<double>& net, const SliceSample& sample,
                              Eigen::VectorXd* grad) {
  Network<double>::Cache cache;
  const Network<double>::Mat image = sample.image.cast<double>();
  net.forward(image, cache);
  if (grad) {
    *grad = Eigen::VectorXd::Zero(net.parameter_count());
    const Network<double>::Mat ones = Network<double>::Mat::Ones(1, cache.logits.cols());
    net.backward(cache, ones, *grad);
  }
  return cache.logits.sum();
}

namespace {

template <typename Objective>
double finite_difference_check(const Network<double>& net, Objective&& objective, int n_weights,
                               std::uint64_t seed) {
  Eigen::VectorXd analytic;
  objective(net, &analytic);
  const double floor = std::max(1e-3 * analytic.cwiseAbs().maxCoeff(), 1e-300);
  constexpr double h = 1e-5;

  Network<double> probe = net;
  Rng rng(seed);
  const auto count = static_cast<std::size_t>(net.parameter_count());
  const auto picks = rng.sample_without_replacement(
      count, std::min<std::size_t>(count, static_cast<std::size_t>(n_weights)));
  double worst = 0.0;
  for (auto idx : picks) {
    const auto i = static_cast<Eigen::Index>(idx);
    const double w0 = net.parameters()[i];
    probe.parameters()[i] = w0 + h;
    const double up = objective(probe, nullptr);
    probe.parameters()[i] = w0 - h;
    const double down = objective(probe, nullptr);
    probe.parameters()[i] = w0;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace

double gradcheck(const Network<double>& net, const SliceSample& sample, const LossConfig& loss,
                 int n_weights, std::uint64_t seed) {
  return finite_difference_check(
      net,
      [&](const Network<double>& n, Eigen::VectorXd* g) {
        return loss_and_gradient(n, sample, loss, g);
      },
      n_weights, seed);
}

double gradcheck_logit_sum(const Network<double>& net, const SliceSample& sample, int n_weights,
                           std::uint64_t seed) {
  return finite_difference_check(
      net,
      [&](const Network<double>& n, Eigen::VectorXd* g) {
        return logit_sum_and_gradient(n, sample, g);
      },
      n_weights, seed);
}

// ---------------------------------------------------------------------------
// Checkpoints: JSON header + float32 blob holding parameters, then Adam m, v.

void Learner::save_checkpoint(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto blob = path;
  blob.replace_extension(".bin");
  const auto p = net_.parameter_count();
  std::vector<float> values;
  values.reserve(static_cast<std::size_t>(3 * p));
  values.insert(values.end(), net_.parameters().data(), net_.parameters().data() + p);
  values.insert(values.end(), adam_.m.data(), adam_.m.data() + p);
  values.insert(values.end(), adam_.v.data(), adam_.v.data() + p);
  io::write_f32_blob(blob, values);

  std::ostringstream rng_state;
  rng_state << shuffle_rng_.engine();
  json j = {{"format", "alseg.checkpoint"},
            {"version", 1},
            {"config", to_json(cfg_)},
            {"parameter_count", p},
            {"adam_step", adam_.step},
            {"shuffle_state", rng_state.str()},
            {"blob", blob.filename().string()},
            {"layout", {"parameters", "adam_m", "adam_v"}}};
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  os << j.dump(1) << '\n';
}

Learner Learner::load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open checkpoint " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ParseError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  if (j.value("format", "") != "alseg.checkpoint") {
    throw ParseError("checkpoint: field 'format' is not 'alseg.checkpoint'");
  }
  Learner out(learner_config_from_json(j.at("config")));
  const auto p = out.net_.parameter_count();
  if (j.at("parameter_count").get<Eigen::Index>() != p) {
    throw ParseError("checkpoint: parameter_count does not match the configured shape");
  }
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  const auto values = io::read_f32_blob(dir / j.at("blob").get<std::string>());
  if (static_cast<Eigen::Index>(values.size()) != 3 * p) {
    throw ParseError("checkpoint: blob holds " + std::to_string(values.size()) +
                     " values, expected " + std::to_string(3 * p));
  }
  out.net_.parameters() = Eigen::Map<const Eigen::VectorXf>(values.data(), p);
  out.adam_.m = Eigen::Map<const Eigen::VectorXf>(values.data() + p, p);
  out.adam_.v = Eigen::Map<const Eigen::VectorXf>(values.data() + 2 * p, p);
  out.adam_.step = j.at("adam_step").get<std::int64_t>();
  std::istringstream rng_state(j.at("shuffle_state").get<std::string>());
  rng_state >> out.shuffle_rng_.engine();
  return out;
}

}  // namespace alseg
