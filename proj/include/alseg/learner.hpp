#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "alseg/corpus.hpp"
#include "alseg/losses.hpp"
#include "alseg/network.hpp"
#include "alseg/random.hpp"

namespace alseg {

struct LearnerConfig {
  double learning_rate = 1e-4;
  LossConfig loss;
  NetworkShape shape;
  std::uint64_t seed = 0;
  int batch_size = 8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;

  bool operator==(const LearnerConfig&) const = default;
};

void validate(const LearnerConfig& cfg);

/// Output of one forward pass: per-pixel foreground probability and the
/// flattened bottleneck activation.
struct PredictionBundle {
  Image probs;
  Eigen::VectorXf features;
};

/// Adam moments, one entry per network parameter.
struct AdamState {
  Eigen::VectorXf m;
  Eigen::VectorXf v;
  std::int64_t step = 0;

  bool operator==(const AdamState&) const = default;
};

/// One Adam update of `params` given gradient `grad`.
void adam_step(Eigen::VectorXf& params, const Eigen::VectorXf& grad, AdamState& state,
               const LearnerConfig& cfg);

/// Encoder-decoder plus optimizer state and the shuffling stream.
class Learner {
 public:
  explicit Learner(const LearnerConfig& cfg);

  const LearnerConfig& config() const { return cfg_; }
  Network<float>& network() { return net_; }
  const Network<float>& network() const { return net_; }
  AdamState& optimizer() { return adam_; }
  const AdamState& optimizer() const { return adam_; }

  void reset_optimizer();

  PredictionBundle forward(const Image& image) const;

  /// Trains for `epochs` passes over `samples` with a fresh shuffle per epoch
  /// and returns the mean per-sample loss of each epoch. Throws
  /// DivergedTraining on a non-finite loss or weight.
  std::vector<double> train(std::span<const SliceSample* const> samples, int epochs,
                            int batch_size);
  std::vector<double> train(std::span<const SliceSample* const> samples, int epochs) {
    return train(samples, epochs, cfg_.batch_size);
  }

  void save_checkpoint(const std::filesystem::path& path) const;
  static Learner load_checkpoint(const std::filesystem::path& path);

  bool operator==(const Learner& other) const {
    return cfg_ == other.cfg_ && net_.parameters() == other.net_.parameters() &&
           adam_ == other.adam_;
  }

 private:
  LearnerConfig cfg_;
  Network<float> net_;
  AdamState adam_;
  Rng shuffle_rng_;
};

PredictionBundle forward(const Learner& learner, const Image& image);

/// Mean hard Dice (threshold 0.5) of the learner's predictions over `samples`.
double mean_hard_dice(const Learner& learner, std::span<const SliceSample* const> samples);

/// Analytic gradient vs central finite differences (step 1e-5) on
/// `n_weights` randomly chosen parameters. Per weight the relative error is
/// |a - n| / max(|a|, |n|, 1e-3 * max_j |a_j|); the floor keeps weights whose
/// gradient is orders of magnitude below the largest one from being judged on
/// finite-difference round-off alone. Returns the maximum over the sample.
double gradcheck(const Network<double>& net, const SliceSample& sample, const LossConfig& loss,
                 int n_weights = 100, std::uint64_t seed = 0);

/// Same check on the sum of logits. For a network with identity activations
/// that objective is linear in every single weight, so the finite difference
/// is exact up to round-off.
double gradcheck_logit_sum(const Network<double>& net, const SliceSample& sample,
                           int n_weights = 100, std::uint64_t seed = 0);

double logit_sum_and_gradient(const Network<double>& net, const SliceSample& sample,
                              Eigen::VectorXd* grad);

/// Float64 loss and gradient for one sample (used by gradcheck and tests).
double loss_and_gradient(const Network<double>& net, const SliceSample& sample,
                         const LossConfig& loss, Eigen::VectorXd* grad);

}  // namespace alseg
