#include "alseg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "alseg/error.hpp"

namespace alseg {

namespace {

template <typename T>
void check_shapes(std::span<const T> probs, std::span<const T> target) {
  if (probs.size() != target.size()) {
    throw ShapeError("loss: prediction has " + std::to_string(probs.size()) +
                     " pixels but target has " + std::to_string(target.size()));
  }
}

struct DiceTerms {
  double intersection = 0.0;  // sum t p
  double total = 0.0;         // sum (t + p)
  bool degenerate() const { return total == 0.0; }
  double ratio() const { return degenerate() ? 0.0 : 2.0 * intersection / total; }
};

template <typename T>
DiceTerms dice_terms(std::span<const T> probs, std::span<const T> target) {
  DiceTerms d;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    d.intersection += static_cast<double>(target[i]) * static_cast<double>(probs[i]);
    d.total += static_cast<double>(target[i]) + static_cast<double>(probs[i]);
  }
  return d;
}

template <typename T>
double bce_sum(std::span<const T> probs, std::span<const T> target) {
  double s = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(static_cast<double>(probs[i]), kProbClamp, 1.0 - kProbClamp);
    const double t = static_cast<double>(target[i]);
    s -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  return s;
}

}  // namespace

template <typename T>
LossValue loss_focal_dice(std::span<const T> probs, std::span<const T> target, double gamma) {
  check_shapes(probs, target);
  if (!(gamma > 0.0)) throw std::invalid_argument("loss_focal_dice: gamma must be positive");
  const auto d = dice_terms(probs, target);
  if (d.degenerate()) return {1.0, true};
  return {1.0 - std::pow(d.ratio(), gamma), false};
}

template <typename T>
LossValue loss_dice_bce(std::span<const T> probs, std::span<const T> target, bool normalize_bce) {
  check_shapes(probs, target);
  const auto d = dice_terms(probs, target);
  double bce = 0.5 * bce_sum(probs, target);
  if (normalize_bce && !probs.empty()) bce /= static_cast<double>(probs.size());
  return {1.0 - d.ratio() + bce, d.degenerate()};
}

template <typename T>
LossValue loss_with_logit_grad(std::span<const T> probs, std::span<const T> target,
                               const LossConfig& cfg, std::span<T> grad_logits) {
  check_shapes(probs, target);
  if (grad_logits.size() != probs.size()) {
    throw ShapeError("loss_with_logit_grad: gradient buffer has the wrong length");
  }
  const auto d = dice_terms(probs, target);
  const LossValue value = evaluate_loss(probs, target, cfg);

  // dL/dD, the outer factor applied to dD/dp_i = (2 t_i - D) / S.
  double dl_dratio = 0.0;
  if (!d.degenerate()) {
    if (cfg.kind == LossKind::focal_dice) {
      const double r = std::max(d.ratio(), 1e-300);
      dl_dratio = -cfg.gamma * std::pow(r, cfg.gamma - 1.0);
    } else {
      dl_dratio = -1.0;
    }
  }
  const double ratio = d.ratio();
  double bce_scale = cfg.kind == LossKind::dice_bce ? 0.5 : 0.0;
  if (cfg.normalize_bce && !probs.empty()) bce_scale /= static_cast<double>(probs.size());

  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = static_cast<double>(probs[i]);
    const double t = static_cast<double>(target[i]);
    double g = 0.0;
    if (!d.degenerate()) g += dl_dratio * (2.0 * t - ratio) / d.total * p * (1.0 - p);
    if (bce_scale > 0.0 && p >= kProbClamp && p <= 1.0 - kProbClamp) g += bce_scale * (p - t);
    grad_logits[i] = static_cast<T>(g);
  }
  return value;
}

#define ALSEG_INSTANTIATE_LOSSES(T)                                                              \
  template LossValue loss_focal_dice<T>(std::span<const T>, std::span<const T>, double);          \
  template LossValue loss_dice_bce<T>(std::span<const T>, std::span<const T>, bool);              \
  template LossValue loss_with_logit_grad<T>(std::span<const T>, std::span<const T>,              \
                                             const LossConfig&, std::span<T>);

ALSEG_INSTANTIATE_LOSSES(float)
ALSEG_INSTANTIATE_LOSSES(double)

#undef ALSEG_INSTANTIATE_LOSSES

}  // namespace alseg
