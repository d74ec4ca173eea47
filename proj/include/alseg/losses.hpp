#pragma once

#include <span>

namespace alseg {

enum class LossKind { focal_dice, dice_bce };

struct LossConfig {
  LossKind kind = LossKind::dice_bce;
  double gamma = 3.0;
  /// Averages the cross-entropy term over pixels instead of summing it.
  bool normalize_bce = false;

  bool operator==(const LossConfig&) const = default;
};

struct LossValue {
  double value = 0.0;
  /// Set when the soft-Dice ratio is 0/0 (empty mask, all-zero prediction).
  bool degenerate = false;
};

/// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before any log.
inline constexpr double kProbClamp = 1e-7;

/// 1 - D^gamma with D = 2 sum(t p) / sum(t + p) the soft Dice ratio.
/// A 0/0 ratio yields loss 1 and the degenerate flag.
template <typename T>
LossValue loss_focal_dice(std::span<const T> probs, std::span<const T> target, double gamma);

/// 1 - D - 1/2 sum_i [t log p + (1 - t) log(1 - p)], the cross-entropy summed
/// over pixels (or averaged when `normalize_bce`).
template <typename T>
LossValue loss_dice_bce(std::span<const T> probs, std::span<const T> target, bool normalize_bce = false);

/// Loss value plus its gradient with respect to the pre-sigmoid logits.
/// `grad_logits` must have the same length as `probs`.
template <typename T>
LossValue loss_with_logit_grad(std::span<const T> probs, std::span<const T> target,
                               const LossConfig& cfg, std::span<T> grad_logits);

template <typename T>
LossValue evaluate_loss(std::span<const T> probs, std::span<const T> target, const LossConfig& cfg) {
  return cfg.kind == LossKind::focal_dice ? loss_focal_dice(probs, target, cfg.gamma)
                                          : loss_dice_bce(probs, target, cfg.normalize_bce);
}

}  // namespace alseg
