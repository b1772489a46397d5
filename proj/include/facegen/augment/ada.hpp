#pragma once

#include <span>

namespace facegen::augment {

/// Adaptive augmentation-probability controller.
///
/// rt_estimate tracks E[sign(D(real))] with an exponential moving average of
/// horizon `ema_images`. Each update moves p by adjustment_per_image * batch
/// towards more augmentation when rt_estimate > target_rt, and towards less
/// otherwise. The default adjustment lets p cross [0, 1] in 20k images.
struct AdaState {
  double p = 0.0;
  double target_rt = 0.6;
  double adjustment_per_image = 1.0 / 20000.0;
  double ema_images = 500.0;
  double rt_estimate = 0.0;
};

/// Requires a nonempty batch of real-image logits.
AdaState ada_update(const AdaState& state, std::span<const float> real_logits);

}  // namespace facegen::augment
