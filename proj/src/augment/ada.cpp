#include "facegen/augment/ada.hpp"

#include <algorithm>

#include "facegen/errors.hpp"

namespace facegen::augment {

AdaState ada_update(const AdaState& state, std::span<const float> real_logits) {
  if (real_logits.empty()) throw InvalidArgument("ada_update needs a nonempty batch");
  double sign_sum = 0.0;
  for (float v : real_logits) sign_sum += (v > 0.0f) - (v < 0.0f);
  const double batch = static_cast<double>(real_logits.size());
  const double mean_sign = sign_sum / batch;

  AdaState next = state;
  const double alpha = std::min(1.0, batch / state.ema_images);
  next.rt_estimate = std::clamp(state.rt_estimate + alpha * (mean_sign - state.rt_estimate), -1.0, 1.0);

  const double step = state.adjustment_per_image * batch;
  double p = next.rt_estimate > state.target_rt ? state.p + step : state.p - step;
  // absorb accumulated rounding so a saturated controller sits exactly on its bound
  if (p > 1.0 - 1e-9) p = 1.0;
  if (p < 1e-9) p = 0.0;
  next.p = p;
  return next;
}

}  // namespace facegen::augment
