#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <torch/torch.h>

struct GradCheck {
  double max_rel = 0.0;
  int checked = 0;
  int kinked = 0;
};

// Central differences on a sample of coordinates of every parameter tensor.
// Leaky-ReLU kinks make the loss piecewise smooth; when one lies inside
// [x - h, x + h] the central difference at h disagrees with the one at h / 10
// far beyond the O(h^2) smooth error, and that coordinate is not a valid
// oracle. Such coordinates are counted, not compared.
inline GradCheck check_gradients(torch::nn::Module& module, const std::function<torch::Tensor()>& loss, double h) {
  for (auto& p : module.parameters()) p.mutable_grad() = torch::Tensor();
  loss().backward();
  GradCheck out;
  std::mt19937_64 rng(5);
  for (auto& p : module.parameters()) {
    if (!p.grad().defined()) continue;
    const auto grad = p.grad().reshape(-1).clone();
    auto flat = p.detach().view(-1);
    const int64_t n = flat.numel();
    std::vector<int64_t> picks{grad.abs().argmax().item<int64_t>()};
    std::uniform_int_distribution<int64_t> any(0, n - 1);
    for (int k = 0; k < 5; ++k) picks.push_back(any(rng));
    auto central = [&](int64_t i, double step) {
      const double orig = flat[i].item<double>();
      flat[i] = orig + step;
      const double up = loss().item<double>();
      flat[i] = orig - step;
      const double down = loss().item<double>();
      flat[i] = orig;
      return (up - down) / (2.0 * step);
    };
    for (int64_t i : picks) {
      const double analytic = grad[i].item<double>();
      const double numeric = central(i, h);
      const double scale = std::max(std::abs(analytic), std::abs(numeric));
      if (scale < 1e-6) continue;
      if (std::abs(numeric - central(i, h / 10.0)) > 1e-4 * scale) {
        ++out.kinked;
        continue;
      }
      out.max_rel = std::max(out.max_rel, std::abs(analytic - numeric) / scale);
      ++out.checked;
    }
  }
  return out;
}
