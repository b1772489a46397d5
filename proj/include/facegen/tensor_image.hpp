#pragma once

#include <vector>

#include <torch/torch.h>

#include "facegen/image.hpp"

namespace facegen {

/// HWC Image -> 1 x C x H x W float tensor.
torch::Tensor to_tensor(const Image& image);
/// N images of equal shape -> N x C x H x W.
torch::Tensor to_tensor(const std::vector<Image>& images);
/// Row `index` of an N x C x H x W tensor -> Image (float32 copy).
Image to_image(const torch::Tensor& batch, int64_t index = 0);
std::vector<Image> to_images(const torch::Tensor& batch);

}  // namespace facegen
