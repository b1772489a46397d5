#include "facegen/tensor_image.hpp"

#include <cstring>

#include "facegen/errors.hpp"

namespace facegen {

torch::Tensor to_tensor(const Image& image) {
  auto t = torch::from_blob(const_cast<float*>(image.data.data()), {image.height, image.width, image.channels},
                            torch::kFloat32);
  return t.permute({2, 0, 1}).unsqueeze(0).contiguous();
}

torch::Tensor to_tensor(const std::vector<Image>& images) {
  if (images.empty()) throw InvalidArgument("to_tensor: empty image list");
  std::vector<torch::Tensor> parts;
  parts.reserve(images.size());
  for (const auto& im : images) {
    if (!im.same_shape(images.front())) throw DimensionMismatch("to_tensor: mixed image shapes");
    parts.push_back(to_tensor(im));
  }
  return torch::cat(parts, 0);
}

Image to_image(const torch::Tensor& batch, int64_t index) {
  const auto t = batch[index].detach().to(torch::kFloat32).permute({1, 2, 0}).contiguous();
  Image out(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), static_cast<int>(t.size(2)));
  std::memcpy(out.data.data(), t.data_ptr<float>(), out.size() * sizeof(float));
  return out;
}

std::vector<Image> to_images(const torch::Tensor& batch) {
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(batch.size(0)));
  for (int64_t i = 0; i < batch.size(0); ++i) out.push_back(to_image(batch, i));
  return out;
}

}  // namespace facegen
