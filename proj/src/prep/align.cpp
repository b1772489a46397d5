#include "facegen/prep/align.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "facegen/errors.hpp"

namespace facegen::prep {

void PrepConfig::validate() const {
  if (output_resolution < 8) throw InvalidArgument("output_resolution too small");
  if (!(face_area_frac > 0.0 && face_area_frac < 1.0)) throw InvalidArgument("face_area_frac must be in (0,1)");
  if (interocular_target_frac * output_resolution < 4.0) {
    throw InvalidArgument("interocular target below 4 px at this resolution");
  }
  if (!(eye_row_frac > 0.0 && eye_row_frac < 1.0)) throw InvalidArgument("eye_row_frac must be in (0,1)");
  if (background_blur_sigma < 0.0 || transition_band_frac < 0.0) throw InvalidArgument("negative blur or band");
}

SimilarityTransform SimilarityTransform::inverse() const {
  const double det = a * a + b * b;
  SimilarityTransform inv{a / det, -b / det, 0.0, 0.0};
  const Point2 t = inv.apply({tx, ty});
  inv.tx = -t.x;
  inv.ty = -t.y;
  return inv;
}

SimilarityTransform SimilarityTransform::then(const SimilarityTransform& next) const {
  SimilarityTransform out{next.a * a - next.b * b, next.b * a + next.a * b, 0.0, 0.0};
  const Point2 t = next.apply({tx, ty});
  out.tx = t.x;
  out.ty = t.y;
  return out;
}

double SimilarityTransform::scale() const { return std::hypot(a, b); }

double SimilarityTransform::rotation_deg() const { return std::atan2(b, a) * 180.0 / std::numbers::pi; }

SimilarityTransform SimilarityTransform::from_params(double scale, double rotation_deg, double tx, double ty) {
  const double r = rotation_deg * std::numbers::pi / 180.0;
  return {scale * std::cos(r), scale * std::sin(r), tx, ty};
}

SimilarityTransform compute_alignment(const LandmarkSet& lm, const PrepConfig& config) {
  const double vx = lm.right_eye.x - lm.left_eye.x;
  const double vy = lm.right_eye.y - lm.left_eye.y;
  const double dist = std::hypot(vx, vy);
  if (!(dist > 1e-9) || !std::isfinite(dist)) throw InvalidLandmarks("degenerate eye landmarks");

  const double res = config.output_resolution;
  const double s = config.interocular_target_frac * res / dist;
  // rotate the eye vector onto +x: cos = vx/dist, sin = -vy/dist
  SimilarityTransform t{s * vx / dist, -s * vy / dist, 0.0, 0.0};
  const Point2 mid{(lm.left_eye.x + lm.right_eye.x) / 2.0, (lm.left_eye.y + lm.right_eye.y) / 2.0};
  const Point2 mapped = t.apply(mid);
  t.tx = res / 2.0 - mapped.x;
  t.ty = config.eye_row_frac * res - mapped.y;
  return t;
}

LandmarkSet transform_landmarks(const LandmarkSet& lm, const SimilarityTransform& t) {
  LandmarkSet out;
  out.left_eye = t.apply(lm.left_eye);
  out.right_eye = t.apply(lm.right_eye);
  out.mouth_center = t.apply(lm.mouth_center);
  const auto& b = lm.face_bbox;
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (Point2 c : {Point2{b.x, b.y}, Point2{b.x + b.w, b.y}, Point2{b.x, b.y + b.h}, Point2{b.x + b.w, b.y + b.h}}) {
    const Point2 m = t.apply(c);
    x0 = std::min(x0, m.x);
    y0 = std::min(y0, m.y);
    x1 = std::max(x1, m.x);
    y1 = std::max(y1, m.y);
  }
  out.face_bbox = {x0, y0, x1 - x0, y1 - y0};
  return out;
}

namespace {

double out_of_frame_fraction(const Box& box, const SimilarityTransform& t, double res) {
  constexpr int kSteps = 21;
  int outside = 0;
  for (int i = 0; i < kSteps; ++i) {
    for (int j = 0; j < kSteps; ++j) {
      const Point2 p = t.apply({box.x + box.w * j / (kSteps - 1), box.y + box.h * i / (kSteps - 1)});
      if (p.x < 0.0 || p.y < 0.0 || p.x > res || p.y > res) ++outside;
    }
  }
  return static_cast<double>(outside) / (kSteps * kSteps);
}

}  // namespace

AlignedImage align_face(const RawImage& image, const LandmarkSet& landmarks, const PrepConfig& config) {
  config.validate();
  validate_landmarks(landmarks, image.pixels.width, image.pixels.height);
  const SimilarityTransform t = compute_alignment(landmarks, config);
  const int res = config.output_resolution;
  if (out_of_frame_fraction(landmarks.face_bbox, t, res) > config.max_out_of_frame) {
    throw OutOfFrame("aligned face exceeds output frame: " + image.source_id);
  }

  const SimilarityTransform inv = t.inverse();
  AlignedImage out{Image(res, res, image.pixels.channels), t, image.source_id};
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      const Point2 src = inv.apply({x + 0.5, y + 0.5});
      for (int c = 0; c < image.pixels.channels; ++c) {
        out.pixels.at(y, x, c) = sample_bilinear(image.pixels, src.x, src.y, c);
      }
    }
  }
  return out;
}

double FaceMask::coverage() const {
  if (weights.empty()) return 0.0;
  const auto n = std::count_if(weights.begin(), weights.end(), [](float w) { return w >= 0.5f; });
  return static_cast<double>(n) / static_cast<double>(weights.size());
}

FaceMask face_mask(const LandmarkSet& lm, const PrepConfig& config) {
  const int res = config.output_resolution;
  const double area = config.face_area_frac * res * res;
  FaceMask mask;
  mask.resolution = res;
  mask.semi_x = std::sqrt(area / (std::numbers::pi * config.mask_aspect));
  mask.semi_y = config.mask_aspect * mask.semi_x;
  if (mask.semi_y > res / 2.0) {
    mask.semi_y = res / 2.0;
    mask.semi_x = area / (std::numbers::pi * mask.semi_y);
  }
  const double eye_mid_x = (lm.left_eye.x + lm.right_eye.x) / 2.0;
  const double eye_mid_y = (lm.left_eye.y + lm.right_eye.y) / 2.0;
  // keep the ellipse inside the frame so its pixel area matches the target
  mask.center_x = std::clamp((eye_mid_x + lm.mouth_center.x) / 2.0, std::min(mask.semi_x, res / 2.0),
                             std::max(res - mask.semi_x, res / 2.0));
  mask.center_y = std::clamp((eye_mid_y + lm.mouth_center.y) / 2.0, std::min(mask.semi_y, res / 2.0),
                             std::max(res - mask.semi_y, res / 2.0));

  const double band = config.transition_band_frac * res;
  mask.weights.assign(static_cast<std::size_t>(res) * res, 0.0f);
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      const double dx = x + 0.5 - mask.center_x;
      const double dy = y + 0.5 - mask.center_y;
      const double r = std::hypot(dx / mask.semi_x, dy / mask.semi_y);
      double w;
      if (band <= 0.0 || r == 0.0) {
        w = r <= 1.0 ? 1.0 : 0.0;
      } else {
        // signed distance to the boundary measured along the ray from the center
        const double dist = std::hypot(dx, dy) * (r - 1.0) / r;
        w = dist <= 0.0 ? std::clamp(0.5 - dist / band, 0.5, 1.0) : std::clamp(0.5 - dist / band, 0.0, 0.4999999);
      }
      mask.weights[static_cast<std::size_t>(y) * res + x] = static_cast<float>(w);
    }
  }
  return mask;
}

AlignedImage blur_background(const AlignedImage& image, const LandmarkSet& source_landmarks,
                             const PrepConfig& config) {
  if (config.background_blur_sigma <= 0.0) return image;
  if (image.pixels.height != config.output_resolution || image.pixels.width != config.output_resolution) {
    throw DimensionMismatch("blur_background: image resolution differs from config");
  }
  const FaceMask mask = face_mask(transform_landmarks(source_landmarks, image.transform), config);
  const Image blurred = gaussian_blur(image.pixels, config.background_blur_sigma);
  AlignedImage out = image;
  const int res = image.pixels.height;
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      const double keep = mask.weights[static_cast<std::size_t>(y) * res + x];
      for (int c = 0; c < image.pixels.channels; ++c) {
        const double src = image.pixels.at(y, x, c);
        out.pixels.at(y, x, c) = static_cast<float>(src + (1.0 - keep) * (blurred.at(y, x, c) - src));
      }
    }
  }
  return out;
}

}  // namespace facegen::prep
