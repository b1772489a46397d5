#pragma once

#include <array>
#include <string>
#include <vector>

#include "facegen/image.hpp"
#include "facegen/prep/landmarks.hpp"

namespace facegen::prep {

struct PrepConfig {
  int output_resolution = 1024;
  double interocular_target_frac = 100.0 / 1024.0;
  double face_area_frac = 0.60;
  double background_blur_sigma = 8.0;
  double eye_row_frac = 0.42;
  double transition_band_frac = 0.03;
  // height / width of the face ellipse
  double mask_aspect = 1.25;
  // tolerated fraction of the transformed face box falling outside the frame
  double max_out_of_frame = 0.20;

  void validate() const;
};

/// x' = a*x - b*y + tx ;  y' = b*x + a*y + ty
struct SimilarityTransform {
  double a = 1.0;
  double b = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  Point2 apply(Point2 p) const { return {a * p.x - b * p.y + tx, b * p.x + a * p.y + ty}; }
  SimilarityTransform inverse() const;
  SimilarityTransform then(const SimilarityTransform& next) const;
  double scale() const;
  double rotation_deg() const;
  /// Row-major 2x3 matrix coefficients.
  std::array<double, 6> coefficients() const { return {a, -b, tx, b, a, ty}; }

  static SimilarityTransform from_params(double scale, double rotation_deg, double tx, double ty);
};

struct AlignedImage {
  Image pixels;  // R x R x 3, values in [0, 1]
  SimilarityTransform transform;
  std::string source_id;
};

SimilarityTransform compute_alignment(const LandmarkSet& landmarks, const PrepConfig& config);

LandmarkSet transform_landmarks(const LandmarkSet& landmarks, const SimilarityTransform& t);

/// Warps the source into the R x R output frame with bilinear resampling and
/// edge replication. Throws OutOfFrame when more than `max_out_of_frame` of
/// the transformed face box lands outside the output.
AlignedImage align_face(const RawImage& image, const LandmarkSet& landmarks, const PrepConfig& config);

/// Soft elliptical face mask (1 inside the face, 0 in the background).
struct FaceMask {
  int resolution = 0;
  std::vector<float> weights;
  double center_x = 0.0;
  double center_y = 0.0;
  double semi_x = 0.0;
  double semi_y = 0.0;

  /// Fraction of pixels whose mask weight is at least 0.5.
  double coverage() const;
};

/// `landmarks` are in the aligned frame.
FaceMask face_mask(const LandmarkSet& aligned_landmarks, const PrepConfig& config);

/// Replaces everything outside the face mask with a Gaussian-blurred copy of
/// the aligned image. `source_landmarks` are mapped through `image.transform`.
AlignedImage blur_background(const AlignedImage& image, const LandmarkSet& source_landmarks,
                             const PrepConfig& config);

}  // namespace facegen::prep
