#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "facegen/image.hpp"

namespace facegen::prep {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
};

/// Facial landmarks in source pixel coordinates (pixel centers at i + 0.5).
struct LandmarkSet {
  Point2 left_eye;   // image-left, smaller x
  Point2 right_eye;
  Point2 mouth_center;
  Box face_bbox;
};

/// A photograph as it arrives: values in [0, 1], at least 32 x 32.
struct RawImage {
  Image pixels;
  std::string source_id;
  int original_width = 0;
  int original_height = 0;
};

/// Throws InvalidLandmarks unless every coordinate lies inside a
/// width x height frame, the eyes are ordered left-to-right and distinct.
void validate_landmarks(const LandmarkSet& landmarks, int width, int height);

/// Throws InvalidArgument when the raw image violates its size or range contract.
void validate_raw_image(const RawImage& raw);

LandmarkSet load_landmarks(const std::filesystem::path& path);
void save_landmarks(const LandmarkSet& landmarks, const std::filesystem::path& path);

/// Pluggable landmark source. The library ships only a fixture-backed
/// implementation; a real detector plugs in here.
class LandmarkDetector {
 public:
  virtual ~LandmarkDetector() = default;
  virtual LandmarkSet detect(const RawImage& image) const = 0;
};

}  // namespace facegen::prep
