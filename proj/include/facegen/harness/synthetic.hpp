#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "facegen/image.hpp"
#include "facegen/prep/landmarks.hpp"

namespace facegen::harness {

/// Procedural face in a canonical unit frame laid out like the aligned
/// output of face prep: eye line at y = eye_row, eyes centered on x = 0.5.
/// All lengths are fractions of the frame side.
struct FaceParams {
  std::array<float, 3> skin{};
  std::array<float, 3> background{};
  std::array<float, 3> hair{};
  std::array<float, 3> lips{};
  double face_rx = 0.37;
  double face_ry = 0.46;
  double hairline = 0.25;  // y of the hair boundary
  double eye_row = 0.42;
  double eye_spacing = 100.0 / 1024.0;
  double eye_radius = 0.022;
  double nose_length = 0.09;
  double mouth_y = 0.66;
  double mouth_width = 0.18;
  double mouth_height = 0.065;
  // one-sided notch above the lip on the image-left side; width 0 = none
  double notch_width = 0.0;
  double notch_depth = 0.0;

  bool notched() const { return notch_width > 0.0; }
  /// Normalized attribute vector (the desk embedder's training target).
  std::vector<double> attributes() const;
};

/// Maps the unit frame into pixels: p = center + scale * R(rotation) * (u - 0.5).
struct Pose {
  double scale = 1.0;  // pixels per unit
  double rotation_deg = 0.0;
  double center_x = 0.0;
  double center_y = 0.0;

  static Pose aligned(int resolution) { return {static_cast<double>(resolution), 0.0, resolution / 2.0, resolution / 2.0}; }
};

struct SyntheticFaceSpec {
  int resolution = 32;  // side of aligned renders
  double cleft_fraction = 0.0;
  double notch_width_min = 0.03;
  double notch_width_max = 0.09;
  double notch_depth_min = 0.04;
  double notch_depth_max = 0.09;
  // posed raw photographs (synth-data): canvas size and pose ranges
  bool posed = false;
  int raw_size = 256;
  double max_rotation_deg = 20.0;
  double min_scale = 0.5;  // relative to a face filling 45% of the canvas
  double max_scale = 2.0;

  void validate() const;
};

struct RenderedFace {
  Image image;  // values in [0, 1]
  FaceParams params;
  Pose pose;
  prep::LandmarkSet landmarks;
};

FaceParams draw_face_params(const SyntheticFaceSpec& spec, bool notched, std::mt19937_64& rng);

/// Exactly left-right symmetric for an un-notched face rendered with the
/// aligned pose.
Image render_face(const FaceParams& params, const Pose& pose, int width, int height);

prep::LandmarkSet face_landmarks(const FaceParams& params, const Pose& pose, int width, int height);

/// n faces; exactly round(cleft_fraction * n) of them are notched. Item i
/// depends only on (seed, i) and the notch assignment.
std::vector<RenderedFace> synthesize_faces(const SyntheticFaceSpec& spec, std::size_t n, std::uint64_t seed);

struct SyntheticDatasetSummary {
  std::size_t written = 0;
  std::size_t notched = 0;
  std::filesystem::path manifest;
};

/// Writes face_NNNNN.png, face_NNNNN.json (landmark sidecar), manifest.tsv
/// (`<image>\t<landmarks>`, the prep input format) and attributes.csv.
SyntheticDatasetSummary make_synthetic_dataset(const SyntheticFaceSpec& spec, std::size_t n, std::uint64_t seed,
                                               const std::filesystem::path& dir);

/// Loads every PNG of a directory in name order as signed images resized to
/// `resolution`.
std::vector<Image> load_image_dir(const std::filesystem::path& dir, int resolution);

/// Aligned renders of synthesize_faces as signed images.
std::vector<Image> synthetic_training_set(const SyntheticFaceSpec& spec, std::size_t n, std::uint64_t seed);

}  // namespace facegen::harness
