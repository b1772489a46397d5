#include "facegen/prep/landmarks.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "facegen/errors.hpp"

namespace facegen::prep {

namespace {

bool inside(Point2 p, int width, int height) {
  return std::isfinite(p.x) && std::isfinite(p.y) && p.x >= 0.0 && p.y >= 0.0 && p.x <= width && p.y <= height;
}

nlohmann::json point_json(Point2 p) { return nlohmann::json::array({p.x, p.y}); }

Point2 point_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw InvalidLandmarks(std::string("landmark file missing key ") + key);
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2) throw InvalidLandmarks(std::string("landmark ") + key + " must be [x, y]");
  return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

void validate_landmarks(const LandmarkSet& lm, int width, int height) {
  for (Point2 p : {lm.left_eye, lm.right_eye, lm.mouth_center}) {
    if (!inside(p, width, height)) throw InvalidLandmarks("landmark outside image bounds");
  }
  const auto& b = lm.face_bbox;
  if (!(b.w > 0.0 && b.h > 0.0) || !inside({b.x, b.y}, width, height) ||
      !inside({b.x + b.w, b.y + b.h}, width, height)) {
    throw InvalidLandmarks("face box outside image bounds or empty");
  }
  if (!(lm.left_eye.x < lm.right_eye.x)) throw InvalidLandmarks("left eye must lie left of right eye");
  if (std::hypot(lm.right_eye.x - lm.left_eye.x, lm.right_eye.y - lm.left_eye.y) <= 0.0) {
    throw InvalidLandmarks("coincident eyes");
  }
}

void validate_raw_image(const RawImage& raw) {
  if (raw.pixels.height < 32 || raw.pixels.width < 32) throw InvalidArgument("raw image smaller than 32x32");
  if (raw.pixels.channels != 3) throw InvalidArgument("raw image must be RGB");
  if (!all_within(raw.pixels, 0.0f, 1.0f)) throw InvalidArgument("raw image values outside [0,1]");
}

LandmarkSet load_landmarks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open landmark file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidLandmarks("malformed landmark file " + path.string() + ": " + e.what());
  }
  LandmarkSet lm;
  lm.left_eye = point_from(j, "left_eye");
  lm.right_eye = point_from(j, "right_eye");
  lm.mouth_center = point_from(j, "mouth_center");
  if (!j.contains("face_bbox") || j["face_bbox"].size() != 4) throw InvalidLandmarks("face_bbox must be [x, y, w, h]");
  const auto& b = j["face_bbox"];
  lm.face_bbox = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
  return lm;
}

void save_landmarks(const LandmarkSet& lm, const std::filesystem::path& path) {
  nlohmann::json j;
  j["left_eye"] = point_json(lm.left_eye);
  j["right_eye"] = point_json(lm.right_eye);
  j["mouth_center"] = point_json(lm.mouth_center);
  j["face_bbox"] = {lm.face_bbox.x, lm.face_bbox.y, lm.face_bbox.w, lm.face_bbox.h};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write landmark file: " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace facegen::prep
