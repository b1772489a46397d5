#include "facegen/harness/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "facegen/errors.hpp"

namespace facegen::harness {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Antialiased coverage from a signed distance in unit-frame lengths
// (negative inside) and the number of pixels per unit.
double coverage(double dist, double px_per_unit) { return std::clamp(0.5 - dist * px_per_unit, 0.0, 1.0); }

// First-order distance to the ellipse boundary: (r - 1) / |grad r|.
double ellipse_dist(double x, double y, double cx, double cy, double rx, double ry) {
  const double ex = x - cx, ey = y - cy;
  const double r = std::hypot(ex / rx, ey / ry);
  if (r == 0.0) return -std::min(rx, ry);
  const double grad = std::hypot(ex / (rx * rx), ey / (ry * ry)) / r;
  return (r - 1.0) / grad;
}

void blend(std::array<double, 3>& dst, const std::array<double, 3>& src, double alpha) {
  for (int c = 0; c < 3; ++c) dst[c] += alpha * (src[c] - dst[c]);
}

std::array<double, 3> widen(const std::array<float, 3>& c) { return {c[0], c[1], c[2]}; }

std::array<double, 3> scaled(const std::array<float, 3>& c, double k) { return {c[0] * k, c[1] * k, c[2] * k}; }

std::mt19937_64 item_rng(std::uint64_t seed, std::size_t i) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(static_cast<std::uint64_t>(i) >> 32)};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::array<float, 3> rgb(double r, double g, double b) {
  return {static_cast<float>(std::clamp(r, 0.0, 1.0)), static_cast<float>(std::clamp(g, 0.0, 1.0)),
          static_cast<float>(std::clamp(b, 0.0, 1.0))};
}

}  // namespace

std::vector<double> FaceParams::attributes() const {
  std::vector<double> a;
  for (const auto* c : {&skin, &background, &hair, &lips}) {
    for (const float v : *c) a.push_back(v);
  }
  a.push_back((face_rx - 0.33) / 0.06);
  a.push_back((face_ry - 0.42) / 0.06);
  a.push_back((hairline - 0.2) / 0.1);
  a.push_back((eye_radius - 0.018) / 0.01);
  a.push_back((nose_length - 0.07) / 0.04);
  a.push_back((mouth_y - 0.64) / 0.05);
  a.push_back((mouth_width - 0.14) / 0.08);
  a.push_back((mouth_height - 0.05) / 0.03);
  a.push_back(notched() ? 1.0 : 0.0);
  a.push_back(notch_width / 0.09);
  a.push_back(notch_depth / 0.09);
  return a;
}

void SyntheticFaceSpec::validate() const {
  if (resolution < 8) throw InvalidArgument("synthetic resolution must be at least 8");
  if (!(cleft_fraction >= 0.0 && cleft_fraction <= 1.0)) throw InvalidArgument("cleft_fraction must lie in [0, 1]");
  if (!(notch_width_min > 0.0 && notch_width_min <= notch_width_max && notch_width_max <= 0.15)) {
    throw InvalidArgument("notch width range must lie in (0, 0.15]");
  }
  if (!(notch_depth_min > 0.0 && notch_depth_min <= notch_depth_max && notch_depth_max <= 0.15)) {
    throw InvalidArgument("notch depth range must lie in (0, 0.15]");
  }
  if (posed && (raw_size < 32 || min_scale <= 0.0 || min_scale > max_scale || max_scale > 2.0)) {
    throw InvalidArgument("invalid pose ranges");
  }
}

FaceParams draw_face_params(const SyntheticFaceSpec& spec, bool notched, std::mt19937_64& rng) {
  FaceParams p;
  const double tone = uniform(rng, 0.3, 0.9);
  p.skin = rgb(tone + uniform(rng, -0.05, 0.05), tone * 0.8 + uniform(rng, -0.05, 0.05),
               tone * 0.65 + uniform(rng, -0.05, 0.05));
  p.background = rgb(uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9));
  const double h = uniform(rng, 0.05, 0.4);
  p.hair = rgb(h * uniform(rng, 0.8, 1.2), h * uniform(rng, 0.6, 1.0), h * uniform(rng, 0.4, 0.8));
  p.lips = rgb(uniform(rng, 0.6, 0.85), uniform(rng, 0.2, 0.35), uniform(rng, 0.25, 0.4));
  p.face_rx = uniform(rng, 0.33, 0.39);
  p.face_ry = uniform(rng, 0.42, 0.48);
  p.hairline = uniform(rng, 0.2, 0.3);
  p.eye_radius = uniform(rng, 0.018, 0.028);
  p.nose_length = uniform(rng, 0.07, 0.11);
  p.mouth_y = uniform(rng, 0.64, 0.69);
  p.mouth_width = uniform(rng, 0.14, 0.22);
  p.mouth_height = uniform(rng, 0.05, 0.08);
  // drawn unconditionally so the stream does not depend on the notch flag
  const double w = uniform(rng, spec.notch_width_min, spec.notch_width_max);
  const double d = uniform(rng, spec.notch_depth_min, spec.notch_depth_max);
  if (notched) {
    p.notch_width = w;
    p.notch_depth = d;
  }
  return p;
}

Image render_face(const FaceParams& p, const Pose& pose, int width, int height) {
  if (width < 1 || height < 1 || pose.scale <= 0.0) throw InvalidArgument("render_face: bad canvas or pose");
  Image out(height, width, 3);
  const double cs = std::cos(pose.rotation_deg * kDeg);
  const double sn = std::sin(pose.rotation_deg * kDeg);
  const double px = pose.scale;
  // unit-frame geometry relative to the frame center
  const double face_cy = 0.02;
  const double eye_y = p.eye_row - 0.5;
  const double eye_dx = p.eye_spacing / 2.0;
  const double mouth_cy = p.mouth_y - 0.5;
  const double nose_top = eye_y + 0.03;
  const double notch_cx = -p.mouth_width * 0.22;
  const double notch_top = mouth_cy - p.mouth_height / 2.0 - p.notch_depth;
  const double notch_bottom = mouth_cy + p.mouth_height * 0.1;
  const auto skin = widen(p.skin);
  const auto pupil = scaled(p.hair, 0.5);
  const std::array<double, 3> sclera{0.95, 0.95, 0.92};

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = x + 0.5 - pose.center_x;
      const double dy = y + 0.5 - pose.center_y;
      const double u = (cs * dx + sn * dy) / px;
      const double v = (-sn * dx + cs * dy) / px;
      const double au = std::abs(u);

      std::array<double, 3> c = widen(p.background);
      const double face_d = ellipse_dist(u, v, 0.0, face_cy, p.face_rx, p.face_ry);
      const double shade = 1.0 - 0.15 * std::clamp((v - face_cy) / p.face_ry, -1.0, 1.0);
      blend(c, {skin[0] * shade, skin[1] * shade, skin[2] * shade}, coverage(face_d, px));

      const double hair_d = std::max(ellipse_dist(u, v, 0.0, face_cy, p.face_rx + 0.03, p.face_ry + 0.03),
                                     v - (p.hairline - 0.5));
      blend(c, widen(p.hair), coverage(hair_d, px));

      blend(c, sclera, coverage(ellipse_dist(au, v, eye_dx, eye_y, p.eye_radius * 1.6, p.eye_radius), px));
      blend(c, pupil, coverage(ellipse_dist(au, v, eye_dx, eye_y, p.eye_radius * 0.7, p.eye_radius * 0.7), px));

      blend(c, scaled(p.skin, 0.8),
            coverage(ellipse_dist(au, v, 0.0, nose_top + p.nose_length / 2.0, 0.015, p.nose_length / 2.0), px));

      blend(c, widen(p.lips),
            coverage(ellipse_dist(au, v, 0.0, mouth_cy, p.mouth_width / 2.0, p.mouth_height / 2.0), px));
      blend(c, scaled(p.lips, 0.4),
            coverage(ellipse_dist(au, v, 0.0, mouth_cy, p.mouth_width / 2.0, p.mouth_height * 0.1), px));

      if (p.notched()) {
        // wedge widening towards the lip
        const double t = std::clamp((v - notch_top) / (notch_bottom - notch_top), 0.0, 1.0);
        const double half = p.notch_width / 2.0 * (0.4 + 0.6 * t);
        const double d = std::max(std::abs(u - notch_cx) - half, std::max(notch_top - v, v - notch_bottom));
        blend(c, scaled(p.lips, 0.25), coverage(d, px));
      }

      for (int k = 0; k < 3; ++k) out.at(y, x, k) = static_cast<float>(std::clamp(c[k], 0.0, 1.0));
    }
  }
  return out;
}

prep::LandmarkSet face_landmarks(const FaceParams& p, const Pose& pose, int width, int height) {
  const double cs = std::cos(pose.rotation_deg * kDeg);
  const double sn = std::sin(pose.rotation_deg * kDeg);
  auto to_px = [&](double ux, double uy) {
    const double a = (ux - 0.5) * pose.scale;
    const double b = (uy - 0.5) * pose.scale;
    return prep::Point2{pose.center_x + cs * a - sn * b, pose.center_y + sn * a + cs * b};
  };
  prep::LandmarkSet lm;
  lm.left_eye = to_px(0.5 - p.eye_spacing / 2.0, p.eye_row);
  lm.right_eye = to_px(0.5 + p.eye_spacing / 2.0, p.eye_row);
  lm.mouth_center = to_px(0.5, p.mouth_y);
  const auto c = to_px(0.5, 0.52);
  const double hx = pose.scale * std::hypot(p.face_rx * cs, p.face_ry * sn);
  const double hy = pose.scale * std::hypot(p.face_rx * sn, p.face_ry * cs);
  const double x0 = std::max(0.0, c.x - hx), y0 = std::max(0.0, c.y - hy);
  const double x1 = std::min<double>(width, c.x + hx), y1 = std::min<double>(height, c.y + hy);
  lm.face_bbox = {x0, y0, x1 - x0, y1 - y0};
  return lm;
}

std::vector<RenderedFace> synthesize_faces(const SyntheticFaceSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  const auto notched_count = static_cast<std::size_t>(std::llround(spec.cleft_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 assign(seed ^ 0x9e3779b97f4a7c15ULL);
  std::shuffle(order.begin(), order.end(), assign);
  std::vector<bool> notched(n, false);
  for (std::size_t k = 0; k < notched_count; ++k) notched[order[k]] = true;

  std::vector<RenderedFace> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = item_rng(seed, i);
    RenderedFace f;
    f.params = draw_face_params(spec, notched[i], rng);
    int side = spec.resolution;
    f.pose = Pose::aligned(side);
    if (spec.posed) {
      side = spec.raw_size;
      const double s = uniform(rng, spec.min_scale, spec.max_scale) * 0.45 * side;
      const double rot = uniform(rng, -spec.max_rotation_deg, spec.max_rotation_deg);
      const double jx = uniform(rng, -0.05, 0.05) * side;
      const double jy = uniform(rng, -0.05, 0.05) * side;
      f.pose = {s, rot, side / 2.0 + jx, side / 2.0 + jy};
    }
    f.image = render_face(f.params, f.pose, side, side);
    f.landmarks = face_landmarks(f.params, f.pose, side, side);
    out.push_back(std::move(f));
  }
  return out;
}

SyntheticDatasetSummary make_synthetic_dataset(const SyntheticFaceSpec& spec, std::size_t n, std::uint64_t seed,
                                               const std::filesystem::path& dir) {
  if (n < 1) throw InvalidArgument("synthetic dataset needs n >= 1");
  std::filesystem::create_directories(dir);
  const auto faces = synthesize_faces(spec, n, seed);
  SyntheticDatasetSummary s;
  s.manifest = dir / "manifest.tsv";
  std::ofstream manifest(s.manifest);
  std::ofstream attrs(dir / "attributes.csv");
  if (!manifest || !attrs) throw IoError("cannot write dataset files in " + dir.string());
  attrs << "image,notched,notch_width,notch_depth\n";
  char stem[32];
  for (std::size_t i = 0; i < faces.size(); ++i) {
    std::snprintf(stem, sizeof stem, "face_%05zu", i);
    const auto png = dir / (std::string(stem) + ".png");
    const auto json = dir / (std::string(stem) + ".json");
    save_png(faces[i].image, png);
    prep::save_landmarks(faces[i].landmarks, json);
    manifest << png.string() << '\t' << json.string() << '\n';
    attrs << stem << ".png," << (faces[i].params.notched() ? 1 : 0) << ',' << faces[i].params.notch_width << ','
          << faces[i].params.notch_depth << '\n';
    ++s.written;
    if (faces[i].params.notched()) ++s.notched;
  }
  return s;
}

std::vector<Image> load_image_dir(const std::filesystem::path& dir, int resolution) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Image> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(to_signed(resize_square(load_image(f), resolution)));
  return out;
}

std::vector<Image> synthetic_training_set(const SyntheticFaceSpec& spec, std::size_t n, std::uint64_t seed) {
  SyntheticFaceSpec aligned = spec;
  aligned.posed = false;
  std::vector<Image> out;
  out.reserve(n);
  for (auto& f : synthesize_faces(aligned, n, seed)) out.push_back(to_signed(f.image));
  return out;
}

}  // namespace facegen::harness
