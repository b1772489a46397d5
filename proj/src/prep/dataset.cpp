#include "facegen/prep/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "facegen/errors.hpp"

namespace facegen::prep {

std::size_t PrepReport::written() const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return r.ok; }));
}

std::size_t PrepReport::skipped() const { return records.size() - written(); }

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& entry) {
  std::filesystem::path p(entry);
  return p.is_absolute() ? p : base / p;
}

PrepRecord prep_one(const std::filesystem::path& image_path, const std::filesystem::path& landmark_path,
                    const std::filesystem::path& out_dir, const PrepConfig& config) {
  PrepRecord rec;
  rec.source_id = image_path.stem().string();
  try {
    RawImage raw;
    raw.pixels = load_image(image_path);
    raw.source_id = rec.source_id;
    raw.original_width = raw.pixels.width;
    raw.original_height = raw.pixels.height;
    validate_raw_image(raw);
    const LandmarkSet lm = load_landmarks(landmark_path);
    AlignedImage aligned = blur_background(align_face(raw, lm, config), lm, config);
    rec.transform = aligned.transform.coefficients();
    rec.output = rec.source_id + ".png";
    save_png(aligned.pixels, out_dir / rec.output);
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.reason = e.what();
  }
  return rec;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

}  // namespace

PrepReport prep_dataset(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir,
                        const PrepConfig& config) {
  config.validate();
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest: " + manifest_path.string());
  std::filesystem::create_directories(out_dir);
  const auto base = manifest_path.parent_path();

  PrepReport report;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      report.records.push_back({line, false, {}, "", "malformed manifest line"});
      continue;
    }
    report.records.push_back(
        prep_one(resolve(base, line.substr(0, tab)), resolve(base, line.substr(tab + 1)), out_dir, config));
  }
  write_prep_manifest(report, out_dir / "prep_manifest.csv");
  return report;
}

void write_prep_manifest(const PrepReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# written=" << report.written() << " skipped=" << report.skipped() << '\n';
  out << "source_id,status,a00,a01,a02,a10,a11,a12,output,reason\n";
  out << std::setprecision(17);
  for (const auto& r : report.records) {
    out << csv_escape(r.source_id) << ',' << (r.ok ? "ok" : "skipped");
    for (double v : r.transform) out << ',' << v;
    out << ',' << r.output << ',' << csv_escape(r.reason) << '\n';
  }
}

void FixtureDetector::add(std::string source_id, LandmarkSet landmarks) {
  table_[std::move(source_id)] = landmarks;
}

LandmarkSet FixtureDetector::detect(const RawImage& image) const {
  const auto it = table_.find(image.source_id);
  if (it == table_.end()) throw InvalidLandmarks("no fixture landmarks for " + image.source_id);
  return it->second;
}

}  // namespace facegen::prep
