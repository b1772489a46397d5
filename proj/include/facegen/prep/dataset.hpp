#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "facegen/prep/align.hpp"

namespace facegen::prep {

struct PrepRecord {
  std::string source_id;
  bool ok = false;
  std::array<double, 6> transform{};
  std::string output;  // file name inside the output directory
  std::string reason;  // why the item was skipped
};

struct PrepReport {
  std::vector<PrepRecord> records;
  std::size_t written() const;
  std::size_t skipped() const;
};

/// Runs align + background blur over every `<image>\t<landmarks>` line of the
/// manifest, writing `<source_id>.png` files plus `prep_manifest.csv` into
/// `out_dir`. Bad items are recorded and skipped; records follow manifest order.
PrepReport prep_dataset(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir,
                        const PrepConfig& config);

void write_prep_manifest(const PrepReport& report, const std::filesystem::path& path);

/// Landmarks looked up by source id; stands in for a face detector in tests.
class FixtureDetector : public LandmarkDetector {
 public:
  void add(std::string source_id, LandmarkSet landmarks);
  LandmarkSet detect(const RawImage& image) const override;

 private:
  std::map<std::string, LandmarkSet> table_;
};

}  // namespace facegen::prep
