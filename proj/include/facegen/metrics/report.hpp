#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace facegen::metrics {

/// One row of `metric,value,stderr,n,seed,config_hash`.
struct MetricRow {
  std::string metric;
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

std::string metric_csv_header();
std::string to_csv(const MetricRow& row);
/// Appends, writing the header when the file is new.
void append_metric_rows(const std::filesystem::path& path, const std::vector<MetricRow>& rows);

}  // namespace facegen::metrics
