#include "facegen/metrics/report.hpp"

#include <fstream>
#include <sstream>

#include "facegen/errors.hpp"

namespace facegen::metrics {

std::string metric_csv_header() { return "metric,value,stderr,n,seed,config_hash"; }

std::string to_csv(const MetricRow& row) {
  std::ostringstream os;
  os.precision(10);
  os << row.metric << ',' << row.value << ',' << row.std_error << ',' << row.n << ',' << row.seed << ','
     << row.config_hash;
  return os.str();
}

void append_metric_rows(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
  const bool fresh = !std::filesystem::exists(path);
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot write " + path.string());
  if (fresh) out << metric_csv_header() << '\n';
  for (const auto& r : rows) out << to_csv(r) << '\n';
}

}  // namespace facegen::metrics
