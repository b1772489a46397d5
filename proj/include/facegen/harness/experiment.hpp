#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "facegen/gan/checkpoint.hpp"
#include "facegen/gan/trainer.hpp"
#include "facegen/harness/config.hpp"
#include "facegen/metrics/conv_embedder.hpp"
#include "facegen/metrics/fid.hpp"
#include "facegen/severity/scorer.hpp"

namespace facegen::harness {

/// Data and frozen models shared by every cell of a run.
struct Assets {
  std::vector<Image> target;  // signed, at the model resolution
  std::vector<Image> source;
  std::unique_ptr<metrics::Embedder> embedder;
  metrics::FeatureMoments real_moments;  // embedded target set
  std::unique_ptr<severity::SeverityScorer> scorer;
};

/// The configured embedder file, or the desk embedder trained on synthetic
/// face attributes (cached in `cache_dir` keyed by its settings).
metrics::ConvEmbedder desk_embedder(const ExperimentConfig& cfg, int resolution, const std::filesystem::path& cache_dir);

/// The configured scorer; the asymmetry proxy is calibrated on `reference`.
std::unique_ptr<severity::SeverityScorer> make_severity_scorer(const ExperimentConfig& cfg,
                                                              const std::vector<Image>& reference);

/// Loads or renders the datasets, trains (or loads) the desk embedder and
/// calibrates the severity scorer on the target set.
Assets prepare_assets(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Source-domain checkpoint for a model configuration, cached in `out_dir`
/// keyed by everything that influences it.
gan::Checkpoint source_checkpoint(const ExperimentConfig& cfg, const gan::ModelConfig& model, const Assets& assets,
                                  const std::filesystem::path& out_dir);

/// FID of `n` generated images (seeded) against the assets' real moments.
double evaluate_fid(gan::Generator& generator, const Assets& assets, std::size_t n, std::uint64_t seed);

struct CellKey {
  std::size_t sample_size = 0;
  augment::Regimen regimen = augment::Regimen::All;
  bool transfer = true;
  std::uint64_t seed = 0;
  std::string variant;  // model overrides; empty for grid cells
};

struct EvalPoint {
  std::uint64_t tick = 0;
  std::uint64_t images_seen = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double ada_p = 0.0;
  double fid = 0.0;
};

struct CellResult {
  CellKey key;
  std::string hash;
  std::string status = "ok";
  double best_fid = 0.0;
  std::uint64_t best_tick = 0;
  double ppl = 0.0;
  double ppl_stderr = 0.0;
  double dish = 0.0;
  std::vector<EvalPoint> log;

  bool ok() const { return status == "ok"; }
};

enum class MetricCheckpoint { Final, BestFid };

/// Trains one cell (finetune from the source checkpoint or from scratch on
/// the first `sample_size` target images), evaluating FID every
/// eval_every_ticks, then PPL and DISH on the chosen checkpoint. Writes
/// training_log.csv, severity_histogram.csv, severity_scores.csv, best.ckpt,
/// final.ckpt and result.json into `cell_dir`. A result.json with a matching
/// hash short-circuits the run.
CellResult run_cell(const ExperimentConfig& cfg, const CellKey& key, const Assets& assets,
                    const std::filesystem::path& out_dir, MetricCheckpoint metric_ckpt);

std::string cell_hash(const ExperimentConfig& cfg, const CellKey& key);

struct GridReport {
  std::vector<CellResult> rows;
  std::string to_csv() const;
};

/// Every (sample_size, regimen, transfer, seed) cell in that nesting order.
/// Completed cells in `out_dir` are reused; failed cells are recorded and
/// the grid continues. Writes grid_report.csv.
GridReport run_grid(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

struct VariantRow {
  std::string variant;
  std::uint64_t seed = 0;
  std::string status = "ok";
  double fid = 0.0;
  double ppl = 0.0;
  double dish = 0.0;
};

/// One row per model variant and seed with FID, PPL and DISH at the best-FID
/// checkpoint. Uses the first sample size, regimen and transfer setting of
/// the grid. Writes compare_report.csv.
std::vector<VariantRow> compare_variants(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
std::string variants_csv(const std::vector<VariantRow>& rows);

/// Round-trip formatting used in every report.
std::string format_real(double v);

}  // namespace facegen::harness
