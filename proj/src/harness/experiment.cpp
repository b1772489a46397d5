#include "facegen/harness/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "facegen/errors.hpp"
#include "facegen/gan/generate.hpp"
#include "facegen/harness/synthetic.hpp"
#include "facegen/metrics/dish.hpp"
#include "facegen/metrics/ppl.hpp"
#include "facegen/tensor_image.hpp"

namespace facegen::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool is_synthetic(const std::string& s) { return s == "synthetic"; }

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError("cannot write " + tmp.string());
    os << text;
  }
  fs::rename(tmp, path);
}

void save_checkpoint_atomic(const gan::Checkpoint& ckpt, const fs::path& path) {
  const auto tmp = fs::path(path.string() + ".tmp");
  gan::save_checkpoint(ckpt, tmp);
  fs::rename(tmp, path);
}

json eval_point_json(const EvalPoint& e) {
  return {{"tick", e.tick}, {"images_seen", e.images_seen}, {"d_loss", e.d_loss},
          {"g_loss", e.g_loss}, {"ada_p", e.ada_p}, {"fid", e.fid}};
}

json result_json(const CellResult& r) {
  json log = json::array();
  for (const auto& e : r.log) log.push_back(eval_point_json(e));
  return {{"hash", r.hash},
          {"sample_size", r.key.sample_size},
          {"regimen", augment::to_string(r.key.regimen)},
          {"transfer", r.key.transfer},
          {"seed", r.key.seed},
          {"variant", r.key.variant},
          {"status", r.status},
          {"best_fid", r.best_fid},
          {"best_tick", r.best_tick},
          {"ppl", r.ppl},
          {"ppl_stderr", r.ppl_stderr},
          {"dish", r.dish},
          {"log", log}};
}

CellResult result_from_json(const json& j) {
  CellResult r;
  r.hash = j.at("hash").get<std::string>();
  r.key.sample_size = j.at("sample_size").get<std::size_t>();
  r.key.regimen = augment::parse_regimen(j.at("regimen").get<std::string>());
  r.key.transfer = j.at("transfer").get<bool>();
  r.key.seed = j.at("seed").get<std::uint64_t>();
  r.key.variant = j.at("variant").get<std::string>();
  r.status = j.at("status").get<std::string>();
  r.best_fid = j.at("best_fid").get<double>();
  r.best_tick = j.at("best_tick").get<std::uint64_t>();
  r.ppl = j.at("ppl").get<double>();
  r.ppl_stderr = j.at("ppl_stderr").get<double>();
  r.dish = j.at("dish").get<double>();
  for (const auto& e : j.at("log")) {
    r.log.push_back({e.at("tick").get<std::uint64_t>(), e.at("images_seen").get<std::uint64_t>(),
                     e.at("d_loss").get<double>(), e.at("g_loss").get<double>(), e.at("ada_p").get<double>(),
                     e.at("fid").get<double>()});
  }
  return r;
}

std::string training_log_csv(const CellResult& r, int tick_images) {
  std::string s = "tick,kimg,images_seen,d_loss,g_loss,ada_p,fid\n";
  for (const auto& e : r.log) {
    s += std::to_string(e.tick) + "," + format_real(static_cast<double>(e.tick) * tick_images / 1000.0) + "," +
         std::to_string(e.images_seen) + "," + format_real(e.d_loss) + "," + format_real(e.g_loss) + "," +
         format_real(e.ada_p) + "," + format_real(e.fid) + "\n";
  }
  return s;
}

std::string histogram_csv(const metrics::DishResult& d) {
  std::string s = "bin_lo,bin_hi,real,generated\n";
  for (std::size_t b = 0; b < d.real.bins(); ++b) {
    s += format_real(d.real.bin_edges[b]) + "," + format_real(d.real.bin_edges[b + 1]) + "," +
         format_real(d.real.weights[b]) + "," + format_real(d.fake.weights[b]) + "\n";
  }
  return s;
}

json cell_relevant_config(const ExperimentConfig& cfg) {
  auto j = to_json(cfg);
  j.erase("grid");
  j.erase("compare");
  return j;
}

}  // namespace

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::unique_ptr<severity::SeverityScorer> make_severity_scorer(const ExperimentConfig& cfg,
                                                              const std::vector<Image>& reference) {
  if (cfg.scorer == "asymmetry_proxy") {
    severity::AsymmetryProxyConfig pc;
    pc.patch_metric = severity::parse_patch_metric(cfg.patch_metric);
    return std::make_unique<severity::AsymmetryProxyScorer>(severity::calibrate(pc, reference));
  }
  return severity::ScorerRegistry::instance().create(cfg.scorer, {{"patch_metric", cfg.patch_metric}});
}

metrics::ConvEmbedder desk_embedder(const ExperimentConfig& cfg, int resolution, const fs::path& cache_dir) {
  if (!cfg.embedder_path.empty()) return metrics::ConvEmbedder::load(cfg.embedder_path);
  metrics::ConvEmbedderConfig ec;
  ec.resolution = resolution;
  ec.steps = cfg.embedder_steps;
  const json key = {{"resolution", resolution}, {"steps", ec.steps}, {"n", cfg.embedder_train_size},
                    {"seed", cfg.data_seed}, {"feature_dim", ec.feature_dim}, {"width", ec.width}};
  const auto path = cache_dir / ("embedder-" + config_hash(key) + ".fgarch");
  if (fs::exists(path)) return metrics::ConvEmbedder::load(path);
  SyntheticFaceSpec spec;
  spec.resolution = resolution;
  spec.cleft_fraction = 0.5;
  std::vector<Image> images;
  std::vector<std::vector<double>> targets;
  for (auto& f : synthesize_faces(spec, cfg.embedder_train_size, cfg.data_seed + 2)) {
    images.push_back(to_signed(f.image));
    targets.push_back(f.params.attributes());
  }
  auto e = metrics::ConvEmbedder::train(images, targets, ec, cfg.data_seed + 2);
  fs::create_directories(cache_dir);
  const auto tmp = fs::path(path.string() + ".tmp");
  e.save(tmp);
  fs::rename(tmp, path);
  return e;
}

Assets prepare_assets(const ExperimentConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir);
  const int res = cfg.model.output_resolution;
  Assets a;
  if (is_synthetic(cfg.dataset)) {
    SyntheticFaceSpec spec;
    spec.resolution = res;
    spec.cleft_fraction = cfg.target_cleft_fraction;
    a.target = synthetic_training_set(spec, cfg.target_size, cfg.data_seed);
  } else {
    a.target = load_image_dir(cfg.dataset, res);
  }
  std::size_t needed = 0;
  for (const auto s : cfg.sample_sizes) needed = std::max(needed, s);
  if (a.target.size() < std::max<std::size_t>(needed, 2)) throw InvalidArgument("target set smaller than the largest sample size");

  const bool any_transfer = std::find(cfg.transfer.begin(), cfg.transfer.end(), true) != cfg.transfer.end();
  if (any_transfer) {
    if (is_synthetic(cfg.source)) {
      SyntheticFaceSpec spec;
      spec.resolution = res;
      a.source = synthetic_training_set(spec, cfg.source_size, cfg.data_seed + 1);
    } else {
      a.source = load_image_dir(cfg.source, res);
    }
  }

  a.embedder = std::make_unique<metrics::ConvEmbedder>(desk_embedder(cfg, res, out_dir));
  a.real_moments = metrics::compute_moments(a.embedder->embed_all(a.target));
  a.scorer = make_severity_scorer(cfg, a.target);
  return a;
}

gan::Checkpoint source_checkpoint(const ExperimentConfig& cfg, const gan::ModelConfig& model, const Assets& assets,
                                  const fs::path& out_dir) {
  const json key = {{"model", model},
                    {"training", cfg.train},
                    {"kimg", cfg.pretrain_kimg},
                    {"seed", cfg.pretrain_seed},
                    {"regimen", augment::to_string(cfg.pretrain_regimen)},
                    {"ada_target", cfg.ada_target},
                    {"source", cfg.source},
                    {"source_size", cfg.source_size},
                    {"data_seed", cfg.data_seed}};
  const auto path = out_dir / ("source-" + config_hash(key) + ".ckpt");
  if (fs::exists(path)) return gan::load_checkpoint(path);
  if (assets.source.empty()) throw InvalidArgument("no source dataset loaded");
  gan::Trainer trainer(model, cfg.train, augment::AugmentationConfig::for_regimen(cfg.pretrain_regimen), cfg.pretrain_seed);
  trainer.mutable_state().ada.target_rt = cfg.ada_target;
  gan::train_until(trainer, to_tensor(assets.source),
                   static_cast<std::uint64_t>(std::llround(cfg.pretrain_kimg * 1000.0)));
  auto ckpt = trainer.checkpoint();
  save_checkpoint_atomic(ckpt, path);
  return ckpt;
}

double evaluate_fid(gan::Generator& generator, const Assets& assets, std::size_t n, std::uint64_t seed) {
  const auto batch = gan::generate_batch(generator, n, seed);
  return metrics::fid(metrics::compute_moments(assets.embedder->embed_all(batch.images)), assets.real_moments);
}

std::string cell_hash(const ExperimentConfig& cfg, const CellKey& key) {
  json j = cell_relevant_config(cfg);
  j["cell"] = {{"sample_size", key.sample_size},
               {"regimen", augment::to_string(key.regimen)},
               {"transfer", key.transfer},
               {"seed", key.seed},
               {"variant", key.variant}};
  return config_hash(j);
}

CellResult run_cell(const ExperimentConfig& cfg, const CellKey& key, const Assets& assets, const fs::path& out_dir,
                    MetricCheckpoint metric_ckpt) {
  CellResult r;
  r.key = key;
  json hashed = {{"cell", cell_hash(cfg, key)}, {"metrics_at", metric_ckpt == MetricCheckpoint::Final ? "final" : "best"}};
  r.hash = config_hash(hashed);
  const auto dir = out_dir / "cells" / r.hash;
  const auto result_path = dir / "result.json";
  if (fs::exists(result_path)) {
    std::ifstream in(result_path);
    const auto cached = result_from_json(json::parse(in));
    if (cached.hash == r.hash) return cached;
  }

  try {
    fs::create_directories(dir);
    const auto model = key.variant.empty() ? cfg.model : apply_overrides(cfg.model, key.variant);
    if (key.sample_size < 1 || key.sample_size > assets.target.size()) throw InvalidArgument("sample size out of range");
    const std::vector<Image> subset(assets.target.begin(), assets.target.begin() + static_cast<std::ptrdiff_t>(key.sample_size));
    const auto aug = augment::AugmentationConfig::for_regimen(key.regimen);
    auto trainer = key.transfer ? gan::Trainer::from_checkpoint(source_checkpoint(cfg, model, assets, out_dir), cfg.train,
                                                                aug, key.seed, /*fine_tune=*/true)
                                : gan::Trainer(model, cfg.train, aug, key.seed);
    trainer.mutable_state().ada.target_rt = cfg.ada_target;

    const std::size_t fid_n = cfg.fid_n ? cfg.fid_n : assets.target.size();
    const std::uint64_t eval_seed = key.seed * 1000003ULL + 17;
    gan::StepStats last;
    std::optional<gan::Checkpoint> best;
    r.best_fid = std::numeric_limits<double>::infinity();
    gan::LoopCallbacks cb;
    cb.on_step = [&](gan::Trainer&, const gan::StepStats& s) { last = s; };
    cb.on_eval = [&](gan::Trainer& t, std::uint64_t tick) {
      const double f = evaluate_fid(t.generator(), assets, fid_n, eval_seed);
      r.log.push_back({tick, t.state().images_seen, last.d_loss, last.g_loss, last.ada_p, f});
      if (f < r.best_fid) {
        r.best_fid = f;
        r.best_tick = tick;
        best = t.checkpoint();
      }
    };
    gan::train_until(trainer, to_tensor(subset), static_cast<std::uint64_t>(std::llround(cfg.budget_kimg * 1000.0)), cb);
    if (!best) throw Error("run finished without an evaluation point");

    const auto final_ckpt = trainer.checkpoint();
    save_checkpoint_atomic(final_ckpt, dir / "final.ckpt");
    save_checkpoint_atomic(*best, dir / "best.ckpt");

    const gan::GeneratorSampler sampler(metric_ckpt == MetricCheckpoint::Final ? final_ckpt : *best);
    const metrics::EmbeddingSquaredL2 dist(*assets.embedder);
    const auto p = metrics::ppl(sampler, dist, cfg.ppl, eval_seed);
    r.ppl = p.mean;
    r.ppl_stderr = p.std_error;
    const auto d = metrics::dish(assets.target, sampler, *assets.scorer, cfg.dish, eval_seed);
    r.dish = d.value;

    write_text(dir / "training_log.csv", training_log_csv(r, cfg.train.tick_images));
    write_text(dir / "severity_histogram.csv", histogram_csv(d));
    std::vector<std::pair<std::string, double>> scores;
    for (std::size_t i = 0; i < d.real_scores.size(); ++i) scores.emplace_back("real_" + std::to_string(i), d.real_scores[i]);
    for (std::size_t i = 0; i < d.fake_scores.size(); ++i) scores.emplace_back("generated_" + std::to_string(i), d.fake_scores[i]);
    severity::write_scores_csv(scores, dir / "severity_scores.csv");
    write_text(result_path, result_json(r).dump(2) + "\n");
  } catch (const std::exception& e) {
    r.status = std::string("failed: ") + e.what();
    r.best_fid = r.ppl = r.ppl_stderr = r.dish = std::nan("");
  }
  return r;
}

std::string GridReport::to_csv() const {
  std::string s = "sample_size,regimen,transfer,seed,best_fid,best_tick,eval_points,ppl,ppl_stderr,dish,status,cell\n";
  for (const auto& r : rows) {
    std::string status = r.status;
    for (auto& ch : status) {
      if (ch == ',' || ch == '\n') ch = ' ';
    }
    s += std::to_string(r.key.sample_size) + "," + augment::to_string(r.key.regimen) + "," + (r.key.transfer ? "1" : "0") +
         "," + std::to_string(r.key.seed) + "," + format_real(r.best_fid) + "," + std::to_string(r.best_tick) + "," +
         std::to_string(r.log.size()) + "," + format_real(r.ppl) + "," + format_real(r.ppl_stderr) + "," +
         format_real(r.dish) + "," + status + "," + r.hash + "\n";
  }
  return s;
}

GridReport run_grid(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const Assets assets = prepare_assets(cfg, out_dir);
  GridReport report;
  for (const auto size : cfg.sample_sizes) {
    for (const auto regimen : cfg.regimens) {
      for (const bool transfer : cfg.transfer) {
        for (const auto seed : cfg.seeds) {
          report.rows.push_back(run_cell(cfg, {size, regimen, transfer, seed, ""}, assets, out_dir, MetricCheckpoint::Final));
        }
      }
    }
  }
  write_text(out_dir / "grid_report.csv", report.to_csv());
  return report;
}

std::vector<VariantRow> compare_variants(const ExperimentConfig& cfg, const fs::path& out_dir) {
  if (cfg.variants.size() < 2) throw InvalidArgument("compare needs at least two variants");
  for (const auto& v : cfg.variants) apply_overrides(cfg.model, v);
  const Assets assets = prepare_assets(cfg, out_dir);
  std::vector<VariantRow> rows;
  for (const auto& variant : cfg.variants) {
    for (const auto seed : cfg.seeds) {
      const CellKey key{cfg.sample_sizes.front(), cfg.regimens.front(), cfg.transfer.front(), seed, variant};
      const auto r = run_cell(cfg, key, assets, out_dir, MetricCheckpoint::BestFid);
      rows.push_back({variant, seed, r.status, r.best_fid, r.ppl, r.dish});
    }
  }
  write_text(out_dir / "compare_report.csv", variants_csv(rows));
  return rows;
}

std::string variants_csv(const std::vector<VariantRow>& rows) {
  std::string s = "variant,seed,FID,PPL,DISH,status\n";
  for (const auto& r : rows) {
    std::string variant = r.variant;
    for (auto& ch : variant) {
      if (ch == ',') ch = ' ';
    }
    s += variant + "," + std::to_string(r.seed) + "," + format_real(r.fid) + "," + format_real(r.ppl) + "," +
         format_real(r.dish) + "," + r.status + "\n";
  }
  return s;
}

}  // namespace facegen::harness
