// Command-line front end: data preparation, training, generation,
// evaluation and experiment orchestration.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "facegen/errors.hpp"
#include "facegen/gan/generate.hpp"
#include "facegen/gan/trainer.hpp"
#include "facegen/harness/config.hpp"
#include "facegen/harness/experiment.hpp"
#include "facegen/harness/plot.hpp"
#include "facegen/harness/synthetic.hpp"
#include "facegen/metrics/fid.hpp"
#include "facegen/metrics/report.hpp"
#include "facegen/prep/dataset.hpp"
#include "facegen/tensor_image.hpp"

namespace fs = std::filesystem;
using namespace facegen;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
};

harness::ExperimentConfig load_config(const Globals& g) {
  return g.config.empty() ? harness::ExperimentConfig{} : harness::load_experiment_config(g.config);
}

fs::path require_out(const Globals& g) {
  if (g.out.empty()) throw InvalidArgument("--out is required");
  return g.out;
}

std::vector<Image> load_dataset(const std::string& data, const harness::ExperimentConfig& cfg, bool source) {
  const int res = cfg.model.output_resolution;
  if (data == "synthetic") {
    harness::SyntheticFaceSpec spec;
    spec.resolution = res;
    spec.cleft_fraction = source ? 0.0 : cfg.target_cleft_fraction;
    return harness::synthetic_training_set(spec, source ? cfg.source_size : cfg.target_size,
                                           source ? cfg.data_seed + 1 : cfg.data_seed);
  }
  return harness::load_image_dir(data, res);
}

void print_progress(const gan::Trainer& t, std::uint64_t tick) {
  std::printf("tick %llu  kimg %.1f  ada_p %.3f\n", static_cast<unsigned long long>(tick),
              static_cast<double>(t.state().images_seen) / 1000.0, t.state().ada.p);
  std::fflush(stdout);
}

int run_prep(const std::string& manifest, const Globals& g, int resolution, double face_area, double interocular,
             double blur) {
  prep::PrepConfig pc;
  pc.output_resolution = resolution;
  pc.face_area_frac = face_area;
  pc.interocular_target_frac = interocular;
  pc.background_blur_sigma = blur >= 0.0 ? blur : 8.0 * resolution / 1024.0;
  const auto report = prep::prep_dataset(manifest, require_out(g), pc);
  std::printf("prep: %zu written, %zu skipped\n", report.written(), report.skipped());
  for (const auto& r : report.records) {
    if (!r.ok) std::printf("  skipped %s: %s\n", r.source_id.c_str(), r.reason.c_str());
  }
  return 0;
}

int run_synth(const Globals& g, std::size_t n, double cleft_fraction, int resolution, bool posed, int raw_size) {
  harness::SyntheticFaceSpec spec;
  spec.resolution = resolution;
  spec.cleft_fraction = cleft_fraction;
  spec.posed = posed;
  spec.raw_size = raw_size;
  const auto s = harness::make_synthetic_dataset(spec, n, g.seed, require_out(g));
  std::printf("synth-data: %zu images (%zu notched), manifest %s\n", s.written, s.notched, s.manifest.string().c_str());
  return 0;
}

int run_pretrain(const Globals& g, const std::string& data, std::optional<double> kimg) {
  const auto cfg = load_config(g);
  const auto out = require_out(g);
  fs::create_directories(out);
  const auto images = load_dataset(data, cfg, /*source=*/true);
  gan::LoopCallbacks cb;
  cb.on_eval = print_progress;
  const auto ckpt = gan::pretrain(cfg.model, cfg.train, augment::AugmentationConfig::for_regimen(cfg.pretrain_regimen),
                                  to_tensor(images), kimg.value_or(cfg.pretrain_kimg), g.seed, out / "snapshots", cb);
  gan::save_checkpoint(ckpt, out / "pretrained.ckpt");
  std::printf("pretrain: %llu images, checkpoint %s\n", static_cast<unsigned long long>(ckpt.state.images_seen),
              (out / "pretrained.ckpt").string().c_str());
  return 0;
}

int run_finetune(const Globals& g, const std::string& source, const std::string& data, std::optional<double> kimg,
                 const std::string& regimen) {
  const auto cfg = load_config(g);
  const auto out = require_out(g);
  fs::create_directories(out);
  const auto src = gan::load_checkpoint(source);
  harness::ExperimentConfig data_cfg = cfg;
  data_cfg.model = src.model;
  const auto images = load_dataset(data, data_cfg, /*source=*/false);
  gan::LoopCallbacks cb;
  cb.on_eval = print_progress;
  const auto ckpt = gan::finetune(src, cfg.train, augment::AugmentationConfig::for_regimen(augment::parse_regimen(regimen)),
                                  to_tensor(images), kimg.value_or(cfg.budget_kimg), g.seed,
                                  g.config.empty() ? nullptr : &cfg.model, out / "snapshots", cb);
  gan::save_checkpoint(ckpt, out / "finetuned.ckpt");
  std::printf("finetune: %llu images, checkpoint %s\n", static_cast<unsigned long long>(ckpt.state.images_seen),
              (out / "finetuned.ckpt").string().c_str());
  return 0;
}

int run_generate(const Globals& g, const std::string& ckpt_path, std::size_t n, bool grid) {
  const auto out = require_out(g);
  fs::create_directories(out);
  auto generator = gan::build_generator(gan::load_checkpoint(ckpt_path));
  const auto batch = gan::generate_batch(generator, n, g.seed);
  char name[32];
  std::vector<Image> unit;
  for (std::size_t i = 0; i < batch.images.size(); ++i) {
    unit.push_back(to_unit(batch.images[i]));
    std::snprintf(name, sizeof name, "sample_%04zu.png", i);
    save_png(unit.back(), out / name);
  }
  gan::write_latent_log(batch, out / "latents.csv");
  if (grid) {
    const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    while (unit.size() < static_cast<std::size_t>(side * side)) unit.emplace_back(unit.front().height, unit.front().width, 3, 1.0f);
    save_png(tile_images(unit, side), out / "grid.png");
  }
  std::printf("generate: %zu images in %s\n", n, out.string().c_str());
  return 0;
}

int run_eval(const Globals& g, const std::string& metric, const std::string& ckpt_path, const std::string& real_dir,
             std::optional<std::size_t> n, std::size_t bins, const std::string& report) {
  auto cfg = load_config(g);
  const auto ckpt = gan::load_checkpoint(ckpt_path);
  cfg.model = ckpt.model;
  const auto reals = harness::load_image_dir(real_dir, ckpt.model.output_resolution);
  if (reals.size() < 2) throw InvalidArgument("real set needs at least two images");
  const gan::GeneratorSampler sampler(ckpt);
  const auto cache = g.out.empty() ? fs::path(".") : fs::path(g.out);
  metrics::MetricRow row;
  row.metric = metric;
  row.seed = g.seed;
  row.config_hash = harness::config_hash(harness::to_json(cfg));
  if (metric == "fid") {
    const auto embedder = harness::desk_embedder(cfg, ckpt.model.output_resolution, cache);
    row.n = n.value_or(reals.size());
    const auto fakes = sampler.sample(row.n, g.seed);
    row.value = metrics::fid(metrics::compute_moments(embedder.embed_all(fakes)),
                             metrics::compute_moments(embedder.embed_all(reals)));
  } else if (metric == "ppl") {
    const auto embedder = harness::desk_embedder(cfg, ckpt.model.output_resolution, cache);
    auto pc = cfg.ppl;
    if (n) pc.n_paths = *n;
    const auto p = metrics::ppl(sampler, metrics::EmbeddingSquaredL2(embedder), pc, g.seed);
    row.value = p.mean;
    row.std_error = p.std_error;
    row.n = p.n;
  } else if (metric == "dish") {
    auto dc = cfg.dish;
    dc.n = n.value_or(dc.n);
    dc.bins = bins;
    const auto scorer = harness::make_severity_scorer(cfg, reals);
    const auto d = metrics::dish(reals, sampler, *scorer, dc, g.seed);
    row.value = d.value;
    row.n = d.fake_scores.size();
    if (d.fake_failures + d.real_failures > 0) {
      std::printf("dish: %zu generated and %zu real images could not be scored\n", d.fake_failures, d.real_failures);
    }
  } else {
    throw InvalidArgument("unknown metric: " + metric);
  }
  std::cout << metrics::metric_csv_header() << "\n" << metrics::to_csv(row) << "\n";
  if (!report.empty()) metrics::append_metric_rows(report, {row});
  return 0;
}

int run_grid(const Globals& g) {
  if (g.config.empty()) throw InvalidArgument("--config is required");
  const auto report = harness::run_grid(load_config(g), require_out(g));
  std::cout << report.to_csv();
  for (const auto& r : report.rows) {
    if (!r.ok()) return 1;
  }
  return 0;
}

int run_compare(const Globals& g) {
  if (g.config.empty()) throw InvalidArgument("--config is required");
  const auto rows = harness::compare_variants(load_config(g), require_out(g));
  std::cout << harness::variants_csv(rows);
  for (const auto& r : rows) {
    if (r.status != "ok") return 1;
  }
  return 0;
}

int run_plot(const Globals& g, const std::string& run_dir) {
  const fs::path dir = run_dir.empty() ? require_out(g) : fs::path(run_dir);
  const auto summary = harness::plot_outputs(dir, 5, g.seed);
  for (const auto& p : summary.plots) std::printf("%s: %s (%zu)\n", p.kind.c_str(), p.file.string().c_str(), p.elements);
  for (const auto& s : summary.skipped) std::printf("skipped %s\n", s.c_str());
  if (summary.plots.empty()) {
    std::fprintf(stderr, "plot: no run logs found under %s\n", dir.string().c_str());
    return 1;
  }
  return summary.skipped.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  CLI::App app{"facegen: small-data face GAN pipeline"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--out", g.out, "output directory or file");
  app.add_option("--config", g.config, "experiment config file")->check(CLI::ExistingFile);

  int resolution = 1024;
  double face_area = 0.60, interocular = 100.0 / 1024.0, blur = -1.0;
  std::string manifest;
  auto* prep_cmd = app.add_subcommand("prep", "align and blur a manifest of photographs");
  prep_cmd->add_option("--manifest", manifest, "tab-separated <image> <landmarks> list")->required();
  prep_cmd->add_option("--resolution", resolution, "output side in pixels")->capture_default_str();
  prep_cmd->add_option("--face-area", face_area, "face mask area fraction")->capture_default_str();
  prep_cmd->add_option("--interocular-frac", interocular, "eye distance as a fraction of the side")->capture_default_str();
  prep_cmd->add_option("--blur-sigma", blur, "background blur sigma in pixels (default 8 px per 1024)");

  std::size_t synth_n = 514;
  double cleft_fraction = 0.5;
  int synth_res = 128, raw_size = 256;
  bool posed = false;
  auto* synth_cmd = app.add_subcommand("synth-data", "render a synthetic face dataset with landmark sidecars");
  synth_cmd->add_option("-n,--n", synth_n, "number of images")->capture_default_str();
  synth_cmd->add_option("--cleft-fraction", cleft_fraction, "fraction with a lip notch")->capture_default_str();
  synth_cmd->add_option("--resolution", synth_res, "side of aligned renders")->capture_default_str();
  synth_cmd->add_flag("--posed", posed, "random rotation, scale and offset on a larger canvas");
  synth_cmd->add_option("--raw-size", raw_size, "canvas side for posed renders")->capture_default_str();

  std::string data = "synthetic";
  std::optional<double> kimg;
  auto* pretrain_cmd = app.add_subcommand("pretrain", "train on the source domain");
  pretrain_cmd->add_option("--data", data, "directory of aligned PNGs or 'synthetic'")->capture_default_str();
  pretrain_cmd->add_option("--kimg", kimg, "training budget in thousands of images");

  std::string source, regimen = "bgc";
  auto* finetune_cmd = app.add_subcommand("finetune", "transfer a checkpoint to a target set");
  finetune_cmd->add_option("--source", source, "source checkpoint")->required()->check(CLI::ExistingFile);
  finetune_cmd->add_option("--data", data, "directory of aligned PNGs or 'synthetic'")->capture_default_str();
  finetune_cmd->add_option("--kimg", kimg, "training budget in thousands of images");
  finetune_cmd->add_option("--regimen", regimen, "none, c, bg or bgc")->capture_default_str();

  std::string ckpt;
  std::size_t gen_n = 25;
  bool grid = false;
  auto* generate_cmd = app.add_subcommand("generate", "sample images from a checkpoint");
  generate_cmd->add_option("--ckpt", ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  generate_cmd->add_option("-n,--n", gen_n, "number of images")->capture_default_str()->check(CLI::PositiveNumber);
  generate_cmd->add_flag("--grid", grid, "also write a square grid.png");

  std::string metric, real_dir, report;
  std::optional<std::size_t> eval_n;
  std::size_t bins = 20;
  auto* eval_cmd = app.add_subcommand("eval", "compute fid, ppl or dish for a checkpoint");
  eval_cmd->add_option("metric", metric, "fid | ppl | dish")->required()->check(CLI::IsMember({"fid", "ppl", "dish"}));
  eval_cmd->add_option("--ckpt", ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--real", real_dir, "directory of real PNGs")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--n", eval_n, "generated images (fid, dish) or paths (ppl)");
  eval_cmd->add_option("--bins", bins, "dish histogram bins")->capture_default_str();
  eval_cmd->add_option("--report", report, "append the metric row to this CSV");

  auto* grid_cmd = app.add_subcommand("grid", "run the sample-size x regimen x transfer grid");
  auto* compare_cmd = app.add_subcommand("compare", "compare model variants on FID, PPL and DISH");

  std::string run_dir;
  auto* plot_cmd = app.add_subcommand("plot", "render curves, histograms and sample grids of a run");
  plot_cmd->add_option("--run-dir", run_dir, "run directory (defaults to --out)");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();
  CLI11_PARSE(app, argc, argv);

  try {
    if (*prep_cmd) return run_prep(manifest, g, resolution, face_area, interocular, blur);
    if (*synth_cmd) return run_synth(g, synth_n, cleft_fraction, synth_res, posed, raw_size);
    if (*pretrain_cmd) return run_pretrain(g, data, kimg);
    if (*finetune_cmd) return run_finetune(g, source, data, kimg, regimen);
    if (*generate_cmd) return run_generate(g, ckpt, gen_n, grid);
    if (*eval_cmd) return run_eval(g, metric, ckpt, real_dir, eval_n, bins, report);
    if (*grid_cmd) return run_grid(g);
    if (*compare_cmd) return run_compare(g);
    if (*plot_cmd) return run_plot(g, run_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
