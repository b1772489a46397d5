#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "facegen/augment/augment.hpp"
#include "facegen/gan/config.hpp"
#include "facegen/metrics/dish.hpp"
#include "facegen/metrics/ppl.hpp"

namespace facegen::harness {

/// Everything a grid or comparison run needs. Loaded from a sectioned
/// key = value file with sections [dataset] [model] [augmentation]
/// [training] [metrics] [severity] [grid] [compare]; unknown keys are errors.
struct ExperimentConfig {
  // [dataset]
  std::string dataset = "synthetic";  // or a directory of aligned PNGs
  std::string source = "synthetic";   // pretraining set, same convention
  std::size_t target_size = 514;
  double target_cleft_fraction = 0.5;
  std::size_t source_size = 5000;
  std::uint64_t data_seed = 1;

  gan::ModelConfig model;
  augment::Regimen pretrain_regimen = augment::Regimen::All;
  gan::TrainConfig train{.eval_every_ticks = 5};
  double pretrain_kimg = 100.0;
  double budget_kimg = 30.0;
  std::uint64_t pretrain_seed = 1;
  double ada_target = 0.6;

  // [metrics]; fid_n = 0 means "size of the real set"
  std::size_t fid_n = 0;
  metrics::PPLConfig ppl{1e-4, 200, metrics::PathSpace::SlerpZ, 50};
  metrics::DishConfig dish;
  std::string embedder_path;  // empty: train the desk embedder
  std::size_t embedder_train_size = 2000;
  int embedder_steps = 800;

  // [severity]
  std::string scorer = "asymmetry_proxy";
  std::string patch_metric = "l2";

  // [grid]
  std::vector<std::size_t> sample_sizes{250, 450, 514};
  std::vector<augment::Regimen> regimens{augment::Regimen::None, augment::Regimen::Color,
                                         augment::Regimen::BlitGeometric, augment::Regimen::All};
  std::vector<bool> transfer{true, false};
  std::vector<std::uint64_t> seeds{1, 2, 3};

  // [compare]: each entry is a comma-separated list of model overrides,
  // e.g. "filtered_resampling=1"; entries are separated by ';'
  std::vector<std::string> variants{"filtered_resampling=0", "filtered_resampling=1"};

  /// Throws InvalidArgument: empty lists, budget shorter than one
  /// evaluation interval, bad sizes.
  void validate() const;
};

ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Canonical JSON of every field (stable key order), the input of all
/// cache keys.
nlohmann::json to_json(const ExperimentConfig& cfg);
std::string config_hash(const nlohmann::json& j);

/// Applies "key=value,key=value" model overrides.
gan::ModelConfig apply_overrides(const gan::ModelConfig& base, const std::string& overrides);

}  // namespace facegen::harness
