#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "facegen/augment/ada.hpp"

namespace facegen::gan {

enum class LatentPrior { Normal, Uniform };

struct ModelConfig {
  int latent_dim = 64;
  int w_dim = 64;
  int mapping_layers = 2;
  int base_resolution = 4;
  int output_resolution = 32;
  // channels(res) = min(channel_max, channel_base / res) unless overridden
  int channel_base = 512;
  int channel_max = 32;
  std::map<int, int> channels_per_resolution;
  // low-pass filtered up/down-sampling (off: bilinear up, box down)
  bool filtered_resampling = false;
  double mapping_lr_multiplier = 0.01;
  int mbstd_group = 2;
  LatentPrior prior = LatentPrior::Normal;
  double truncation_psi = 1.0;

  int channels(int resolution) const;
  /// Throws InvalidArgument on an inconsistent configuration.
  void validate() const;
  /// Every architectural field; two configs with equal keys build
  /// interchangeable networks.
  std::string shape_key() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainConfig {
  int batch_size = 10;
  double g_lr = 2.5e-3;
  double d_lr = 2.5e-3;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double adam_eps = 1e-8;
  double r1_gamma = 1.0;
  // R1 is evaluated every r1_interval D steps and scaled up by the interval
  int r1_interval = 16;
  int tick_images = 1000;
  int snapshot_ticks = 40;
  int eval_every_ticks = 40;
  double w_avg_beta = 0.995;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Progress counters carried in checkpoints.
struct TrainState {
  std::uint64_t images_seen = 0;
  std::uint64_t tick_index = 0;  // images_seen / tick_images
  std::uint64_t steps = 0;
  augment::AdaState ada;
  std::string rng_state;  // serialized std::mt19937_64
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const TrainState& s);
void from_json(const nlohmann::json& j, TrainState& s);

LatentPrior parse_prior(const std::string& s);

}  // namespace facegen::gan
