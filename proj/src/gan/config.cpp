#include "facegen/gan/config.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "facegen/errors.hpp"

namespace facegen::gan {

int ModelConfig::channels(int resolution) const {
  if (auto it = channels_per_resolution.find(resolution); it != channels_per_resolution.end()) return it->second;
  return std::max(1, std::min(channel_max, channel_base / resolution));
}

void ModelConfig::validate() const {
  auto pow2 = [](int v) { return v > 0 && (v & (v - 1)) == 0; };
  if (latent_dim < 2) throw InvalidArgument("latent_dim must be at least 2");
  if (w_dim < 1 || mapping_layers < 1) throw InvalidArgument("w_dim and mapping_layers must be positive");
  if (!pow2(base_resolution) || !pow2(output_resolution) || output_resolution < base_resolution) {
    throw InvalidArgument("output_resolution must be a power of two >= base_resolution");
  }
  if (mbstd_group < 1) throw InvalidArgument("mbstd_group must be positive");
  if (!(mapping_lr_multiplier > 0.0)) throw InvalidArgument("mapping_lr_multiplier must be positive");
  if (!std::isfinite(truncation_psi)) throw InvalidArgument("truncation_psi must be finite");
}

std::string ModelConfig::shape_key() const {
  std::ostringstream os;
  os << latent_dim << '/' << w_dim << '/' << mapping_layers << '/' << base_resolution << '/' << output_resolution
     << '/' << filtered_resampling << '/' << mbstd_group << '/' << mapping_lr_multiplier;
  for (int r = base_resolution; r <= output_resolution; r *= 2) os << '/' << channels(r);
  return os.str();
}

LatentPrior parse_prior(const std::string& s) {
  if (s == "normal") return LatentPrior::Normal;
  if (s == "uniform") return LatentPrior::Uniform;
  throw InvalidArgument("unknown latent prior: " + s);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  nlohmann::json ch = nlohmann::json::object();
  for (const auto& [r, n] : c.channels_per_resolution) ch[std::to_string(r)] = n;
  j = {{"latent_dim", c.latent_dim},
       {"w_dim", c.w_dim},
       {"mapping_layers", c.mapping_layers},
       {"base_resolution", c.base_resolution},
       {"output_resolution", c.output_resolution},
       {"channel_base", c.channel_base},
       {"channel_max", c.channel_max},
       {"channels_per_resolution", ch},
       {"filtered_resampling", c.filtered_resampling},
       {"mapping_lr_multiplier", c.mapping_lr_multiplier},
       {"mbstd_group", c.mbstd_group},
       {"prior", c.prior == LatentPrior::Normal ? "normal" : "uniform"},
       {"truncation_psi", c.truncation_psi}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.latent_dim = j.at("latent_dim").get<int>();
  c.w_dim = j.at("w_dim").get<int>();
  c.mapping_layers = j.at("mapping_layers").get<int>();
  c.base_resolution = j.at("base_resolution").get<int>();
  c.output_resolution = j.at("output_resolution").get<int>();
  c.channel_base = j.at("channel_base").get<int>();
  c.channel_max = j.at("channel_max").get<int>();
  c.channels_per_resolution.clear();
  for (const auto& [k, v] : j.at("channels_per_resolution").items()) c.channels_per_resolution[std::stoi(k)] = v.get<int>();
  c.filtered_resampling = j.at("filtered_resampling").get<bool>();
  c.mapping_lr_multiplier = j.at("mapping_lr_multiplier").get<double>();
  c.mbstd_group = j.at("mbstd_group").get<int>();
  c.prior = parse_prior(j.at("prior").get<std::string>());
  c.truncation_psi = j.at("truncation_psi").get<double>();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"batch_size", c.batch_size},   {"g_lr", c.g_lr},
       {"d_lr", c.d_lr},               {"beta1", c.beta1},
       {"beta2", c.beta2},             {"adam_eps", c.adam_eps},
       {"r1_gamma", c.r1_gamma},       {"r1_interval", c.r1_interval},
       {"tick_images", c.tick_images},
       {"snapshot_ticks", c.snapshot_ticks}, {"eval_every_ticks", c.eval_every_ticks},
       {"w_avg_beta", c.w_avg_beta}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.batch_size = j.at("batch_size").get<int>();
  c.g_lr = j.at("g_lr").get<double>();
  c.d_lr = j.at("d_lr").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  c.r1_gamma = j.at("r1_gamma").get<double>();
  c.r1_interval = j.at("r1_interval").get<int>();
  c.tick_images = j.at("tick_images").get<int>();
  c.snapshot_ticks = j.at("snapshot_ticks").get<int>();
  c.eval_every_ticks = j.at("eval_every_ticks").get<int>();
  c.w_avg_beta = j.at("w_avg_beta").get<double>();
}

void to_json(nlohmann::json& j, const TrainState& s) {
  j = {{"images_seen", s.images_seen},
       {"tick_index", s.tick_index},
       {"steps", s.steps},
       {"ada",
        {{"p", s.ada.p},
         {"target_rt", s.ada.target_rt},
         {"adjustment_per_image", s.ada.adjustment_per_image},
         {"ema_images", s.ada.ema_images},
         {"rt_estimate", s.ada.rt_estimate}}},
       {"rng_state", s.rng_state}};
}

void from_json(const nlohmann::json& j, TrainState& s) {
  s.images_seen = j.at("images_seen").get<std::uint64_t>();
  s.tick_index = j.at("tick_index").get<std::uint64_t>();
  s.steps = j.at("steps").get<std::uint64_t>();
  const auto& a = j.at("ada");
  s.ada.p = a.at("p").get<double>();
  s.ada.target_rt = a.at("target_rt").get<double>();
  s.ada.adjustment_per_image = a.at("adjustment_per_image").get<double>();
  s.ada.ema_images = a.at("ema_images").get<double>();
  s.ada.rt_estimate = a.at("rt_estimate").get<double>();
  s.rng_state = j.at("rng_state").get<std::string>();
}

}  // namespace facegen::gan
