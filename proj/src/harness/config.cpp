#include "facegen/harness/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "facegen/errors.hpp"
#include "facegen/metrics/embedder.hpp"

namespace facegen::harness {

namespace pt = boost::property_tree;

namespace {

std::vector<std::string> split(const std::string& s, const char* seps) {
  std::vector<std::string> parts;
  boost::split(parts, s, boost::is_any_of(seps));
  std::vector<std::string> out;
  for (auto& p : parts) {
    boost::trim(p);
    if (!p.empty()) out.push_back(p);
  }
  return out;
}

bool parse_bool(const std::string& v) {
  const auto s = boost::to_lower_copy(v);
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw InvalidArgument("not a boolean: " + v);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  T out{};
  is >> out;
  if (!is || !is.eof()) throw InvalidArgument("bad value for " + key + ": " + v);
  return out;
}

void set_model_key(gan::ModelConfig& m, const std::string& key, const std::string& v) {
  if (key == "latent_dim") m.latent_dim = parse_number<int>(key, v);
  else if (key == "w_dim") m.w_dim = parse_number<int>(key, v);
  else if (key == "mapping_layers") m.mapping_layers = parse_number<int>(key, v);
  else if (key == "base_resolution") m.base_resolution = parse_number<int>(key, v);
  else if (key == "output_resolution") m.output_resolution = parse_number<int>(key, v);
  else if (key == "channel_base") m.channel_base = parse_number<int>(key, v);
  else if (key == "channel_max") m.channel_max = parse_number<int>(key, v);
  else if (key == "filtered_resampling") m.filtered_resampling = parse_bool(v);
  else if (key == "mapping_lr_multiplier") m.mapping_lr_multiplier = parse_number<double>(key, v);
  else if (key == "mbstd_group") m.mbstd_group = parse_number<int>(key, v);
  else if (key == "prior") m.prior = gan::parse_prior(v);
  else if (key == "truncation_psi") m.truncation_psi = parse_number<double>(key, v);
  else throw InvalidArgument("unknown [model] key: " + key);
}

using Handler = std::function<void(ExperimentConfig&, const std::string&)>;

std::map<std::string, std::map<std::string, Handler>> handlers() {
  auto u64 = [](std::uint64_t ExperimentConfig::*f, const char* k) {
    return [f, k](ExperimentConfig& c, const std::string& v) { c.*f = parse_number<std::uint64_t>(k, v); };
  };
  auto size = [](std::size_t ExperimentConfig::*f, const char* k) {
    return [f, k](ExperimentConfig& c, const std::string& v) { c.*f = parse_number<std::size_t>(k, v); };
  };
  auto real = [](double ExperimentConfig::*f, const char* k) {
    return [f, k](ExperimentConfig& c, const std::string& v) { c.*f = parse_number<double>(k, v); };
  };
  std::map<std::string, std::map<std::string, Handler>> h;
  h["dataset"] = {
      {"dataset", [](ExperimentConfig& c, const std::string& v) { c.dataset = v; }},
      {"source", [](ExperimentConfig& c, const std::string& v) { c.source = v; }},
      {"target_size", size(&ExperimentConfig::target_size, "target_size")},
      {"target_cleft_fraction", real(&ExperimentConfig::target_cleft_fraction, "target_cleft_fraction")},
      {"source_size", size(&ExperimentConfig::source_size, "source_size")},
      {"seed", u64(&ExperimentConfig::data_seed, "seed")},
  };
  h["augmentation"] = {
      {"pretrain_regimen",
       [](ExperimentConfig& c, const std::string& v) { c.pretrain_regimen = augment::parse_regimen(v); }},
      {"ada_target", real(&ExperimentConfig::ada_target, "ada_target")},
  };
  auto train_int = [](int gan::TrainConfig::*f, const char* k) {
    return [f, k](ExperimentConfig& c, const std::string& v) { c.train.*f = parse_number<int>(k, v); };
  };
  auto train_real = [](double gan::TrainConfig::*f, const char* k) {
    return [f, k](ExperimentConfig& c, const std::string& v) { c.train.*f = parse_number<double>(k, v); };
  };
  h["training"] = {
      {"batch_size", train_int(&gan::TrainConfig::batch_size, "batch_size")},
      {"g_lr", train_real(&gan::TrainConfig::g_lr, "g_lr")},
      {"d_lr", train_real(&gan::TrainConfig::d_lr, "d_lr")},
      {"r1_gamma", train_real(&gan::TrainConfig::r1_gamma, "r1_gamma")},
      {"r1_interval", train_int(&gan::TrainConfig::r1_interval, "r1_interval")},
      {"tick_images", train_int(&gan::TrainConfig::tick_images, "tick_images")},
      {"eval_every_ticks", train_int(&gan::TrainConfig::eval_every_ticks, "eval_every_ticks")},
      {"snapshot_ticks", train_int(&gan::TrainConfig::snapshot_ticks, "snapshot_ticks")},
      {"pretrain_kimg", real(&ExperimentConfig::pretrain_kimg, "pretrain_kimg")},
      {"budget_kimg", real(&ExperimentConfig::budget_kimg, "budget_kimg")},
      {"pretrain_seed", u64(&ExperimentConfig::pretrain_seed, "pretrain_seed")},
  };
  h["metrics"] = {
      {"fid_n", size(&ExperimentConfig::fid_n, "fid_n")},
      {"ppl_paths", [](ExperimentConfig& c, const std::string& v) { c.ppl.n_paths = parse_number<std::size_t>("ppl_paths", v); }},
      {"ppl_epsilon", [](ExperimentConfig& c, const std::string& v) { c.ppl.epsilon = parse_number<double>("ppl_epsilon", v); }},
      {"ppl_space", [](ExperimentConfig& c, const std::string& v) { c.ppl.interpolation = metrics::parse_path_space(v); }},
      {"dish_n", [](ExperimentConfig& c, const std::string& v) { c.dish.n = parse_number<std::size_t>("dish_n", v); }},
      {"dish_bins", [](ExperimentConfig& c, const std::string& v) { c.dish.bins = parse_number<std::size_t>("dish_bins", v); }},
      {"dish_smoothing", [](ExperimentConfig& c, const std::string& v) { c.dish.smoothing = parse_number<double>("dish_smoothing", v); }},
      {"embedder", [](ExperimentConfig& c, const std::string& v) { c.embedder_path = v; }},
      {"embedder_train_size", size(&ExperimentConfig::embedder_train_size, "embedder_train_size")},
      {"embedder_steps", [](ExperimentConfig& c, const std::string& v) { c.embedder_steps = parse_number<int>("embedder_steps", v); }},
  };
  h["severity"] = {
      {"scorer", [](ExperimentConfig& c, const std::string& v) { c.scorer = v; }},
      {"patch_metric", [](ExperimentConfig& c, const std::string& v) { c.patch_metric = v; }},
  };
  h["grid"] = {
      {"sample_sizes",
       [](ExperimentConfig& c, const std::string& v) {
         c.sample_sizes.clear();
         for (const auto& s : split(v, ", ")) c.sample_sizes.push_back(parse_number<std::size_t>("sample_sizes", s));
       }},
      {"regimens",
       [](ExperimentConfig& c, const std::string& v) {
         c.regimens.clear();
         for (const auto& s : split(v, ", ")) c.regimens.push_back(augment::parse_regimen(s));
       }},
      {"transfer",
       [](ExperimentConfig& c, const std::string& v) {
         c.transfer.clear();
         for (const auto& s : split(v, ", ")) c.transfer.push_back(parse_bool(s));
       }},
      {"seeds",
       [](ExperimentConfig& c, const std::string& v) {
         c.seeds.clear();
         for (const auto& s : split(v, ", ")) c.seeds.push_back(parse_number<std::uint64_t>("seeds", s));
       }},
  };
  h["compare"] = {
      {"variants", [](ExperimentConfig& c, const std::string& v) { c.variants = split(v, ";"); }},
  };
  return h;
}

}  // namespace

void ExperimentConfig::validate() const {
  model.validate();
  if (sample_sizes.empty() || regimens.empty() || transfer.empty() || seeds.empty()) {
    throw InvalidArgument("grid lists must be nonempty");
  }
  for (const auto s : sample_sizes) {
    if (s < 1 || s > target_size) throw InvalidArgument("sample sizes must lie in [1, target_size]");
  }
  if (train.eval_every_ticks < 1 || train.tick_images < 1) throw InvalidArgument("evaluation cadence must be positive");
  if (budget_kimg * 1000.0 < static_cast<double>(train.eval_every_ticks) * train.tick_images) {
    throw InvalidArgument("budget is shorter than one evaluation interval");
  }
  if (pretrain_kimg < 0.0) throw InvalidArgument("negative pretrain budget");
  if (source_size < static_cast<std::size_t>(train.batch_size)) throw InvalidArgument("source set smaller than one batch");
  if (!(target_cleft_fraction >= 0.0 && target_cleft_fraction <= 1.0)) {
    throw InvalidArgument("target_cleft_fraction must lie in [0, 1]");
  }
  if (dish.n < dish.bins || dish.bins < 1) throw InvalidArgument("dish needs n >= bins >= 1");
  if (ppl.n_paths < 2) throw InvalidArgument("ppl needs at least two paths");
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  ExperimentConfig cfg;
  const auto table = handlers();
  for (const auto& [section, entries] : tree) {
    if (entries.empty() && !entries.data().empty()) throw InvalidArgument("config key outside a section: " + section);
    if (section == "model") {
      for (const auto& [key, node] : entries) set_model_key(cfg.model, key, node.data());
      continue;
    }
    const auto sec = table.find(section);
    if (sec == table.end()) throw InvalidArgument("unknown config section [" + section + "]");
    for (const auto& [key, node] : entries) {
      const auto h = sec->second.find(key);
      if (h == sec->second.end()) throw InvalidArgument("unknown [" + section + "] key: " + key);
      h->second(cfg, node.data());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["dataset"] = {{"dataset", c.dataset},
                  {"source", c.source},
                  {"target_size", c.target_size},
                  {"target_cleft_fraction", c.target_cleft_fraction},
                  {"source_size", c.source_size},
                  {"seed", c.data_seed}};
  j["model"] = c.model;
  j["augmentation"] = {{"pretrain_regimen", augment::to_string(c.pretrain_regimen)}, {"ada_target", c.ada_target}};
  j["training"] = c.train;
  j["training"]["pretrain_kimg"] = c.pretrain_kimg;
  j["training"]["budget_kimg"] = c.budget_kimg;
  j["training"]["pretrain_seed"] = c.pretrain_seed;
  j["metrics"] = {{"fid_n", c.fid_n},
                  {"ppl_paths", c.ppl.n_paths},
                  {"ppl_epsilon", c.ppl.epsilon},
                  {"ppl_space", c.ppl.interpolation == metrics::PathSpace::SlerpZ ? "slerp_z" : "lerp_w"},
                  {"dish_n", c.dish.n},
                  {"dish_bins", c.dish.bins},
                  {"dish_smoothing", c.dish.smoothing},
                  {"embedder", c.embedder_path},
                  {"embedder_train_size", c.embedder_train_size},
                  {"embedder_steps", c.embedder_steps}};
  j["severity"] = {{"scorer", c.scorer}, {"patch_metric", c.patch_metric}};
  nlohmann::json regimens = nlohmann::json::array();
  for (const auto r : c.regimens) regimens.push_back(augment::to_string(r));
  j["grid"] = {{"sample_sizes", c.sample_sizes}, {"regimens", regimens}, {"transfer", c.transfer}, {"seeds", c.seeds}};
  j["compare"] = {{"variants", c.variants}};
  return j;
}

std::string config_hash(const nlohmann::json& j) { return metrics::hex64(metrics::fnv1a64(j.dump())); }

gan::ModelConfig apply_overrides(const gan::ModelConfig& base, const std::string& overrides) {
  gan::ModelConfig m = base;
  for (const auto& item : split(overrides, ",")) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw InvalidArgument("override must be key=value: " + item);
    set_model_key(m, boost::trim_copy(item.substr(0, eq)), boost::trim_copy(item.substr(eq + 1)));
  }
  m.validate();
  return m;
}

}  // namespace facegen::harness
