#include "facegen/gan/trainer.hpp"

#include <cmath>
#include <sstream>

#include "facegen/errors.hpp"

namespace facegen::gan {

namespace F = torch::nn::functional;

torch::Tensor sample_latents(int64_t n, int dim, LatentPrior prior, std::mt19937_64& rng) {
  std::vector<float> values(static_cast<std::size_t>(n) * dim);
  if (prior == LatentPrior::Normal) {
    std::normal_distribution<double> dist;
    for (auto& v : values) v = static_cast<float>(dist(rng));
  } else {
    const double a = std::sqrt(3.0);
    std::uniform_real_distribution<double> dist(-a, a);
    for (auto& v : values) v = static_cast<float>(dist(rng));
  }
  return torch::tensor(values).view({n, dim});
}

Adam::Adam(NamedTensors params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), t_(torch::zeros({1}, torch::kFloat64)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& [name, p] : params_) {
    m_.push_back(torch::zeros_like(p));
    v_.push_back(torch::zeros_like(p));
  }
}

void Adam::zero_grad() {
  for (auto& [name, p] : params_) {
    if (p.grad().defined()) {
      p.mutable_grad().detach_();
      p.mutable_grad().zero_();
    }
  }
}

void Adam::step() {
  torch::NoGradGuard guard;
  t_ += 1.0;
  const double t = t_.item<double>();
  const double bc1 = 1.0 - std::pow(beta1_, t);
  const double bc2 = 1.0 - std::pow(beta2_, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].second;
    if (!p.grad().defined()) continue;
    const auto& g = p.grad();
    m_[i].mul_(beta1_).add_(g, 1.0 - beta1_);
    v_[i].mul_(beta2_).addcmul_(g, g, 1.0 - beta2_);
    if (lr_ == 0.0) continue;
    const auto denom = (v_[i] / bc2).sqrt_().add_(eps_);
    p.addcdiv_(m_[i], denom, -lr_ / bc1);
  }
}

NamedTensors Adam::state(const std::string& prefix) const {
  NamedTensors out;
  out.emplace_back(prefix + "t", t_.clone());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.emplace_back(prefix + "m/" + params_[i].first, m_[i].clone());
    out.emplace_back(prefix + "v/" + params_[i].first, v_[i].clone());
  }
  return out;
}

void Adam::load_state(const NamedTensors& all, const std::string& prefix) {
  std::map<std::string, torch::Tensor> lookup(all.begin(), all.end());
  auto get = [&](const std::string& key) {
    const auto it = lookup.find(key);
    if (it == lookup.end()) throw CheckpointError("optimizer state lacks " + key);
    return it->second;
  };
  t_ = get(prefix + "t").clone().to(torch::kFloat64);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto m = get(prefix + "m/" + params_[i].first);
    const auto v = get(prefix + "v/" + params_[i].first);
    if (m.sizes() != m_[i].sizes() || v.sizes() != v_[i].sizes()) throw CheckpointError("optimizer state shape mismatch");
    m_[i] = m.clone().to(m_[i].scalar_type());
    v_[i] = v.clone().to(v_[i].scalar_type());
  }
}

namespace {

NamedTensors named_params(torch::nn::Module& m) {
  NamedTensors out;
  for (auto& p : m.named_parameters(true)) out.emplace_back(p.key(), p.value());
  return out;
}

std::string serialize_rng(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void check_finite(const torch::Tensor& loss, const char* what) {
  if (!std::isfinite(loss.item<double>())) throw NonFiniteLoss(std::string(what) + " loss is not finite");
}

void set_requires_grad(torch::nn::Module& m, bool on) {
  for (auto& p : m.parameters(true)) p.requires_grad_(on);
}

}  // namespace

Trainer::Trainer(const ModelConfig& model, const TrainConfig& train, const augment::AugmentationConfig& aug,
                 std::uint64_t seed)
    : model_(model), train_(train), aug_(aug), rng_(seed) {
  model.validate();
  if (train.batch_size < 1) throw InvalidArgument("batch_size must be positive");
  if (train.tick_images < 1) throw InvalidArgument("tick_images must be positive");
  if (train.r1_interval < 1) throw InvalidArgument("r1_interval must be positive");
  // parameter initialization draws from torch's global generator
  torch::manual_seed(seed);
  g_ = Generator(model);
  d_ = Discriminator(model);
  g_opt_ = std::make_unique<Adam>(named_params(*g_), train.g_lr, train.beta1, train.beta2, train.adam_eps);
  d_opt_ = std::make_unique<Adam>(named_params(*d_), train.d_lr, train.beta1, train.beta2, train.adam_eps);
  state_.rng_state = serialize_rng(rng_);
}

Trainer Trainer::from_checkpoint(const Checkpoint& ckpt, const TrainConfig& train, const augment::AugmentationConfig& aug,
                                 std::uint64_t seed, bool fine_tune) {
  if (ckpt.format_version != kCheckpointVersion) throw CheckpointError("incompatible checkpoint version");
  Trainer t(ckpt.model, train, aug, seed);
  load_module_state(*t.g_, ckpt.generator);
  load_module_state(*t.d_, ckpt.discriminator);
  if (!fine_tune) {
    t.g_opt_->load_state(ckpt.optimizer, "g/");
    t.d_opt_->load_state(ckpt.optimizer, "d/");
    t.state_ = ckpt.state;
    std::istringstream is(ckpt.state.rng_state);
    is >> t.rng_;
    if (!is) throw CheckpointError("corrupt rng state in checkpoint");
  }
  return t;
}

void Trainer::to(torch::ScalarType dtype) {
  g_->to(dtype);
  d_->to(dtype);
  dtype_ = dtype;
  g_opt_ = std::make_unique<Adam>(named_params(*g_), train_.g_lr, train_.beta1, train_.beta2, train_.adam_eps);
  d_opt_ = std::make_unique<Adam>(named_params(*d_), train_.d_lr, train_.beta1, train_.beta2, train_.adam_eps);
}

torch::Tensor Trainer::discriminate(const torch::Tensor& images, Kind kind, std::mt19937_64& aug_rng) {
  (kind == Kind::Real ? calls_.real : calls_.fake) += 1;
  return d_->forward(aug_(images, state_.ada.p, aug_rng));
}

Losses Trainer::discriminator_loss(const torch::Tensor& reals, const torch::Tensor& z,
                                   const std::vector<std::uint64_t>& noise_seeds, std::uint64_t aug_seed, bool with_r1) {
  std::mt19937_64 aug_rng(aug_seed);
  torch::Tensor fakes;
  {
    torch::NoGradGuard guard;
    fakes = g_->synthesize(g_->mapping->forward(z.to(dtype_)), g_->make_noise(noise_seeds, torch::TensorOptions().dtype(dtype_)));
  }
  Losses out;
  const auto fake_logits = discriminate(fakes, Kind::Fake, aug_rng);
  const bool r1 = with_r1 && train_.r1_gamma > 0.0;
  const auto real_in = reals.to(dtype_).detach().requires_grad_(r1);
  out.real_logits = discriminate(real_in, Kind::Real, aug_rng);
  out.adversarial = F::softplus(fake_logits).mean() + F::softplus(-out.real_logits).mean();
  if (r1) {
    const auto grads = torch::autograd::grad({out.real_logits.sum()}, {real_in}, {}, /*retain_graph=*/true,
                                             /*create_graph=*/true)[0];
    out.r1 = grads.square().sum({1, 2, 3}).mean() * (train_.r1_gamma / 2.0);
  } else {
    out.r1 = torch::zeros({}, out.adversarial.options());
  }
  out.total = out.adversarial + out.r1;
  return out;
}

Losses Trainer::generator_loss(const torch::Tensor& z, const std::vector<std::uint64_t>& noise_seeds, std::uint64_t aug_seed) {
  std::mt19937_64 aug_rng(aug_seed);
  Losses out;
  out.styles = g_->mapping->forward(z.to(dtype_));
  const auto fakes = g_->synthesize(out.styles, g_->make_noise(noise_seeds, torch::TensorOptions().dtype(dtype_)));
  const auto logits = discriminate(fakes, Kind::Fake, aug_rng);
  out.adversarial = F::softplus(-logits).mean();
  out.r1 = torch::zeros({}, out.adversarial.options());
  out.total = out.adversarial;
  return out;
}

void Trainer::advance_counters(std::uint64_t images) {
  state_.images_seen += images;
  state_.tick_index = state_.images_seen / static_cast<std::uint64_t>(train_.tick_images);
  ++state_.steps;
}

StepStats Trainer::train_step(const torch::Tensor& reals) {
  const int64_t n = reals.size(0);
  if (n < 1 || n > train_.batch_size) throw InvalidArgument("train_step: batch size must be in [1, batch_size]");
  auto draw_seeds = [&] {
    std::vector<std::uint64_t> s(static_cast<std::size_t>(n));
    for (auto& v : s) v = rng_();
    return s;
  };
  StepStats stats;

  // discriminator
  {
    const auto z = sample_latents(n, model_.latent_dim, model_.prior, rng_);
    const auto seeds = draw_seeds();
    const auto aug_seed = rng_();
    d_opt_->zero_grad();
    const bool lazy_r1 = state_.steps % static_cast<std::uint64_t>(train_.r1_interval) == 0;
    const Losses l = discriminator_loss(reals, z, seeds, aug_seed, lazy_r1);
    const auto total = l.adversarial + l.r1 * static_cast<double>(train_.r1_interval);
    check_finite(total, "discriminator");
    total.backward();
    d_opt_->step();
    stats.d_loss = l.adversarial.item<double>();
    stats.r1 = l.r1.item<double>();
    const auto logits = l.real_logits.detach().to(torch::kFloat32).contiguous();
    state_.ada = augment::ada_update(state_.ada, {logits.data_ptr<float>(), static_cast<std::size_t>(logits.numel())});
  }

  // generator
  {
    const auto z = sample_latents(n, model_.latent_dim, model_.prior, rng_);
    const auto seeds = draw_seeds();
    const auto aug_seed = rng_();
    g_opt_->zero_grad();
    set_requires_grad(*d_, false);
    const Losses l = generator_loss(z, seeds, aug_seed);
    try {
      check_finite(l.total, "generator");
      l.total.backward();
    } catch (...) {
      set_requires_grad(*d_, true);
      throw;
    }
    set_requires_grad(*d_, true);
    g_opt_->step();
    g_->mapping->update_w_avg(l.styles, train_.w_avg_beta);
    stats.g_loss = l.adversarial.item<double>();
  }

  advance_counters(static_cast<std::uint64_t>(n));
  stats.ada_p = state_.ada.p;
  return stats;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.model = model_;
  c.train = train_;
  c.state = state_;
  c.state.rng_state = serialize_rng(rng_);
  c.generator = module_state(*g_);
  c.discriminator = module_state(*d_);
  c.optimizer = g_opt_->state("g/");
  for (auto& e : d_opt_->state("d/")) c.optimizer.push_back(std::move(e));
  return c;
}

void train_until(Trainer& trainer, const torch::Tensor& dataset, std::uint64_t target_images,
                 const LoopCallbacks& callbacks) {
  const int64_t m = dataset.size(0);
  if (m < 1) throw InvalidArgument("empty training set");
  const auto& tc = trainer.train_config();
  const auto tick = static_cast<std::uint64_t>(tc.tick_images);
  while (trainer.state().images_seen < target_images) {
    const auto remaining = target_images - trainer.state().images_seen;
    const int64_t n = static_cast<int64_t>(std::min<std::uint64_t>(remaining, static_cast<std::uint64_t>(tc.batch_size)));
    std::uniform_int_distribution<int64_t> pick(0, m - 1);
    std::vector<int64_t> idx(static_cast<std::size_t>(n));
    for (auto& i : idx) i = pick(trainer.rng());
    const auto batch = dataset.index_select(0, torch::tensor(idx, torch::kLong));

    const auto before = trainer.state().images_seen / tick;
    const StepStats stats = trainer.train_step(batch);
    if (callbacks.on_step) callbacks.on_step(trainer, stats);
    const auto after = trainer.state().images_seen / tick;
    for (auto t = before + 1; t <= after; ++t) {
      if (callbacks.on_snapshot && tc.snapshot_ticks > 0 && t % static_cast<std::uint64_t>(tc.snapshot_ticks) == 0) {
        callbacks.on_snapshot(trainer, t);
      }
      if (callbacks.on_eval && tc.eval_every_ticks > 0 && t % static_cast<std::uint64_t>(tc.eval_every_ticks) == 0) {
        callbacks.on_eval(trainer, t);
      }
    }
  }
}

namespace {

std::uint64_t kimg_to_images(double kimg) {
  if (kimg < 0.0) throw InvalidArgument("negative training budget");
  return static_cast<std::uint64_t>(std::llround(kimg * 1000.0));
}

void run_with_snapshots(Trainer& trainer, const torch::Tensor& data, std::uint64_t target,
                        const std::filesystem::path& snapshot_dir, const LoopCallbacks& user) {
  LoopCallbacks cb = user;
  if (!snapshot_dir.empty()) {
    cb.on_snapshot = [&, inner = user.on_snapshot](Trainer& t, std::uint64_t tick) {
      char name[64];
      std::snprintf(name, sizeof name, "snapshot-%06llu.ckpt", static_cast<unsigned long long>(tick));
      save_checkpoint(t.checkpoint(), snapshot_dir / name);
      if (inner) inner(t, tick);
    };
  }
  try {
    train_until(trainer, data, target, cb);
  } catch (const NonFiniteLoss&) {
    if (!snapshot_dir.empty()) save_checkpoint(trainer.checkpoint(), snapshot_dir / "diagnostic.ckpt");
    throw;
  }
}

}  // namespace

Checkpoint pretrain(const ModelConfig& model, const TrainConfig& train, const augment::AugmentationConfig& aug,
                    const torch::Tensor& source, double budget_kimg, std::uint64_t seed,
                    const std::filesystem::path& snapshot_dir, const LoopCallbacks& callbacks) {
  if (source.size(0) < train.batch_size) throw InvalidArgument("source dataset smaller than one batch");
  Trainer trainer(model, train, aug, seed);
  run_with_snapshots(trainer, source, kimg_to_images(budget_kimg), snapshot_dir, callbacks);
  return trainer.checkpoint();
}

Checkpoint finetune(const Checkpoint& source, const TrainConfig& train, const augment::AugmentationConfig& aug,
                    const torch::Tensor& target, double budget_kimg, std::uint64_t seed, const ModelConfig* expected_model,
                    const std::filesystem::path& snapshot_dir, const LoopCallbacks& callbacks) {
  if (expected_model && expected_model->shape_key() != source.model.shape_key()) {
    throw CheckpointError("checkpoint architecture does not match the requested model");
  }
  if (target.size(0) < 1) throw InvalidArgument("empty target dataset");
  Trainer trainer = Trainer::from_checkpoint(source, train, aug, seed, /*fine_tune=*/true);
  run_with_snapshots(trainer, target, kimg_to_images(budget_kimg), snapshot_dir, callbacks);
  return trainer.checkpoint();
}

}  // namespace facegen::gan
