#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <vector>

#include <torch/torch.h>

#include "facegen/augment/augment.hpp"
#include "facegen/gan/checkpoint.hpp"
#include "facegen/gan/config.hpp"
#include "facegen/gan/networks.hpp"

namespace facegen::gan {

/// Draws n latents from the configured prior (unit variance per coordinate).
torch::Tensor sample_latents(int64_t n, int dim, LatentPrior prior, std::mt19937_64& rng);

/// Plain Adam over a fixed, named parameter list. Moments are exposed so
/// checkpoints can carry them.
class Adam {
 public:
  Adam(NamedTensors params, double lr, double beta1, double beta2, double eps);
  void zero_grad();
  void step();
  NamedTensors state(const std::string& prefix) const;
  void load_state(const NamedTensors& all, const std::string& prefix);
  double lr() const { return lr_; }

 private:
  NamedTensors params_;
  std::vector<torch::Tensor> m_;
  std::vector<torch::Tensor> v_;
  torch::Tensor t_;  // step count, stored as a tensor for checkpointing
  double lr_, beta1_, beta2_, eps_;
};

/// Counts every discriminator evaluation made by the trainer, split by input
/// kind. All of them go through the trainer's single augmentation operator.
struct DiscriminatorCallLog {
  std::uint64_t real = 0;
  std::uint64_t fake = 0;
};

struct Losses {
  torch::Tensor total;
  torch::Tensor adversarial;
  torch::Tensor r1;
  torch::Tensor real_logits;
  torch::Tensor styles;  // generator loss only: the w batch that was synthesized
};

struct StepStats {
  double d_loss = 0.0;
  double g_loss = 0.0;
  double r1 = 0.0;
  double ada_p = 0.0;
};

/// Alternating D / G updates with the non-saturating logistic loss and an R1
/// penalty on real images. Both real and generated discriminator inputs pass
/// through the same augmentation operator, whose probability is driven by the
/// adaptive controller.
class Trainer {
 public:
  Trainer(const ModelConfig& model, const TrainConfig& train, const augment::AugmentationConfig& aug,
          std::uint64_t seed);

  /// Starts from checkpoint parameters. With `fine_tune` the optimizer state,
  /// progress counters and augmentation probability restart from zero;
  /// otherwise training resumes exactly where the checkpoint stopped.
  static Trainer from_checkpoint(const Checkpoint& ckpt, const TrainConfig& train,
                                 const augment::AugmentationConfig& aug, std::uint64_t seed, bool fine_tune);

  /// One D update followed by one G update on a batch of reals
  /// (N x 3 x R x R, values in [-1, 1]). Throws NonFiniteLoss on NaN/Inf.
  StepStats train_step(const torch::Tensor& reals);

  /// Discriminator loss for fixed inputs; augmentation draws come from
  /// `aug_seed`, so equal arguments give equal losses.
  Losses discriminator_loss(const torch::Tensor& reals, const torch::Tensor& z, const std::vector<std::uint64_t>& noise_seeds,
                            std::uint64_t aug_seed, bool with_r1);
  Losses generator_loss(const torch::Tensor& z, const std::vector<std::uint64_t>& noise_seeds, std::uint64_t aug_seed);

  Checkpoint checkpoint() const;

  Generator& generator() { return g_; }
  Discriminator& discriminator() { return d_; }
  const TrainState& state() const { return state_; }
  TrainState& mutable_state() { return state_; }
  const ModelConfig& model_config() const { return model_; }
  const TrainConfig& train_config() const { return train_; }
  const augment::AugmentOperator& augmenter() const { return aug_; }
  const DiscriminatorCallLog& call_log() const { return calls_; }
  std::mt19937_64& rng() { return rng_; }

  /// Casts networks (and optimizer moments) to a dtype; used by gradient checks.
  void to(torch::ScalarType dtype);

 private:
  enum class Kind { Real, Fake };
  torch::Tensor discriminate(const torch::Tensor& images, Kind kind, std::mt19937_64& aug_rng);
  void advance_counters(std::uint64_t images);

  ModelConfig model_;
  TrainConfig train_;
  Generator g_{nullptr};
  Discriminator d_{nullptr};
  std::unique_ptr<Adam> g_opt_;
  std::unique_ptr<Adam> d_opt_;
  augment::AugmentOperator aug_;
  TrainState state_;
  std::mt19937_64 rng_;
  DiscriminatorCallLog calls_;
  torch::ScalarType dtype_ = torch::kFloat32;
};

struct LoopCallbacks {
  // called after the step that completes tick t, for t a multiple of the cadence
  std::function<void(Trainer&, std::uint64_t tick)> on_eval;
  std::function<void(Trainer&, std::uint64_t tick)> on_snapshot;
  std::function<void(Trainer&, const StepStats&)> on_step;
};

/// Trains until `state().images_seen` reaches `target_images`, sampling
/// batches with replacement from `dataset` (M x 3 x R x R). The last batch is
/// shortened so the target is hit exactly.
void train_until(Trainer& trainer, const torch::Tensor& dataset, std::uint64_t target_images,
                 const LoopCallbacks& callbacks = {});

/// Source-domain training from scratch. Snapshots go to
/// `snapshot_dir/snapshot-<tick>.ckpt` every `snapshot_ticks` when a
/// directory is given. On a non-finite loss a diagnostic checkpoint is
/// written there before the error propagates.
Checkpoint pretrain(const ModelConfig& model, const TrainConfig& train, const augment::AugmentationConfig& aug,
                    const torch::Tensor& source, double budget_kimg, std::uint64_t seed,
                    const std::filesystem::path& snapshot_dir = {}, const LoopCallbacks& callbacks = {});

/// Transfer learning: all parameters from `source`, fresh optimizer and
/// counters, then `budget_kimg` on the target set. When `expected_model` is
/// given it must match the checkpoint's architecture.
Checkpoint finetune(const Checkpoint& source, const TrainConfig& train, const augment::AugmentationConfig& aug,
                    const torch::Tensor& target, double budget_kimg, std::uint64_t seed,
                    const ModelConfig* expected_model = nullptr, const std::filesystem::path& snapshot_dir = {},
                    const LoopCallbacks& callbacks = {});

}  // namespace facegen::gan
