#include "torch_doctest.hpp"

#include <cmath>
#include <fstream>

#include "facegen/errors.hpp"
#include "facegen/gan/checkpoint.hpp"
#include "facegen/gan/generate.hpp"
#include "facegen/gan/trainer.hpp"
#include "facegen/metrics/conv_embedder.hpp"
#include "gradcheck.hpp"
#include "temp_dir.hpp"

using namespace facegen;
using namespace facegen::gan;

namespace {

ModelConfig tiny_model(int res = 8, int latent = 8) {
  ModelConfig m;
  m.latent_dim = latent;
  m.w_dim = latent;
  m.output_resolution = res;
  m.channel_base = 64;
  m.channel_max = 8;
  return m;
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.batch_size = 4;
  t.tick_images = 8;
  t.snapshot_ticks = 1;
  t.eval_every_ticks = 1;
  t.r1_interval = 1;
  return t;
}

augment::AugmentationConfig no_aug() { return augment::AugmentationConfig::for_regimen(augment::Regimen::None); }

torch::Tensor toy_reals(int64_t n, int res, std::uint64_t seed) {
  torch::manual_seed(seed);
  return torch::rand({n, 3, res, res}) * 1.6 - 0.8;
}

bool same_params(const NamedTensors& a, const NamedTensors& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].first != b[i].first || !torch::equal(a[i].second, b[i].second)) return false;
  return true;
}

}  // namespace

TEST_CASE("mapping: output shape, truncation and running average") {
  auto m = tiny_model();
  MappingNetwork map(m);
  const auto z = torch::randn({5, m.latent_dim});
  const auto w = map->forward(z);
  CHECK(w.sizes() == torch::IntArrayRef{5, m.w_dim});
  CHECK(torch::equal(map->truncate(w, 1.0), w));
  CHECK(torch::allclose(map->truncate(w, 0.0), map->w_avg.expand_as(w)));
  map->w_avg.zero_();
  map->update_w_avg(w, 0.5);
  CHECK(torch::allclose(map->w_avg, 0.5 * w.mean(0)));
  // second-moment normalization makes the map invariant to the latent's scale
  CHECK(torch::allclose(map->forward(z * 3.0), w, 1e-5, 1e-6));
}

TEST_CASE("synthesis: shape, range and per-layer noise resolutions") {
  auto m = tiny_model(16);
  Generator g(m);
  const auto res = g->synthesis->noise_resolutions();
  REQUIRE_FALSE(res.empty());
  CHECK(res.front() == 4);
  CHECK(res.back() == 16);
  const auto img = g->forward(torch::randn({3, m.latent_dim}), {1, 2, 3});
  CHECK(img.sizes() == torch::IntArrayRef{3, 3, 16, 16});
  CHECK(img.abs().max().item<double>() <= 1.0);
  const auto noise = g->make_noise({7, 8});
  REQUIRE(noise.size() == res.size());
  for (std::size_t i = 0; i < noise.size(); ++i) CHECK(noise[i].sizes() == torch::IntArrayRef{2, 1, res[i], res[i]});
}

TEST_CASE("generator output does not depend on batch composition") {
  auto m = tiny_model(16);
  m.filtered_resampling = true;
  Generator g(m);
  torch::NoGradGuard guard;
  const auto z = torch::randn({4, m.latent_dim});
  const std::vector<std::uint64_t> seeds{11, 12, 13, 14};
  const auto batch = g->forward(z, seeds);
  for (int64_t i = 0; i < 4; ++i) {
    const auto one = g->forward(z.narrow(0, i, 1), {seeds[static_cast<std::size_t>(i)]});
    CHECK(torch::allclose(batch.narrow(0, i, 1), one, 1e-5, 1e-6));
  }
  const auto a = generate_batch(g, 3, 9), b = generate_batch(g, 5, 9);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.latents[i] == b.latents[i]);
    CHECK(a.noise_seeds[i] == b.noise_seeds[i]);
  }
}

TEST_CASE("discriminator: one logit per image, minibatch stddev adds a channel") {
  auto m = tiny_model(16);
  Discriminator d(m);
  CHECK(d->forward(toy_reals(4, 16, 1)).sizes() == torch::IntArrayRef{4});
  const auto x = torch::randn({4, 5, 4, 4});
  const auto y = minibatch_stddev(x, 2);
  CHECK(y.sizes() == torch::IntArrayRef{4, 6, 4, 4});
  CHECK(torch::equal(y.narrow(1, 0, 5), x));
}

TEST_CASE("resampling keeps constants constant away from the zero-padded border") {
  using torch::indexing::Slice;
  const auto c = torch::full({1, 2, 16, 16}, 0.3);
  for (bool filtered : {false, true}) {
    const auto up = upsample2x(c, filtered);
    const auto down = downsample2x(c, filtered);
    CHECK(up.sizes() == torch::IntArrayRef{1, 2, 32, 32});
    CHECK(down.sizes() == torch::IntArrayRef{1, 2, 8, 8});
    CHECK(torch::allclose(up.index({Slice(), Slice(), Slice(3, -3), Slice(3, -3)}), torch::full({1, 2, 26, 26}, 0.3), 1e-6, 1e-6));
    CHECK(torch::allclose(down.index({Slice(), Slice(), Slice(1, -1), Slice(1, -1)}), torch::full({1, 2, 6, 6}, 0.3), 1e-6, 1e-6));
  }
}

TEST_CASE("analytic gradients match central differences for both losses") {
  const auto m = tiny_model(8, 8);
  auto tc = tiny_train();
  Trainer t(m, tc, no_aug(), 3);
  t.to(torch::kDouble);
  const auto reals = toy_reals(4, 8, 2).to(torch::kDouble);
  std::mt19937_64 rng(1);
  const auto z = sample_latents(4, m.latent_dim, m.prior, rng).to(torch::kDouble);
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4};

  const auto d = check_gradients(*t.discriminator(), [&] { return t.discriminator_loss(reals, z, seeds, 7, true).total; }, 1e-4);
  INFO("kinked coordinates skipped: ", d.kinked);
  CHECK(d.checked >= 40);
  CHECK(d.max_rel < 1e-3);

  const auto g = check_gradients(*t.generator(), [&] { return t.generator_loss(z, seeds, 7).total; }, 1e-4);
  INFO("kinked coordinates skipped: ", g.kinked);
  CHECK(g.checked >= 40);
  CHECK(g.max_rel < 1e-3);
}

TEST_CASE("the R1 term equals half gamma times the squared input gradient norm") {
  const auto m = tiny_model();
  auto tc = tiny_train();
  tc.r1_gamma = 4.0;
  Trainer t(m, tc, no_aug(), 1);
  t.to(torch::kDouble);
  const auto reals = toy_reals(4, 8, 3).to(torch::kDouble).requires_grad_(true);
  std::mt19937_64 rng(1);
  const auto z = sample_latents(4, m.latent_dim, m.prior, rng);
  const auto l = t.discriminator_loss(reals.detach(), z, {1, 2, 3, 4}, 0, true);
  const auto logits = t.discriminator()->forward(reals);
  const auto grad = torch::autograd::grad({logits.sum()}, {reals})[0];
  const double expected = 2.0 * grad.square().sum({1, 2, 3}).mean().item<double>();
  CHECK(l.r1.item<double>() == doctest::Approx(expected).epsilon(1e-10));
  CHECK(t.discriminator_loss(reals.detach(), z, {1, 2, 3, 4}, 0, false).r1.item<double>() == 0.0);
}

TEST_CASE("Adam: zero learning rate leaves parameters untouched") {
  auto tc = tiny_train();
  tc.g_lr = 0.0;
  tc.d_lr = 0.0;
  Trainer t(tiny_model(), tc, no_aug(), 1);
  const auto before = t.checkpoint();
  t.train_step(toy_reals(4, 8, 1));
  t.train_step(toy_reals(4, 8, 2));
  const auto after = t.checkpoint();
  CHECK(same_params(before.discriminator, after.discriminator));
  // w_avg is a buffer and keeps tracking; parameters do not move
  auto params = [](const NamedTensors& s) {
    NamedTensors out;
    for (const auto& e : s)
      if (e.first.find("w_avg") == std::string::npos) out.push_back(e);
    return out;
  };
  CHECK(same_params(params(before.generator), params(after.generator)));
}

TEST_CASE("Adam matches a hand-rolled update") {
  auto p = torch::tensor({1.0, -2.0}, torch::kDouble).requires_grad_(true);
  Adam opt({{"p", p}}, 0.1, 0.0, 0.99, 1e-8);
  for (int step = 1; step <= 3; ++step) {
    opt.zero_grad();
    (p * p).sum().backward();
    const auto g = p.grad().clone();
    const auto before = p.detach().clone();
    opt.step();
    if (step == 1) {
      // bias-corrected first step: lr * g / (|g| + eps)
      const auto expected = before - 0.1 * g / (g.abs() + 1e-8);
      CHECK(torch::allclose(p.detach(), expected, 1e-9, 1e-12));
    }
  }
  const auto st = opt.state("x/");
  CHECK(st.size() == 3);
  auto q = torch::tensor({1.0, -2.0}, torch::kDouble).requires_grad_(true);
  Adam other({{"p", q}}, 0.1, 0.0, 0.99, 1e-8);
  other.load_state(st, "x/");
  CHECK(torch::equal(other.state("x/")[1].second, st[1].second));
}

TEST_CASE("training is deterministic for a seed") {
  auto run = [] {
    Trainer t(tiny_model(), tiny_train(), augment::AugmentationConfig{}, 21);
    t.mutable_state().ada.p = 0.5;
    train_until(t, toy_reals(12, 8, 4), 24);
    return t.checkpoint();
  };
  const auto a = run(), b = run();
  CHECK(same_params(a.generator, b.generator));
  CHECK(same_params(a.discriminator, b.discriminator));
  CHECK(a.state.rng_state == b.state.rng_state);
}

TEST_CASE("resuming from a checkpoint continues the uninterrupted run bit-exactly") {
  const auto data = toy_reals(12, 8, 5);
  Trainer full(tiny_model(), tiny_train(), augment::AugmentationConfig{}, 8);
  full.mutable_state().ada.p = 0.3;
  train_until(full, data, 16);
  TempDir dir("resume");
  save_checkpoint(full.checkpoint(), dir.path / "mid.ckpt");
  train_until(full, data, 32);

  auto resumed = Trainer::from_checkpoint(load_checkpoint(dir.path / "mid.ckpt"), tiny_train(),
                                          augment::AugmentationConfig{}, 999, false);
  train_until(resumed, data, 32);
  CHECK(same_params(full.checkpoint().generator, resumed.checkpoint().generator));
  CHECK(same_params(full.checkpoint().discriminator, resumed.checkpoint().discriminator));
  CHECK(resumed.state().images_seen == 32);
}

TEST_CASE("tick accounting and callback cadence") {
  auto tc = tiny_train();
  tc.tick_images = 10;
  tc.eval_every_ticks = 2;
  tc.snapshot_ticks = 3;
  Trainer t(tiny_model(), tc, no_aug(), 2);
  std::vector<std::uint64_t> evals, snaps;
  std::uint64_t steps = 0;
  LoopCallbacks cb;
  cb.on_eval = [&](Trainer&, std::uint64_t tick) { evals.push_back(tick); };
  cb.on_snapshot = [&](Trainer&, std::uint64_t tick) { snaps.push_back(tick); };
  cb.on_step = [&](Trainer&, const StepStats&) { ++steps; };
  train_until(t, toy_reals(6, 8, 1), 61, cb);
  CHECK(t.state().images_seen == 61);
  CHECK(t.state().tick_index == 6);
  CHECK(steps == 16);  // 15 full batches of 4, then one of 1
  CHECK(evals == std::vector<std::uint64_t>{2, 4, 6});
  CHECK(snaps == std::vector<std::uint64_t>{3, 6});
}

TEST_CASE("finetune with a zero budget returns the source parameters") {
  const auto src = Trainer(tiny_model(), tiny_train(), no_aug(), 4).checkpoint();
  const auto out = finetune(src, tiny_train(), no_aug(), toy_reals(4, 8, 1), 0.0, 1);
  CHECK(same_params(src.generator, out.generator));
  CHECK(same_params(src.discriminator, out.discriminator));
  CHECK(out.state.images_seen == 0);
  auto other = tiny_model();
  other.channel_max = 16;
  CHECK_THROWS_AS(finetune(src, tiny_train(), no_aug(), toy_reals(4, 8, 1), 0.0, 1, &other), CheckpointError);
}

TEST_CASE("finetuning restarts optimizer state and counters") {
  Trainer t(tiny_model(), tiny_train(), augment::AugmentationConfig{}, 4);
  t.mutable_state().ada.p = 0.7;
  train_until(t, toy_reals(8, 8, 1), 16);
  auto ft = Trainer::from_checkpoint(t.checkpoint(), tiny_train(), augment::AugmentationConfig{}, 5, true);
  CHECK(ft.state().images_seen == 0);
  CHECK(ft.state().ada.p == 0.0);
  CHECK(same_params(ft.checkpoint().generator, t.checkpoint().generator));
  const auto out = finetune(t.checkpoint(), tiny_train(), no_aug(), toy_reals(4, 8, 2), 0.012, 1);
  CHECK(out.state.images_seen == 12);
}

TEST_CASE("pretrain writes snapshots per tick") {
  TempDir dir("pre");
  auto tc = tiny_train();
  const auto ck = pretrain(tiny_model(), tc, no_aug(), toy_reals(8, 8, 1), 0.016, 3, dir.path);
  CHECK(ck.state.images_seen == 16);
  CHECK(std::filesystem::exists(dir.path / "snapshot-000001.ckpt"));
  CHECK(std::filesystem::exists(dir.path / "snapshot-000002.ckpt"));
  CHECK_THROWS_AS(pretrain(tiny_model(), tc, no_aug(), toy_reals(2, 8, 1), 0.016, 3), InvalidArgument);
}

TEST_CASE("a non-finite loss raises and leaves a diagnostic checkpoint") {
  TempDir dir("nan");
  auto reals = toy_reals(8, 8, 1);
  reals[0][0][0][0] = std::nan("");
  CHECK_THROWS_AS(pretrain(tiny_model(), tiny_train(), no_aug(), reals.expand({8, 3, 8, 8}).clone().fill_(NAN), 0.016, 1, dir.path),
                  NonFiniteLoss);
  CHECK(std::filesystem::exists(dir.path / "diagnostic.ckpt"));
  CHECK_NOTHROW(load_checkpoint(dir.path / "diagnostic.ckpt"));
}

TEST_CASE("discriminator loss decreases when only D learns") {
  auto tc = tiny_train();
  tc.g_lr = 0.0;
  Trainer t(tiny_model(), tc, no_aug(), 6);
  const auto reals = toy_reals(4, 8, 1);
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 40; ++i) {
    const auto s = t.train_step(reals);
    if (i == 0) first = s.d_loss;
    last = s.d_loss;
  }
  CHECK(last < first);
}

TEST_CASE("every discriminator call goes through the one augmentation operator") {
  Trainer t(tiny_model(), tiny_train(), augment::AugmentationConfig{}, 6);
  t.mutable_state().ada.p = 1.0;
  train_until(t, toy_reals(8, 8, 1), 20);
  const auto& log = t.call_log();
  CHECK(log.real == 5);
  CHECK(log.fake == 10);  // one in the D step, one in the G step
  CHECK(t.augmenter().calls() == log.real + log.fake);
  CHECK(t.augmenter().images() == 3 * 20);
}

TEST_CASE("checkpoint save/load reproduces forward outputs bit-exactly") {
  TempDir dir("ck");
  Trainer t(tiny_model(16), tiny_train(), no_aug(), 12);
  train_until(t, toy_reals(8, 16, 1), 8);
  const auto ck = t.checkpoint();
  save_checkpoint(ck, dir.path / "a.ckpt");
  const auto back = load_checkpoint(dir.path / "a.ckpt");
  CHECK(back.model == ck.model);
  CHECK(back.train == ck.train);
  CHECK(back.state.images_seen == ck.state.images_seen);
  CHECK(same_params(back.optimizer, ck.optimizer));
  auto g1 = build_generator(ck), g2 = build_generator(back);
  auto d1 = build_discriminator(ck), d2 = build_discriminator(back);
  torch::NoGradGuard guard;
  const auto z = torch::randn({3, 8});
  const auto x1 = g1->forward(z, {1, 2, 3}), x2 = g2->forward(z, {1, 2, 3});
  CHECK(torch::equal(x1, x2));
  CHECK(torch::equal(d1->forward(x1), d2->forward(x2)));
}

TEST_CASE("checkpoint loading rejects damaged and mismatched files") {
  TempDir dir("bad");
  std::ofstream(dir.path / "junk.ckpt") << "definitely not a checkpoint";
  CHECK_THROWS_AS(load_checkpoint(dir.path / "junk.ckpt"), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(dir.path / "missing.ckpt"), IoError);

  Trainer t(tiny_model(), tiny_train(), no_aug(), 1);
  save_checkpoint(t.checkpoint(), dir.path / "ok.ckpt");
  const auto size = std::filesystem::file_size(dir.path / "ok.ckpt");
  std::filesystem::resize_file(dir.path / "ok.ckpt", size / 2);
  CHECK_THROWS_AS(load_checkpoint(dir.path / "ok.ckpt"), CheckpointError);

  auto bigger = tiny_model();
  bigger.channel_max = 16;
  Generator g(bigger);
  CHECK_THROWS_AS(load_module_state(*g, t.checkpoint().generator), CheckpointError);
}

TEST_CASE("config validation and JSON round trip") {
  auto m = tiny_model();
  m.channels_per_resolution = {{8, 6}};
  m.prior = LatentPrior::Uniform;
  nlohmann::json j = m;
  CHECK(j.get<ModelConfig>() == m);
  auto tc = tiny_train();
  nlohmann::json jt = tc;
  CHECK(jt.get<TrainConfig>() == tc);
  CHECK(m.channels(8) == 6);
  CHECK(m.channels(4) == 8);
  auto bad = m;
  bad.output_resolution = 12;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = m;
  bad.truncation_psi = std::nan("");
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  auto other = m;
  other.truncation_psi = 0.7;
  CHECK(other.shape_key() == m.shape_key());
  other.w_dim = 16;
  CHECK(other.shape_key() != m.shape_key());
  CHECK(parse_prior("uniform") == LatentPrior::Uniform);
  CHECK_THROWS_AS(parse_prior("cauchy"), InvalidArgument);
}

TEST_CASE("latent priors have unit variance") {
  std::mt19937_64 rng(1);
  for (auto prior : {LatentPrior::Normal, LatentPrior::Uniform}) {
    const auto z = sample_latents(20000, 8, prior, rng);
    CHECK(std::abs(z.mean().item<double>()) < 0.02);
    CHECK(std::abs(z.var().item<double>() - 1.0) < 0.03);
  }
  const auto u = sample_latents(1000, 4, LatentPrior::Uniform, rng);
  CHECK(u.abs().max().item<double>() <= std::sqrt(3.0));
}

TEST_CASE("generator sampler: batched synthesis equals per-item synthesis") {
  Generator g(tiny_model(16));
  GeneratorSampler s(g, 2);
  std::vector<std::vector<double>> ws;
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < 5; ++i) {
    std::vector<double> z(8);
    for (int k = 0; k < 8; ++k) z[static_cast<std::size_t>(k)] = std::sin(i * 8 + k);
    ws.push_back(s.map(z));
    seeds.push_back(100 + static_cast<std::uint64_t>(i));
  }
  const auto batch = s.synthesize_batch(ws, seeds);
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const auto one = s.synthesize(ws[i], seeds[i]);
    double worst = 0.0;
    for (std::size_t k = 0; k < one.size(); ++k) worst = std::max(worst, double(std::abs(one.data[k] - batch[i].data[k])));
    CHECK(worst < 1e-5);
  }
  const auto a = s.sample(4, 3), b = s.sample(4, 3);
  CHECK((a == b));
  CHECK(a.front().height == 16);
}

TEST_CASE("generated batches log their latents") {
  TempDir dir("gen");
  Generator g(tiny_model());
  const auto batch = generate_batch(g, 3, 1);
  write_latent_log(batch, dir.path / "latents.csv");
  std::ifstream in(dir.path / "latents.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header.rfind("index,noise_seed,z0", 0) == 0);
  CHECK(row.rfind("0," + std::to_string(batch.noise_seeds[0]) + ",", 0) == 0);
}

TEST_CASE("conv embedder learns attributes and survives a save/load") {
  TempDir dir("embed");
  std::vector<Image> imgs;
  std::vector<std::vector<double>> targets;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(-0.8f, 0.8f);
  for (int i = 0; i < 64; ++i) {
    const float v = u(rng);
    imgs.emplace_back(16, 16, 3, v);
    targets.push_back({v, -v});
  }
  metrics::ConvEmbedderConfig cfg;
  cfg.resolution = 16;
  cfg.steps = 150;
  cfg.feature_dim = 8;
  cfg.width = 4;
  const auto e = metrics::ConvEmbedder::train(imgs, targets, cfg, 1);
  CHECK(e.evaluate(imgs, targets) < 0.05);
  e.save(dir.path / "e.fgarch");
  const auto back = metrics::ConvEmbedder::load(dir.path / "e.fgarch");
  CHECK(back.id() == e.id());
  CHECK(back.embed_all(imgs) == e.embed_all(imgs));
  CHECK(e.embed(imgs[0]).size() == 8);
}
