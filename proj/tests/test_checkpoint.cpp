#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "evogan/checkpoint.hpp"
#include "support.hpp"

using namespace evogan;

namespace {

ImageBatch<float> random_batch(const ImageShape &shape, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> pixel(-1.0f, 1.0f);
  ImageBatch<float> out(shape, n);
  for (Eigen::Index i = 0; i < out.pixels.size(); ++i) {
    out.pixels.data()[i] = pixel(rng);
  }
  return out;
}

TrainingConfig trained_config() {
  TrainingConfig c = testkit::toy_config();
  c.variant = Variant::infogan_ga_wc;
  c.seed = 77;
  return c;
}

} // namespace

TEST(Checkpoint, ReloadGivesBitIdenticalForwardPasses) {
  testkit::TempDir dir("ckpt");
  const auto config = trained_config();
  const auto data = random_batch(config.network.image, 6, 1);
  TrainingState<float> state(config);
  (void)train_epoch(state, data, config, nullptr, false);
  (void)train_epoch(state, data, config, nullptr, false);
  const auto path = dir.path() / "a.ckpt";
  save_checkpoint(path, state, config);

  TrainingState<float> loaded(read_checkpoint_config(path));
  load_checkpoint(path, loaded);
  EXPECT_EQ(loaded.epoch, 2);
  EXPECT_EQ(loaded.steps, state.steps);
  ASSERT_EQ(loaded.history.size(), 2u);
  EXPECT_EQ(loaded.history[1].g_loss, state.history[1].g_loss);

  const auto z = evaluation_latent<float>(config, 5);
  for (auto mode : {nn::Mode::train, nn::Mode::eval}) {
    EXPECT_EQ(loaded.generator.forward(z, mode).pixels, state.generator.forward(z, mode).pixels);
  }
  const auto probe = random_batch(config.network.image, 4, 2);
  const auto a = state.discriminator.forward(probe);
  const auto b = loaded.discriminator.forward(probe);
  EXPECT_EQ(a.realness_logit, b.realness_logit);
  EXPECT_EQ(a.q_cat_logits, b.q_cat_logits);
  EXPECT_EQ(a.q_cont_means, b.q_cont_means);
}

TEST(Checkpoint, ContinuedTrainingMatches) {
  testkit::TempDir dir("ckpt_continue");
  const auto config = trained_config();
  const auto data = random_batch(config.network.image, 6, 3);
  TrainingState<float> state(config);
  (void)train_epoch(state, data, config, nullptr, false);
  save_checkpoint(dir.path() / "b.ckpt", state, config);
  TrainingState<float> loaded(config);
  load_checkpoint(dir.path() / "b.ckpt", loaded);
  const auto x = train_epoch(state, data, config, nullptr, false);
  const auto y = train_epoch(loaded, data, config, nullptr, false);
  EXPECT_EQ(x.g_loss, y.g_loss);
  EXPECT_EQ(x.d_loss, y.d_loss);
  EXPECT_EQ(x.ga_best_fitness, y.ga_best_fitness);
}

TEST(Checkpoint, ConfigTravelsWithFile) {
  testkit::TempDir dir("ckpt_config");
  const auto config = trained_config();
  TrainingState<double> state(config);
  save_checkpoint(dir.path() / "c.ckpt", state, config);
  EXPECT_EQ(to_ini(read_checkpoint_config(dir.path() / "c.ckpt")), to_ini(config));
}

TEST(Checkpoint, ScalarMismatchRejected) {
  testkit::TempDir dir("ckpt_scalar");
  const auto config = trained_config();
  TrainingState<double> state(config);
  save_checkpoint(dir.path() / "d.ckpt", state, config);
  TrainingState<float> other(config);
  EXPECT_THROW(load_checkpoint(dir.path() / "d.ckpt", other), CheckpointError);
}

TEST(Checkpoint, ShapeMismatchRejected) {
  testkit::TempDir dir("ckpt_shape");
  const auto config = trained_config();
  TrainingState<float> state(config);
  save_checkpoint(dir.path() / "e.ckpt", state, config);
  TrainingConfig wider = config;
  wider.network.d_hidden += 1;
  TrainingState<float> other(wider);
  EXPECT_THROW(load_checkpoint(dir.path() / "e.ckpt", other), CheckpointError);
}

TEST(Checkpoint, GarbageAndMissingFilesRejected) {
  testkit::TempDir dir("ckpt_bad");
  std::ofstream(dir.path() / "junk.ckpt") << "definitely not a checkpoint";
  TrainingState<float> state(trained_config());
  EXPECT_THROW(load_checkpoint(dir.path() / "junk.ckpt", state), CheckpointError);
  EXPECT_THROW(load_checkpoint(dir.path() / "absent.ckpt", state), CheckpointError);
  EXPECT_THROW(read_checkpoint_config(dir.path() / "junk.ckpt"), CheckpointError);
}

TEST(Checkpoint, Paths) {
  EXPECT_EQ(checkpoint_path("/tmp/run", 12).filename(), "checkpoint_epoch_12.ckpt");
  EXPECT_EQ(latest_checkpoint_path("/tmp/run").filename(), "checkpoint_latest.ckpt");
}
