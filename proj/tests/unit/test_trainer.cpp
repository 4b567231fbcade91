#include <cmath>
#include <cstring>

#include <doctest.h>

#include "vaproto/dataset.hpp"
#include "vaproto/trainer.hpp"

using namespace vaproto;

namespace {

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.episodes_per_epoch = 15;
  cfg.learning_rate = 1e-3;
  cfg.eval_tasks = 40;
  cfg.eval_seeds = {0, 1};
  cfg.early_stop_patience = 3;
  cfg.hidden_dim = 12;
  cfg.embed_dim = 8;
  cfg.sampler.ways = 3;
  cfg.sampler.shots = 2;
  cfg.sampler.supports = 4;
  cfg.seed = 9;
  return cfg;
}

bool params_equal(const EncoderParams& a, const EncoderParams& b) {
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (*ta[i] != *tb[i]) return false;
  }
  return true;
}

Dataset random_label_dataset(std::uint32_t labels, std::uint32_t per_label,
                             std::uint32_t dim, std::uint64_t seed) {
  // features carry no label information at all
  Dataset ds("chance", Split::MetaVal);
  Rng rng(seed);
  for (std::uint32_t l = 0; l < labels; ++l) {
    for (std::uint32_t e = 0; e < per_label; ++e) {
      Vector f(dim);
      for (auto& x : f) x = rng.normal();
      ds.add_example("r" + std::to_string(l), std::move(f));
    }
  }
  return ds;
}

}  // namespace

TEST_CASE("gradient clipping caps the global norm") {
  Rng rng(12);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<Vector> grads(3);
    for (auto& g : grads) {
      g.resize(1 + rng.below(6));
      for (auto& x : g) x = 20.0 * rng.normal();
    }
    const std::vector<Vector> before = grads;
    const double norm0 = global_norm(grads);
    const double applied = clip_gradients(grads, 3.0);
    REQUIRE(applied <= 3.0 + 1e-9);
    REQUIRE(global_norm(grads) <= 3.0 + 1e-9);
    if (norm0 <= 3.0) {
      REQUIRE(grads == before);  // untouched when already within the cap
    } else {
      // direction preserved
      const double scale = grads[0].empty() ? 0.0 : grads[0][0] / before[0][0];
      for (std::size_t t = 0; t < grads.size(); ++t) {
        for (std::size_t i = 0; i < grads[t].size(); ++i) {
          REQUIRE(grads[t][i] == doctest::Approx(before[t][i] * scale).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("adamw moves parameters toward lower loss on a quadratic") {
  Vector w = {4.0, -3.0};
  AdamW opt(1);
  Vector* params[] = {&w};
  for (int step = 0; step < 2000; ++step) {
    const Vector grads[] = {Vector{2 * w[0], 2 * w[1]}};
    opt.step(params, grads, 0.01, 0.0);
  }
  CHECK(std::abs(w[0]) < 0.05);
  CHECK(std::abs(w[1]) < 0.05);
}

TEST_CASE("training runs, logs every epoch, and improves on a solvable task") {
  const Dataset train_ds = generate_synthetic(8, 20, 8, 8.0, 0.8, 1, Split::MetaTrain, "tr");
  const Dataset val_ds = generate_synthetic(4, 20, 8, 8.0, 0.8, 2, Split::MetaVal, "va");
  const TrainConfig cfg = small_config();
  const TrainResult result = train({&train_ds, 1}, val_ds, cfg);
  CHECK_FALSE(result.diverged);
  CHECK(result.epochs_run >= 1);
  CHECK(result.log.size() == result.epochs_run);
  for (std::size_t i = 0; i < result.log.size(); ++i) {
    CHECK(result.log[i].epoch == i + 1);
    CHECK(std::isfinite(result.log[i].mean_train_loss));
    CHECK(result.log[i].metaval_accuracy >= 0.0);
    CHECK(result.log[i].metaval_accuracy <= 1.0);
    if (i + 1 < result.log.size()) {
      CHECK(result.log[i].lr >= result.log[i + 1].lr);  // linear decay
    }
  }
  CHECK(result.best_metaval >= 0.9);  // separated synthetic data is easy
  CHECK(result.params.finite());
}

TEST_CASE("zero learning rate leaves the encoder untouched") {
  const Dataset train_ds = generate_synthetic(6, 16, 6, 6.0, 1.0, 3, Split::MetaTrain, "tr");
  const Dataset val_ds = generate_synthetic(3, 16, 6, 6.0, 1.0, 4, Split::MetaVal, "va");
  TrainConfig cfg = small_config();
  cfg.learning_rate = 0.0;
  cfg.weight_decay = 0.0;
  const TrainResult result = train({&train_ds, 1}, val_ds, cfg);

  Rng init = Rng(cfg.seed).substream("init");
  const EncoderParams untouched = EncoderParams::init(
      train_ds.dim(), cfg.hidden_dim, cfg.embed_dim, cfg.dropout, init);
  CHECK(params_equal(result.params, untouched));

  const EvalReport trained = evaluate(result.params, val_ds, cfg);
  const EvalReport baseline = evaluate(untouched, val_ds, cfg);
  CHECK(trained.mean_accuracy == baseline.mean_accuracy);
}

TEST_CASE("training is bit-deterministic in seed") {
  const Dataset train_ds = generate_synthetic(6, 16, 6, 6.0, 1.0, 5, Split::MetaTrain, "tr");
  const Dataset val_ds = generate_synthetic(3, 16, 6, 6.0, 1.0, 6, Split::MetaVal, "va");
  const TrainConfig cfg = small_config();
  const TrainResult a = train({&train_ds, 1}, val_ds, cfg);
  const TrainResult b = train({&train_ds, 1}, val_ds, cfg);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    REQUIRE(std::memcmp(&a.log[i], &b.log[i], sizeof(EpochRecord)) == 0);
  }
  CHECK(params_equal(a.params, b.params));

  TrainConfig other = cfg;
  other.seed = cfg.seed + 1;
  const TrainResult c = train({&train_ds, 1}, val_ds, other);
  CHECK_FALSE(params_equal(a.params, c.params));
}

TEST_CASE("label overlap between splits is rejected") {
  const Dataset train_ds = generate_synthetic(4, 16, 6, 6.0, 1.0, 7, Split::MetaTrain, "same");
  const Dataset val_ds = generate_synthetic(2, 16, 6, 6.0, 1.0, 8, Split::MetaVal, "same");
  CHECK_THROWS_AS(static_cast<void>(train({&train_ds, 1}, val_ds, small_config())),
                  UsageError);
}

TEST_CASE("divergence aborts and keeps the last good checkpoint") {
  const Dataset train_ds = generate_synthetic(6, 16, 6, 6.0, 1.0, 9, Split::MetaTrain, "tr");
  const Dataset val_ds = generate_synthetic(3, 16, 6, 6.0, 1.0, 10, Split::MetaVal, "va");
  TrainConfig cfg = small_config();
  cfg.learning_rate = 1e155;  // first step already overflows the loss
  cfg.grad_clip_norm = 0.0;
  const TrainResult result = train({&train_ds, 1}, val_ds, cfg);
  CHECK(result.diverged);
  CHECK(result.params.finite());
}

TEST_CASE("untrained encoder scores at chance on unstructured labels") {
  const Dataset noise = random_label_dataset(6, 30, 8, 17);
  TrainConfig cfg = small_config();
  cfg.sampler.ways = 4;
  cfg.eval_tasks = 400;
  cfg.eval_seeds = {3};
  Rng init = Rng(1).substream("init");
  const EncoderParams enc = EncoderParams::init(8, 12, 8, 0.0, init);
  const EvalReport report = evaluate(enc, noise, cfg);
  // 400 tasks x 8 queries at p = 1/4: allow ~4.5 binomial sigmas
  CHECK(std::abs(report.mean_accuracy - 0.25) < 0.035);
  const EvalReport again = evaluate(enc, noise, cfg);
  CHECK(report.mean_accuracy == again.mean_accuracy);
  CHECK(report.tasks_evaluated == 400);
}

TEST_CASE("evaluate aggregates per-seed accuracies") {
  const Dataset val_ds = generate_synthetic(4, 20, 8, 8.0, 0.8, 2, Split::MetaVal, "va");
  TrainConfig cfg = small_config();
  cfg.eval_tasks = 25;
  cfg.eval_seeds = {5, 1, 3};
  Rng init = Rng(2).substream("init");
  const EncoderParams enc = EncoderParams::init(8, 12, 8, 0.0, init);
  const EvalReport report = evaluate(enc, val_ds, cfg);
  REQUIRE(report.per_seed.size() == 3);
  CHECK(report.seeds == std::vector<std::uint64_t>{1, 3, 5});
  double mean = 0.0;
  for (double a : report.per_seed) mean += a;
  mean /= 3.0;
  CHECK(report.mean_accuracy == doctest::Approx(mean).epsilon(1e-15));
  CHECK(report.std_accuracy >= 0.0);
}

TEST_CASE("reg-effect report compares a model against itself exactly") {
  const Dataset val_ds = generate_synthetic(4, 24, 8, 6.0, 1.0, 23, Split::MetaVal, "va");
  Rng init = Rng(3).substream("init");
  const EncoderParams enc = EncoderParams::init(8, 12, 8, 0.0, init);
  SamplerConfig sampler;
  sampler.shots = 2;
  sampler.supports = 4;
  const RegEffectReport report = reg_effect_report(enc, enc, val_ds, 50, sampler, 77);
  CHECK(report.episodes == 50);
  CHECK(report.unreg.mean_centroid_distance == report.reg.mean_centroid_distance);
  CHECK(report.unreg.mean_var_fro == report.reg.mean_var_fro);
  CHECK(report.unreg.mean_var_fro > 0.0);

  const RegEffectReport again = reg_effect_report(enc, enc, val_ds, 50, sampler, 77);
  CHECK(report.unreg.mean_centroid_distance == again.unreg.mean_centroid_distance);
}
