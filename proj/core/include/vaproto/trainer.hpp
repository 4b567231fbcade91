#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vaproto/dataset.hpp"
#include "vaproto/encoder.hpp"
#include "vaproto/loss.hpp"
#include "vaproto/sampler.hpp"

namespace vaproto {

enum class LrSchedule { LinearDecay, Constant };

struct TrainConfig {
  double lambda = 0.1;
  std::uint32_t epochs = 30;
  std::uint32_t episodes_per_epoch = 100;
  double learning_rate = 3e-5;
  double weight_decay = 1e-4;
  double grad_clip_norm = 3.0;
  LrSchedule lr_schedule = LrSchedule::LinearDecay;
  std::uint32_t early_stop_patience = 5;
  std::uint64_t seed = 0;
  SamplerConfig sampler;  // ways/shots/supports/weighting; seed comes from `seed`
  std::uint32_t eval_tasks = 1000;
  std::vector<std::uint64_t> eval_seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  CovKind kind = CovKind::Diagonal;
  std::uint32_t hidden_dim = 64;
  std::uint32_t embed_dim = 64;
  double dropout = 0.1;
};

struct EpochRecord {
  std::uint32_t epoch = 0;       // 1-based
  double mean_train_loss = 0.0;
  double metaval_accuracy = 0.0;
  double lr = 0.0;               // rate used on the epoch's last step
};

struct TrainResult {
  EncoderParams params;  // checkpoint with best meta-val accuracy
  std::vector<EpochRecord> log;
  std::uint32_t epochs_run = 0;
  std::uint32_t best_epoch = 0;
  double best_metaval = 0.0;
  bool diverged = false;  // aborted, params is the last good checkpoint
};

struct EvalReport {
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample std across seeds
  std::vector<std::uint64_t> seeds;
  std::vector<double> per_seed;
  std::uint32_t tasks_evaluated = 0;  // per seed
};

struct RegEffectReport {
  struct Side {
    double mean_centroid_distance = 0.0;
    double mean_var_fro = 0.0;  // mean per-class ||Sigma||_F
  };
  Side unreg;
  Side reg;
  std::uint32_t episodes = 0;
};

double global_norm(std::span<const Vector> tensors);

// Scales gradients so the global norm is at most max_norm; returns the
// norm after clipping. max_norm <= 0 disables clipping.
double clip_gradients(std::vector<Vector>& grads, double max_norm);

// Decoupled-weight-decay Adam over the encoder tensors.
class AdamW {
 public:
  AdamW(std::size_t tensor_count, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8);
  void step(std::span<Vector* const> params, std::span<const Vector> grads,
            double lr, double weight_decay);

 private:
  double beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<Vector> m_;
  std::vector<Vector> v_;
};

// Episodic training: sample episode, backward, clip, AdamW step, linear
// LR decay across all steps; evaluate on meta-val after every epoch and
// keep the best checkpoint (ties keep the most recent). Stops early after
// `early_stop_patience` epochs without strict improvement. On numeric
// divergence the last good checkpoint is retained and `diverged` is set.
TrainResult train(std::span<const Dataset> meta_train, const Dataset& meta_val,
                  const TrainConfig& cfg);

// Accuracy over cfg.eval_tasks episodes per seed, dropout off,
// mean +/- sample std across cfg.eval_seeds.
EvalReport evaluate(const EncoderParams& params, const Dataset& dataset,
                    const TrainConfig& cfg);

// Over `episodes` binary episodes: mean distance between the two class
// centroids and mean per-class variance Frobenius norm, for both models
// on identical episodes.
RegEffectReport reg_effect_report(const EncoderParams& unreg,
                                  const EncoderParams& reg,
                                  const Dataset& dataset,
                                  std::uint32_t episodes,
                                  const SamplerConfig& sampler,
                                  std::uint64_t seed);

}  // namespace vaproto
