#include "vaproto/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vaproto/prototypes.hpp"

namespace vaproto {

double global_norm(std::span<const Vector> tensors) {
  double acc = 0.0;
  for (const auto& t : tensors) {
    for (double x : t) acc += x * x;
  }
  return std::sqrt(acc);
}

double clip_gradients(std::vector<Vector>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm <= 0.0 || norm <= max_norm) return norm;
  const double scale = max_norm / norm;
  for (auto& t : grads) {
    for (double& x : t) x *= scale;
  }
  return global_norm(grads);
}

AdamW::AdamW(std::size_t tensor_count, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(tensor_count), v_(tensor_count) {}

void AdamW::step(std::span<Vector* const> params, std::span<const Vector> grads,
                 double lr, double weight_decay) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw UsageError("AdamW: tensor count mismatch");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Vector& w = *params[i];
    const Vector& g = grads[i];
    if (m_[i].empty()) {
      m_[i].assign(w.size(), 0.0);
      v_[i].assign(w.size(), 0.0);
    }
    for (std::size_t j = 0; j < w.size(); ++j) {
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g[j];
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g[j] * g[j];
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      w[j] -= lr * (mhat / (std::sqrt(vhat) + eps_) + weight_decay * w[j]);
    }
  }
}

namespace {

// Accuracy over `tasks` episodes drawn from `rng`; dropout off.
double episodic_accuracy(const EncoderParams& params, const Dataset& dataset,
                         const TrainConfig& cfg, std::uint32_t tasks,
                         Rng rng) {
  const Dataset* view = &dataset;
  std::span<const Dataset> span(view, 1);
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<Vector> embedded;
  std::vector<Vector> queries;
  for (std::uint32_t t = 0; t < tasks; ++t) {
    const Episode ep = sample_episode(span, cfg.sampler, rng, t);
    std::vector<ClassGaussian> classes;
    classes.reserve(ep.ways);
    embedded.clear();
    std::size_t offset = 0;
    for (std::uint32_t c = 0; c < ep.ways; ++c) {
      std::vector<Vector> support;
      support.reserve(ep.supports);
      for (std::uint32_t i = 0; i < ep.supports; ++i) {
        support.push_back(params.forward(ep.support[offset + i].features));
      }
      offset += ep.supports;
      classes.push_back(class_stats(support, cfg.kind));
    }
    queries.clear();
    queries.reserve(ep.query.size());
    for (const auto& slot : ep.query) {
      queries.push_back(params.forward(slot.features));
    }
    const auto picks = predict(queries, classes);
    for (std::size_t q = 0; q < picks.size(); ++q) {
      if (picks[q] == ep.query[q].cls) ++correct;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) /
                                static_cast<double>(total);
}

}  // namespace

TrainResult train(std::span<const Dataset> meta_train, const Dataset& meta_val,
                  const TrainConfig& cfg) {
  if (meta_train.empty()) throw UsageError("train: no meta-train datasets");
  if (cfg.learning_rate < 0.0) throw UsageError("train: negative learning rate");
  if (cfg.lambda < 0.0) throw UsageError("train: negative lambda");
  for (const auto& ds : meta_train) {
    ensure_label_disjoint(ds, meta_val);
  }
  const std::size_t input_dim = meta_train[0].dim();
  for (const auto& ds : meta_train) {
    if (ds.dim() != input_dim) {
      throw UsageError("train: meta-train feature dimensions differ");
    }
  }
  if (meta_val.dim() != input_dim) {
    throw UsageError("train: meta-train and meta-val feature dimensions differ");
  }

  // Eligibility shrinkage is silent in the sampler; surface it once here.
  for (const auto& ds : meta_train) {
    const auto eligible = eligible_labels(ds, cfg.sampler);
    if (eligible.size() < ds.label_count()) {
      warn("dataset '" + ds.name() + "': " +
           std::to_string(ds.label_count() - eligible.size()) + " of " +
           std::to_string(ds.label_count()) +
           " labels excluded (fewer than shots+supports examples)");
    }
  }

  Rng init_rng = Rng(cfg.seed).substream("init");
  Rng episode_rng = Rng(cfg.seed).substream("episodes");
  Rng dropout_rng = Rng(cfg.seed).substream("dropout");

  TrainResult result;
  EncoderParams params = EncoderParams::init(input_dim, cfg.hidden_dim,
                                             cfg.embed_dim, cfg.dropout, init_rng);
  AdamW optimizer(params.tensors().size());

  result.params = params;  // untrained fallback
  result.best_metaval = -1.0;

  const std::uint64_t total_steps =
      static_cast<std::uint64_t>(cfg.epochs) * cfg.episodes_per_epoch;
  std::uint64_t step_index = 0;
  std::uint32_t epochs_without_improvement = 0;

  for (std::uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    double lr_last = cfg.learning_rate;
    bool diverged = false;
    for (std::uint32_t e = 0; e < cfg.episodes_per_epoch; ++e) {
      const Episode ep =
          sample_episode(meta_train, cfg.sampler, episode_rng, step_index);
      double lr = cfg.learning_rate;
      if (cfg.lr_schedule == LrSchedule::LinearDecay && total_steps > 0) {
        lr *= 1.0 - static_cast<double>(step_index) /
                        static_cast<double>(total_steps);
      }
      lr_last = lr;
      try {
        EpisodeLoss loss = episode_loss(params, ep, cfg.lambda,
                                        LossMode::Train, cfg.kind, &dropout_rng);
        loss.tape.backward(loss.loss);
        std::vector<Vector> grads;
        grads.reserve(loss.params.size());
        for (NodeId id : loss.params) grads.push_back(loss.tape.grad(id));
        clip_gradients(grads, cfg.grad_clip_norm);
        optimizer.step(params.tensors(), grads, lr, cfg.weight_decay);
        if (!params.finite()) {
          throw NumericError("train: non-finite parameters after step " +
                             std::to_string(step_index));
        }
        loss_sum += loss.value;
      } catch (const NumericError& err) {
        warn(std::string("training diverged: ") + err.what());
        diverged = true;
        break;
      }
      ++step_index;
    }
    if (diverged) {
      result.diverged = true;
      result.epochs_run = epoch;
      return result;  // last good checkpoint already in result.params
    }

    const double metaval = episodic_accuracy(
        params, meta_val, cfg, cfg.eval_tasks,
        Rng(cfg.seed).substream("metaval"));
    const double mean_loss =
        cfg.episodes_per_epoch == 0
            ? 0.0
            : loss_sum / static_cast<double>(cfg.episodes_per_epoch);
    result.log.push_back(EpochRecord{epoch, mean_loss, metaval, lr_last});
    result.epochs_run = epoch;

    // Ties keep the most recent parameters; patience counts epochs
    // without strict improvement.
    if (metaval >= result.best_metaval) {
      if (metaval > result.best_metaval) {
        epochs_without_improvement = 0;
      } else {
        ++epochs_without_improvement;
      }
      result.best_metaval = metaval;
      result.best_epoch = epoch;
      result.params = params;
    } else {
      ++epochs_without_improvement;
    }
    if (cfg.early_stop_patience > 0 &&
        epochs_without_improvement >= cfg.early_stop_patience) {
      break;
    }
  }
  return result;
}

EvalReport evaluate(const EncoderParams& params, const Dataset& dataset,
                    const TrainConfig& cfg) {
  if (cfg.eval_seeds.empty()) throw UsageError("evaluate: no seeds");
  EvalReport report;
  report.seeds = cfg.eval_seeds;
  std::sort(report.seeds.begin(), report.seeds.end());
  report.tasks_evaluated = cfg.eval_tasks;
  for (const std::uint64_t seed : report.seeds) {
    report.per_seed.push_back(episodic_accuracy(
        params, dataset, cfg, cfg.eval_tasks, Rng(seed).substream("eval")));
  }
  double total = 0.0;
  for (double a : report.per_seed) total += a;
  report.mean_accuracy = total / static_cast<double>(report.per_seed.size());
  if (report.per_seed.size() > 1) {
    double ss = 0.0;
    for (double a : report.per_seed) {
      const double d = a - report.mean_accuracy;
      ss += d * d;
    }
    report.std_accuracy =
        std::sqrt(ss / static_cast<double>(report.per_seed.size() - 1));
  }
  return report;
}

RegEffectReport reg_effect_report(const EncoderParams& unreg,
                                  const EncoderParams& reg,
                                  const Dataset& dataset,
                                  std::uint32_t episodes,
                                  const SamplerConfig& sampler,
                                  std::uint64_t seed) {
  RegEffectReport report;
  report.episodes = episodes;
  SamplerConfig cfg = sampler;
  cfg.ways = 2;
  Rng rng = Rng(seed).substream("reg-effect");
  const Dataset* view = &dataset;
  std::span<const Dataset> span(view, 1);

  const EncoderParams* models[2] = {&unreg, &reg};
  RegEffectReport::Side* sides[2] = {&report.unreg, &report.reg};
  for (std::uint32_t t = 0; t < episodes; ++t) {
    const Episode ep = sample_episode(span, cfg, rng, t);
    for (int m = 0; m < 2; ++m) {
      std::vector<ClassGaussian> classes;
      std::size_t offset = 0;
      for (std::uint32_t c = 0; c < ep.ways; ++c) {
        std::vector<Vector> support;
        support.reserve(ep.supports);
        for (std::uint32_t i = 0; i < ep.supports; ++i) {
          support.push_back(models[m]->forward(ep.support[offset + i].features));
        }
        offset += ep.supports;
        classes.push_back(class_stats(support, CovKind::Diagonal));
      }
      sides[m]->mean_centroid_distance +=
          std::sqrt(squared_distance(classes[0].mean, classes[1].mean));
      sides[m]->mean_var_fro +=
          (classes[0].var_frobenius() + classes[1].var_frobenius()) / 2.0;
    }
  }
  if (episodes > 0) {
    for (auto* side : sides) {
      side->mean_centroid_distance /= static_cast<double>(episodes);
      side->mean_var_fro /= static_cast<double>(episodes);
    }
  }
  return report;
}

}  // namespace vaproto
