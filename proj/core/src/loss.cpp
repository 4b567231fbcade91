#include "vaproto/loss.hpp"

#include <cmath>
#include <string>

namespace vaproto {

namespace {

NodeId encode_on_tape(Tape& tape, const std::array<NodeId, 4>& params,
                      const EncoderParams& p, const Vector& x, bool train,
                      Rng* dropout_rng) {
  const NodeId input = tape.leaf(x);
  NodeId h = tape.add(tape.matvec(params[0], p.hidden_dim, p.input_dim, input),
                      params[1]);
  h = tape.relu(h);
  NodeId e = tape.add(tape.matvec(params[2], p.embed_dim, p.hidden_dim, h),
                      params[3]);
  if (train && p.dropout_rate > 0.0) {
    Vector mask(p.embed_dim);
    const double keep = 1.0 - p.dropout_rate;
    for (auto& m : mask) {
      m = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
    }
    e = tape.dropout(e, std::move(mask));
  }
  return e;
}

}  // namespace

EpisodeLoss episode_loss(const EncoderParams& params, const Episode& episode,
                         double lambda, LossMode mode, CovKind kind,
                         Rng* dropout_rng) {
  if (lambda < 0.0) throw UsageError("episode_loss: lambda must be >= 0");
  if (episode.ways == 0 || episode.support.empty() || episode.query.empty()) {
    throw UsageError("episode_loss: empty episode");
  }
  const bool train = mode == LossMode::Train;
  if (train && params.dropout_rate > 0.0 && dropout_rng == nullptr) {
    throw UsageError("episode_loss: train mode needs a dropout rng");
  }

  EpisodeLoss out;
  Tape& tape = out.tape;
  out.params = {tape.leaf_matrix(params.w1), tape.leaf(params.b1),
                tape.leaf_matrix(params.w2), tape.leaf(params.b2)};

  // Support embeddings, grouped by local class.
  std::vector<std::vector<NodeId>> per_class(episode.ways);
  for (const auto& slot : episode.support) {
    per_class[slot.cls].push_back(
        encode_on_tape(tape, out.params, params, slot.features, train,
                       dropout_rng));
  }
  std::vector<NodeId> means(episode.ways);
  std::vector<NodeId> vars(episode.ways);
  for (std::uint32_t c = 0; c < episode.ways; ++c) {
    if (per_class[c].empty()) {
      throw UsageError("episode_loss: class " + std::to_string(c) +
                       " has no support");
    }
    means[c] = tape.mean_of(per_class[c]);
    vars[c] = tape.variance_of(per_class[c]);
    if (kind == CovKind::Isotropic) vars[c] = tape.isotropize(vars[c]);
  }

  std::vector<NodeId> query_ce;
  query_ce.reserve(episode.query.size());
  std::vector<NodeId> logits(episode.ways);
  for (const auto& slot : episode.query) {
    const NodeId q = encode_on_tape(tape, out.params, params, slot.features,
                                    train, dropout_rng);
    for (std::uint32_t c = 0; c < episode.ways; ++c) {
      logits[c] = tape.gauss_point_logit(q, means[c], vars[c]);
    }
    query_ce.push_back(tape.softmax_xent(tape.pack(logits), slot.cls));
  }
  const NodeId nll = tape.mean_of(query_ce);

  NodeId total = nll;
  if (lambda > 0.0) {
    NodeId reg_sum = tape.l2_norm(vars[0]);
    for (std::uint32_t c = 1; c < episode.ways; ++c) {
      reg_sum = tape.add(reg_sum, tape.l2_norm(vars[c]));
    }
    const NodeId reg =
        tape.scale(reg_sum, lambda / static_cast<double>(episode.ways));
    out.regularizer = tape.value(reg)[0];
    total = tape.add(nll, reg);
  }

  out.loss = total;
  out.nll = tape.value(nll)[0];
  out.value = tape.value(total)[0];
  if (!std::isfinite(out.value)) {
    throw NumericError("episode_loss: non-finite loss on episode " +
                       std::to_string(episode.sequence) + " (dataset " +
                       std::to_string(episode.dataset) + ")");
  }
  return out;
}

}  // namespace vaproto
