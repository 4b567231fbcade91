#pragma once

#include <array>

#include "vaproto/encoder.hpp"
#include "vaproto/prototypes.hpp"
#include "vaproto/rng.hpp"
#include "vaproto/sampler.hpp"
#include "vaproto/tape.hpp"

namespace vaproto {

enum class LossMode { Train, Eval };

struct EpisodeLoss {
  double value = 0.0;        // nll + regularizer
  double nll = 0.0;          // mean query cross-entropy
  double regularizer = 0.0;  // lambda/ways * sum_c ||Sigma_c||_F
  Tape tape;
  NodeId loss = -1;
  std::array<NodeId, 4> params{-1, -1, -1, -1};  // w1, b1, w2, b2 leaves
};

// Builds the episode objective on a fresh tape: encode support and query,
// per-class mean/variance stats, cross-entropy of the softmax over
// negated (squared distance + variance trace) logits averaged over all
// queries, plus the variance-norm regularizer averaged over classes.
// Dropout is applied only in Train mode and draws its masks from
// `dropout_rng` (required when the encoder has a nonzero dropout rate).
// A non-finite result raises NumericError naming the episode.
EpisodeLoss episode_loss(const EncoderParams& params, const Episode& episode,
                         double lambda, LossMode mode,
                         CovKind kind = CovKind::Diagonal,
                         Rng* dropout_rng = nullptr);

}  // namespace vaproto
