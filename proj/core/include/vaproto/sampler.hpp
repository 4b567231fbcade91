#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vaproto/dataset.hpp"
#include "vaproto/rng.hpp"

namespace vaproto {

// Convention: `shots` counts query examples per class and `supports`
// counts support examples per class.
struct SamplerConfig {
  enum class Weighting { Uniform, SqrtSize };

  std::uint32_t ways = 4;
  std::uint32_t shots = 8;
  std::uint32_t supports = 16;
  std::uint64_t seed = 0;
  Weighting weighting = Weighting::Uniform;
};

struct Episode {
  struct Slot {
    Vector features;
    std::uint32_t cls = 0;          // local class, 0..ways-1
    std::size_t source_index = 0;   // example index in the source dataset
  };

  std::uint32_t ways = 0;
  std::uint32_t shots = 0;
  std::uint32_t supports = 0;
  std::uint32_t dataset = 0;        // source dataset id
  std::uint64_t sequence = 0;       // draw ordinal, for diagnostics
  std::vector<Slot> support;        // ways*supports slots, grouped by class
  std::vector<Slot> query;          // ways*shots slots, grouped by class
  std::vector<std::uint32_t> label_map;  // local class -> dataset label id
};

// Labels with at least shots+supports examples, ascending label id.
std::vector<std::uint32_t> eligible_labels(const Dataset& dataset,
                                           const SamplerConfig& cfg);

// Picks a dataset (uniform or sqrt-of-size weighted over eligible ones),
// then `ways` distinct eligible labels, then shots+supports distinct
// examples per label: the first `supports` of each draw become support,
// the remainder query. Raises UsageError when no dataset qualifies.
Episode sample_episode(std::span<const Dataset> datasets,
                       const SamplerConfig& cfg, Rng& rng,
                       std::uint64_t sequence = 0);

}  // namespace vaproto
