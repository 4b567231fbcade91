#include "vaproto/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace vaproto {

namespace {

// Partial Fisher-Yates: the first `take` entries of `pool` become a
// uniform draw without replacement.
void draw_prefix(std::vector<std::size_t>& pool, std::size_t take, Rng& rng) {
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
}

}  // namespace

std::vector<std::uint32_t> eligible_labels(const Dataset& dataset,
                                           const SamplerConfig& cfg) {
  const std::size_t need = cfg.shots + cfg.supports;
  std::vector<std::uint32_t> out;
  for (std::uint32_t l = 0; l < dataset.label_count(); ++l) {
    if (dataset.examples_of(l).size() >= need) out.push_back(l);
  }
  return out;
}

Episode sample_episode(std::span<const Dataset> datasets,
                       const SamplerConfig& cfg, Rng& rng,
                       std::uint64_t sequence) {
  if (cfg.ways < 2) throw UsageError("sampler: ways must be >= 2");
  if (cfg.shots == 0 || cfg.supports == 0) {
    throw UsageError("sampler: shots and supports must be positive");
  }

  std::vector<std::size_t> candidates;
  std::vector<std::vector<std::uint32_t>> candidate_labels;
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    auto labels = eligible_labels(datasets[d], cfg);
    if (labels.size() >= cfg.ways) {
      candidates.push_back(d);
      candidate_labels.push_back(std::move(labels));
    }
  }
  if (candidates.empty()) {
    throw UsageError(
        "sampler: no dataset has " + std::to_string(cfg.ways) +
        " labels with at least " + std::to_string(cfg.shots + cfg.supports) +
        " examples (shots " + std::to_string(cfg.shots) + " + supports " +
        std::to_string(cfg.supports) + ")");
  }

  std::size_t pick = 0;
  if (candidates.size() > 1) {
    if (cfg.weighting == SamplerConfig::Weighting::SqrtSize) {
      std::vector<double> weights(candidates.size());
      double total = 0.0;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        weights[i] = std::sqrt(static_cast<double>(datasets[candidates[i]].size()));
        total += weights[i];
      }
      const double u = rng.uniform() * total;
      double acc = 0.0;
      pick = candidates.size() - 1;
      for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(candidates.size());
    }
  }

  const Dataset& ds = datasets[candidates[pick]];
  auto& labels = candidate_labels[pick];

  std::vector<std::size_t> label_pool(labels.size());
  std::iota(label_pool.begin(), label_pool.end(), 0);
  draw_prefix(label_pool, cfg.ways, rng);

  Episode ep;
  ep.ways = cfg.ways;
  ep.shots = cfg.shots;
  ep.supports = cfg.supports;
  ep.dataset = ds.id();
  ep.sequence = sequence;
  ep.support.reserve(static_cast<std::size_t>(cfg.ways) * cfg.supports);
  ep.query.reserve(static_cast<std::size_t>(cfg.ways) * cfg.shots);
  ep.label_map.reserve(cfg.ways);

  for (std::uint32_t c = 0; c < cfg.ways; ++c) {
    const std::uint32_t label = labels[label_pool[c]];
    ep.label_map.push_back(label);
    std::vector<std::size_t> pool = ds.examples_of(label);
    draw_prefix(pool, cfg.supports + cfg.shots, rng);
    for (std::uint32_t i = 0; i < cfg.supports; ++i) {
      const std::size_t idx = pool[i];
      ep.support.push_back({ds.examples()[idx].features, c, idx});
    }
    for (std::uint32_t i = 0; i < cfg.shots; ++i) {
      const std::size_t idx = pool[cfg.supports + i];
      ep.query.push_back({ds.examples()[idx].features, c, idx});
    }
  }
  return ep;
}

}  // namespace vaproto
