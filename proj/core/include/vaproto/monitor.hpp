#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vaproto/prototypes.hpp"
#include "vaproto/registry.hpp"

namespace vaproto {

struct OodConfig {
  std::uint32_t k = 10;
  double threshold = 0.5;
};

struct OodScore {
  double value = 0.0;  // in [0, 1]
  bool flagged = false;
  std::vector<std::size_t> contributing_indices;  // union hits inside ds_idx
};

// Indices of the k largest entries, ties broken by lowest index; sorted
// ascending. k must not exceed the vector length.
std::vector<std::size_t> top_k_indices(std::span<const double> values,
                                       std::uint32_t k);

// Union over classes of each class's top-k-variance dimensions.
std::vector<std::size_t> dataset_indices(std::span<const ClassGaussian> classes,
                                         std::uint32_t k);

// Average Variance Indices score: per class, the top-k dimensions of
// |query - mean| are collected; the union's overlap with ds_idx, divided
// by |ds_idx|, is the score. A query is flagged when it falls below the
// threshold.
OodScore avi_score(const Vector& query, std::span<const ClassGaussian> classes,
                   std::span<const std::size_t> ds_idx, const OodConfig& cfg);

// Literal variant that divides the full union cardinality by |ds_idx|
// without intersecting; may exceed 1. Diagnostic only.
double avi_union_ratio(const Vector& query,
                       std::span<const ClassGaussian> classes,
                       std::span<const std::size_t> ds_idx,
                       std::uint32_t k);

struct MonitorResult {
  std::vector<OodScore> scores;
  std::size_t flagged = 0;
  std::size_t total = 0;
};

MonitorResult batch_monitor(std::span<const Vector> queries,
                            const TaskEntry& task, const OodConfig& cfg);

}  // namespace vaproto
