#include "vaproto/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace vaproto {

std::vector<std::size_t> top_k_indices(std::span<const double> values,
                                       std::uint32_t k) {
  if (k > values.size()) {
    throw UsageError("top_k_indices: k " + std::to_string(k) +
                     " exceeds dimension " + std::to_string(values.size()));
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (values[a] != values[b]) return values[a] > values[b];
                      return a < b;  // ties go to the lowest index
                    });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<std::size_t> dataset_indices(std::span<const ClassGaussian> classes,
                                         std::uint32_t k) {
  if (classes.empty()) throw UsageError("dataset_indices: no classes");
  std::vector<std::size_t> out;
  for (const auto& g : classes) {
    const Vector vars = g.variances();
    const auto top = top_k_indices(vars, k);
    out.insert(out.end(), top.begin(), top.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

std::vector<std::size_t> difference_union(
    const Vector& query, std::span<const ClassGaussian> classes,
    std::uint32_t k) {
  if (classes.empty()) throw UsageError("avi_score: no classes");
  std::vector<std::size_t> united;
  Vector diff(query.size());
  for (const auto& g : classes) {
    if (g.dim() != query.size()) {
      throw UsageError("avi_score: query dim " + std::to_string(query.size()) +
                       " != class dim " + std::to_string(g.dim()));
    }
    for (std::size_t i = 0; i < query.size(); ++i) {
      diff[i] = std::abs(query[i] - g.mean[i]);
    }
    const auto top = top_k_indices(diff, k);
    united.insert(united.end(), top.begin(), top.end());
  }
  std::sort(united.begin(), united.end());
  united.erase(std::unique(united.begin(), united.end()), united.end());
  return united;
}

}  // namespace

OodScore avi_score(const Vector& query, std::span<const ClassGaussian> classes,
                   std::span<const std::size_t> ds_idx, const OodConfig& cfg) {
  if (ds_idx.empty()) throw UsageError("avi_score: empty dataset index set");
  const auto united = difference_union(query, classes, cfg.k);
  OodScore score;
  std::set_intersection(united.begin(), united.end(), ds_idx.begin(),
                        ds_idx.end(),
                        std::back_inserter(score.contributing_indices));
  score.value = static_cast<double>(score.contributing_indices.size()) /
                static_cast<double>(ds_idx.size());
  score.flagged = score.value < cfg.threshold;
  return score;
}

double avi_union_ratio(const Vector& query,
                       std::span<const ClassGaussian> classes,
                       std::span<const std::size_t> ds_idx, std::uint32_t k) {
  if (ds_idx.empty()) throw UsageError("avi_union_ratio: empty dataset index set");
  const auto united = difference_union(query, classes, k);
  return static_cast<double>(united.size()) /
         static_cast<double>(ds_idx.size());
}

MonitorResult batch_monitor(std::span<const Vector> queries,
                            const TaskEntry& task, const OodConfig& cfg) {
  MonitorResult result;
  result.total = queries.size();
  if (queries.empty()) return result;
  const auto gaussians = task.gaussians();
  result.scores.reserve(queries.size());
  for (const auto& q : queries) {
    result.scores.push_back(
        avi_score(q, gaussians, task.dataset_indices, cfg));
    if (result.scores.back().flagged) ++result.flagged;
  }
  return result;
}

}  // namespace vaproto
