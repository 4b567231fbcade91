#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vaproto/dataset.hpp"
#include "vaproto/encoder.hpp"
#include "vaproto/prototypes.hpp"

namespace vaproto {

inline constexpr int kRegistryFormatVersion = 1;

struct TaskClass {
  std::uint32_t label_id = 0;
  std::string label_name;
  ClassGaussian stats;
};

struct TaskEntry {
  std::size_t dim = 0;
  std::uint32_t ood_k = 10;
  std::vector<TaskClass> classes;            // ascending label_id
  std::vector<std::size_t> dataset_indices;  // strictly increasing

  std::vector<ClassGaussian> gaussians() const;
};

struct Classification {
  std::vector<std::uint32_t> class_label_ids;  // column order
  std::vector<std::string> class_label_names;
  std::vector<std::uint32_t> label_ids;        // argmax per query
  std::vector<std::string> labels;
  Matrix probabilities;                        // rows ~ queries
};

// Persistent map task -> class statistics, plus per-task top-variance
// dimension indices for the out-of-distribution monitor.
class StatsRegistry {
 public:
  // Encodes every example (dropout off), fits one Gaussian per label and
  // the task's top-`ood_k`-variance index set, and stores the entry under
  // `task_id` (replacing any previous entry). The registry is bound to
  // the first encoder it sees; fitting with a different one is an error.
  TaskEntry& fit_task(const EncoderParams& params, const Dataset& labeled,
                      const std::string& task_id, CovKind kind,
                      std::uint32_t ood_k = 10);

  // Queries are embedding-space vectors. `expected_fingerprint`, when
  // given, is warn-checked against the stored one.
  Classification classify(const std::string& task_id,
                          std::span<const Vector> queries,
                          const std::string* expected_fingerprint = nullptr) const;

  const std::map<std::string, TaskEntry>& tasks() const { return tasks_; }
  const TaskEntry& task(const std::string& task_id) const;
  const std::string& encoder_fingerprint() const { return fingerprint_; }
  void set_encoder_fingerprint(std::string fp) { fingerprint_ = std::move(fp); }
  void put_task(const std::string& task_id, TaskEntry entry);

 private:
  std::string fingerprint_;
  std::map<std::string, TaskEntry> tasks_;
};

// Versioned JSON with every float stored as the hex bit pattern of its
// 64-bit value (plus a decimal shadow for humans); round-trips are
// bit-exact. load validates invariants and rejects unsupported versions;
// nothing is returned on parse failure.
void save_registry(const StatsRegistry& registry,
                   const std::filesystem::path& path);
StatsRegistry load_registry(const std::filesystem::path& path);

struct StabilityReport {
  std::vector<std::uint32_t> k_values;
  std::uint32_t resamples = 0;
  std::vector<std::vector<double>> accuracies;  // per k, per resample
  std::vector<double> mean;
  std::vector<double> stddev;  // sample std over resamples
};

// For each k: `resamples` times, fit prototypes from k examples per class
// of fit_set and score eval_set. Labels of eval_set must all appear in
// fit_set, and every fit label needs at least max(k_values) examples.
StabilityReport stability_experiment(const EncoderParams& params,
                                     const Dataset& fit_set,
                                     std::span<const std::uint32_t> k_values,
                                     std::uint32_t resamples,
                                     const Dataset& eval_set,
                                     std::uint64_t seed,
                                     CovKind kind = CovKind::Diagonal);

}  // namespace vaproto
