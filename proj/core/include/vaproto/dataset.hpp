#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vaproto/numeric.hpp"
#include "vaproto/rng.hpp"

namespace vaproto {

enum class Split { MetaTrain, MetaVal, Downstream };

std::string to_string(Split split);
Split split_from_string(const std::string& name);

enum class FileFormat { Jsonl, Csv };

FileFormat format_from_string(const std::string& name);

struct LabeledExample {
  Vector features;
  std::uint32_t label = 0;           // interned id, first-appearance order
  std::uint32_t source_dataset = 0;
};

// Provenance of a synthetic dataset, carried in the file sidecar.
struct SyntheticSpec {
  std::uint32_t labels = 0;
  std::uint32_t per_label = 0;
  std::uint32_t dim = 0;
  double separation = 0.0;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string label_prefix;
};

// Immutable after construction/load; feature dimension is uniform across
// examples and label ids index label_names in first-appearance order.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::string name, Split split, std::uint32_t id = 0)
      : name_(std::move(name)), split_(split), id_(id) {}

  std::uint32_t intern_label(const std::string& label);
  void add_example(const std::string& label, Vector features);

  const std::string& name() const { return name_; }
  Split split() const { return split_; }
  std::uint32_t id() const { return id_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return examples_.size(); }
  std::size_t label_count() const { return label_names_.size(); }

  const std::vector<LabeledExample>& examples() const { return examples_; }
  const std::string& label_name(std::uint32_t id) const;
  std::optional<std::uint32_t> label_id(const std::string& name) const;
  const std::vector<std::size_t>& examples_of(std::uint32_t label) const;
  const std::vector<std::string>& label_names() const { return label_names_; }

  void set_split(Split split) { split_ = split; }
  void set_id(std::uint32_t id) { id_ = id; }
  void set_synthetic_spec(SyntheticSpec spec) { synthetic_ = std::move(spec); }
  const std::optional<SyntheticSpec>& synthetic_spec() const { return synthetic_; }

 private:
  std::string name_;
  Split split_ = Split::Downstream;
  std::uint32_t id_ = 0;
  std::size_t dim_ = 0;
  std::vector<LabeledExample> examples_;
  std::vector<std::string> label_names_;
  std::unordered_map<std::string, std::uint32_t> label_ids_;
  std::vector<std::vector<std::size_t>> label_index_;
  std::optional<SyntheticSpec> synthetic_;
};

// Per label: a center drawn uniformly on the sphere of radius
// `separation`, then `per_label` examples as center + N(0, noise^2 I).
Dataset generate_synthetic(std::uint32_t labels, std::uint32_t per_label,
                           std::uint32_t dim, double separation, double noise,
                           std::uint64_t seed, Split split = Split::MetaTrain,
                           const std::string& label_prefix = "label");

// JSONL: one {"label": ..., "features": [...]} object per line, with an
// optional first-line sidecar {"dim": n, "split": s, ...}. CSV: header row
// "label,f1,...,fn" required. Errors cite the offending record.
Dataset load_dataset(const std::filesystem::path& path, FileFormat format);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path,
                  FileFormat format);

// Label-name sets must not overlap between meta-train and meta-val data.
void ensure_label_disjoint(const Dataset& a, const Dataset& b);

}  // namespace vaproto
