#include "vaproto/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace vaproto {

using nlohmann::json;

std::string to_string(Split split) {
  switch (split) {
    case Split::MetaTrain: return "meta-train";
    case Split::MetaVal: return "meta-val";
    case Split::Downstream: return "downstream";
  }
  return "downstream";
}

Split split_from_string(const std::string& name) {
  if (name == "meta-train") return Split::MetaTrain;
  if (name == "meta-val") return Split::MetaVal;
  if (name == "downstream") return Split::Downstream;
  throw UsageError("unknown split '" + name +
                   "' (expected meta-train, meta-val, or downstream)");
}

FileFormat format_from_string(const std::string& name) {
  if (name == "jsonl") return FileFormat::Jsonl;
  if (name == "csv") return FileFormat::Csv;
  throw UsageError("unknown format '" + name + "' (expected jsonl or csv)");
}

std::uint32_t Dataset::intern_label(const std::string& label) {
  auto it = label_ids_.find(label);
  if (it != label_ids_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(label_names_.size());
  label_ids_.emplace(label, id);
  label_names_.push_back(label);
  label_index_.emplace_back();
  return id;
}

void Dataset::add_example(const std::string& label, Vector features) {
  if (examples_.empty()) {
    dim_ = features.size();
  } else if (features.size() != dim_) {
    throw UsageError("dataset '" + name_ + "': feature dimension " +
                     std::to_string(features.size()) + " != " +
                     std::to_string(dim_));
  }
  const std::uint32_t id = intern_label(label);
  label_index_[id].push_back(examples_.size());
  examples_.push_back(LabeledExample{std::move(features), id, id_});
}

const std::string& Dataset::label_name(std::uint32_t id) const {
  if (id >= label_names_.size()) {
    throw UsageError("dataset '" + name_ + "': label id " +
                     std::to_string(id) + " out of range");
  }
  return label_names_[id];
}

std::optional<std::uint32_t> Dataset::label_id(const std::string& name) const {
  auto it = label_ids_.find(name);
  if (it == label_ids_.end()) return std::nullopt;
  return it->second;
}

const std::vector<std::size_t>& Dataset::examples_of(std::uint32_t label) const {
  if (label >= label_index_.size()) {
    throw UsageError("dataset '" + name_ + "': label id " +
                     std::to_string(label) + " out of range");
  }
  return label_index_[label];
}

Dataset generate_synthetic(std::uint32_t labels, std::uint32_t per_label,
                           std::uint32_t dim, double separation, double noise,
                           std::uint64_t seed, Split split,
                           const std::string& label_prefix) {
  if (labels == 0 || per_label == 0 || dim == 0) {
    throw UsageError("generate_synthetic: labels, per_label, and dim must be positive");
  }
  if (separation <= 0.0 || noise < 0.0) {
    throw UsageError("generate_synthetic: separation must be > 0 and noise >= 0");
  }
  Dataset out("synthetic-" + std::to_string(seed), split);
  out.set_synthetic_spec(SyntheticSpec{labels, per_label, dim, separation,
                                       noise, seed, label_prefix});
  Rng rng = Rng(seed).substream("synthetic");
  for (std::uint32_t l = 0; l < labels; ++l) {
    Vector center(dim);
    double norm = 0.0;
    do {
      for (auto& x : center) x = rng.normal();
      norm = l2_norm(center);
    } while (norm == 0.0);
    for (auto& x : center) x *= separation / norm;
    std::string label = label_prefix + std::to_string(l);
    for (std::uint32_t e = 0; e < per_label; ++e) {
      Vector features(dim);
      for (std::size_t i = 0; i < dim; ++i) {
        features[i] = center[i] + noise * rng.normal();
      }
      out.add_example(label, std::move(features));
    }
  }
  return out;
}

namespace {

json sidecar_json(const Dataset& dataset) {
  json meta;
  meta["dim"] = dataset.dim();
  meta["split"] = to_string(dataset.split());
  if (const auto& spec = dataset.synthetic_spec()) {
    meta["generator"] = {
        {"labels", spec->labels},        {"per_label", spec->per_label},
        {"dim", spec->dim},              {"separation", spec->separation},
        {"noise", spec->noise},          {"seed", spec->seed},
        {"label_prefix", spec->label_prefix},
    };
  }
  return meta;
}

void apply_sidecar(Dataset& dataset, const json& meta) {
  if (meta.contains("split")) {
    dataset.set_split(split_from_string(meta["split"].get<std::string>()));
  }
  if (meta.contains("generator")) {
    const auto& g = meta["generator"];
    SyntheticSpec spec;
    spec.labels = g.value("labels", 0u);
    spec.per_label = g.value("per_label", 0u);
    spec.dim = g.value("dim", 0u);
    spec.separation = g.value("separation", 0.0);
    spec.noise = g.value("noise", 0.0);
    spec.seed = g.value("seed", std::uint64_t{0});
    spec.label_prefix = g.value("label_prefix", std::string{});
    dataset.set_synthetic_spec(std::move(spec));
  }
}

Dataset load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  Dataset out(path.stem().string(), Split::Downstream);
  std::string line;
  std::size_t line_no = 0;
  std::size_t records = 0;
  std::optional<std::size_t> expected_dim;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": invalid JSON (" + e.what() + ")");
    }
    if (!rec.is_object()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected a JSON object");
    }
    if (records == 0 && !rec.contains("label") &&
        (rec.contains("dim") || rec.contains("split"))) {
      if (rec.contains("dim")) expected_dim = rec["dim"].get<std::size_t>();
      apply_sidecar(out, rec);
      continue;
    }
    if (!rec.contains("label") || !rec.contains("features")) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": record needs 'label' and 'features'");
    }
    Vector features;
    try {
      features = rec["features"].get<Vector>();
    } catch (const json::exception&) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": 'features' must be an array of numbers");
    }
    if (expected_dim && features.size() != *expected_dim) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": record " + std::to_string(records + 1) + " has dim " +
                      std::to_string(features.size()) + ", expected " +
                      std::to_string(*expected_dim));
    }
    if (!expected_dim) expected_dim = features.size();
    if (!all_finite(features)) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": non-finite feature value");
    }
    out.add_example(rec["label"].get<std::string>(), std::move(features));
    ++records;
  }
  if (records == 0) {
    throw DataError(path.string() + ": no records");
  }
  return out;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  Dataset out(path.stem().string(), Split::Downstream);
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError(path.string() + ": no records");
  }
  if (line.rfind("label,", 0) != 0) {
    throw DataError(path.string() + ":1: expected header 'label,f1,...,fn'");
  }
  std::size_t dim = 0;
  for (char c : line) {
    if (c == ',') ++dim;
  }
  std::size_t line_no = 1;
  std::size_t records = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    if (!std::getline(ss, field, ',')) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": missing label");
    }
    const std::string label = field;
    Vector features;
    features.reserve(dim);
    while (std::getline(ss, field, ',')) {
      double x = 0.0;
      const auto* begin = field.data();
      const auto* end = begin + field.size();
      auto [ptr, ec] = std::from_chars(begin, end, x);
      if (ec != std::errc{} || ptr != end) {
        throw DataError(path.string() + ":" + std::to_string(line_no) +
                        ": bad number '" + field + "'");
      }
      features.push_back(x);
    }
    if (features.size() != dim) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": record " + std::to_string(records + 1) + " has " +
                      std::to_string(features.size()) + " features, expected " +
                      std::to_string(dim));
    }
    out.add_example(label, std::move(features));
    ++records;
  }
  if (records == 0) {
    throw DataError(path.string() + ": no records");
  }
  return out;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, FileFormat format) {
  switch (format) {
    case FileFormat::Jsonl: return load_jsonl(path);
    case FileFormat::Csv: return load_csv(path);
  }
  throw UsageError("load_dataset: unknown format");
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path,
                  FileFormat format) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  if (format == FileFormat::Jsonl) {
    out << sidecar_json(dataset).dump() << '\n';
    for (const auto& ex : dataset.examples()) {
      json rec;
      rec["label"] = dataset.label_name(ex.label);
      rec["features"] = ex.features;
      out << rec.dump() << '\n';
    }
  } else {
    out << "label";
    for (std::size_t i = 1; i <= dataset.dim(); ++i) out << ",f" << i;
    out << '\n';
    for (const auto& ex : dataset.examples()) {
      out << dataset.label_name(ex.label);
      for (double x : ex.features) {
        char buf[32];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
        out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
      }
      out << '\n';
    }
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void ensure_label_disjoint(const Dataset& a, const Dataset& b) {
  for (const auto& name : a.label_names()) {
    if (b.label_id(name)) {
      throw UsageError("datasets '" + a.name() + "' and '" + b.name() +
                       "' share label '" + name + "'");
    }
  }
}

}  // namespace vaproto
