#include "vaproto/registry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "vaproto/hexfloat.hpp"
#include "vaproto/monitor.hpp"
#include "vaproto/rng.hpp"

namespace vaproto {

using nlohmann::json;

std::vector<ClassGaussian> TaskEntry::gaussians() const {
  std::vector<ClassGaussian> out;
  out.reserve(classes.size());
  for (const auto& c : classes) out.push_back(c.stats);
  return out;
}

TaskEntry& StatsRegistry::fit_task(const EncoderParams& params,
                                   const Dataset& labeled,
                                   const std::string& task_id, CovKind kind,
                                   std::uint32_t ood_k) {
  if (labeled.size() == 0) throw UsageError("fit_task: empty dataset");
  if (ood_k == 0 || ood_k > params.embed_dim) {
    throw UsageError("fit_task: ood_k must be in [1, " +
                     std::to_string(params.embed_dim) + "]");
  }
  const std::string fp = params.fingerprint();
  if (fingerprint_.empty()) {
    fingerprint_ = fp;
  } else if (fingerprint_ != fp) {
    throw UsageError("fit_task: registry is bound to encoder " + fingerprint_ +
                     " but got " + fp);
  }

  TaskEntry entry;
  entry.dim = params.embed_dim;
  entry.ood_k = ood_k;
  for (std::uint32_t label = 0; label < labeled.label_count(); ++label) {
    const auto& indices = labeled.examples_of(label);
    if (indices.empty()) continue;
    std::vector<Vector> embedded;
    embedded.reserve(indices.size());
    for (std::size_t idx : indices) {
      embedded.push_back(params.forward(labeled.examples()[idx].features));
    }
    TaskClass cls;
    cls.label_id = label;
    cls.label_name = labeled.label_name(label);
    cls.stats = class_stats(embedded, kind);
    entry.classes.push_back(std::move(cls));
  }
  const auto gaussians = entry.gaussians();
  entry.dataset_indices = dataset_indices(gaussians, ood_k);
  auto [it, inserted] = tasks_.insert_or_assign(task_id, std::move(entry));
  (void)inserted;
  return it->second;
}

const TaskEntry& StatsRegistry::task(const std::string& task_id) const {
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) {
    throw UsageError("unknown task '" + task_id + "'");
  }
  return it->second;
}

void StatsRegistry::put_task(const std::string& task_id, TaskEntry entry) {
  tasks_.insert_or_assign(task_id, std::move(entry));
}

Classification StatsRegistry::classify(
    const std::string& task_id, std::span<const Vector> queries,
    const std::string* expected_fingerprint) const {
  const TaskEntry& entry = task(task_id);
  if (expected_fingerprint && *expected_fingerprint != fingerprint_) {
    warn("registry encoder fingerprint " + fingerprint_ +
         " does not match expected " + *expected_fingerprint);
  }
  for (const auto& q : queries) {
    if (q.size() != entry.dim) {
      throw UsageError("classify: query dim " + std::to_string(q.size()) +
                       " != task dim " + std::to_string(entry.dim));
    }
  }
  Classification out;
  for (const auto& c : entry.classes) {
    out.class_label_ids.push_back(c.label_id);
    out.class_label_names.push_back(c.label_name);
  }
  const auto gaussians = entry.gaussians();
  out.probabilities = class_probabilities(queries, gaussians);
  const auto picks = predict(queries, gaussians);
  out.label_ids.reserve(picks.size());
  out.labels.reserve(picks.size());
  for (std::size_t pick : picks) {
    out.label_ids.push_back(entry.classes[pick].label_id);
    out.labels.push_back(entry.classes[pick].label_name);
  }
  return out;
}

namespace {

json gaussian_to_json(const ClassGaussian& g) {
  json doc;
  doc["kind"] = to_string(g.kind);
  doc["support_count"] = g.support_count;
  doc["mean_hex"] = encode_hex(g.mean);
  doc["mean"] = g.mean;
  if (g.kind == CovKind::Isotropic) {
    doc["alpha_hex"] = f64_to_hex(g.alpha);
    doc["alpha"] = g.alpha;
  } else {
    doc["var_hex"] = encode_hex(g.var);
    doc["var"] = g.var;
  }
  return doc;
}

ClassGaussian gaussian_from_json(const json& doc) {
  ClassGaussian g;
  g.kind = cov_kind_from_string(doc.at("kind").get<std::string>());
  g.support_count = doc.at("support_count").get<std::uint32_t>();
  g.mean = decode_hex(doc.at("mean_hex").get<std::vector<std::string>>());
  if (g.kind == CovKind::Isotropic) {
    g.alpha = f64_from_hex(doc.at("alpha_hex").get<std::string>());
    if (g.alpha < 0.0) throw DataError("negative variance in registry entry");
  } else {
    g.var = decode_hex(doc.at("var_hex").get<std::vector<std::string>>());
    if (g.var.size() != g.mean.size()) {
      throw DataError("variance/mean dimension mismatch in registry entry");
    }
    for (double v : g.var) {
      if (!(v >= 0.0)) throw DataError("negative variance in registry entry");
    }
  }
  return g;
}

}  // namespace

void save_registry(const StatsRegistry& registry,
                   const std::filesystem::path& path) {
  json doc;
  doc["format_version"] = kRegistryFormatVersion;
  doc["encoder_fingerprint"] = registry.encoder_fingerprint();
  json tasks = json::object();
  for (const auto& [task_id, entry] : registry.tasks()) {
    json t;
    t["dim"] = entry.dim;
    t["ood_k"] = entry.ood_k;
    t["dataset_indices"] = entry.dataset_indices;
    json classes = json::array();
    for (const auto& c : entry.classes) {
      json cls;
      cls["label_id"] = c.label_id;
      cls["label"] = c.label_name;
      cls["stats"] = gaussian_to_json(c.stats);
      classes.push_back(std::move(cls));
    }
    t["classes"] = std::move(classes);
    tasks[task_id] = std::move(t);
  }
  doc["tasks"] = std::move(tasks);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << doc.dump(2) << '\n';
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

StatsRegistry load_registry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("registry '" + path.string() + "': parse error at byte " +
                    std::to_string(e.byte) + " (" + e.what() + ")");
  }
  if (!doc.contains("format_version")) {
    throw DataError("registry '" + path.string() + "': missing format_version");
  }
  const int version = doc["format_version"].get<int>();
  if (version != kRegistryFormatVersion) {
    throw DataError("registry '" + path.string() + "': format_version " +
                    std::to_string(version) + " is incompatible (expected " +
                    std::to_string(kRegistryFormatVersion) + ")");
  }
  if (!doc.contains("encoder_fingerprint") ||
      !doc["encoder_fingerprint"].is_string()) {
    throw DataError("registry '" + path.string() +
                    "': missing encoder_fingerprint");
  }
  StatsRegistry registry;
  registry.set_encoder_fingerprint(doc["encoder_fingerprint"].get<std::string>());
  try {
    for (const auto& [task_id, t] : doc.at("tasks").items()) {
      TaskEntry entry;
      entry.dim = t.at("dim").get<std::size_t>();
      entry.ood_k = t.at("ood_k").get<std::uint32_t>();
      entry.dataset_indices =
          t.at("dataset_indices").get<std::vector<std::size_t>>();
      for (const auto& cls : t.at("classes")) {
        TaskClass c;
        c.label_id = cls.at("label_id").get<std::uint32_t>();
        c.label_name = cls.at("label").get<std::string>();
        c.stats = gaussian_from_json(cls.at("stats"));
        if (c.stats.dim() != entry.dim) {
          throw DataError("registry '" + path.string() + "': task '" + task_id +
                          "' class dimension mismatch");
        }
        entry.classes.push_back(std::move(c));
      }
      for (std::size_t i = 0; i < entry.dataset_indices.size(); ++i) {
        const std::size_t idx = entry.dataset_indices[i];
        if (idx >= entry.dim ||
            (i > 0 && idx <= entry.dataset_indices[i - 1])) {
          throw DataError("registry '" + path.string() + "': task '" + task_id +
                          "' has invalid dataset_indices");
        }
      }
      if (!std::is_sorted(entry.classes.begin(), entry.classes.end(),
                          [](const TaskClass& a, const TaskClass& b) {
                            return a.label_id < b.label_id;
                          })) {
        throw DataError("registry '" + path.string() + "': task '" + task_id +
                        "' classes are not sorted by label id");
      }
      registry.put_task(task_id, std::move(entry));
    }
  } catch (const json::exception& e) {
    throw DataError("registry '" + path.string() + "': " + e.what());
  }
  return registry;
}

StabilityReport stability_experiment(const EncoderParams& params,
                                     const Dataset& fit_set,
                                     std::span<const std::uint32_t> k_values,
                                     std::uint32_t resamples,
                                     const Dataset& eval_set,
                                     std::uint64_t seed, CovKind kind) {
  if (k_values.empty()) throw UsageError("stability: no k values");
  if (resamples == 0) throw UsageError("stability: resamples must be positive");
  const std::uint32_t k_max = *std::max_element(k_values.begin(), k_values.end());
  for (std::uint32_t l = 0; l < fit_set.label_count(); ++l) {
    if (fit_set.examples_of(l).size() < k_max) {
      throw UsageError("stability: label '" + fit_set.label_name(l) +
                       "' has " + std::to_string(fit_set.examples_of(l).size()) +
                       " examples, needs " + std::to_string(k_max));
    }
  }
  // Evaluation labels resolve through fit-set label names.
  std::vector<std::uint32_t> eval_to_fit(eval_set.label_count());
  for (std::uint32_t l = 0; l < eval_set.label_count(); ++l) {
    const auto id = fit_set.label_id(eval_set.label_name(l));
    if (!id) {
      throw UsageError("stability: eval label '" + eval_set.label_name(l) +
                       "' is not in the fit set");
    }
    eval_to_fit[l] = *id;
  }

  std::vector<Vector> eval_embedded;
  eval_embedded.reserve(eval_set.size());
  for (const auto& ex : eval_set.examples()) {
    eval_embedded.push_back(params.forward(ex.features));
  }

  StabilityReport report;
  report.k_values.assign(k_values.begin(), k_values.end());
  report.resamples = resamples;
  Rng master = Rng(seed).substream("stability");
  for (std::size_t ki = 0; ki < k_values.size(); ++ki) {
    const std::uint32_t k = k_values[ki];
    std::vector<double> accs;
    accs.reserve(resamples);
    for (std::uint32_t r = 0; r < resamples; ++r) {
      Rng rng = master.split((static_cast<std::uint64_t>(ki) << 32) | r);
      std::vector<ClassGaussian> classes(fit_set.label_count());
      for (std::uint32_t l = 0; l < fit_set.label_count(); ++l) {
        std::vector<std::size_t> pool = fit_set.examples_of(l);
        for (std::uint32_t i = 0; i < k; ++i) {
          const std::size_t j = i + rng.below(pool.size() - i);
          std::swap(pool[i], pool[j]);
        }
        // canonical order: the statistics depend on the drawn set, not
        // the draw order (k == class size is then exactly resample-free)
        std::sort(pool.begin(), pool.begin() + k);
        std::vector<Vector> support;
        support.reserve(k);
        for (std::uint32_t i = 0; i < k; ++i) {
          support.push_back(
              params.forward(fit_set.examples()[pool[i]].features));
        }
        classes[l] = class_stats(support, kind);
      }
      const auto picks = predict(eval_embedded, classes);
      std::size_t correct = 0;
      for (std::size_t q = 0; q < picks.size(); ++q) {
        if (picks[q] == eval_to_fit[eval_set.examples()[q].label]) ++correct;
      }
      accs.push_back(static_cast<double>(correct) /
                     static_cast<double>(eval_set.size()));
    }
    double total = 0.0;
    for (double a : accs) total += a;
    const double mean_acc = total / static_cast<double>(accs.size());
    // identical resamples (k == class size) must report exactly zero
    const bool constant =
        std::all_of(accs.begin(), accs.end(),
                    [&](double a) { return a == accs.front(); });
    double ss = 0.0;
    for (double a : accs) {
      const double d = a - mean_acc;
      ss += d * d;
    }
    report.mean.push_back(mean_acc);
    report.stddev.push_back(
        accs.size() > 1 && !constant
            ? std::sqrt(ss / static_cast<double>(accs.size() - 1))
            : 0.0);
    report.accuracies.push_back(std::move(accs));
  }
  return report;
}

}  // namespace vaproto
