#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "manifest.hpp"
#include "vaproto/dataset.hpp"
#include "vaproto/encoder.hpp"
#include "vaproto/errors.hpp"
#include "vaproto/monitor.hpp"
#include "vaproto/registry.hpp"
#include "vaproto/trainer.hpp"
#include "vaproto/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vaproto;
using vaproto_cli::file_hash;

namespace {

struct RunArtifacts {
  std::map<std::string, std::string> inputs;  // path -> content hash
  std::vector<std::string> outputs;           // fixed names under out-dir
  std::uint64_t master_seed = 0;
};

// Merges a flat JSON config file into the resolved command config.
// Command-line flags win: a file entry is applied only when its flag was
// not given. Keys may be spelled like the flag (per-label) or like the
// config field (per_label).
json apply_config_file(CLI::App* sub, json resolved,
                       const std::string& config_path) {
  if (config_path.empty()) return resolved;
  std::ifstream in(config_path);
  if (!in) throw DataError("cannot open config '" + config_path + "'");
  json file;
  try {
    file = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("config '" + config_path + "': " + e.what());
  }
  if (!file.is_object()) {
    throw UsageError("config '" + config_path + "' must hold a JSON object");
  }
  for (const auto& [key, value] : file.items()) {
    std::string field = key;
    std::string flag = key;
    std::replace(field.begin(), field.end(), '-', '_');
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (!resolved.contains(field)) {
      throw UsageError("config '" + config_path + "': unknown key '" + key + "'");
    }
    const CLI::Option* opt = sub->get_option_no_throw("--" + flag);
    if (opt != nullptr && opt->count() > 0) continue;  // flag overrides file
    resolved[field] = value;
  }
  return resolved;
}

std::string csv_number(double x) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  (void)ec;
  return std::string(buf, static_cast<std::size_t>(ptr - buf));
}

Dataset load_input(const std::string& path, const std::string& format,
                   std::uint32_t id = 0) {
  Dataset ds = load_dataset(path, format_from_string(format));
  ds.set_id(id);
  return ds;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

std::vector<std::uint64_t> seed_range(std::uint32_t count) {
  std::vector<std::uint64_t> seeds(count);
  for (std::uint32_t i = 0; i < count; ++i) seeds[i] = i;
  return seeds;
}

// ---------------------------------------------------------------------------
// Shared training flags (meta-train and lambda-sweep).

struct TrainFlags {
  std::uint32_t ways = 4;
  std::uint32_t shots = 8;
  std::uint32_t supports = 16;
  std::string weighting = "uniform";
  double lambda = 0.1;
  std::uint32_t epochs = 30;
  std::uint32_t episodes_per_epoch = 100;
  double lr = 3e-5;
  double weight_decay = 1e-4;
  double grad_clip = 3.0;
  std::string lr_schedule = "linear";
  std::uint32_t patience = 5;
  std::uint64_t seed = 0;
  std::uint32_t eval_tasks = 200;
  std::string kind = "diagonal";
  std::uint32_t hidden = 64;
  std::uint32_t embed = 64;
  double dropout = 0.1;

  void add_options(CLI::App* app) {
    app->add_option("--ways", ways, "classes per episode")->capture_default_str();
    app->add_option("--shots", shots, "query examples per class")->capture_default_str();
    app->add_option("--supports", supports, "support examples per class")->capture_default_str();
    app->add_option("--weighting", weighting, "dataset selection weighting")
        ->check(CLI::IsMember({"uniform", "sqrt-size"}))->capture_default_str();
    app->add_option("--lambda", lambda, "variance regularizer weight")->capture_default_str();
    app->add_option("--epochs", epochs)->capture_default_str();
    app->add_option("--episodes-per-epoch", episodes_per_epoch)->capture_default_str();
    app->add_option("--lr", lr, "peak learning rate")->capture_default_str();
    app->add_option("--weight-decay", weight_decay)->capture_default_str();
    app->add_option("--grad-clip", grad_clip, "global gradient norm cap")->capture_default_str();
    app->add_option("--lr-schedule", lr_schedule)
        ->check(CLI::IsMember({"linear", "constant"}))->capture_default_str();
    app->add_option("--patience", patience, "early-stop patience in epochs")->capture_default_str();
    app->add_option("--seed", seed, "master seed")->capture_default_str();
    app->add_option("--eval-tasks", eval_tasks, "meta-val tasks per epoch")->capture_default_str();
    app->add_option("--kind", kind, "covariance kind")
        ->check(CLI::IsMember({"diagonal", "isotropic"}))->capture_default_str();
    app->add_option("--hidden", hidden, "encoder hidden width")->capture_default_str();
    app->add_option("--embed", embed, "embedding dimension")->capture_default_str();
    app->add_option("--dropout", dropout, "dropout after the final layer")->capture_default_str();
  }

  json to_json() const {
    return json{{"ways", ways},
                {"shots", shots},
                {"supports", supports},
                {"weighting", weighting},
                {"lambda", lambda},
                {"epochs", epochs},
                {"episodes_per_epoch", episodes_per_epoch},
                {"lr", lr},
                {"weight_decay", weight_decay},
                {"grad_clip", grad_clip},
                {"lr_schedule", lr_schedule},
                {"patience", patience},
                {"seed", seed},
                {"eval_tasks", eval_tasks},
                {"kind", kind},
                {"hidden", hidden},
                {"embed", embed},
                {"dropout", dropout}};
  }

  static TrainFlags from_json(const json& j) {
    TrainFlags f;
    f.ways = j.at("ways").get<std::uint32_t>();
    f.shots = j.at("shots").get<std::uint32_t>();
    f.supports = j.at("supports").get<std::uint32_t>();
    f.weighting = j.at("weighting").get<std::string>();
    f.lambda = j.at("lambda").get<double>();
    f.epochs = j.at("epochs").get<std::uint32_t>();
    f.episodes_per_epoch = j.at("episodes_per_epoch").get<std::uint32_t>();
    f.lr = j.at("lr").get<double>();
    f.weight_decay = j.at("weight_decay").get<double>();
    f.grad_clip = j.at("grad_clip").get<double>();
    f.lr_schedule = j.at("lr_schedule").get<std::string>();
    f.patience = j.at("patience").get<std::uint32_t>();
    f.seed = j.at("seed").get<std::uint64_t>();
    f.eval_tasks = j.at("eval_tasks").get<std::uint32_t>();
    f.kind = j.at("kind").get<std::string>();
    f.hidden = j.at("hidden").get<std::uint32_t>();
    f.embed = j.at("embed").get<std::uint32_t>();
    f.dropout = j.at("dropout").get<double>();
    return f;
  }

  TrainConfig to_train_config() const {
    TrainConfig cfg;
    cfg.lambda = lambda;
    cfg.epochs = epochs;
    cfg.episodes_per_epoch = episodes_per_epoch;
    cfg.learning_rate = lr;
    cfg.weight_decay = weight_decay;
    cfg.grad_clip_norm = grad_clip;
    cfg.lr_schedule = lr_schedule == "constant" ? LrSchedule::Constant
                                                : LrSchedule::LinearDecay;
    cfg.early_stop_patience = patience;
    cfg.seed = seed;
    cfg.sampler.ways = ways;
    cfg.sampler.shots = shots;
    cfg.sampler.supports = supports;
    cfg.sampler.seed = seed;
    cfg.sampler.weighting = weighting == "sqrt-size"
                                ? SamplerConfig::Weighting::SqrtSize
                                : SamplerConfig::Weighting::Uniform;
    cfg.eval_tasks = eval_tasks;
    cfg.kind = cov_kind_from_string(kind);
    cfg.hidden_dim = hidden;
    cfg.embed_dim = embed;
    cfg.dropout = dropout;
    return cfg;
  }
};

void write_train_log(const fs::path& path, const TrainResult& result) {
  std::string text;
  for (const auto& rec : result.log) {
    json line = {{"epoch", rec.epoch},
                 {"mean_train_loss", rec.mean_train_loss},
                 {"metaval_accuracy", rec.metaval_accuracy},
                 {"lr", rec.lr}};
    text += line.dump();
    text += '\n';
  }
  write_text(path, text);
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataCfg {
  std::uint32_t labels = 8;
  std::uint32_t per_label = 300;
  std::uint32_t dim = 64;
  double sep = 8.0;
  double noise = 1.0;
  std::uint64_t seed = 0;
  std::string split = "meta-train";
  std::string label_prefix = "label";
  std::string format = "jsonl";

  json to_json() const {
    return json{{"labels", labels},   {"per_label", per_label},
                {"dim", dim},         {"sep", sep},
                {"noise", noise},     {"seed", seed},
                {"split", split},     {"label_prefix", label_prefix},
                {"format", format}};
  }
  static GenDataCfg from_json(const json& j) {
    GenDataCfg c;
    c.labels = j.at("labels").get<std::uint32_t>();
    c.per_label = j.at("per_label").get<std::uint32_t>();
    c.dim = j.at("dim").get<std::uint32_t>();
    c.sep = j.at("sep").get<double>();
    c.noise = j.at("noise").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.split = j.at("split").get<std::string>();
    c.label_prefix = j.at("label_prefix").get<std::string>();
    c.format = j.at("format").get<std::string>();
    return c;
  }
};

RunArtifacts run_gen_data(const json& cfgj, const fs::path& out_dir) {
  const GenDataCfg cfg = GenDataCfg::from_json(cfgj);
  Dataset ds = generate_synthetic(cfg.labels, cfg.per_label, cfg.dim, cfg.sep,
                                  cfg.noise, cfg.seed,
                                  split_from_string(cfg.split),
                                  cfg.label_prefix);
  const std::string filename =
      cfg.format == "csv" ? "data.csv" : "data.jsonl";
  save_dataset(ds, out_dir / filename, format_from_string(cfg.format));
  std::cout << "wrote " << ds.size() << " examples (" << ds.label_count()
            << " labels, dim " << ds.dim() << ") to "
            << (out_dir / filename).string() << "\n";
  RunArtifacts art;
  art.outputs = {filename};
  art.master_seed = cfg.seed;
  return art;
}

// ---------------------------------------------------------------------------
// meta-train

struct MetaTrainCfg {
  std::vector<std::string> train;
  std::string val;
  std::string format = "jsonl";
  TrainFlags flags;

  json to_json() const {
    json j = flags.to_json();
    j["train"] = train;
    j["val"] = val;
    j["format"] = format;
    return j;
  }
  static MetaTrainCfg from_json(const json& j) {
    MetaTrainCfg c;
    c.train = j.at("train").get<std::vector<std::string>>();
    c.val = j.at("val").get<std::string>();
    c.format = j.at("format").get<std::string>();
    c.flags = TrainFlags::from_json(j);
    return c;
  }
};

RunArtifacts run_meta_train(const json& cfgj, const fs::path& out_dir) {
  const MetaTrainCfg cfg = MetaTrainCfg::from_json(cfgj);
  RunArtifacts art;
  art.master_seed = cfg.flags.seed;
  std::vector<Dataset> train_sets;
  for (std::size_t i = 0; i < cfg.train.size(); ++i) {
    train_sets.push_back(
        load_input(cfg.train[i], cfg.format, static_cast<std::uint32_t>(i)));
    art.inputs[cfg.train[i]] = file_hash(cfg.train[i]);
  }
  Dataset val = load_input(cfg.val, cfg.format,
                           static_cast<std::uint32_t>(cfg.train.size()));
  art.inputs[cfg.val] = file_hash(cfg.val);

  const TrainConfig tc = cfg.flags.to_train_config();
  const TrainResult result = train(train_sets, val, tc);

  save_checkpoint(result.params, out_dir / "checkpoint.bin");
  write_train_log(out_dir / "train_log.jsonl", result);
  art.outputs = {"checkpoint.bin", "train_log.jsonl"};

  if (result.diverged) {
    throw NumericError(
        "training diverged; last good checkpoint and log were written");
  }
  std::cout << "trained " << result.epochs_run << " epochs; best meta-val "
            << result.best_metaval << " at epoch " << result.best_epoch
            << "\n";
  return art;
}

// ---------------------------------------------------------------------------
// eval

struct EvalCfg {
  std::string checkpoint;
  std::string data;
  std::string format = "jsonl";
  std::uint32_t ways = 4;
  std::uint32_t shots = 8;
  std::uint32_t supports = 16;
  std::string kind = "diagonal";
  std::uint32_t tasks = 1000;
  std::uint32_t seeds = 10;

  json to_json() const {
    return json{{"checkpoint", checkpoint}, {"data", data},
                {"format", format},         {"ways", ways},
                {"shots", shots},           {"supports", supports},
                {"kind", kind},             {"tasks", tasks},
                {"seeds", seeds}};
  }
  static EvalCfg from_json(const json& j) {
    EvalCfg c;
    c.checkpoint = j.at("checkpoint").get<std::string>();
    c.data = j.at("data").get<std::string>();
    c.format = j.at("format").get<std::string>();
    c.ways = j.at("ways").get<std::uint32_t>();
    c.shots = j.at("shots").get<std::uint32_t>();
    c.supports = j.at("supports").get<std::uint32_t>();
    c.kind = j.at("kind").get<std::string>();
    c.tasks = j.at("tasks").get<std::uint32_t>();
    c.seeds = j.at("seeds").get<std::uint32_t>();
    return c;
  }
};

RunArtifacts run_eval(const json& cfgj, const fs::path& out_dir) {
  const EvalCfg cfg = EvalCfg::from_json(cfgj);
  RunArtifacts art;
  const EncoderParams params = load_checkpoint(cfg.checkpoint);
  const Dataset data = load_input(cfg.data, cfg.format);
  art.inputs[cfg.checkpoint] = file_hash(cfg.checkpoint);
  art.inputs[cfg.data] = file_hash(cfg.data);

  TrainConfig tc;
  tc.sampler.ways = cfg.ways;
  tc.sampler.shots = cfg.shots;
  tc.sampler.supports = cfg.supports;
  tc.kind = cov_kind_from_string(cfg.kind);
  tc.eval_tasks = cfg.tasks;
  tc.eval_seeds = seed_range(cfg.seeds);
  const EvalReport report = evaluate(params, data, tc);

  json doc = {{"mean_accuracy", report.mean_accuracy},
              {"std_accuracy", report.std_accuracy},
              {"per_seed", report.per_seed},
              {"seeds", report.seeds},
              {"tasks_per_seed", report.tasks_evaluated}};
  write_text(out_dir / "eval_report.json", doc.dump(2) + "\n");
  std::printf("accuracy: %.4f \xc2\xb1 %.4f (%u tasks x %zu seeds)\n",
              report.mean_accuracy, report.std_accuracy,
              report.tasks_evaluated, report.seeds.size());
  art.outputs = {"eval_report.json"};
  return art;
}

// ---------------------------------------------------------------------------
// fit

struct FitCfg {
  std::string checkpoint;
  std::string data;
  std::string format = "jsonl";
  std::string task_id;
  std::string kind = "diagonal";
  std::uint32_t ood_k = 10;
  std::string registry_in;  // optional: extend an existing registry

  json to_json() const {
    return json{{"checkpoint", checkpoint}, {"data", data},
                {"format", format},         {"task_id", task_id},
                {"kind", kind},             {"ood_k", ood_k},
                {"registry_in", registry_in}};
  }
  static FitCfg from_json(const json& j) {
    FitCfg c;
    c.checkpoint = j.at("checkpoint").get<std::string>();
    c.data = j.at("data").get<std::string>();
    c.format = j.at("format").get<std::string>();
    c.task_id = j.at("task_id").get<std::string>();
    c.kind = j.at("kind").get<std::string>();
    c.ood_k = j.at("ood_k").get<std::uint32_t>();
    c.registry_in = j.at("registry_in").get<std::string>();
    return c;
  }
};

RunArtifacts run_fit(const json& cfgj, const fs::path& out_dir) {
  const FitCfg cfg = FitCfg::from_json(cfgj);
  RunArtifacts art;
  const EncoderParams params = load_checkpoint(cfg.checkpoint);
  const Dataset data = load_input(cfg.data, cfg.format);
  art.inputs[cfg.checkpoint] = file_hash(cfg.checkpoint);
  art.inputs[cfg.data] = file_hash(cfg.data);

  StatsRegistry registry;
  if (!cfg.registry_in.empty()) {
    registry = load_registry(cfg.registry_in);
    art.inputs[cfg.registry_in] = file_hash(cfg.registry_in);
  }
  const TaskEntry& entry = registry.fit_task(
      params, data, cfg.task_id, cov_kind_from_string(cfg.kind), cfg.ood_k);
  save_registry(registry, out_dir / "registry.json");
  std::cout << "fitted task '" << cfg.task_id << "': " << entry.classes.size()
            << " classes, " << entry.dataset_indices.size()
            << " dataset indices\n";
  art.outputs = {"registry.json"};
  return art;
}

// ---------------------------------------------------------------------------
// classify

struct ClassifyCfg {
  std::string checkpoint;
  std::string registry;
  std::string task_id;
  std::string queries;
  std::string format = "jsonl";

  json to_json() const {
    return json{{"checkpoint", checkpoint},
                {"registry", registry},
                {"task_id", task_id},
                {"queries", queries},
                {"format", format}};
  }
  static ClassifyCfg from_json(const json& j) {
    ClassifyCfg c;
    c.checkpoint = j.at("checkpoint").get<std::string>();
    c.registry = j.at("registry").get<std::string>();
    c.task_id = j.at("task_id").get<std::string>();
    c.queries = j.at("queries").get<std::string>();
    c.format = j.at("format").get<std::string>();
    return c;
  }
};

std::vector<Vector> embed_dataset(const EncoderParams& params,
                                  const Dataset& data) {
  std::vector<Vector> out;
  out.reserve(data.size());
  for (const auto& ex : data.examples()) out.push_back(params.forward(ex.features));
  return out;
}

RunArtifacts run_classify(const json& cfgj, const fs::path& out_dir) {
  const ClassifyCfg cfg = ClassifyCfg::from_json(cfgj);
  RunArtifacts art;
  const EncoderParams params = load_checkpoint(cfg.checkpoint);
  const StatsRegistry registry = load_registry(cfg.registry);
  const Dataset queries = load_input(cfg.queries, cfg.format);
  art.inputs[cfg.checkpoint] = file_hash(cfg.checkpoint);
  art.inputs[cfg.registry] = file_hash(cfg.registry);
  art.inputs[cfg.queries] = file_hash(cfg.queries);

  const auto embedded = embed_dataset(params, queries);
  const std::string fp = params.fingerprint();
  const Classification result = registry.classify(cfg.task_id, embedded, &fp);

  std::string text;
  for (std::size_t q = 0; q < embedded.size(); ++q) {
    Vector row(result.probabilities.cols);
    for (std::size_t c = 0; c < row.size(); ++c) {
      row[c] = result.probabilities.at(q, c);
    }
    json line = {{"query_id", q},
                 {"label", result.labels[q]},
                 {"label_id", result.label_ids[q]},
                 {"probabilities", row}};
    text += line.dump();
    text += '\n';
  }
  write_text(out_dir / "predictions.jsonl", text);
  std::cout << "classified " << embedded.size() << " queries against task '"
            << cfg.task_id << "'\n";
  art.outputs = {"predictions.jsonl"};
  return art;
}

// ---------------------------------------------------------------------------
// ood

struct OodCfg {
  std::string checkpoint;
  std::string registry;
  std::string task_id;
  std::string queries;
  std::string format = "jsonl";
  std::uint32_t k = 10;
  double threshold = 0.5;
  bool union_reading = false;

  json to_json() const {
    return json{{"checkpoint", checkpoint}, {"registry", registry},
                {"task_id", task_id},       {"queries", queries},
                {"format", format},         {"k", k},
                {"threshold", threshold},   {"union_reading", union_reading}};
  }
  static OodCfg from_json(const json& j) {
    OodCfg c;
    c.checkpoint = j.at("checkpoint").get<std::string>();
    c.registry = j.at("registry").get<std::string>();
    c.task_id = j.at("task_id").get<std::string>();
    c.queries = j.at("queries").get<std::string>();
    c.format = j.at("format").get<std::string>();
    c.k = j.at("k").get<std::uint32_t>();
    c.threshold = j.at("threshold").get<double>();
    c.union_reading = j.at("union_reading").get<bool>();
    return c;
  }
};

RunArtifacts run_ood(const json& cfgj, const fs::path& out_dir) {
  const OodCfg cfg = OodCfg::from_json(cfgj);
  RunArtifacts art;
  const EncoderParams params = load_checkpoint(cfg.checkpoint);
  const StatsRegistry registry = load_registry(cfg.registry);
  const Dataset queries = load_input(cfg.queries, cfg.format);
  art.inputs[cfg.checkpoint] = file_hash(cfg.checkpoint);
  art.inputs[cfg.registry] = file_hash(cfg.registry);
  art.inputs[cfg.queries] = file_hash(cfg.queries);

  const TaskEntry& task = registry.task(cfg.task_id);
  const auto embedded = embed_dataset(params, queries);
  const OodConfig ood{cfg.k, cfg.threshold};

  std::string text;
  std::size_t flagged = 0;
  const auto gaussians = task.gaussians();
  for (std::size_t q = 0; q < embedded.size(); ++q) {
    double value = 0.0;
    if (cfg.union_reading) {
      value = avi_union_ratio(embedded[q], gaussians, task.dataset_indices,
                              cfg.k);
    } else {
      value = avi_score(embedded[q], gaussians, task.dataset_indices, ood).value;
    }
    const bool is_flagged = value < cfg.threshold;
    if (is_flagged) ++flagged;
    json line = {{"query_id", q},
                 {"avi", value},
                 {"flagged", is_flagged},
                 {"k", cfg.k},
                 {"threshold", cfg.threshold}};
    text += line.dump();
    text += '\n';
  }
  write_text(out_dir / "ood.jsonl", text);
  std::cout << "flagged " << flagged << "/" << embedded.size()
            << " queries below threshold " << cfg.threshold << "\n";
  art.outputs = {"ood.jsonl"};
  return art;
}

// ---------------------------------------------------------------------------
// stability

struct StabilityCfg {
  std::string checkpoint;
  std::string fit_data;
  std::string eval_data;
  std::string format = "jsonl";
  std::vector<std::uint32_t> k_values = {2, 4, 8, 16, 32};
  std::uint32_t resamples = 50;
  std::uint64_t seed = 0;
  std::string kind = "diagonal";

  json to_json() const {
    return json{{"checkpoint", checkpoint}, {"fit_data", fit_data},
                {"eval_data", eval_data},   {"format", format},
                {"k_values", k_values},     {"resamples", resamples},
                {"seed", seed},             {"kind", kind}};
  }
  static StabilityCfg from_json(const json& j) {
    StabilityCfg c;
    c.checkpoint = j.at("checkpoint").get<std::string>();
    c.fit_data = j.at("fit_data").get<std::string>();
    c.eval_data = j.at("eval_data").get<std::string>();
    c.format = j.at("format").get<std::string>();
    c.k_values = j.at("k_values").get<std::vector<std::uint32_t>>();
    c.resamples = j.at("resamples").get<std::uint32_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.kind = j.at("kind").get<std::string>();
    return c;
  }
};

RunArtifacts run_stability(const json& cfgj, const fs::path& out_dir) {
  const StabilityCfg cfg = StabilityCfg::from_json(cfgj);
  RunArtifacts art;
  art.master_seed = cfg.seed;
  const EncoderParams params = load_checkpoint(cfg.checkpoint);
  const Dataset fit_set = load_input(cfg.fit_data, cfg.format);
  const Dataset eval_set = load_input(cfg.eval_data, cfg.format, 1);
  art.inputs[cfg.checkpoint] = file_hash(cfg.checkpoint);
  art.inputs[cfg.fit_data] = file_hash(cfg.fit_data);
  art.inputs[cfg.eval_data] = file_hash(cfg.eval_data);

  const StabilityReport report =
      stability_experiment(params, fit_set, cfg.k_values, cfg.resamples,
                           eval_set, cfg.seed, cov_kind_from_string(cfg.kind));
  json doc = {{"k_values", report.k_values},
              {"resamples", report.resamples},
              {"mean", report.mean},
              {"std", report.stddev},
              {"accuracies", report.accuracies}};
  write_text(out_dir / "stability.json", doc.dump(2) + "\n");
  for (std::size_t i = 0; i < report.k_values.size(); ++i) {
    std::printf("k=%-3u accuracy %.4f \xc2\xb1 %.4f\n", report.k_values[i],
                report.mean[i], report.stddev[i]);
  }
  art.outputs = {"stability.json"};
  return art;
}

// ---------------------------------------------------------------------------
// lambda-sweep

struct LambdaSweepCfg {
  std::vector<std::string> train;
  std::string val;
  std::string format = "jsonl";
  std::vector<double> lambdas = {0.0, 1e-4, 1e-3, 0.01, 0.1, 0.5};
  std::uint32_t stat_episodes = 200;
  std::uint32_t eval_seeds = 3;
  TrainFlags flags;

  json to_json() const {
    json j = flags.to_json();
    j["train"] = train;
    j["val"] = val;
    j["format"] = format;
    j["lambdas"] = lambdas;
    j["stat_episodes"] = stat_episodes;
    j["eval_seeds"] = eval_seeds;
    return j;
  }
  static LambdaSweepCfg from_json(const json& j) {
    LambdaSweepCfg c;
    c.train = j.at("train").get<std::vector<std::string>>();
    c.val = j.at("val").get<std::string>();
    c.format = j.at("format").get<std::string>();
    c.lambdas = j.at("lambdas").get<std::vector<double>>();
    c.stat_episodes = j.at("stat_episodes").get<std::uint32_t>();
    c.eval_seeds = j.at("eval_seeds").get<std::uint32_t>();
    c.flags = TrainFlags::from_json(j);
    return c;
  }
};

RunArtifacts run_lambda_sweep(const json& cfgj, const fs::path& out_dir) {
  const LambdaSweepCfg cfg = LambdaSweepCfg::from_json(cfgj);
  RunArtifacts art;
  art.master_seed = cfg.flags.seed;
  std::vector<Dataset> train_sets;
  for (std::size_t i = 0; i < cfg.train.size(); ++i) {
    train_sets.push_back(
        load_input(cfg.train[i], cfg.format, static_cast<std::uint32_t>(i)));
    art.inputs[cfg.train[i]] = file_hash(cfg.train[i]);
  }
  Dataset val = load_input(cfg.val, cfg.format,
                           static_cast<std::uint32_t>(cfg.train.size()));
  art.inputs[cfg.val] = file_hash(cfg.val);

  std::string csv = "lambda,accuracy,mean_var_fro\n";
  for (const double lambda : cfg.lambdas) {
    TrainConfig tc = cfg.flags.to_train_config();
    tc.lambda = lambda;
    const TrainResult result = train(train_sets, val, tc);
    if (result.diverged) {
      throw NumericError("lambda-sweep: training diverged at lambda " +
                         csv_number(lambda));
    }
    TrainConfig ec = tc;
    ec.eval_seeds = seed_range(cfg.eval_seeds);
    const EvalReport report = evaluate(result.params, val, ec);
    const RegEffectReport stats =
        reg_effect_report(result.params, result.params, val, cfg.stat_episodes,
                          tc.sampler, cfg.flags.seed);
    csv += csv_number(lambda) + "," + csv_number(report.mean_accuracy) + "," +
           csv_number(stats.reg.mean_var_fro) + "\n";
    std::printf("lambda %-8s accuracy %.4f mean ||Sigma||_F %.4f\n",
                csv_number(lambda).c_str(), report.mean_accuracy,
                stats.reg.mean_var_fro);
  }
  write_text(out_dir / "sweep.csv", csv);
  art.outputs = {"sweep.csv"};
  return art;
}

// ---------------------------------------------------------------------------
// reg-effect

struct RegEffectCfg {
  std::string unreg_checkpoint;
  std::string reg_checkpoint;
  std::string data;
  std::string format = "jsonl";
  std::uint32_t episodes = 200;
  std::uint32_t shots = 8;
  std::uint32_t supports = 16;
  std::uint64_t seed = 0;

  json to_json() const {
    return json{{"unreg_checkpoint", unreg_checkpoint},
                {"reg_checkpoint", reg_checkpoint},
                {"data", data},
                {"format", format},
                {"episodes", episodes},
                {"shots", shots},
                {"supports", supports},
                {"seed", seed}};
  }
  static RegEffectCfg from_json(const json& j) {
    RegEffectCfg c;
    c.unreg_checkpoint = j.at("unreg_checkpoint").get<std::string>();
    c.reg_checkpoint = j.at("reg_checkpoint").get<std::string>();
    c.data = j.at("data").get<std::string>();
    c.format = j.at("format").get<std::string>();
    c.episodes = j.at("episodes").get<std::uint32_t>();
    c.shots = j.at("shots").get<std::uint32_t>();
    c.supports = j.at("supports").get<std::uint32_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  }
};

RunArtifacts run_reg_effect(const json& cfgj, const fs::path& out_dir) {
  const RegEffectCfg cfg = RegEffectCfg::from_json(cfgj);
  RunArtifacts art;
  art.master_seed = cfg.seed;
  const EncoderParams unreg = load_checkpoint(cfg.unreg_checkpoint);
  const EncoderParams reg = load_checkpoint(cfg.reg_checkpoint);
  const Dataset data = load_input(cfg.data, cfg.format);
  art.inputs[cfg.unreg_checkpoint] = file_hash(cfg.unreg_checkpoint);
  art.inputs[cfg.reg_checkpoint] = file_hash(cfg.reg_checkpoint);
  art.inputs[cfg.data] = file_hash(cfg.data);

  SamplerConfig sampler;
  sampler.shots = cfg.shots;
  sampler.supports = cfg.supports;
  const RegEffectReport report =
      reg_effect_report(unreg, reg, data, cfg.episodes, sampler, cfg.seed);
  json doc = {
      {"episodes", report.episodes},
      {"unreg",
       {{"mean_centroid_distance", report.unreg.mean_centroid_distance},
        {"mean_var_fro", report.unreg.mean_var_fro}}},
      {"reg",
       {{"mean_centroid_distance", report.reg.mean_centroid_distance},
        {"mean_var_fro", report.reg.mean_var_fro}}}};
  write_text(out_dir / "reg_effect.json", doc.dump(2) + "\n");
  std::printf("centroid distance %.4f -> %.4f; mean ||Sigma||_F %.4f -> %.4f\n",
              report.unreg.mean_centroid_distance,
              report.reg.mean_centroid_distance, report.unreg.mean_var_fro,
              report.reg.mean_var_fro);
  art.outputs = {"reg_effect.json"};
  return art;
}

// ---------------------------------------------------------------------------

using Runner = std::function<RunArtifacts(const json&, const fs::path&)>;

const std::map<std::string, Runner>& runners() {
  static const std::map<std::string, Runner> table = {
      {"gen-data", run_gen_data},       {"meta-train", run_meta_train},
      {"eval", run_eval},               {"fit", run_fit},
      {"classify", run_classify},       {"ood", run_ood},
      {"stability", run_stability},     {"lambda-sweep", run_lambda_sweep},
      {"reg-effect", run_reg_effect},
  };
  return table;
}

int execute(const std::string& command, const json& config,
            const fs::path& out_dir) {
  const auto it = runners().find(command);
  if (it == runners().end()) {
    throw UsageError("unknown command '" + command + "'");
  }
  fs::create_directories(out_dir);
  const auto start = std::chrono::steady_clock::now();
  const RunArtifacts art = it->second(config, out_dir);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  vaproto_cli::write_manifest(out_dir, command, config, art.master_seed,
                              art.inputs, art.outputs, secs);
  return 0;
}

int run_from_manifest(const fs::path& manifest_path, fs::path out_dir) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open '" + manifest_path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("manifest '" + manifest_path.string() +
                    "': parse error (" + std::string(e.what()) + ")");
  }
  if (!doc.contains("command") || !doc.contains("config")) {
    throw DataError("manifest '" + manifest_path.string() +
                    "' lacks command/config");
  }
  if (out_dir.empty()) out_dir = manifest_path.parent_path();
  return execute(doc["command"].get<std::string>(), doc["config"], out_dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot classification with Gaussian class prototypes"};
  app.set_version_flag("--version", VAPROTO_VERSION);
  app.require_subcommand(1);

  std::string out_dir = ".";
  std::string config_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out-dir", out_dir, "output directory")
        ->capture_default_str();
    sub->add_option("--config", config_path,
                    "JSON config file (flags override its values)");
  };

  GenDataCfg gen;
  auto* sc_gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_common(sc_gen);
  sc_gen->add_option("--labels", gen.labels)->capture_default_str();
  sc_gen->add_option("--per-label", gen.per_label)->capture_default_str();
  sc_gen->add_option("--dim", gen.dim)->capture_default_str();
  sc_gen->add_option("--sep", gen.sep, "class center sphere radius")->capture_default_str();
  sc_gen->add_option("--noise", gen.noise, "within-class noise sigma")->capture_default_str();
  sc_gen->add_option("--seed", gen.seed)->capture_default_str();
  sc_gen->add_option("--split", gen.split)
      ->check(CLI::IsMember({"meta-train", "meta-val", "downstream"}))
      ->capture_default_str();
  sc_gen->add_option("--label-prefix", gen.label_prefix)->capture_default_str();
  sc_gen->add_option("--format", gen.format)
      ->check(CLI::IsMember({"jsonl", "csv"}))->capture_default_str();

  MetaTrainCfg mt;
  auto* sc_mt = app.add_subcommand("meta-train", "episodic meta-training");
  add_common(sc_mt);
  sc_mt->add_option("--train", mt.train, "meta-train dataset file(s)")->required();
  sc_mt->add_option("--val", mt.val, "meta-val dataset file")->required();
  sc_mt->add_option("--format", mt.format)
      ->check(CLI::IsMember({"jsonl", "csv"}))->capture_default_str();
  mt.flags.add_options(sc_mt);

  EvalCfg ev;
  auto* sc_ev = app.add_subcommand("eval", "episodic evaluation of a checkpoint");
  add_common(sc_ev);
  sc_ev->add_option("--checkpoint", ev.checkpoint)->required();
  sc_ev->add_option("--data", ev.data)->required();
  sc_ev->add_option("--format", ev.format)
      ->check(CLI::IsMember({"jsonl", "csv"}))->capture_default_str();
  sc_ev->add_option("--ways", ev.ways)->capture_default_str();
  sc_ev->add_option("--shots", ev.shots)->capture_default_str();
  sc_ev->add_option("--supports", ev.supports)->capture_default_str();
  sc_ev->add_option("--kind", ev.kind)
      ->check(CLI::IsMember({"diagonal", "isotropic"}))->capture_default_str();
  sc_ev->add_option("--tasks", ev.tasks, "episodes per seed")->capture_default_str();
  sc_ev->add_option("--seeds", ev.seeds, "number of seeds (0..n-1)")->capture_default_str();

  FitCfg fit;
  auto* sc_fit = app.add_subcommand("fit", "fit task statistics into a registry");
  add_common(sc_fit);
  sc_fit->add_option("--checkpoint", fit.checkpoint)->required();
  sc_fit->add_option("--data", fit.data)->required();
  sc_fit->add_option("--format", fit.format)
      ->check(CLI::IsMember({"jsonl", "csv"}))->capture_default_str();
  sc_fit->add_option("--task-id", fit.task_id)->required();
  sc_fit->add_option("--kind", fit.kind)
      ->check(CLI::IsMember({"diagonal", "isotropic"}))->capture_default_str();
  sc_fit->add_option("--ood-k", fit.ood_k, "top-variance dims per class")->capture_default_str();
  sc_fit->add_option("--registry", fit.registry_in, "existing registry to extend");

  ClassifyCfg cls;
  auto* sc_cls = app.add_subcommand("classify", "classify queries against a fitted task");
  add_common(sc_cls);
  sc_cls->add_option("--checkpoint", cls.checkpoint)->required();
  sc_cls->add_option("--registry", cls.registry)->required();
  sc_cls->add_option("--task-id", cls.task_id)->required();
  sc_cls->add_option("--queries", cls.queries)->required();
  sc_cls->add_option("--format", cls.format)
      ->check(CLI::IsMember({"jsonl", "csv"}))->capture_default_str();

  OodCfg ood;
  auto* sc_ood = app.add_subcommand("ood", "out-of-distribution scores for queries");
  add_common(sc_ood);
  sc_ood->add_option("--checkpoint", ood.checkpoint)->required();
  sc_ood->add_option("--registry", ood.registry)->required();
  sc_ood->add_option("--task-id", ood.task_id)->required();
  sc_ood->add_option("--queries", ood.queries)->required();
  sc_ood->add_option("--format", ood.format)
      ->check(CLI::IsMember({"jsonl", "csv"}))->capture_default_str();
  sc_ood->add_option("--k", ood.k)->capture_default_str();
  sc_ood->add_option("--threshold", ood.threshold)->capture_default_str();
  sc_ood->add_flag("--union-reading", ood.union_reading,
                   "divide the raw union size by |dataset indices| (may exceed 1)");

  StabilityCfg st;
  auto* sc_st = app.add_subcommand("stability", "prototype stability across k-shot resamples");
  add_common(sc_st);
  sc_st->add_option("--checkpoint", st.checkpoint)->required();
  sc_st->add_option("--fit-data", st.fit_data)->required();
  sc_st->add_option("--eval-data", st.eval_data)->required();
  sc_st->add_option("--format", st.format)
      ->check(CLI::IsMember({"jsonl", "csv"}))->capture_default_str();
  sc_st->add_option("--k", st.k_values, "k values")->delimiter(',')->capture_default_str();
  sc_st->add_option("--resamples", st.resamples)->capture_default_str();
  sc_st->add_option("--seed", st.seed)->capture_default_str();
  sc_st->add_option("--kind", st.kind)
      ->check(CLI::IsMember({"diagonal", "isotropic"}))->capture_default_str();

  LambdaSweepCfg sw;
  auto* sc_sw = app.add_subcommand("lambda-sweep",
                                   "train across a regularizer grid, emit CSV");
  add_common(sc_sw);
  sc_sw->add_option("--train", sw.train)->required();
  sc_sw->add_option("--val", sw.val)->required();
  sc_sw->add_option("--format", sw.format)
      ->check(CLI::IsMember({"jsonl", "csv"}))->capture_default_str();
  sc_sw->add_option("--lambdas", sw.lambdas)->delimiter(',')->capture_default_str();
  sc_sw->add_option("--stat-episodes", sw.stat_episodes)->capture_default_str();
  sc_sw->add_option("--eval-seeds", sw.eval_seeds)->capture_default_str();
  sw.flags.add_options(sc_sw);

  RegEffectCfg re;
  auto* sc_re = app.add_subcommand("reg-effect",
                                   "compare class statistics of two checkpoints");
  add_common(sc_re);
  sc_re->add_option("--unreg-checkpoint", re.unreg_checkpoint)->required();
  sc_re->add_option("--reg-checkpoint", re.reg_checkpoint)->required();
  sc_re->add_option("--data", re.data)->required();
  sc_re->add_option("--format", re.format)
      ->check(CLI::IsMember({"jsonl", "csv"}))->capture_default_str();
  sc_re->add_option("--episodes", re.episodes)->capture_default_str();
  sc_re->add_option("--shots", re.shots)->capture_default_str();
  sc_re->add_option("--supports", re.supports)->capture_default_str();
  sc_re->add_option("--seed", re.seed)->capture_default_str();

  std::string manifest_path;
  auto* sc_rr = app.add_subcommand("rerun", "replay a command from its manifest");
  sc_rr->add_option("--manifest", manifest_path)->required();
  sc_rr->add_option("--out-dir", out_dir,
                    "output directory (defaults to the manifest's)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(sc_rr)) {
      const fs::path out =
          sc_rr->count("--out-dir") > 0 ? fs::path(out_dir) : fs::path();
      return run_from_manifest(manifest_path, out);
    }
    auto dispatch = [&](CLI::App* sub, const char* command, json cfg) {
      return execute(command, apply_config_file(sub, std::move(cfg), config_path),
                     out_dir);
    };
    if (app.got_subcommand(sc_gen)) return dispatch(sc_gen, "gen-data", gen.to_json());
    if (app.got_subcommand(sc_mt)) return dispatch(sc_mt, "meta-train", mt.to_json());
    if (app.got_subcommand(sc_ev)) return dispatch(sc_ev, "eval", ev.to_json());
    if (app.got_subcommand(sc_fit)) return dispatch(sc_fit, "fit", fit.to_json());
    if (app.got_subcommand(sc_cls)) return dispatch(sc_cls, "classify", cls.to_json());
    if (app.got_subcommand(sc_ood)) return dispatch(sc_ood, "ood", ood.to_json());
    if (app.got_subcommand(sc_st)) return dispatch(sc_st, "stability", st.to_json());
    if (app.got_subcommand(sc_sw)) return dispatch(sc_sw, "lambda-sweep", sw.to_json());
    if (app.got_subcommand(sc_re)) return dispatch(sc_re, "reg-effect", re.to_json());
    throw UsageError("no command given");
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
