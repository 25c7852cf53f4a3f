// flamm: command-line front end.
//
// Settings come from an optional `--config` file of `key = value` lines whose
// keys are the long flag names; flags given on the command line win.
//
// Exit status: 0 ok, 1 usage, 2 data error, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "flamm/classifier.hpp"
#include "flamm/corpus.hpp"
#include "flamm/error.hpp"
#include "flamm/experiment.hpp"
#include "flamm/feature_stack.hpp"
#include "flamm/sparse_io.hpp"

namespace fs = std::filesystem;
using namespace flamm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Keys understood by apply_setting; everything else is tool-specific.
const std::set<std::string> kExperimentKeys{
    "source", "target", "unlabeled", "out",    "method", "gamma1",  "gamma2",     "layers",     "pca-dim",
    "coral-lambda", "gamma2-scale", "constant-row", "val-size", "seed", "reg-c", "loss", "format", "workers", "grid-preset"};

const std::map<std::string, const char*> kFlags{
    {"source", "labeled source-domain sparse matrix file"},
    {"target", "labeled target-domain sparse matrix file (validation + test pool)"},
    {"unlabeled", "extra unlabeled target samples used only for feature learning"},
    {"method", "raw | pca | coral | sfl | flamm"},
    {"gamma1", "feature-length weight; comma-separated list for a grid"},
    {"gamma2", "moment-gap weight; comma-separated list for a grid"},
    {"layers", "number of stacked layers K; list allowed"},
    {"pca-dim", "PCA output dimension; list allowed"},
    {"coral-lambda", "CORAL ridge added to both covariances; list allowed"},
    {"gamma2-scale", "multiply gamma2 by the sample count (true|false, default true)"},
    {"constant-row", "append a constant-1 feature to every sample (true|false, default false)"},
    {"grid-preset", "amazon | spam default grids"},
    {"val-size", "labeled target samples held out for selection (default 500)"},
    {"seed", "seed for the validation draw"},
    {"reg-c", "classifier C (default 1)"},
    {"loss", "hinge | squared_hinge"},
    {"workers", "parallel grid evaluations"},
    {"out", "output path (stdout when omitted for reports)"},
    {"format", "json | csv"},
    {"model", "model file to read"},
    {"input", "sparse matrix file to transform"},
    {"corpus", "corpus root laid out as <split>/<label>/<docid>.txt"},
    {"manifest", "manifest of '<split> <label> <path>' lines"},
    {"vocab-size", "vocabulary size (default 5000)"},
    {"idf", "all | source: documents used to fit idf (default all)"},
    {"source-split", "name of the source split for --idf source (default source)"},
};

struct Command {
  CLI::App* app = nullptr;
  std::map<std::string, std::string> values;  // flag name -> raw text
  std::string config_path;
  bool no_timings = false;
};

void add_flags(Command& cmd, const std::vector<std::string>& names) {
  cmd.app->add_option("--config", cmd.config_path, "file of 'key = value' lines; flags override it");
  for (const auto& n : names) {
    cmd.app->add_option("--" + n, cmd.values[n], kFlags.at(n));
  }
}

// Config file first, then flags that were actually given.
std::map<std::string, std::string> merged_settings(const Command& cmd) {
  std::map<std::string, std::string> out;
  if (!cmd.config_path.empty()) {
    try {
      out = read_config_file(cmd.config_path);
    } catch (const InvalidInput& e) {
      throw UsageError(e.what());
    }
    for (const auto& [k, v] : out) {
      if (!kFlags.count(k)) throw UsageError(cmd.config_path + ": unknown key '" + k + "'");
    }
  }
  for (const auto& [name, text] : cmd.values) {
    if (cmd.app->count("--" + name) > 0) out[name] = text;
  }
  return out;
}

ExperimentConfig experiment_config(const std::map<std::string, std::string>& settings) {
  ExperimentConfig config;
  for (const auto& [k, v] : settings) {
    if (!kExperimentKeys.count(k)) continue;
    try {
      apply_setting(config, k, v);
    } catch (const InvalidInput& e) {
      throw UsageError(e.what());
    }
  }
  return config;
}

std::string require(const std::map<std::string, std::string>& s, const std::string& key) {
  const auto it = s.find(key);
  if (it == s.end() || it->second.empty()) throw UsageError("--" + key + " is required");
  return it->second;
}

std::string optional(const std::map<std::string, std::string>& s, const std::string& key,
                     const std::string& fallback = "") {
  const auto it = s.find(key);
  return it == s.end() ? fallback : it->second;
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open " + path + " for writing");
  out << text;
  if (!out) throw InvalidInput("write to " + path + " failed");
}

void validate(const ExperimentConfig& config) {
  try {
    config.validate();
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }
}

// Single grid point or a usage error.
Hyperparams single_point(const ExperimentConfig& config, const char* command) {
  validate(config);
  const auto points = config.grid.points(config.method);
  if (points.size() != 1) {
    throw UsageError(std::string(command) + " needs exactly one value per hyperparameter (got " +
                     std::to_string(points.size()) + " grid points; use 'grid' or 'run' to select)");
  }
  return points.front();
}

int cmd_ingest(const Command& cmd) {
  const auto s = merged_settings(cmd);
  const std::string out_dir = require(s, "out");
  const std::string corpus = optional(s, "corpus");
  const std::string manifest = optional(s, "manifest");
  if (corpus.empty() == manifest.empty()) throw UsageError("give exactly one of --corpus or --manifest");

  IngestOptions options;
  if (s.count("vocab-size")) {
    try {
      options.vocabulary_size = std::stoul(s.at("vocab-size"));
    } catch (const std::exception&) {
      throw UsageError("--vocab-size: expected a positive integer");
    }
  }
  const std::string idf = optional(s, "idf", "all");
  if (idf != "all" && idf != "source") throw UsageError("--idf: expected all or source");
  options.source_only_idf = idf == "source";
  options.source_split = optional(s, "source-split", options.source_split);

  const auto docs = corpus.empty() ? load_manifest(manifest) : load_corpus_dir(corpus);
  const auto result = ingest_corpus(docs, options);

  fs::create_directories(out_dir);
  for (const auto& [name, split] : result.splits) {
    const auto path = (fs::path(out_dir) / (name + ".txt")).string();
    write_sparse(path, split.x, split.labels.empty() ? nullptr : &split.labels);
    std::ofstream ids(fs::path(out_dir) / (name + ".ids"));
    for (const auto& id : split.ids) ids << id << '\n';
  }
  {
    std::ofstream vocab(fs::path(out_dir) / "vocab.txt");
    for (std::size_t i = 0; i < result.vocab.terms.size(); ++i)
      vocab << result.vocab.terms[i] << '\t' << result.vocab.document_frequency[i] << '\n';
  }
  {
    std::ofstream dropped(fs::path(out_dir) / "dropped.txt");
    for (const auto& d : result.dropped) dropped << d << '\n';
  }
  if (result.vocab.truncated) {
    std::cerr << "warning: only " << result.vocab.size() << " distinct terms available\n";
  }
  for (const auto& d : result.dropped) std::cerr << "dropped (no vocabulary term): " << d << '\n';
  std::cerr << "ingested " << docs.size() - result.dropped.size() << " documents into " << result.splits.size()
            << " splits, d = " << result.vocab.size() << '\n';
  return kExitOk;
}

int cmd_fit(const Command& cmd) {
  const auto s = merged_settings(cmd);
  auto config = experiment_config(s);
  if (!s.count("method")) config.method = Method::kFlamm;
  if (config.method != Method::kSfl && config.method != Method::kFlamm) {
    throw UsageError("fit stores stacked layers; --method must be sfl or flamm");
  }
  const std::string out = require(s, "out");
  const Hyperparams p = single_point(config, "fit");
  ExperimentConfig load = config;
  load.source_path = require(s, "source");
  load.target_path = require(s, "target");
  const auto data = load_experiment_data(load);
  const auto rep = learn_representation(config.method, p, data.source.x, data.target_all(), config.gamma2_scale_by_n);
  save_stack(out, *rep.stack);
  std::cerr << "wrote " << rep.stack->depth() << "-layer model to " << out << '\n';
  return kExitOk;
}

int cmd_transform(const Command& cmd) {
  const auto s = merged_settings(cmd);
  const auto model = load_stack(require(s, "model"));
  const auto in = read_sparse(require(s, "input"));
  const DataMatrix x = apply_stack(in.x, model);
  const std::string out = optional(s, "out");
  if (out.empty()) {
    write_sparse(std::cout, x, in.labels ? &*in.labels : nullptr);
  } else {
    write_sparse(out, x, in.labels ? &*in.labels : nullptr);
  }
  return kExitOk;
}

int cmd_train(const Command& cmd) {
  const auto s = merged_settings(cmd);
  const auto config = experiment_config(s);
  if (!(config.reg_c > 0.0)) throw UsageError("--reg-c must be positive");
  const std::string out = require(s, "out");
  const auto data = read_sparse(require(s, "source")).labeled();
  TrainStats stats;
  const auto model = train(data, config.reg_c, config.loss, &stats);
  save_linear(out, model);
  std::cerr << "trained on " << data.n() << " samples: primal " << stats.primal << ", gap " << stats.duality_gap
            << (stats.converged ? "" : " (iteration cap reached)") << '\n';
  return kExitOk;
}

int cmd_eval(const Command& cmd) {
  const auto s = merged_settings(cmd);
  const auto config = experiment_config(s);
  const auto model = load_linear(require(s, "model"));
  const auto data = read_sparse(require(s, "target")).labeled();
  const double acc = accuracy(model, data);
  std::string text;
  if (config.format == ReportFormat::kCsv) {
    std::ostringstream csv;
    csv.precision(17);
    csv << "accuracy,n_test,version\n" << acc << ',' << data.n() << ',' << version() << '\n';
    text = csv.str();
  } else {
    nlohmann::ordered_json j;
    j["accuracy"] = acc;
    j["n_test"] = data.n();
    j["classifier"] = {{"reg_c", model.reg_c}, {"loss", to_string(model.loss)}};
    j["version"] = version();
    text = j.dump(2) + "\n";
  }
  emit(text, optional(s, "out"));
  return kExitOk;
}

int cmd_grid(const Command& cmd) {
  const auto s = merged_settings(cmd);
  const auto config = experiment_config(s);
  validate(config);
  const auto data = load_experiment_data(config);
  const auto split = sample_validation(data.target_pool, config.validation_size, config.seed);
  const auto result = stv_select(config, data, split, config.grid.points(config.method));

  std::string text;
  if (config.format == ReportFormat::kCsv) {
    std::ostringstream csv;
    csv.precision(17);
    csv << "gamma1,gamma2,layers,pca_dim,coral_lambda,validation_accuracy,best\n";
    for (const auto& g : result.scores) {
      csv << g.params.gamma1 << ',' << g.params.gamma2 << ',' << g.params.layers << ',' << g.params.pca_dim << ','
          << g.params.coral_lambda << ',' << g.validation_accuracy << ',' << (g.params == result.best ? 1 : 0)
          << '\n';
    }
    text = csv.str();
  } else {
    const auto as_json = [&](const Hyperparams& p) {
      return nlohmann::ordered_json{{"gamma1", p.gamma1},   {"gamma2", p.gamma2},
                                    {"layers", p.layers},   {"pca_dim", p.pca_dim},
                                    {"coral_lambda", p.coral_lambda}};
    };
    nlohmann::ordered_json j;
    j["method"] = to_string(config.method);
    j["best"] = as_json(result.best);
    j["validation_accuracy"] = result.best_accuracy;
    j["n_validation"] = split.validation.size();
    j["grid"] = nlohmann::ordered_json::array();
    for (const auto& g : result.scores) {
      auto point = as_json(g.params);
      point["accuracy"] = g.validation_accuracy;
      j["grid"].push_back(point);
    }
    j["seed"] = config.seed;
    j["version"] = version();
    text = j.dump(2) + "\n";
  }
  emit(text, config.output_path);
  return kExitOk;
}

int cmd_curve(const Command& cmd) {
  const auto s = merged_settings(cmd);
  auto config = experiment_config(s);
  if (!s.count("method")) config.method = Method::kFlamm;
  if (config.method != Method::kSfl && config.method != Method::kFlamm) {
    throw UsageError("curve needs --method sfl or flamm");
  }
  single_point(config, "curve");
  const auto curve = distance_curve(config);
  emit(format_curve(curve, config.method, config.format), config.output_path);
  return kExitOk;
}

int cmd_run(const Command& cmd) {
  const auto s = merged_settings(cmd);
  const auto config = experiment_config(s);
  validate(config);
  const auto report = run_experiment(config);
  std::string text = config.format == ReportFormat::kJson ? to_json(report, !cmd.no_timings) : to_csv(report);
  emit(text, config.output_path);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flamm " + version() + ": moment-matching feature learning for domain adaptation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version());

  const std::vector<std::string> experiment_flags{"source", "target", "unlabeled", "method", "gamma1",
                                                  "gamma2", "layers", "pca-dim", "coral-lambda", "gamma2-scale",
                                                  "constant-row", "grid-preset", "val-size", "seed", "reg-c", "loss",
                                                  "workers", "out", "format"};

  Command ingest, fit, transform, train_cmd, eval, grid, curve, run;
  ingest.app = app.add_subcommand(
      "ingest",
      "turn a raw text corpus into tf-idf sparse matrices, one <split>.txt per split.\n"
      "Corpus layout: <root>/<split>/<label>/<docid>.txt with label one of pos/neg/spam/ham/1/0/+1/-1 or\n"
      "'unlabeled'. A manifest instead lists '<split> <label> <path>' per line, paths relative to it.");
  add_flags(ingest, {"corpus", "manifest", "vocab-size", "idf", "source-split", "out"});

  fit.app = app.add_subcommand("fit", "learn a stacked sfl/flamm model on source + target and save it");
  add_flags(fit, experiment_flags);

  transform.app = app.add_subcommand("transform", "apply a saved stack model to a sparse matrix file");
  add_flags(transform, {"model", "input", "out"});

  train_cmd.app = app.add_subcommand("train", "train the linear classifier on a labeled sparse file");
  add_flags(train_cmd, {"source", "reg-c", "loss", "out"});

  eval.app = app.add_subcommand("eval", "accuracy of a saved classifier on a labeled sparse file");
  add_flags(eval, {"model", "target", "out", "format"});

  grid.app = app.add_subcommand("grid", "score a hyperparameter grid on a target validation draw");
  add_flags(grid, experiment_flags);

  curve.app = app.add_subcommand("curve", "per-layer moment-gap distances of a stack");
  add_flags(curve, experiment_flags);

  run.app = app.add_subcommand("run", "select, fit, train and evaluate end to end; writes a report");
  add_flags(run, experiment_flags);
  run.app->add_flag("--no-timings", run.no_timings, "leave wall-clock timings out of the JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest.app) return cmd_ingest(ingest);
    if (*fit.app) return cmd_fit(fit);
    if (*transform.app) return cmd_transform(transform);
    if (*train_cmd.app) return cmd_train(train_cmd);
    if (*eval.app) return cmd_eval(eval);
    if (*grid.app) return cmd_grid(grid);
    if (*curve.app) return cmd_curve(curve);
    if (*run.app) return cmd_run(run);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << " (condition estimate " << e.condition_estimate() << ")\n";
    return kExitNumerical;
  } catch (const InvalidInput& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
