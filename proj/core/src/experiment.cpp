#include "flamm/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "flamm/error.hpp"
#include "flamm/sparse_io.hpp"

#ifndef FLAMM_VERSION
#define FLAMM_VERSION "0.0.0"
#endif

namespace flamm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& key, const std::string& value) {
  std::vector<std::string> out;
  if (trim(value).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = value.find(',', start);
    std::string item = trim(value.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (item.empty()) throw InvalidInput("--" + key + ": empty item in list '" + value + "'");
    out.push_back(std::move(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InvalidInput("--" + key + ": '" + text + "' is not a number");
  }
}

std::uint64_t to_unsigned(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    if (!text.empty() && text.front() == '-') throw std::invalid_argument(text);
    const unsigned long long v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InvalidInput("--" + key + ": '" + text + "' is not a non-negative integer");
  }
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw InvalidInput("--" + key + ": '" + text + "' is not a boolean");
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& key, const std::string& value, F convert) {
  std::vector<T> out;
  for (const auto& item : split_list(key, value)) out.push_back(static_cast<T>(convert(key, item)));
  if (out.empty()) throw InvalidInput("--" + key + ": empty list");
  return out;
}

// Removes all-zero columns, recording "<origin>:<1-based sample>" for each.
std::pair<DataMatrix, std::vector<int>> drop_empty(const DataMatrix& x, const std::vector<int>& labels,
                                                   const std::string& origin,
                                                   std::vector<std::string>& dropped) {
  std::vector<Index> kept;
  for (Index j = 0; j < x.n(); ++j) {
    if (x.values().col(j).cwiseAbs().maxCoeff() == 0.0) {
      dropped.push_back(origin + ":" + std::to_string(j + 1));
    } else {
      kept.push_back(j);
    }
  }
  if (kept.empty()) throw InvalidInput(origin + ": every sample is an all-zero column");
  if (static_cast<Index>(kept.size()) == x.n()) return {x, labels};
  Eigen::MatrixXd cols(x.d(), static_cast<Index>(kept.size()));
  std::vector<int> kept_labels;
  for (std::size_t k = 0; k < kept.size(); ++k) {
    cols.col(static_cast<Index>(k)) = x.values().col(kept[k]);
    kept_labels.push_back(labels[static_cast<std::size_t>(kept[k])]);
  }
  return {DataMatrix(std::move(cols)), std::move(kept_labels)};
}

DataMatrix gather(const DataMatrix& x, const std::vector<Index>& cols) {
  Eigen::MatrixXd out(x.d(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = x.values().col(cols[k]);
  return DataMatrix(std::move(out));
}

std::vector<int> gather_labels(const std::vector<int>& y, const std::vector<Index>& cols) {
  std::vector<int> out;
  out.reserve(cols.size());
  for (auto c : cols) out.push_back(y[static_cast<std::size_t>(c)]);
  return out;
}

// Accuracy on the pool columns `eval` after learning features with `params`.
double evaluate_point(const ExperimentConfig& config, const ExperimentData& data,
                      const DataMatrix& target_all, const std::vector<Index>& eval,
                      const Hyperparams& params) {
  const Representation rep =
      learn_representation(config.method, params, data.source.x, target_all, config.gamma2_scale_by_n);
  const LinearModel model = train(LabeledSet(rep.source, data.source.y), config.reg_c, config.loss);
  const LabeledSet held_out(gather(rep.target, eval), gather_labels(data.target_pool.y, eval));
  return accuracy(model, held_out);
}

nlohmann::ordered_json params_json(Method method, const Hyperparams& p, bool scale_by_n) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  switch (method) {
    case Method::kRaw:
      break;
    case Method::kPca:
      j["pca_dim"] = p.pca_dim;
      break;
    case Method::kCoral:
      j["coral_lambda"] = p.coral_lambda;
      break;
    case Method::kSfl:
    case Method::kFlamm:
      j["gamma1"] = p.gamma1;
      j["gamma2"] = p.gamma2;
      j["gamma2_scale_by_n"] = scale_by_n;
      j["layers"] = p.layers;
      break;
  }
  return j;
}

// Runs `body`, prefixing any library error with the pipeline stage while
// keeping its type (the CLI maps types to exit codes).
template <class F>
auto staged(const char* stage, F&& body) -> decltype(body()) {
  const std::string prefix = std::string(stage) + ": ";
  try {
    return body();
  } catch (const NumericalFailure& e) {
    throw NumericalFailure(prefix + e.what(), e.condition_estimate());
  } catch (const DegenerateLabels& e) {
    throw DegenerateLabels(prefix + e.what());
  } catch (const DegenerateFeature& e) {
    throw DegenerateFeature(prefix + e.what());
  } catch (const ParseError& e) {
    throw ParseError(prefix + e.what(), 0);
  } catch (const InvalidInput& e) {
    throw InvalidInput(prefix + e.what());
  }
}

}  // namespace

std::string version() { return FLAMM_VERSION; }

std::string to_string(Method method) {
  switch (method) {
    case Method::kRaw: return "raw";
    case Method::kPca: return "pca";
    case Method::kCoral: return "coral";
    case Method::kSfl: return "sfl";
    case Method::kFlamm: return "flamm";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "raw") return Method::kRaw;
  if (name == "pca") return Method::kPca;
  if (name == "coral") return Method::kCoral;
  if (name == "sfl") return Method::kSfl;
  if (name == "flamm") return Method::kFlamm;
  throw InvalidInput("unknown method '" + name + "' (expected raw, pca, coral, sfl or flamm)");
}

ReportFormat parse_format(const std::string& name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  throw InvalidInput("unknown format '" + name + "' (expected json or csv)");
}

HyperGrid HyperGrid::amazon_defaults() {
  HyperGrid g;
  for (int v = 10; v <= 100; v += 10) {
    g.gamma1.push_back(v);
    g.gamma2.push_back(v);
  }
  g.layers = {2};
  for (Index k = 50; k <= 300; k += 50) g.pca_dim.push_back(k);
  g.coral_lambda = {1.0};
  return g;
}

HyperGrid HyperGrid::spam_defaults() {
  HyperGrid g = amazon_defaults();
  g.gamma1.clear();
  g.gamma2.clear();
  for (int v = 10; v <= 150; v += 20) {
    g.gamma1.push_back(v);
    g.gamma2.push_back(v);
  }
  g.layers = {5};
  return g;
}

std::vector<Hyperparams> HyperGrid::points(Method method) const {
  const auto require = [](bool ok, const char* axis) {
    if (!ok) throw InvalidInput(std::string("grid for ") + axis + " is empty");
  };
  std::vector<Hyperparams> out;
  switch (method) {
    case Method::kRaw:
      out.push_back({});
      break;
    case Method::kPca:
      require(!pca_dim.empty(), "pca-dim");
      for (Index k : pca_dim) out.push_back({0.0, 0.0, 1, k, 1.0});
      break;
    case Method::kCoral:
      require(!coral_lambda.empty(), "coral-lambda");
      for (double l : coral_lambda) out.push_back({0.0, 0.0, 1, 0, l});
      break;
    case Method::kSfl:
      require(!gamma1.empty(), "gamma1");
      require(!layers.empty(), "layers");
      for (double g1 : gamma1)
        for (auto k : layers) out.push_back({g1, 0.0, k, 0, 1.0});
      break;
    case Method::kFlamm:
      require(!gamma1.empty(), "gamma1");
      require(!gamma2.empty(), "gamma2");
      require(!layers.empty(), "layers");
      for (double g1 : gamma1)
        for (double g2 : gamma2)
          for (auto k : layers) out.push_back({g1, g2, k, 0, 1.0});
      break;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void ExperimentConfig::validate() const {
  const auto points = grid.points(method);
  for (const auto& p : points) {
    if (p.gamma1 < 0.0 || p.gamma2 < 0.0) throw InvalidInput("gammas must be non-negative");
    if ((method == Method::kSfl || method == Method::kFlamm) && p.layers < 1) {
      throw InvalidInput("--layers must be at least 1");
    }
    if (method == Method::kPca && p.pca_dim < 1) throw InvalidInput("--pca-dim must be positive");
    if (method == Method::kCoral && p.coral_lambda < 0.0) {
      throw InvalidInput("--coral-lambda must be non-negative");
    }
  }
  if (!(reg_c > 0.0)) throw InvalidInput("--reg-c must be positive");
  if (validation_size == 0 && points.size() > 1) {
    throw InvalidInput("a grid with more than one point needs --val-size > 0");
  }
  if (workers < 1) throw InvalidInput("--workers must be at least 1");
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
    std::string key = trim(line.substr(0, eq));
    while (!key.empty() && key.front() == '-') key.erase(0, 1);
    if (key.empty()) throw ParseError("empty key", line_no);
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_config_text(buffer.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "source") {
    c.source_path = value;
  } else if (key == "target") {
    c.target_path = value;
  } else if (key == "unlabeled") {
    c.unlabeled_path = value;
  } else if (key == "out") {
    c.output_path = value;
  } else if (key == "method") {
    c.method = parse_method(value);
  } else if (key == "gamma1") {
    c.grid.gamma1 = parse_list<double>(key, value, to_double);
  } else if (key == "gamma2") {
    c.grid.gamma2 = parse_list<double>(key, value, to_double);
  } else if (key == "layers") {
    c.grid.layers = parse_list<std::size_t>(key, value, to_unsigned);
  } else if (key == "pca-dim") {
    c.grid.pca_dim = parse_list<Index>(key, value, to_unsigned);
  } else if (key == "coral-lambda") {
    c.grid.coral_lambda = parse_list<double>(key, value, to_double);
  } else if (key == "gamma2-scale") {
    c.gamma2_scale_by_n = to_bool(key, value);
  } else if (key == "constant-row") {
    c.constant_row = to_bool(key, value);
  } else if (key == "val-size") {
    c.validation_size = to_unsigned(key, value);
  } else if (key == "seed") {
    c.seed = to_unsigned(key, value);
  } else if (key == "reg-c") {
    c.reg_c = to_double(key, value);
  } else if (key == "loss") {
    c.loss = parse_loss(value);
  } else if (key == "format") {
    c.format = parse_format(value);
  } else if (key == "workers") {
    c.workers = to_unsigned(key, value);
  } else if (key == "grid-preset") {
    if (value == "amazon") {
      c.grid = HyperGrid::amazon_defaults();
    } else if (value == "spam") {
      c.grid = HyperGrid::spam_defaults();
    } else {
      throw InvalidInput("--grid-preset: expected amazon or spam");
    }
  } else {
    throw InvalidInput("unknown setting '" + key + "'");
  }
}

DataMatrix ExperimentData::target_all() const {
  return target_unlabeled ? concat(target_pool.x, *target_unlabeled) : target_pool.x;
}

ExperimentData load_experiment_data(const ExperimentConfig& config) {
  if (config.source_path.empty()) throw InvalidInput("--source is required");
  if (config.target_path.empty()) throw InvalidInput("--target is required");

  ExperimentData data;
  const SparseFile source = read_sparse(config.source_path);
  const SparseFile target = read_sparse(config.target_path);
  if (!source.labels) throw InvalidInput(config.source_path + ": source samples must be labeled");
  if (!target.labels) {
    throw InvalidInput(config.target_path + ": target pool must be labeled for validation/test");
  }
  if (source.x.d() != target.x.d()) {
    throw InvalidInput("source and target dimensions differ (" + std::to_string(source.x.d()) +
                       " vs " + std::to_string(target.x.d()) + ")");
  }
  auto [sx, sy] = drop_empty(source.x, *source.labels, config.source_path, data.dropped);
  auto [tx, ty] = drop_empty(target.x, *target.labels, config.target_path, data.dropped);
  if (config.constant_row) {
    sx = append_constant_row(sx);
    tx = append_constant_row(tx);
  }
  data.source = LabeledSet(std::move(sx), std::move(sy));
  data.target_pool = LabeledSet(std::move(tx), std::move(ty));
  if (!config.unlabeled_path.empty()) {
    const SparseFile extra = read_sparse(config.unlabeled_path);
    if (extra.x.d() != source.x.d()) throw InvalidInput("unlabeled target dimension differs");
    DataMatrix ux = drop_empty(extra.x, std::vector<int>(static_cast<std::size_t>(extra.x.n()), 0),
                               config.unlabeled_path, data.dropped)
                        .first;
    data.target_unlabeled = config.constant_row ? append_constant_row(ux) : std::move(ux);
  }
  return data;
}

Representation learn_representation(Method method, const Hyperparams& params,
                                    const DataMatrix& source, const DataMatrix& target,
                                    bool gamma2_scale_by_n) {
  if (source.d() != target.d()) throw InvalidInput("source and target dimensions differ");
  const double before = moment_gap(source, target).distance;
  switch (method) {
    case Method::kRaw:
      return {source, target, {before}, std::nullopt};
    case Method::kPca: {
      const PcaModel pca = pca_fit(concat(source, target), params.pca_dim);
      DataMatrix s = pca_transform(source, pca);
      DataMatrix t = pca_transform(target, pca);
      const double after = moment_gap(s, t).distance;
      return {std::move(s), std::move(t), {before, after}, std::nullopt};
    }
    case Method::kCoral: {
      CoralResult coral = coral_align(source, target, params.coral_lambda);
      const double after = moment_gap(coral.aligned_source, target).distance;
      return {std::move(coral.aligned_source), target, {before, after}, std::nullopt};
    }
    case Method::kSfl:
    case Method::kFlamm: {
      const LayerParams layer{params.gamma1, method == Method::kSfl ? 0.0 : params.gamma2,
                              gamma2_scale_by_n};
      StackFit fit = fit_stack(source, target, layer, params.layers);
      std::vector<double> distances = fit.model.per_layer_distance;
      return {std::move(fit.transformed.source), std::move(fit.transformed.target),
              std::move(distances), std::move(fit.model)};
    }
  }
  throw InvalidInput("unknown method");
}

StvResult stv_select(const ExperimentConfig& config, const ExperimentData& data,
                     const ValidationSplit& split, const std::vector<Hyperparams>& grid) {
  if (grid.empty()) throw InvalidInput("hyperparameter grid is empty");
  if (split.validation.empty()) throw InvalidInput("validation subset is empty");

  const DataMatrix target_all = data.target_all();
  std::vector<double> scores(grid.size(), 0.0);
  std::vector<std::exception_ptr> errors(grid.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        scores[i] = evaluate_point(config, data, target_all, split.validation, grid[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t slots = std::min(std::max<std::size_t>(config.workers, 1), grid.size());
  if (slots == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < slots; ++t) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  StvResult result;
  result.best = grid.front();
  result.best_accuracy = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    result.scores.push_back({grid[i], scores[i]});
    if (scores[i] > result.best_accuracy ||
        (scores[i] == result.best_accuracy && grid[i] < result.best)) {
      result.best = grid[i];
      result.best_accuracy = scores[i];
    }
  }
  return result;
}

RunReport run_experiment(const ExperimentConfig& config) {
  const auto start = Clock::now();
  const ExperimentData data = staged("load", [&] { return load_experiment_data(config); });
  const double load_s = seconds_since(start);
  RunReport report = run_experiment(config, data);
  report.timings["load_s"] = load_s;
  report.timings["total_s"] = seconds_since(start);
  return report;
}

RunReport run_experiment(const ExperimentConfig& config, const ExperimentData& data) {
  config.validate();
  const auto grid = config.grid.points(config.method);

  RunReport report;
  report.method = config.method;
  report.gamma2_scale_by_n = config.gamma2_scale_by_n;
  report.constant_row = config.constant_row;
  report.reg_c = config.reg_c;
  report.loss = config.loss;
  report.seed = config.seed;
  report.version = version();
  report.dropped = data.dropped;

  const ValidationSplit split = staged(
      "validation split", [&] { return sample_validation(data.target_pool, config.validation_size, config.seed); });
  if (split.remainder.empty()) {
    throw InvalidInput("validation subset consumes the whole target pool; no test samples remain");
  }
  report.n_validation = split.validation.size();
  report.n_test = split.remainder.size();

  auto stage = Clock::now();
  if (!split.validation.empty()) {
    StvResult stv = staged("stv", [&] { return stv_select(config, data, split, grid); });
    report.params = stv.best;
    report.validation_accuracy = stv.best_accuracy;
    report.grid = std::move(stv.scores);
  } else {
    report.params = grid.front();
  }
  report.timings["stv_s"] = seconds_since(stage);

  stage = Clock::now();
  const Representation rep = staged("fit", [&] {
    return learn_representation(config.method, report.params, data.source.x, data.target_all(),
                                config.gamma2_scale_by_n);
  });
  report.distances = rep.distances;
  report.timings["fit_s"] = seconds_since(stage);

  stage = Clock::now();
  const LinearModel model =
      staged("train", [&] { return train(LabeledSet(rep.source, data.source.y), config.reg_c, config.loss); });
  const LabeledSet test(gather(rep.target, split.remainder),
                        gather_labels(data.target_pool.y, split.remainder));
  report.accuracy = accuracy(model, test);
  report.timings["classify_s"] = seconds_since(stage);
  return report;
}

std::vector<std::pair<std::size_t, double>> distance_curve(const ExperimentConfig& config) {
  return distance_curve(config, load_experiment_data(config));
}

std::vector<std::pair<std::size_t, double>> distance_curve(const ExperimentConfig& config,
                                                           const ExperimentData& data) {
  if (config.method != Method::kSfl && config.method != Method::kFlamm) {
    throw InvalidInput("distance curves need --method sfl or flamm");
  }
  const auto grid = config.grid.points(config.method);
  if (grid.size() != 1) throw InvalidInput("distance curves need a single gamma1/gamma2/layers value");
  const Representation rep = learn_representation(config.method, grid.front(), data.source.x,
                                                  data.target_all(), config.gamma2_scale_by_n);
  std::vector<std::pair<std::size_t, double>> curve;
  for (std::size_t k = 0; k < rep.distances.size(); ++k) curve.emplace_back(k + 1, rep.distances[k]);
  return curve;
}

std::string to_json(const RunReport& r, bool include_timings) {
  nlohmann::ordered_json j;
  j["method"] = to_string(r.method);
  j["params"] = params_json(r.method, r.params, r.gamma2_scale_by_n);
  j["accuracy"] = r.accuracy;
  j["n_test"] = r.n_test;
  j["distances"] = r.distances;
  j["seed"] = r.seed;
  j["version"] = r.version;
  j["classifier"] = {{"reg_c", r.reg_c}, {"loss", to_string(r.loss)}};
  nlohmann::ordered_json validation;
  validation["size"] = r.n_validation;
  validation["accuracy"] = r.validation_accuracy ? nlohmann::ordered_json(*r.validation_accuracy)
                                                 : nlohmann::ordered_json(nullptr);
  validation["grid"] = nlohmann::ordered_json::array();
  for (const auto& g : r.grid) {
    nlohmann::ordered_json point = params_json(r.method, g.params, r.gamma2_scale_by_n);
    point["accuracy"] = g.validation_accuracy;
    validation["grid"].push_back(std::move(point));
  }
  j["validation"] = std::move(validation);
  j["dropped"] = r.dropped;
  j["constant_row"] = r.constant_row;
  if (include_timings) j["timings"] = r.timings;
  return j.dump(2) + "\n";
}

std::string to_csv(const RunReport& r) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "method,accuracy,n_test,seed,gamma1,gamma2,layers,pca_dim,coral_lambda,validation_accuracy,"
         "distances,version\n";
  out << to_string(r.method) << ',' << r.accuracy << ',' << r.n_test << ',' << r.seed << ','
      << r.params.gamma1 << ',' << r.params.gamma2 << ',' << r.params.layers << ','
      << r.params.pca_dim << ',' << r.params.coral_lambda << ',';
  if (r.validation_accuracy) out << *r.validation_accuracy;
  out << ',';
  for (std::size_t k = 0; k < r.distances.size(); ++k) out << (k ? ";" : "") << r.distances[k];
  out << ',' << r.version << '\n';
  return out.str();
}

std::string format_report(const RunReport& report, ReportFormat format) {
  return format == ReportFormat::kJson ? to_json(report) : to_csv(report);
}

std::string format_curve(const std::vector<std::pair<std::size_t, double>>& curve, Method method,
                         ReportFormat format) {
  if (format == ReportFormat::kCsv) {
    std::ostringstream out;
    out << std::setprecision(17) << "layer,distance\n";
    for (const auto& [layer, dist] : curve) out << layer << ',' << dist << '\n';
    return out.str();
  }
  nlohmann::ordered_json j;
  j["method"] = to_string(method);
  j["curve"] = nlohmann::ordered_json::array();
  for (const auto& [layer, dist] : curve) j["curve"].push_back({{"layer", layer}, {"distance", dist}});
  return j.dump(2) + "\n";
}

}  // namespace flamm
