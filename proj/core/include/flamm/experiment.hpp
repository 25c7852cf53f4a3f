#pragma once

// End-to-end evaluation: load sparse domains, select hyperparameters on a
// small labeled target validation subset (STV), learn a representation, train
// the linear classifier on the transformed source and score the target test
// remainder.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flamm/baselines.hpp"
#include "flamm/classifier.hpp"
#include "flamm/corpus.hpp"
#include "flamm/feature_stack.hpp"

namespace flamm {

std::string version();

enum class Method { kRaw, kPca, kCoral, kSfl, kFlamm };
enum class ReportFormat { kJson, kCsv };

std::string to_string(Method method);
Method parse_method(const std::string& name);
ReportFormat parse_format(const std::string& name);

struct Hyperparams {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  std::size_t layers = 1;
  Index pca_dim = 0;
  double coral_lambda = 1.0;

  auto operator<=>(const Hyperparams&) const = default;
};

struct HyperGrid {
  std::vector<double> gamma1;
  std::vector<double> gamma2;
  std::vector<std::size_t> layers;
  std::vector<Index> pca_dim;
  std::vector<double> coral_lambda;

  /// Amazon-review defaults: gammas 10..100 step 10, K = 2, PCA k 50..300 step 50.
  static HyperGrid amazon_defaults();
  /// Spam defaults: gammas 10, 30, ..., 150, K = 5.
  static HyperGrid spam_defaults();

  /// Cartesian product over the axes `method` consumes, sorted and deduplicated.
  std::vector<Hyperparams> points(Method method) const;
};

struct ExperimentConfig {
  std::string source_path;
  std::string target_path;
  std::string unlabeled_path;  // optional extra unlabeled target samples
  std::string output_path;
  Method method = Method::kFlamm;
  HyperGrid grid = HyperGrid::amazon_defaults();
  bool gamma2_scale_by_n = true;
  bool constant_row = false;  // append a row of ones to every loaded matrix
  std::size_t validation_size = 500;
  std::uint64_t seed = 0;
  double reg_c = 1.0;
  Loss loss = Loss::kHinge;
  ReportFormat format = ReportFormat::kJson;
  std::size_t workers = 1;

  void validate() const;
};

/// Parses flat `key = value` text; '#' starts a comment. Keys are flag names
/// without the leading dashes.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> read_config_file(const std::string& path);

/// Applies one flag/config setting; list-valued keys take comma-separated values.
/// Throws InvalidInput on unknown keys or malformed values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

struct ExperimentData {
  LabeledSet source;
  LabeledSet target_pool;  // labeled target samples: validation + test
  std::optional<DataMatrix> target_unlabeled;
  std::vector<std::string> dropped;  // "<file>:<column>" of all-zero samples removed at load

  /// Pool columns followed by the unlabeled ones.
  DataMatrix target_all() const;
};

ExperimentData load_experiment_data(const ExperimentConfig& config);

struct Representation {
  DataMatrix source;
  DataMatrix target;               // same column order as the input target matrix
  std::vector<double> distances;   // per-layer gaps for sfl/flamm, before/after otherwise
  std::optional<StackModel> stack;
};

Representation learn_representation(Method method, const Hyperparams& params,
                                    const DataMatrix& source, const DataMatrix& target,
                                    bool gamma2_scale_by_n = true);

struct GridScore {
  Hyperparams params;
  double validation_accuracy = 0.0;
};

struct StvResult {
  Hyperparams best;
  double best_accuracy = 0.0;
  std::vector<GridScore> scores;  // in grid order
};

/// Scores every grid point on the validation columns of the target pool and
/// returns the most accurate one; ties go to the lexicographically smallest
/// (gamma1, gamma2, layers, pca_dim, coral_lambda).
StvResult stv_select(const ExperimentConfig& config, const ExperimentData& data,
                     const ValidationSplit& split, const std::vector<Hyperparams>& grid);

struct RunReport {
  Method method = Method::kRaw;
  Hyperparams params;
  bool gamma2_scale_by_n = true;
  bool constant_row = false;
  double reg_c = 1.0;
  Loss loss = Loss::kHinge;
  double accuracy = 0.0;
  std::size_t n_test = 0;
  std::size_t n_validation = 0;
  std::optional<double> validation_accuracy;
  std::vector<GridScore> grid;
  std::vector<double> distances;
  std::vector<std::string> dropped;
  std::uint64_t seed = 0;
  std::string version;
  std::map<std::string, double> timings;  // seconds; excluded from reproducibility checks
};

RunReport run_experiment(const ExperimentConfig& config);
RunReport run_experiment(const ExperimentConfig& config, const ExperimentData& data);

/// (layer, distance) pairs, layer 1 being the original representation.
/// Requires method sfl or flamm and a single grid point.
std::vector<std::pair<std::size_t, double>> distance_curve(const ExperimentConfig& config);
std::vector<std::pair<std::size_t, double>> distance_curve(const ExperimentConfig& config,
                                                           const ExperimentData& data);

std::string to_json(const RunReport& report, bool include_timings = true);
std::string to_csv(const RunReport& report);
std::string format_report(const RunReport& report, ReportFormat format);
std::string format_curve(const std::vector<std::pair<std::size_t, double>>& curve, Method method,
                         ReportFormat format);

}  // namespace flamm
