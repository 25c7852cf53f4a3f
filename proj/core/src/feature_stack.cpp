#include "flamm/feature_stack.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "binary_io.hpp"
#include "flamm/error.hpp"

namespace flamm {

namespace {

// Below this reciprocal condition number a Cholesky factor is treated as failed.
constexpr double kMinRcond = 1e-14;
constexpr std::array<double, 6> kJitterLadder = {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};
constexpr std::uint64_t kMaxSerializedDim = 1u << 20;

void check_split(const DataMatrix& x, Index n_source) {
  if (n_source < 1 || n_source >= x.n()) {
    throw InvalidInput("source split must satisfy 1 <= n_s < n (n_s = " +
                       std::to_string(n_source) + ", n = " + std::to_string(x.n()) + ")");
  }
}

Eigen::MatrixXd gram(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(x.rows(), x.rows());
  g.selfadjointView<Eigen::Lower>().rankUpdate(x);
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

// X X^T + g1 L + g2 dM^2, with g2 the effective weight. The dM^2 term is left
// out entirely when g2 == 0.
Eigen::MatrixXd normal_matrix(const DataMatrix& x, Index n_source, const LayerParams& params,
                              const Eigen::MatrixXd& xxt) {
  Eigen::MatrixXd system = xxt;
  system.diagonal() += params.gamma1 * x.values().rowwise().squaredNorm();
  const double g2 = params.effective_gamma2(x.n());
  if (g2 > 0.0) {
    const MomentGap gap = moment_gap(x, n_source);
    const Eigen::MatrixXd delta_sq = gap.delta.values() * gap.delta.values();
    system += g2 * (0.5 * (delta_sq + delta_sq.transpose()));
  }
  return system;
}

}  // namespace

void LayerParams::validate() const {
  if (!(gamma1 >= 0.0) || !std::isfinite(gamma1)) {
    throw InvalidInput("gamma1 must be a finite non-negative number");
  }
  if (!(gamma2 >= 0.0) || !std::isfinite(gamma2)) {
    throw InvalidInput("gamma2 must be a finite non-negative number");
  }
}

double LayerParams::effective_gamma2(Index n) const {
  return gamma2_scale_by_n ? gamma2 * static_cast<double>(n) : gamma2;
}

Eigen::MatrixXd StackModel::composite() const {
  if (layers.empty()) return {};
  Eigen::MatrixXd out = layers.front();
  for (std::size_t k = 1; k < layers.size(); ++k) out = out * layers[k];
  return out;
}

Eigen::MatrixXd solve_layer(const DataMatrix& x, Index n_source, const LayerParams& params,
                            SolveInfo* info) {
  params.validate();
  check_split(x, n_source);

  const Eigen::MatrixXd xxt = gram(x.values());
  const Eigen::MatrixXd system = normal_matrix(x, n_source, params, xxt);
  const Index d = x.d();

  const double mean_diag = system.trace() / static_cast<double>(d);
  if (mean_diag == 0.0) {
    // X is identically zero; every P is optimal and the minimum-norm one is 0.
    if (info) *info = {0.0, 1.0};
    return Eigen::MatrixXd::Zero(d, d);
  }

  double rcond = 0.0;
  for (double eps : kJitterLadder) {
    Eigen::MatrixXd a = system;
    if (eps > 0.0) a.diagonal().array() += eps * mean_diag;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
    if (rcond > kMinRcond) {
      if (info) *info = {eps, rcond};
      return llt.solve(xxt);
    }
  }
  const double condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  throw NumericalFailure("layer system is singular after jitter up to 1e-6 (condition estimate " +
                             std::to_string(condition) + ")",
                         condition);
}

double layer_objective(const DataMatrix& x, Index n_source, const LayerParams& params,
                       const Eigen::MatrixXd& p) {
  params.validate();
  check_split(x, n_source);
  const Eigen::MatrixXd& xv = x.values();
  if (p.rows() != x.d() || p.cols() != x.d()) throw InvalidInput("P must be d x d");

  const double reconstruction = (xv.transpose() - xv.transpose() * p).squaredNorm();
  const Eigen::VectorXd row_norms = xv.rowwise().squaredNorm();
  const double length = (row_norms.asDiagonal() * p.cwiseAbs2()).sum();
  double gap_term = 0.0;
  const double g2 = params.effective_gamma2(x.n());
  if (g2 > 0.0) {
    gap_term = (moment_gap(x, n_source).delta.values() * p).squaredNorm();
  }
  return reconstruction + params.gamma1 * length + g2 * gap_term;
}

Eigen::MatrixXd layer_gradient(const DataMatrix& x, Index n_source, const LayerParams& params,
                               const Eigen::MatrixXd& p) {
  params.validate();
  check_split(x, n_source);
  if (p.rows() != x.d() || p.cols() != x.d()) throw InvalidInput("P must be d x d");
  const Eigen::MatrixXd xxt = gram(x.values());
  return 2.0 * normal_matrix(x, n_source, params, xxt) * p - 2.0 * xxt;
}

StackFit fit_stack(const DataMatrix& source, const DataMatrix& target, const LayerParams& params,
                   std::size_t layers) {
  params.validate();
  if (layers < 1) throw InvalidInput("layer count must be at least 1");
  if (source.d() != target.d()) {
    throw InvalidInput("source and target feature counts differ (" + std::to_string(source.d()) +
                       " vs " + std::to_string(target.d()) + ")");
  }

  StackModel model;
  model.params = params;
  model.gamma2_effective = params.effective_gamma2(source.n() + target.n());
  model.layers.reserve(layers);
  model.per_layer_distance.reserve(layers + 1);

  DataMatrix s = source;
  DataMatrix t = target;
  for (std::size_t k = 0; k < layers; ++k) {
    model.per_layer_distance.push_back(moment_gap(s, t).distance);
    Eigen::MatrixXd p;
    try {
      p = solve_layer(concat(s, t), s.n(), params);
    } catch (const NumericalFailure& e) {
      throw NumericalFailure("layer " + std::to_string(k + 1) + ": " + e.what(),
                             e.condition_estimate());
    } catch (const InvalidInput& e) {
      throw InvalidInput("layer " + std::to_string(k + 1) + ": " + e.what());
    }
    s = DataMatrix(p.transpose() * s.values());
    t = DataMatrix(p.transpose() * t.values());
    model.layers.push_back(std::move(p));
  }
  model.per_layer_distance.push_back(moment_gap(s, t).distance);

  return {std::move(model), DomainPair{std::move(s), std::move(t)}};
}

DataMatrix apply_stack(const DataMatrix& x, const StackModel& model) {
  if (model.layers.empty()) throw InvalidInput("stack model has no layers");
  if (x.d() != model.d()) {
    throw InvalidInput("apply_stack: input has " + std::to_string(x.d()) +
                       " features, model expects " + std::to_string(model.d()));
  }
  Eigen::MatrixXd y = x.values();
  for (const auto& p : model.layers) y = p.transpose() * y;
  return DataMatrix(std::move(y));
}

double theorem2_threshold(const DataMatrix& x) {
  const Eigen::VectorXd row_norms = x.values().rowwise().squaredNorm();
  Index weakest = 0;
  const double lambda_min = row_norms.minCoeff(&weakest);
  if (!(lambda_min > 0.0)) {
    throw DegenerateFeature("feature row " + std::to_string(weakest) +
                            " is identically zero; drop empty rows before computing the threshold");
  }
  const auto spectrum = eigen_extremes(SymmetricMatrix(gram(x.values())));
  return std::max(0.0, spectrum.max - spectrum.min) / lambda_min;
}

ContractionReport contraction_check(const DataMatrix& x, Index n_source, double gamma1) {
  const LayerParams params{gamma1, 0.0, true};
  const Eigen::MatrixXd p = solve_layer(x, n_source, params);
  const MomentGap gap = moment_gap(x, n_source);

  ContractionReport report;
  report.sigma_max = spectral_norm(p);
  report.gap_before = gap.distance;
  report.gap_after = (p.transpose() * gap.delta.values() * p).squaredNorm();
  report.holds = report.gap_after <= report.gap_before + 1e-9;
  return report;
}

void write_stack(std::ostream& out, const StackModel& model) {
  const std::uint64_t d = static_cast<std::uint64_t>(model.d());
  const std::uint64_t k = model.layers.size();
  if (model.per_layer_distance.size() != k + 1) {
    throw InvalidInput("stack model must carry K + 1 distances");
  }
  binary::write_magic(out, "FLAM");
  binary::write_u32(out, kStackFormatVersion);
  binary::write_u64(out, d);
  binary::write_u64(out, k);
  binary::write_f64(out, model.params.gamma1);
  binary::write_f64(out, model.params.gamma2);
  binary::write_f64(out, model.gamma2_effective);
  binary::write_u8(out, model.params.gamma2_scale_by_n ? 1 : 0);
  for (const auto& p : model.layers) {
    if (static_cast<std::uint64_t>(p.rows()) != d || static_cast<std::uint64_t>(p.cols()) != d) {
      throw InvalidInput("stack layers must all be d x d");
    }
    for (Index i = 0; i < p.rows(); ++i) {
      for (Index j = 0; j < p.cols(); ++j) binary::write_f64(out, p(i, j));
    }
  }
  for (double dist : model.per_layer_distance) binary::write_f64(out, dist);
}

StackModel read_stack(std::istream& in) {
  binary::expect_magic(in, "FLAM");
  const std::uint32_t version = binary::read_u32(in);
  if (version != kStackFormatVersion) {
    throw ParseError("unsupported stack format version " + std::to_string(version), 0);
  }
  const std::uint64_t d = binary::read_u64(in);
  const std::uint64_t k = binary::read_u64(in);
  if (d == 0 || d > kMaxSerializedDim || k == 0 || k > kMaxSerializedDim) {
    throw ParseError("implausible stack header (d = " + std::to_string(d) +
                         ", K = " + std::to_string(k) + ")",
                     0);
  }
  StackModel model;
  model.params.gamma1 = binary::read_f64(in);
  model.params.gamma2 = binary::read_f64(in);
  model.gamma2_effective = binary::read_f64(in);
  const std::uint8_t flag = binary::read_u8(in);
  if (flag > 1) throw ParseError("bad gamma2 scaling flag", 0);
  model.params.gamma2_scale_by_n = flag == 1;

  const auto dim = static_cast<Index>(d);
  model.layers.reserve(k);
  for (std::uint64_t layer = 0; layer < k; ++layer) {
    Eigen::MatrixXd p(dim, dim);
    for (Index i = 0; i < dim; ++i) {
      for (Index j = 0; j < dim; ++j) p(i, j) = binary::read_f64(in);
    }
    model.layers.push_back(std::move(p));
  }
  model.per_layer_distance.resize(k + 1);
  for (auto& dist : model.per_layer_distance) dist = binary::read_f64(in);
  return model;
}

void save_stack(const std::string& path, const StackModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open " + path + " for writing");
  write_stack(out, model);
}

StackModel load_stack(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path);
  return read_stack(in);
}

}  // namespace flamm
