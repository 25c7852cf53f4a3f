#include "flamm/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "flamm/error.hpp"

namespace flamm {

namespace {

// Eigenvalues below this fraction of the largest are treated as zero.
constexpr double kRankTolerance = 1e-12;

enum class Power { kHalf, kMinusHalf };

Eigen::MatrixXd symmetric_power(const Eigen::MatrixXd& a, Power power, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (a + a.transpose()));
  if (solver.info() != Eigen::Success) {
    throw NumericalFailure(std::string(what) + ": eigensolver did not converge",
                           std::numeric_limits<double>::infinity());
  }
  Eigen::VectorXd ev = solver.eigenvalues();
  const double top = std::max(std::abs(ev(ev.size() - 1)), std::abs(ev(0)));
  const double floor = kRankTolerance * std::max(top, 1e-300);
  if (ev(0) < -floor) {
    throw NumericalFailure(std::string(what) + ": matrix is not positive semidefinite (min eigenvalue " +
                               std::to_string(ev(0)) + ")",
                           ev(0) == 0.0 ? 0.0 : top / std::abs(ev(0)));
  }
  if (power == Power::kMinusHalf && !(ev(0) > floor)) {
    throw NumericalFailure(std::string(what) +
                               ": matrix is singular; use a positive regularization lambda",
                           ev(0) > 0.0 ? top / ev(0) : std::numeric_limits<double>::infinity());
  }
  for (Index i = 0; i < ev.size(); ++i) {
    const double e = std::max(ev(i), 0.0);
    ev(i) = power == Power::kHalf ? std::sqrt(e) : 1.0 / std::sqrt(e);
  }
  const Eigen::MatrixXd& v = solver.eigenvectors();
  Eigen::MatrixXd out = v * ev.asDiagonal() * v.transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace

Eigen::MatrixXd covariance(const DataMatrix& x) {
  if (x.n() < 2) throw InvalidInput("covariance needs at least two samples");
  const Eigen::VectorXd mean = x.values().rowwise().mean();
  const Eigen::MatrixXd centered = x.values().colwise() - mean;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(x.d(), x.d());
  c.selfadjointView<Eigen::Lower>().rankUpdate(centered, 1.0 / static_cast<double>(x.n() - 1));
  c.triangularView<Eigen::StrictlyUpper>() = c.transpose();
  return c;
}

PcaModel pca_fit(const DataMatrix& x, Index k) {
  if (k < 1 || k > x.d()) {
    throw InvalidInput("PCA dimensionality must satisfy 1 <= k <= d (k = " + std::to_string(k) +
                       ", d = " + std::to_string(x.d()) + ")");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(covariance(x));
  if (solver.info() != Eigen::Success) {
    throw NumericalFailure("PCA eigensolver did not converge",
                           std::numeric_limits<double>::infinity());
  }
  const Index d = x.d();
  PcaModel model;
  model.k = k;
  model.mean = x.values().rowwise().mean();
  model.basis.resize(d, k);
  model.eigenvalues.resize(k);
  for (Index j = 0; j < k; ++j) {
    const Index src = d - 1 - j;  // solver sorts ascending
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    model.basis.col(j) = v;
    model.eigenvalues(j) = solver.eigenvalues()(src);
  }
  return model;
}

DataMatrix pca_transform(const DataMatrix& x, const PcaModel& model) {
  if (x.d() != model.d()) {
    throw InvalidInput("pca_transform: input has " + std::to_string(x.d()) +
                       " features, model expects " + std::to_string(model.d()));
  }
  return DataMatrix(model.basis.transpose() * (x.values().colwise() - model.mean));
}

CoralResult coral_align(const DataMatrix& source, const DataMatrix& target, double lambda) {
  if (source.d() != target.d()) {
    throw InvalidInput("coral_align: feature count mismatch (" + std::to_string(source.d()) +
                       " vs " + std::to_string(target.d()) + ")");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw InvalidInput("CORAL lambda must be finite and non-negative");
  }
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(source.d(), source.d());

  CoralModel model;
  model.lambda = lambda;
  model.source_mean = source.values().rowwise().mean();
  model.target_mean = target.values().rowwise().mean();
  model.whiten = symmetric_power(covariance(source) + lambda * identity, Power::kMinusHalf,
                                 "CORAL source whitening");
  model.recolor = symmetric_power(covariance(target) + lambda * identity, Power::kHalf,
                                  "CORAL target recoloring");
  DataMatrix aligned = coral_apply(source, model);
  return {std::move(model), std::move(aligned)};
}

DataMatrix coral_apply(const DataMatrix& source_like, const CoralModel& model) {
  if (source_like.d() != model.whiten.rows()) {
    throw InvalidInput("coral_apply: feature count mismatch");
  }
  const Eigen::MatrixXd centered = source_like.values().colwise() - model.source_mean;
  Eigen::MatrixXd out = model.recolor * (model.whiten * centered);
  out.colwise() += model.target_mean;
  return DataMatrix(std::move(out));
}

}  // namespace flamm
