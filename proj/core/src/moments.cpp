#include "flamm/moments.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "flamm/error.hpp"

namespace flamm {

namespace {

std::string shape(const Eigen::MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& a) {
  return 0.5 * (a + a.transpose());
}

}  // namespace

DataMatrix::DataMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw InvalidInput("data matrix must be non-empty, got " + shape(values_));
  }
  if (!values_.allFinite()) {
    throw InvalidInput("data matrix contains non-finite entries");
  }
}

DataMatrix DataMatrix::columns(Index first, Index count) const {
  if (first < 0 || count < 1 || first + count > n()) {
    throw InvalidInput("column range [" + std::to_string(first) + ", " +
                       std::to_string(first + count) + ") out of bounds for n = " +
                       std::to_string(n()));
  }
  return DataMatrix(values_.middleCols(first, count));
}

DataMatrix concat(const DataMatrix& a, const DataMatrix& b) {
  if (a.d() != b.d()) {
    throw InvalidInput("feature count mismatch: " + std::to_string(a.d()) + " vs " +
                       std::to_string(b.d()));
  }
  Eigen::MatrixXd out(a.d(), a.n() + b.n());
  out << a.values(), b.values();
  return DataMatrix(std::move(out));
}

bool is_symmetric(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  const double scale = 1.0 + a.cwiseAbs().maxCoeff();
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale;
}

SymmetricMatrix::SymmetricMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.rows() != values_.cols()) {
    throw InvalidInput("symmetric matrix must be square and non-empty, got " + shape(values_));
  }
  if (!values_.allFinite()) {
    throw InvalidInput("symmetric matrix contains non-finite entries");
  }
  if (!is_symmetric(values_)) {
    throw InvalidInput("matrix is not symmetric");
  }
}

SymmetricMatrix SymmetricMatrix::operator-() const { return {-values_, Unchecked{}}; }

SymmetricMatrix operator-(const SymmetricMatrix& a, const SymmetricMatrix& b) {
  if (a.dim() != b.dim()) throw InvalidInput("symmetric matrix dimension mismatch");
  return {a.values_ - b.values_, SymmetricMatrix::Unchecked{}};
}

SymmetricMatrix operator+(const SymmetricMatrix& a, const SymmetricMatrix& b) {
  if (a.dim() != b.dim()) throw InvalidInput("symmetric matrix dimension mismatch");
  return {a.values_ + b.values_, SymmetricMatrix::Unchecked{}};
}

SymmetricMatrix operator*(double s, const SymmetricMatrix& a) {
  return {s * a.values_, SymmetricMatrix::Unchecked{}};
}

SymmetricMatrix second_moment(const DataMatrix& x) {
  if (x.empty()) throw InvalidInput("second moment of an empty matrix");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(x.d(), x.d());
  m.selfadjointView<Eigen::Lower>().rankUpdate(x.values(), 1.0 / static_cast<double>(x.n()));
  m.triangularView<Eigen::StrictlyUpper>() = m.transpose();
  return SymmetricMatrix(std::move(m));
}

MomentGap moment_gap(const DataMatrix& source, const DataMatrix& target) {
  if (source.d() != target.d()) {
    throw InvalidInput("moment gap: feature count mismatch (" + std::to_string(source.d()) +
                       " vs " + std::to_string(target.d()) + ")");
  }
  SymmetricMatrix delta = second_moment(source) - second_moment(target);
  const double distance = delta.values().squaredNorm();
  return {std::move(delta), distance};
}

MomentGap moment_gap(const DataMatrix& combined, Index n_source) {
  if (n_source < 1 || n_source >= combined.n()) {
    throw InvalidInput("source split must satisfy 1 <= n_s < n (n_s = " +
                       std::to_string(n_source) + ", n = " + std::to_string(combined.n()) + ")");
  }
  return moment_gap(combined.columns(0, n_source),
                    combined.columns(n_source, combined.n() - n_source));
}

SymmetricMatrix row_norm_diag(const DataMatrix& x) {
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(x.d(), x.d());
  lambda.diagonal() = x.values().rowwise().squaredNorm();
  return SymmetricMatrix(std::move(lambda));
}

EigenExtremes eigen_extremes(const SymmetricMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetrized(a.values()),
                                                        Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalFailure("symmetric eigensolver did not converge",
                           std::numeric_limits<double>::infinity());
  }
  const auto& ev = solver.eigenvalues();  // ascending
  return {ev(0), ev(ev.size() - 1)};
}

EigenExtremes eigen_extremes(const Eigen::MatrixXd& a) {
  return eigen_extremes(SymmetricMatrix(a));
}

double spectral_norm(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  if (!a.allFinite()) throw InvalidInput("spectral norm of a matrix with non-finite entries");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  return svd.singularValues()(0);
}

}  // namespace flamm
