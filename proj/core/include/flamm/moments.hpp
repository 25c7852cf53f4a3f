#pragma once

#include <Eigen/Dense>

namespace flamm {

using Index = Eigen::Index;

/// Dense d x n sample matrix; column j is sample j.
///
/// Construction rejects empty shapes and non-finite entries, so every
/// DataMatrix in circulation has d >= 1, n >= 1 and finite values.
/// All-zero matrices are legal.
class DataMatrix {
 public:
  DataMatrix() = default;
  explicit DataMatrix(Eigen::MatrixXd values);

  const Eigen::MatrixXd& values() const noexcept { return values_; }
  Index d() const noexcept { return values_.rows(); }
  Index n() const noexcept { return values_.cols(); }
  bool empty() const noexcept { return values_.size() == 0; }

  auto col(Index j) const { return values_.col(j); }

  /// Columns [first, first + count).
  DataMatrix columns(Index first, Index count) const;

 private:
  Eigen::MatrixXd values_;
};

/// Horizontal concatenation [a | b]. Feature counts must agree.
DataMatrix concat(const DataMatrix& a, const DataMatrix& b);

/// Square matrix with a checked symmetry invariant:
/// max|A_ij - A_ji| <= 1e-10 (1 + max|A_ij|).
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(Eigen::MatrixXd values);

  const Eigen::MatrixXd& values() const noexcept { return values_; }
  Index dim() const noexcept { return values_.rows(); }

  SymmetricMatrix operator-() const;
  friend SymmetricMatrix operator-(const SymmetricMatrix& a, const SymmetricMatrix& b);
  friend SymmetricMatrix operator+(const SymmetricMatrix& a, const SymmetricMatrix& b);
  friend SymmetricMatrix operator*(double s, const SymmetricMatrix& a);

 private:
  struct Unchecked {};
  SymmetricMatrix(Eigen::MatrixXd values, Unchecked) : values_(std::move(values)) {}

  Eigen::MatrixXd values_;
};

bool is_symmetric(const Eigen::MatrixXd& a);

/// (1/n) X X^T.
SymmetricMatrix second_moment(const DataMatrix& x);

struct MomentGap {
  SymmetricMatrix delta;  // M_S - M_T
  double distance = 0.0;  // ||delta||_F^2
};

MomentGap moment_gap(const DataMatrix& source, const DataMatrix& target);

/// Same as moment_gap on the column split [0, n_s) | [n_s, n).
MomentGap moment_gap(const DataMatrix& combined, Index n_source);

/// Diagonal matrix of squared row norms.
SymmetricMatrix row_norm_diag(const DataMatrix& x);

struct EigenExtremes {
  double min = 0.0;
  double max = 0.0;
};

EigenExtremes eigen_extremes(const SymmetricMatrix& a);

/// Throws InvalidInput if `a` is not symmetric within the SymmetricMatrix tolerance.
EigenExtremes eigen_extremes(const Eigen::MatrixXd& a);

/// Largest singular value.
double spectral_norm(const Eigen::MatrixXd& a);

}  // namespace flamm
