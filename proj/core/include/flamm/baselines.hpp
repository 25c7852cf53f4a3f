#pragma once

// Reference representations: PCA on the pooled domains and CORAL
// (whiten source covariance, recolor with target covariance).
//
// Covariances here are mean-centered with 1/(n-1) normalization, unlike the
// uncentered 1/n second moments in moments.hpp.

#include <Eigen/Dense>

#include "flamm/moments.hpp"

namespace flamm {

/// Mean-centered feature covariance with 1/(n-1) normalization. Requires n >= 2.
Eigen::MatrixXd covariance(const DataMatrix& x);

struct PcaModel {
  Eigen::VectorXd mean;         // d
  Eigen::MatrixXd basis;        // d x k, orthonormal columns
  Eigen::VectorXd eigenvalues;  // k, descending
  Index k = 0;

  Index d() const { return basis.rows(); }
};

/// Top-k principal directions of the pooled columns of `x`. Each basis column
/// is oriented so that its largest-magnitude entry is positive.
PcaModel pca_fit(const DataMatrix& x, Index k);

/// basis^T (X - mean), a k x n matrix.
DataMatrix pca_transform(const DataMatrix& x, const PcaModel& model);

struct CoralModel {
  Eigen::MatrixXd whiten;   // (C_S + lambda I)^{-1/2}
  Eigen::MatrixXd recolor;  // (C_T + lambda I)^{1/2}
  Eigen::VectorXd source_mean;
  Eigen::VectorXd target_mean;
  double lambda = 1.0;
};

struct CoralResult {
  CoralModel model;
  DataMatrix aligned_source;
};

/// Aligns the source covariance to the target covariance. The target domain
/// is left untouched.
CoralResult coral_align(const DataMatrix& source, const DataMatrix& target, double lambda = 1.0);

/// recolor * whiten * (X - source_mean) + target_mean for source-domain columns.
DataMatrix coral_apply(const DataMatrix& source_like, const CoralModel& model);

}  // namespace flamm
