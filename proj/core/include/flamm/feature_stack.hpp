#pragma once

// Moment-matching linear feature learning.
//
// One layer solves
//
//   min_P ||X^T - X^T P||_F^2 + g1 tr(P^T L P) + g2 tr(P^T dM^2 P)
//
// where L = diag of squared row norms of X and dM = M_S - M_T is the
// second-moment gap on the source/target column split. Stationarity gives
// (X X^T + g1 L + g2 dM^2) P = X X^T, solved with a Cholesky factorization.
// A stack of K layers maps X <- P_k^T X repeatedly; g2 = 0 is the plain
// ridge variant (SFL).

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flamm/moments.hpp"

namespace flamm {

struct LayerParams {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  /// When set, the moment-gap weight used in the solve is gamma2 * n.
  bool gamma2_scale_by_n = true;

  /// Throws InvalidInput on negative or non-finite weights.
  void validate() const;
  double effective_gamma2(Index n) const;
};

struct DomainPair {
  DataMatrix source;
  DataMatrix target;

  Index d() const { return source.d(); }
  DataMatrix combined() const { return concat(source, target); }
};

struct StackModel {
  std::vector<Eigen::MatrixXd> layers;  // P_1 .. P_K, each d x d
  LayerParams params;
  double gamma2_effective = 0.0;  // weight actually applied to dM^2
  /// Moment-gap distance of each layer's input, then of the final output (K + 1 entries).
  std::vector<double> per_layer_distance;

  Index d() const { return layers.empty() ? 0 : layers.front().rows(); }
  std::size_t depth() const { return layers.size(); }

  /// Product P_1 P_2 ... P_K, so that the stack maps x to composite()^T x.
  Eigen::MatrixXd composite() const;
};

/// Diagnostics of the last Cholesky solve.
struct SolveInfo {
  double jitter = 0.0;  // multiple of mean(diag) * I added before factorization
  double rcond = 0.0;   // reciprocal condition estimate of the factored system
};

/// Solves one layer on the combined matrix X = [X_S | X_T] with X_S = the first
/// `n_source` columns.
Eigen::MatrixXd solve_layer(const DataMatrix& x, Index n_source, const LayerParams& params,
                            SolveInfo* info = nullptr);

/// Value of the layer objective at P, with the same weights solve_layer uses.
double layer_objective(const DataMatrix& x, Index n_source, const LayerParams& params,
                       const Eigen::MatrixXd& p);

/// Gradient of layer_objective with respect to P.
Eigen::MatrixXd layer_gradient(const DataMatrix& x, Index n_source, const LayerParams& params,
                               const Eigen::MatrixXd& p);

struct StackFit {
  StackModel model;
  DomainPair transformed;
};

StackFit fit_stack(const DataMatrix& source, const DataMatrix& target, const LayerParams& params,
                   std::size_t layers);

/// P_K^T ... P_1^T X.
DataMatrix apply_stack(const DataMatrix& x, const StackModel& model);

/// Smallest gamma1 for which one ridge layer provably does not increase the
/// moment gap: (lambda_max(X X^T) - lambda_min(X X^T)) / min_i ||X_i.||^2.
/// Throws DegenerateFeature when some feature row is identically zero.
double theorem2_threshold(const DataMatrix& x);

struct ContractionReport {
  double sigma_max = 0.0;   // largest singular value of P
  double gap_before = 0.0;  // ||dM||_F^2
  double gap_after = 0.0;   // ||P^T dM P||_F^2
  bool holds = false;       // gap_after <= gap_before + 1e-9
};

/// Solves the gamma2 = 0 layer and measures whether it contracts the moment gap.
ContractionReport contraction_check(const DataMatrix& x, Index n_source, double gamma1);

// Binary container: "FLAM", u32 version, u64 d, u64 K, f64 gamma1, f64 gamma2,
// f64 gamma2_effective, u8 scale flag, K row-major d x d f64 matrices, K + 1 f64
// distances. All little-endian.
inline constexpr std::uint32_t kStackFormatVersion = 1;

void write_stack(std::ostream& out, const StackModel& model);
StackModel read_stack(std::istream& in);
void save_stack(const std::string& path, const StackModel& model);
StackModel load_stack(const std::string& path);

}  // namespace flamm
