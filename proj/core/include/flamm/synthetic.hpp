#pragma once

// Planted domain-shift generator with a known Bayes rule.
//
// Labels are y = sign(x_0) in both domains, with |x_0| >= margin, so the
// Bayes error is zero. The shift lives elsewhere:
//   * feature 1 is label-correlated in the source (y * spurious + noise) but
//     pure noise in the target;
//   * features 2.. are anisotropic Gaussian nuisance whose covariance is
//     rotated pairwise by `rotation` radians (and rescaled) in the target.

#include <cstdint>

#include "flamm/classifier.hpp"

namespace flamm {

struct PlantedShiftOptions {
  Index d = 10;
  Index n_source = 200;
  Index n_target = 200;
  double margin = 0.5;
  double spurious = 1.5;
  double noise = 0.5;
  double rotation = 0.9;
  double target_scale = 1.5;
  std::uint64_t seed = 1;
};

struct PlantedShift {
  LabeledSet source;
  LabeledSet target;
};

PlantedShift planted_shift(const PlantedShiftOptions& options);

/// Independent standard-normal d x n matrix.
Eigen::MatrixXd gaussian_matrix(Index d, Index n, std::uint64_t seed);

}  // namespace flamm
