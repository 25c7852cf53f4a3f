#pragma once

// L2-regularized linear SVM with an unregularized intercept, trained in the
// dual with second-order working-set SMO. Single-threaded and deterministic.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flamm/moments.hpp"

namespace flamm {

enum class Loss : std::uint8_t { kHinge = 0, kSquaredHinge = 1 };

std::string to_string(Loss loss);
Loss parse_loss(const std::string& name);

/// Columns of `x` with labels in {-1, +1}.
struct LabeledSet {
  LabeledSet() = default;
  LabeledSet(DataMatrix x, std::vector<int> y);

  DataMatrix x;
  std::vector<int> y;

  Index n() const { return x.n(); }
  Index d() const { return x.d(); }

  /// Subset in the order given by `indices`.
  LabeledSet select(const std::vector<Index>& indices) const;
};

struct LinearModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  double reg_c = 1.0;
  Loss loss = Loss::kHinge;

  Index d() const { return weights.size(); }
  double decision(const Eigen::Ref<const Eigen::VectorXd>& x) const { return weights.dot(x) + bias; }
};

struct TrainStats {
  std::size_t iterations = 0;
  double primal = 0.0;
  double dual = 0.0;
  double duality_gap = 0.0;
  bool converged = false;  // KKT violation fell below tolerance before the iteration cap
};

/// Minimizes (1/2)||w||^2 + C sum_i loss(y_i, w^T x_i + b).
/// Throws DegenerateLabels unless both classes are present.
LinearModel train(const LabeledSet& data, double reg_c = 1.0, Loss loss = Loss::kHinge,
                  TrainStats* stats = nullptr);

double primal_objective(const Eigen::VectorXd& weights, double bias, const LabeledSet& data,
                        double reg_c, Loss loss);

/// sign(w^T x + b) per column; an exact zero maps to +1.
std::vector<int> predict(const LinearModel& model, const DataMatrix& x);

double accuracy(const LinearModel& model, const LabeledSet& data);

// "LMDL", u32 version, u64 d, u8 loss, f64 C, f64 bias, d f64 weights; little-endian.
inline constexpr std::uint32_t kLinearFormatVersion = 1;

void write_linear(std::ostream& out, const LinearModel& model);
LinearModel read_linear(std::istream& in);
void save_linear(const std::string& path, const LinearModel& model);
LinearModel load_linear(const std::string& path);

}  // namespace flamm
