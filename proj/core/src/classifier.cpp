#include "flamm/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "binary_io.hpp"
#include "flamm/error.hpp"

namespace flamm {

namespace {

constexpr double kKktTolerance = 1e-9;
constexpr std::size_t kMaxEpochs = 10000;
constexpr double kTau = 1e-12;
// Full kernel cache up to this many samples (n^2 doubles).
constexpr Index kMaxCachedSamples = 3000;

// Kernel rows K_it = x_i . x_t, cached when the problem is small enough.
class KernelRows {
 public:
  explicit KernelRows(const Eigen::MatrixXd& x) : x_(x) {
    if (x.cols() <= kMaxCachedSamples) {
      cache_ = x.transpose() * x;
      cached_ = true;
    }
    diag_ = x.colwise().squaredNorm().transpose();
  }

  Eigen::VectorXd row(Index i) const {
    if (cached_) return cache_.col(i);
    return x_.transpose() * x_.col(i);
  }

  double diag(Index i) const { return diag_(i); }

 private:
  const Eigen::MatrixXd& x_;
  Eigen::MatrixXd cache_;
  Eigen::VectorXd diag_;
  bool cached_ = false;
};

}  // namespace

std::string to_string(Loss loss) {
  return loss == Loss::kHinge ? "hinge" : "squared_hinge";
}

Loss parse_loss(const std::string& name) {
  if (name == "hinge") return Loss::kHinge;
  if (name == "squared_hinge" || name == "squared-hinge") return Loss::kSquaredHinge;
  throw InvalidInput("unknown loss '" + name + "' (expected hinge or squared_hinge)");
}

LabeledSet::LabeledSet(DataMatrix x_in, std::vector<int> y_in)
    : x(std::move(x_in)), y(std::move(y_in)) {
  if (static_cast<Index>(y.size()) != x.n()) {
    throw InvalidInput("label count " + std::to_string(y.size()) + " does not match sample count " +
                       std::to_string(x.n()));
  }
  for (int label : y) {
    if (label != 1 && label != -1) throw InvalidInput("labels must be -1 or +1");
  }
}

LabeledSet LabeledSet::select(const std::vector<Index>& indices) const {
  if (indices.empty()) throw InvalidInput("cannot select an empty subset");
  Eigen::MatrixXd cols(x.d(), static_cast<Index>(indices.size()));
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Index j = indices[k];
    if (j < 0 || j >= n()) throw InvalidInput("subset index out of range");
    cols.col(static_cast<Index>(k)) = x.values().col(j);
    labels.push_back(y[static_cast<std::size_t>(j)]);
  }
  return {DataMatrix(std::move(cols)), std::move(labels)};
}

double primal_objective(const Eigen::VectorXd& weights, double bias, const LabeledSet& data,
                        double reg_c, Loss loss) {
  const Eigen::VectorXd margins = (data.x.values().transpose() * weights).array() + bias;
  double total = 0.0;
  for (Index i = 0; i < data.n(); ++i) {
    const double slack = std::max(0.0, 1.0 - data.y[static_cast<std::size_t>(i)] * margins(i));
    total += loss == Loss::kHinge ? slack : slack * slack;
  }
  return 0.5 * weights.squaredNorm() + reg_c * total;
}

LinearModel train(const LabeledSet& data, double reg_c, Loss loss, TrainStats* stats) {
  if (!(reg_c > 0.0) || !std::isfinite(reg_c)) {
    throw InvalidInput("regularization C must be a finite positive number");
  }
  const bool has_pos = std::find(data.y.begin(), data.y.end(), 1) != data.y.end();
  const bool has_neg = std::find(data.y.begin(), data.y.end(), -1) != data.y.end();
  if (!has_pos || !has_neg) throw DegenerateLabels("training data must contain both classes");

  const Eigen::MatrixXd& x = data.x.values();
  const Index n = data.n();
  const auto label = [&](Index i) { return static_cast<double>(data.y[static_cast<std::size_t>(i)]); };

  // Dual: min 1/2 a^T (Q + D I) a - e^T a  s.t.  y^T a = 0, 0 <= a <= U.
  const double upper = loss == Loss::kHinge ? reg_c : std::numeric_limits<double>::infinity();
  const double diag_shift = loss == Loss::kHinge ? 0.0 : 1.0 / (2.0 * reg_c);

  KernelRows kernel(x);
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(x.rows());

  const auto in_up = [&](Index t) {
    return label(t) > 0 ? alpha(t) < upper : alpha(t) > 0.0;
  };
  const auto in_low = [&](Index t) {
    return label(t) > 0 ? alpha(t) > 0.0 : alpha(t) < upper;
  };

  const std::size_t max_iter = kMaxEpochs * static_cast<std::size_t>(std::max<Index>(n, 1));
  std::size_t iter = 0;
  bool converged = false;
  for (; iter < max_iter; ++iter) {
    Index i = -1;
    double g_max = -std::numeric_limits<double>::infinity();
    double g_min = std::numeric_limits<double>::infinity();
    for (Index t = 0; t < n; ++t) {
      const double v = -label(t) * grad(t);
      if (in_up(t) && v > g_max) {
        g_max = v;
        i = t;
      }
      if (in_low(t) && v < g_min) g_min = v;
    }
    if (i < 0 || g_max - g_min <= kKktTolerance) {
      converged = true;
      break;
    }

    const Eigen::VectorXd k_i = kernel.row(i);
    const double k_ii = kernel.diag(i) + diag_shift;
    Index j = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Index t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double b = g_max + label(t) * grad(t);
      if (b <= 0.0) continue;
      double a = k_ii + kernel.diag(t) + diag_shift - 2.0 * k_i(t);
      if (a <= 0.0) a = kTau;
      const double score = -(b * b) / a;
      if (score < best) {
        best = score;
        j = t;
      }
    }
    if (j < 0) {
      converged = true;
      break;
    }

    // Move a_i += y_i s, a_j -= y_j s, which keeps y^T a fixed.
    const Eigen::VectorXd k_j = kernel.row(j);
    double a = k_ii + kernel.diag(j) + diag_shift - 2.0 * k_i(j);
    if (a <= 0.0) a = kTau;
    const double b = g_max + label(j) * grad(j);
    const double room_i = label(i) > 0 ? upper - alpha(i) : alpha(i);
    const double room_j = label(j) > 0 ? alpha(j) : upper - alpha(j);
    double step = b / a;
    bool clip_i = false;
    bool clip_j = false;
    if (step >= room_i) {
      step = room_i;
      clip_i = true;
    }
    if (step >= room_j) {
      step = room_j;
      clip_j = true;
      clip_i = room_i == room_j;
    }

    const double delta_i = label(i) * step;
    const double delta_j = -label(j) * step;
    alpha(i) += delta_i;
    alpha(j) += delta_j;
    if (clip_i) alpha(i) = label(i) > 0 ? upper : 0.0;
    if (clip_j) alpha(j) = label(j) > 0 ? 0.0 : upper;

    w += step * (x.col(i) - x.col(j));
    for (Index t = 0; t < n; ++t) grad(t) += label(t) * step * (k_i(t) - k_j(t));
    grad(i) += diag_shift * delta_i;
    grad(j) += diag_shift * delta_j;
  }

  // Intercept from free vectors, else the midpoint of the feasible interval.
  double sum_free = 0.0;
  Index n_free = 0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (Index t = 0; t < n; ++t) {
    const double v = -label(t) * grad(t);
    const bool at_lower = alpha(t) <= 0.0;
    const bool at_upper = alpha(t) >= upper;
    if (!at_lower && !at_upper) {
      sum_free += v;
      ++n_free;
    } else if ((label(t) > 0) == at_lower) {
      // In I_up only.
      lo = std::max(lo, v);
    } else {
      hi = std::min(hi, v);
    }
  }
  double bias = 0.0;
  if (n_free > 0) {
    bias = sum_free / static_cast<double>(n_free);
  } else if (std::isfinite(lo) && std::isfinite(hi)) {
    bias = 0.5 * (lo + hi);
  } else if (std::isfinite(lo)) {
    bias = lo;
  } else if (std::isfinite(hi)) {
    bias = hi;
  }

  LinearModel model{std::move(w), bias, reg_c, loss};

  if (stats) {
    stats->iterations = iter;
    stats->converged = converged;
    stats->primal = primal_objective(model.weights, model.bias, data, reg_c, loss);
    stats->dual = alpha.sum() - 0.5 * model.weights.squaredNorm() -
                  0.5 * diag_shift * alpha.squaredNorm();
    stats->duality_gap = stats->primal - stats->dual;
  }
  return model;
}

std::vector<int> predict(const LinearModel& model, const DataMatrix& x) {
  if (x.d() != model.d()) {
    throw InvalidInput("predict: input has " + std::to_string(x.d()) +
                       " features, model expects " + std::to_string(model.d()));
  }
  const Eigen::VectorXd scores = (x.values().transpose() * model.weights).array() + model.bias;
  std::vector<int> out(static_cast<std::size_t>(x.n()));
  for (Index j = 0; j < x.n(); ++j) out[static_cast<std::size_t>(j)] = scores(j) >= 0.0 ? 1 : -1;
  return out;
}

double accuracy(const LinearModel& model, const LabeledSet& data) {
  if (data.n() == 0 || data.y.empty()) throw InvalidInput("accuracy of an empty set");
  const auto predicted = predict(model, data.x);
  std::size_t correct = 0;
  for (std::size_t j = 0; j < predicted.size(); ++j) correct += predicted[j] == data.y[j];
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

void write_linear(std::ostream& out, const LinearModel& model) {
  binary::write_magic(out, "LMDL");
  binary::write_u32(out, kLinearFormatVersion);
  binary::write_u64(out, static_cast<std::uint64_t>(model.d()));
  binary::write_u8(out, static_cast<std::uint8_t>(model.loss));
  binary::write_f64(out, model.reg_c);
  binary::write_f64(out, model.bias);
  for (Index i = 0; i < model.d(); ++i) binary::write_f64(out, model.weights(i));
}

LinearModel read_linear(std::istream& in) {
  binary::expect_magic(in, "LMDL");
  const std::uint32_t version = binary::read_u32(in);
  if (version != kLinearFormatVersion) {
    throw ParseError("unsupported linear model version " + std::to_string(version), 0);
  }
  const std::uint64_t d = binary::read_u64(in);
  if (d == 0 || d > (1u << 26)) throw ParseError("implausible weight dimension", 0);
  const std::uint8_t tag = binary::read_u8(in);
  if (tag > 1) throw ParseError("unknown loss tag " + std::to_string(tag), 0);
  LinearModel model;
  model.loss = static_cast<Loss>(tag);
  model.reg_c = binary::read_f64(in);
  model.bias = binary::read_f64(in);
  model.weights.resize(static_cast<Index>(d));
  for (Index i = 0; i < model.weights.size(); ++i) model.weights(i) = binary::read_f64(in);
  return model;
}

void save_linear(const std::string& path, const LinearModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open " + path + " for writing");
  write_linear(out, model);
}

LinearModel load_linear(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path);
  return read_linear(in);
}

}  // namespace flamm
