#include "flamm/synthetic.hpp"

#include <cmath>
#include <random>

#include "flamm/error.hpp"

namespace flamm {

namespace {

struct Domain {
  Eigen::MatrixXd x;
  std::vector<int> y;
};

Domain draw(const PlantedShiftOptions& o, Index n, bool is_target, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  Domain out{Eigen::MatrixXd::Zero(o.d, n), std::vector<int>(static_cast<std::size_t>(n))};

  const double c = std::cos(o.rotation);
  const double s = std::sin(o.rotation);
  for (Index j = 0; j < n; ++j) {
    const int y = coin(rng) ? 1 : -1;
    out.y[static_cast<std::size_t>(j)] = y;
    out.x(0, j) = y * (o.margin + std::abs(normal(rng)));
    out.x(1, j) = is_target ? o.noise * o.target_scale * normal(rng)
                            : y * o.spurious + o.noise * normal(rng);
    for (Index i = 2; i < o.d; i += 2) {
      // Pairwise anisotropic nuisance: scales 2 and 0.5.
      const double a = 2.0 * normal(rng);
      const double b = 0.5 * normal(rng);
      if (!is_target) {
        out.x(i, j) = a;
        if (i + 1 < o.d) out.x(i + 1, j) = b;
      } else {
        out.x(i, j) = o.target_scale * (c * a - s * b);
        if (i + 1 < o.d) out.x(i + 1, j) = o.target_scale * (s * a + c * b);
      }
    }
  }
  return out;
}

}  // namespace

PlantedShift planted_shift(const PlantedShiftOptions& o) {
  if (o.d < 2) throw InvalidInput("planted shift needs d >= 2");
  if (o.n_source < 2 || o.n_target < 2) throw InvalidInput("planted shift needs n >= 2 per domain");
  std::mt19937_64 rng(o.seed);
  Domain source = draw(o, o.n_source, false, rng);
  Domain target = draw(o, o.n_target, true, rng);
  return {LabeledSet(DataMatrix(std::move(source.x)), std::move(source.y)),
          LabeledSet(DataMatrix(std::move(target.x)), std::move(target.y))};
}

Eigen::MatrixXd gaussian_matrix(Index d, Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(d, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < d; ++i) m(i, j) = normal(rng);
  return m;
}

}  // namespace flamm
