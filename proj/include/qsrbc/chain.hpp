#pragma once

// Mass-spring-damper chain plants: first mass anchored to the wall through
// spring/damper 1, last mass free. Inputs are forces on selected masses,
// outputs the collocated velocities, which makes the plant passive for any
// positive parameter set.

#include <qsrbc/state_space.hpp>

#include <random>
#include <stdexcept>
#include <vector>

namespace qsrbc::systems {

struct ChainParams {
  Vector mass, k, c;  // per-mass / per-spring / per-damper, all length N

  ChainParams(Vector mass_, Vector k_, Vector c_)
      : mass(std::move(mass_)), k(std::move(k_)), c(std::move(c_)) {
    if (mass.size() == 0 || k.size() != mass.size() || c.size() != mass.size())
      throw std::invalid_argument("ChainParams: sequences must share length N >= 1");
    if (mass.minCoeff() <= 0.0 || k.minCoeff() <= 0.0 || c.minCoeff() <= 0.0)
      throw std::invalid_argument("ChainParams: parameters must be strictly positive");
  }

  static ChainParams uniform(Eigen::Index n, double mass, double k, double c) {
    return ChainParams(Vector::Constant(n, mass), Vector::Constant(n, k),
                       Vector::Constant(n, c));
  }

  Eigen::Index n_masses() const { return mass.size(); }
};

/// 2N-state chain model, states ordered positions-then-velocities.
/// io_selection lists the masses (0-based) carrying a force input; outputs
/// are the velocities of the same masses. D = 0.
inline StateSpace build_chain(const ChainParams& params,
                              const std::vector<Eigen::Index>& io_selection) {
  const Eigen::Index n = params.n_masses();
  if (io_selection.empty())
    throw std::invalid_argument("build_chain: io_selection must be nonempty");
  for (auto i : io_selection)
    if (i < 0 || i >= n) throw std::invalid_argument("build_chain: bad mass index");

  // Stiffness/damping matrices of the anchored chain: element i couples
  // masses i-1 and i (element 0 couples mass 0 to the wall).
  Matrix kmat = Matrix::Zero(n, n), cmat = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    kmat(i, i) += params.k(i);
    cmat(i, i) += params.c(i);
    if (i + 1 < n) {
      kmat(i, i) += params.k(i + 1);
      cmat(i, i) += params.c(i + 1);
      kmat(i, i + 1) -= params.k(i + 1);
      kmat(i + 1, i) -= params.k(i + 1);
      cmat(i, i + 1) -= params.c(i + 1);
      cmat(i + 1, i) -= params.c(i + 1);
    }
  }
  const Vector minv = params.mass.cwiseInverse();

  Matrix a = Matrix::Zero(2 * n, 2 * n);
  a.topRightCorner(n, n) = Matrix::Identity(n, n);
  a.bottomLeftCorner(n, n) = -(minv.asDiagonal() * kmat);
  a.bottomRightCorner(n, n) = -(minv.asDiagonal() * cmat);

  const Eigen::Index m = static_cast<Eigen::Index>(io_selection.size());
  Matrix b = Matrix::Zero(2 * n, m);
  Matrix c = Matrix::Zero(m, 2 * n);
  for (Eigen::Index j = 0; j < m; ++j) {
    b(n + io_selection[j], j) = minv(io_selection[j]);
    c(j, n + io_selection[j]) = 1.0;
  }
  return StateSpace(std::move(a), std::move(b), std::move(c), Matrix::Zero(m, m));
}

/// Sample nominal parameters uniformly from the given ranges and true
/// parameters as independent multiplicative perturbations in [1-delta, 1+delta]
/// of the nominal (factors clamped strictly positive). Masses are unit.
inline std::pair<ChainParams, ChainParams> sample_chain(
    std::mt19937_64& rng, Eigen::Index n, std::pair<double, double> k_range,
    std::pair<double, double> c_range, double delta) {
  if (delta < 0.0) throw std::invalid_argument("sample_chain: delta must be >= 0");
  if (!(k_range.first > 0.0 && k_range.second >= k_range.first &&
        c_range.first > 0.0 && c_range.second >= c_range.first))
    throw std::invalid_argument("sample_chain: ranges must be positive");
  std::uniform_real_distribution<double> ku(k_range.first, k_range.second);
  std::uniform_real_distribution<double> cu(c_range.first, c_range.second);
  std::uniform_real_distribution<double> fu(1.0 - delta, 1.0 + delta);
  Vector kn(n), cn(n), kt(n), ct(n);
  for (Eigen::Index i = 0; i < n; ++i) kn(i) = ku(rng);
  for (Eigen::Index i = 0; i < n; ++i) cn(i) = cu(rng);
  for (Eigen::Index i = 0; i < n; ++i) kt(i) = kn(i) * std::max(1e-6, fu(rng));
  for (Eigen::Index i = 0; i < n; ++i) ct(i) = cn(i) * std::max(1e-6, fu(rng));
  const Vector ones = Vector::Ones(n);
  return {ChainParams(ones, kn, cn), ChainParams(ones, kt, ct)};
}

}  // namespace qsrbc::systems
