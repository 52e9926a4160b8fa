#pragma once

// QSR supply rates w(u,y) = y'Qy + 2y'Su + u'Ru and the special cases
// (passivity, bounded gain, interior conic sectors).

#include <qsrbc/numerics.hpp>

#include <stdexcept>
#include <variant>

namespace qsrbc::systems {

/// Supply-rate triple for a p-output, m-input system: Q (p x p, symmetric),
/// S (p x m), R (m x m, symmetric).
struct QSRTriple {
  Matrix Q, S, R;

  QSRTriple(Matrix q, Matrix s, Matrix r)
      : Q(std::move(q)), S(std::move(s)), R(std::move(r)) {
    if (Q.rows() != Q.cols() || R.rows() != R.cols())
      throw std::invalid_argument("QSRTriple: Q and R must be square");
    if (S.rows() != Q.rows() || S.cols() != R.rows())
      throw std::invalid_argument("QSRTriple: S dimension mismatch");
    if (!(Q.allFinite() && S.allFinite() && R.allFinite()))
      throw std::invalid_argument("QSRTriple: non-finite entries");
    Q = 0.5 * (Q + Q.transpose()).eval();
    R = 0.5 * (R + R.transpose()).eval();
  }

  Eigen::Index output_dim() const { return Q.rows(); }
  Eigen::Index input_dim() const { return R.rows(); }

  static QSRTriple scalar(double q, double s, double r) {
    return QSRTriple(Matrix::Constant(1, 1, q), Matrix::Constant(1, 1, s),
                     Matrix::Constant(1, 1, r));
  }
};

struct Passive {};
struct BoundedGain {
  double gamma;
};
/// Interior conic sector [a, b] with a < 0 < b.
struct InteriorConicNondegenerate {
  double a, b;
};
/// Degenerate interior conic sector with lower bound d < 0 (upper infinite).
struct InteriorConicDegenerate {
  double d;
};
struct GeneralQsr {
  QSRTriple qsr;
};

using SupplyCase = std::variant<Passive, BoundedGain, InteriorConicNondegenerate,
                                InteriorConicDegenerate, GeneralQsr>;

/// Instantiate the QSR triple of a supply case for a p-output, m-input
/// system. Conic and passive cases require p == m.
inline QSRTriple case_to_qsr(const SupplyCase& sc, Eigen::Index p, Eigen::Index m) {
  if (p <= 0 || m <= 0) throw std::invalid_argument("case_to_qsr: bad dimensions");
  const Matrix ip = Matrix::Identity(p, p);
  const Matrix im = Matrix::Identity(m, m);

  if (std::holds_alternative<Passive>(sc)) {
    if (p != m)
      throw std::invalid_argument("case_to_qsr: passivity requires p == m");
    return QSRTriple(Matrix::Zero(p, p), 0.5 * ip, Matrix::Zero(m, m));
  }
  if (const auto* g = std::get_if<BoundedGain>(&sc)) {
    if (!(g->gamma > 0.0))
      throw std::invalid_argument("case_to_qsr: gain bound must be positive");
    return QSRTriple(-ip, Matrix::Zero(p, m), g->gamma * g->gamma * im);
  }
  if (const auto* c = std::get_if<InteriorConicNondegenerate>(&sc)) {
    if (!(c->a < 0.0 && 0.0 < c->b))
      throw std::invalid_argument(
          "case_to_qsr: nondegenerate interior cone requires a < 0 < b");
    if (p != m)
      throw std::invalid_argument("case_to_qsr: conic case requires p == m");
    return QSRTriple(-ip, 0.5 * (c->a + c->b) * ip, -(c->a * c->b) * im);
  }
  if (const auto* c = std::get_if<InteriorConicDegenerate>(&sc)) {
    if (!(c->d < 0.0))
      throw std::invalid_argument(
          "case_to_qsr: degenerate interior cone requires d < 0");
    if (p != m)
      throw std::invalid_argument("case_to_qsr: conic case requires p == m");
    return QSRTriple(Matrix::Zero(p, p), 0.5 * ip, -c->d * im);
  }
  const auto& q = std::get<GeneralQsr>(sc).qsr;
  if (q.output_dim() != p || q.input_dim() != m)
    throw std::invalid_argument("case_to_qsr: general QSR dimension mismatch");
  using numerics::SymmetricMatrix;
  const auto verdict = numerics::classify_definiteness(SymmetricMatrix(q.Q));
  if (verdict.max_eigenvalue > 1e-9 * std::max(1.0, q.Q.norm()))
    throw std::invalid_argument("case_to_qsr: general QSR requires Q <= 0");
  return q;
}

}  // namespace qsrbc::systems
