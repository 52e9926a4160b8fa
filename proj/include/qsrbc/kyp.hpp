#pragma once

// KYP-type LMI assemblies as affine expressions in a symmetric P (and
// optionally a variable output matrix C).

#include <qsrbc/lmi.hpp>
#include <qsrbc/supply.hpp>

namespace qsrbc::kyp {

using lmi::AffineMatrix;
using systems::QSRTriple;

/// Passivity KYP: [[PA + A'P, PB - C'], [*, -D - D']].
inline AffineMatrix assemble_eq1(const Matrix& a, const Matrix& b,
                                 const Matrix& d, const AffineMatrix& p,
                                 const AffineMatrix& c) {
  AffineMatrix x = p * a + (p * a).transpose();
  AffineMatrix y = p * b - c.transpose();
  AffineMatrix z = AffineMatrix::constant(-(d + d.transpose()));
  return lmi::block_grid({{x, y}, {y.transpose(), z}});
}

/// Dissipativity KYP:
/// [[PA + A'P - C'QC, PB - C'(QD + S)], [*, -R - S'D - D'S - D'QD]].
/// With a variable C the quadratic term C'QC only vanishes for Q = 0.
inline AffineMatrix assemble_eq2(const Matrix& a, const Matrix& b,
                                 const Matrix& d, const QSRTriple& qsr,
                                 const AffineMatrix& p, const AffineMatrix& c) {
  AffineMatrix x = p * a + (p * a).transpose();
  if (c.is_constant()) {
    const Matrix& cc = c.constant_part();
    x.add_constant(-(cc.transpose() * qsr.Q * cc));
  } else if (qsr.Q.norm() > 0.0) {
    throw std::logic_error("assemble_eq2: variable output matrix requires Q = 0");
  }
  AffineMatrix y = p * b - c.transpose() * (qsr.Q * d + qsr.S);
  const Matrix z = -(qsr.R + qsr.S.transpose() * d + d.transpose() * qsr.S +
                     d.transpose() * qsr.Q * d);
  return lmi::block_grid({{x, y}, {y.transpose(), AffineMatrix::constant(z)}});
}

/// Schur-complemented dissipativity constraint (Q < 0, D = 0):
/// [[PA + A'P, PB - C'S, C'], [*, -R, 0], [*, *, inv(Q)]].
inline AffineMatrix assemble_eq4(const Matrix& a, const Matrix& b,
                                 const QSRTriple& qsr, const AffineMatrix& p,
                                 const AffineMatrix& c) {
  Eigen::LLT<Matrix> negq(Matrix(-qsr.Q));
  if (negq.info() != Eigen::Success)
    throw std::invalid_argument("assemble_eq4: Q must be negative definite");
  const Matrix qinv = -negq.solve(Matrix::Identity(qsr.Q.rows(), qsr.Q.cols()));
  AffineMatrix x = p * a + (p * a).transpose();
  AffineMatrix y = p * b - c.transpose() * qsr.S;
  AffineMatrix ct = c.transpose();
  const Eigen::Index m = qsr.R.rows(), pp = qsr.Q.rows();
  auto zero = [](Eigen::Index r, Eigen::Index cc) {
    return AffineMatrix::constant(Matrix::Zero(r, cc));
  };
  return lmi::block_grid(
      {{x, y, ct},
       {y.transpose(), AffineMatrix::constant(-qsr.R), zero(m, pp)},
       {ct.transpose(), zero(pp, m), AffineMatrix::constant(qinv)}});
}

}  // namespace qsrbc::kyp
