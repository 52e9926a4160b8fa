#pragma once

#include <qsrbc/numerics.hpp>

#include <stdexcept>

namespace qsrbc::systems {

/// Continuous-time LTI quadruple: xdot = A x + B u, y = C x + D u.
class StateSpace {
 public:
  StateSpace(Matrix a, Matrix b, Matrix c, Matrix d)
      : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), d_(std::move(d)) {
    if (a_.rows() != a_.cols()) throw std::invalid_argument("StateSpace: A not square");
    if (b_.rows() != a_.rows()) throw std::invalid_argument("StateSpace: B row mismatch");
    if (c_.cols() != a_.cols()) throw std::invalid_argument("StateSpace: C column mismatch");
    if (d_.rows() != c_.rows() || d_.cols() != b_.cols())
      throw std::invalid_argument("StateSpace: D dimension mismatch");
    if (!(a_.allFinite() && b_.allFinite() && c_.allFinite() && d_.allFinite()))
      throw std::invalid_argument("StateSpace: non-finite entries");
  }

  static StateSpace siso(double a, double b, double c, double d) {
    return StateSpace(Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, b),
                      Matrix::Constant(1, 1, c), Matrix::Constant(1, 1, d));
  }

  Eigen::Index n() const { return a_.rows(); }  // states
  Eigen::Index m() const { return b_.cols(); }  // inputs
  Eigen::Index p() const { return c_.rows(); }  // outputs

  const Matrix& A() const { return a_; }
  const Matrix& B() const { return b_; }
  const Matrix& C() const { return c_; }
  const Matrix& D() const { return d_; }

 private:
  Matrix a_, b_, c_, d_;
};

/// Rank of the controllability matrix [B AB ... A^{n-1}B] at tolerance.
inline Eigen::Index controllability_rank(const StateSpace& sys, double tol = 1e-8) {
  const Eigen::Index n = sys.n();
  Matrix ctrb(n, n * sys.m());
  Matrix cur = sys.B();
  for (Eigen::Index k = 0; k < n; ++k) {
    ctrb.middleCols(k * sys.m(), sys.m()) = cur;
    cur = sys.A() * cur;
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(ctrb);
  qr.setThreshold(tol);
  return qr.rank();
}

inline Eigen::Index observability_rank(const StateSpace& sys, double tol = 1e-8) {
  const Eigen::Index n = sys.n();
  Matrix obsv(n * sys.p(), n);
  Matrix cur = sys.C();
  for (Eigen::Index k = 0; k < n; ++k) {
    obsv.middleRows(k * sys.p(), sys.p()) = cur;
    cur = cur * sys.A();
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(obsv);
  qr.setThreshold(tol);
  return qr.rank();
}

}  // namespace qsrbc::systems
