#pragma once

// Dense real linear-algebra foundation: symmetric eigendecomposition,
// Hurwitz tests, Lyapunov and continuous algebraic Riccati solvers,
// definiteness classification. Sized for desk-scale problems (n <= ~10).

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <utility>

namespace qsrbc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Iterative eigenvalue/Schur routine failed to converge, or a solve
/// produced non-finite values.
struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Input violates a mathematical precondition (not Hurwitz, no stabilizing
/// solution, ...): the requested object does not exist.
struct InfeasibleInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace numerics {

inline constexpr double kHurwitzTol = 1e-9;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Square real matrix stored symmetrized; construction enforces symmetry
/// exactly (averaging) and finiteness.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(const Matrix& m) {
    if (m.rows() != m.cols())
      throw std::invalid_argument("SymmetricMatrix: matrix must be square");
    if (!all_finite(m))
      throw std::invalid_argument("SymmetricMatrix: non-finite entries");
    mat_ = 0.5 * (m + m.transpose());
  }

  Eigen::Index order() const { return mat_.rows(); }
  const Matrix& matrix() const { return mat_; }

 private:
  Matrix mat_;
};

enum class Definiteness { PD, PSD, ND, NSD, Indefinite };

struct DefinitenessVerdict {
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  Definiteness classification = Definiteness::Indefinite;
};

/// Eigendecomposition of a symmetric matrix. Eigenvalues ascending,
/// eigenvectors orthonormal (columns).
inline std::pair<Vector, Matrix> sym_eigen(const SymmetricMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.matrix());
  if (es.info() != Eigen::Success)
    throw NumericalFailure("sym_eigen: eigenvalue iteration did not converge");
  return {es.eigenvalues(), es.eigenvectors()};
}

/// Classify definiteness at tolerance tol; tol < 0 selects the default
/// 1e-9 * max(1, ||M||_F).
inline DefinitenessVerdict classify_definiteness(const SymmetricMatrix& m,
                                                 double tol = -1.0) {
  if (tol < 0.0) tol = 1e-9 * std::max(1.0, m.matrix().norm());
  DefinitenessVerdict v;
  if (m.order() == 0) {
    v.classification = Definiteness::PSD;
    return v;
  }
  auto [evals, evecs] = sym_eigen(m);
  v.min_eigenvalue = evals(0);
  v.max_eigenvalue = evals(evals.size() - 1);
  if (v.min_eigenvalue > tol)
    v.classification = Definiteness::PD;
  else if (v.max_eigenvalue < -tol)
    v.classification = Definiteness::ND;
  else if (v.min_eigenvalue >= -tol)
    v.classification = Definiteness::PSD;
  else if (v.max_eigenvalue <= tol)
    v.classification = Definiteness::NSD;
  else
    v.classification = Definiteness::Indefinite;
  return v;
}

/// True iff every eigenvalue of A has real part < -tol.
inline bool is_hurwitz(const Matrix& a, double tol = kHurwitzTol) {
  if (a.rows() != a.cols())
    throw std::invalid_argument("is_hurwitz: matrix must be square");
  if (!all_finite(a)) throw std::invalid_argument("is_hurwitz: non-finite entries");
  if (a.rows() == 0) return true;
  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw NumericalFailure("is_hurwitz: eigenvalue iteration did not converge");
  return es.eigenvalues().real().maxCoeff() < -tol;
}

namespace detail {

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace detail

/// Solve A*Pi + Pi*A' + M = 0 for symmetric Pi, A Hurwitz.
/// Kronecker vectorization solve; O(n^6) but n <= ~10 here.
inline SymmetricMatrix solve_lyapunov(const Matrix& a, const SymmetricMatrix& m) {
  const Eigen::Index n = a.rows();
  if (m.order() != n)
    throw std::invalid_argument("solve_lyapunov: dimension mismatch");
  if (!is_hurwitz(a))
    throw InfeasibleInput("solve_lyapunov: A is not Hurwitz");

  const Matrix eye = Matrix::Identity(n, n);
  // vec(A*Pi) = (I (x) A) vec(Pi), vec(Pi*A') = (A (x) I) vec(Pi).
  Matrix k = detail::kron(eye, a) + detail::kron(a, eye);
  Eigen::Map<const Vector> mvec(m.matrix().data(), n * n);
  Eigen::PartialPivLU<Matrix> lu(k);
  Vector x = lu.solve(-mvec);
  // one step of iterative refinement
  Vector r = k * x + mvec;
  x -= lu.solve(r);
  Matrix pi = Eigen::Map<const Matrix>(x.data(), n, n);
  pi = 0.5 * (pi + pi.transpose()).eval();

  const double resid = (a * pi + pi * a.transpose() + m.matrix()).norm();
  if (!(resid <= 1e-9 * std::max(1.0, m.matrix().norm())) || !all_finite(pi))
    throw NumericalFailure("solve_lyapunov: residual " + std::to_string(resid) +
                           " exceeds tolerance");
  return SymmetricMatrix(pi);
}

namespace detail {

using ComplexMatrix = Eigen::MatrixXcd;

// Swap the adjacent diagonal entries (k, k+1) of the upper-triangular complex
// Schur factor T by a unitary similarity, accumulating into U.
inline void schur_swap(ComplexMatrix& t, ComplexMatrix& u, Eigen::Index k) {
  using Complex = std::complex<double>;
  const Complex a = t(k, k);
  const Complex b = t(k, k + 1);
  const Complex c = t(k + 1, k + 1);
  // Eigenvector of [[a, b], [0, c]] for eigenvalue c is (b, c - a); rotating
  // it onto e1 puts c in the leading position.
  Eigen::Vector2cd v;
  v << b, c - a;
  const double nv = v.norm();
  if (nv == 0.0) return;  // equal eigenvalues, nothing to move
  Eigen::Matrix2cd g;
  g.col(0) = v / nv;
  g(0, 1) = -std::conj(g(1, 0));
  g(1, 1) = std::conj(g(0, 0));
  t.middleRows(k, 2) = (g.adjoint() * t.middleRows(k, 2)).eval();
  t.middleCols(k, 2) = (t.middleCols(k, 2) * g).eval();
  u.middleCols(k, 2) = (u.middleCols(k, 2) * g).eval();
  t(k + 1, k) = Complex(0, 0);
}

}  // namespace detail

/// Solve A'*Pi + Pi*A - Pi*B*inv(E)*B'*Pi + F = 0 for the stabilizing
/// Pi >= 0. F is the assembled constant term (C'*F1*C for LQR, B*F2*B' for
/// the dual observer equation). Invariant-subspace method: complex Schur
/// form of the Hamiltonian with stable eigenvalues ordered first, then a
/// Newton-Kleinman polish.
inline SymmetricMatrix solve_care(const Matrix& a, const Matrix& b,
                                  const SymmetricMatrix& e,
                                  const SymmetricMatrix& f_weight) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.rows() != n || e.order() != b.cols() ||
      f_weight.order() != n)
    throw std::invalid_argument("solve_care: dimension mismatch");

  Eigen::LLT<Matrix> ellt(e.matrix());
  if (ellt.info() != Eigen::Success)
    throw std::invalid_argument("solve_care: E must be positive definite");
  const Matrix g = b * ellt.solve(b.transpose());  // B inv(E) B'

  Matrix ham(2 * n, 2 * n);
  ham << a, -g, -f_weight.matrix(), -a.transpose();

  Eigen::ComplexSchur<Matrix> schur(ham);
  if (schur.info() != Eigen::Success)
    throw NumericalFailure("solve_care: Schur iteration did not converge");
  detail::ComplexMatrix t = schur.matrixT();
  detail::ComplexMatrix u = schur.matrixU();

  const double axis_tol = 1e-9 * std::max(1.0, ham.norm());
  Eigen::Index n_stable = 0;
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    const double re = t(i, i).real();
    if (std::abs(re) <= axis_tol)
      throw InfeasibleInput(
          "solve_care: Hamiltonian eigenvalue on the imaginary axis; no "
          "stabilizing solution");
    if (re < 0) ++n_stable;
  }
  if (n_stable != n)
    throw InfeasibleInput("solve_care: stable invariant subspace has dimension " +
                          std::to_string(n_stable) + ", expected " +
                          std::to_string(n));

  // Selection sort by bubbling: move stable eigenvalues to the leading block.
  for (Eigen::Index target = 0; target < n; ++target) {
    Eigen::Index src = target;
    while (src < 2 * n && t(src, src).real() >= 0) ++src;
    for (Eigen::Index k = src; k > target; --k)
      detail::schur_swap(t, u, k - 1);
  }

  const detail::ComplexMatrix u1 = u.topLeftCorner(n, n);
  const detail::ComplexMatrix u2 = u.bottomLeftCorner(n, n);
  // Pi = U2 * inv(U1): solve U1^T Pi^T = U2^T. A singular U1 means the
  // stable subspace is not a graph over the state space, i.e. the pair is
  // not stabilizable.
  Eigen::FullPivLU<detail::ComplexMatrix> lu(u1.transpose());
  if (!lu.isInvertible())
    throw InfeasibleInput("solve_care: no stabilizing solution (pair not "
                          "stabilizable at working precision)");
  detail::ComplexMatrix pic = lu.solve(u2.transpose()).transpose();
  Matrix pi = pic.real();
  pi = 0.5 * (pi + pi.transpose()).eval();
  if (!all_finite(pi))
    throw InfeasibleInput("solve_care: no stabilizing solution");

  const double f_scale = std::max(1.0, f_weight.matrix().norm());
  auto residual = [&](const Matrix& p) {
    return (a.transpose() * p + p * a - p * g * p + f_weight.matrix()).norm();
  };

  // Newton-Kleinman refinement: each step solves a Lyapunov equation in the
  // current closed loop and converges quadratically near the solution.
  for (int iter = 0; iter < 10 && residual(pi) > 1e-12 * f_scale; ++iter) {
    const Matrix acl = a - g * pi;
    const Matrix q = pi * g * pi + f_weight.matrix();
    Matrix next;
    try {
      next = solve_lyapunov(acl.transpose(),
                            SymmetricMatrix(0.5 * (q + q.transpose())))
                 .matrix();
    } catch (const std::exception&) {
      break;
    }
    if (!all_finite(next) || residual(next) >= residual(pi)) break;
    pi = next;
  }

  // Backward-error scale: the residual of x'Pi+Pi*x-Pi*G*Pi+F cannot be
  // evaluated below roundoff in its largest term.
  const double res_scale = std::max(f_scale, (pi * g * pi).norm());
  if (!(residual(pi) <= 1e-8 * res_scale))
    throw NumericalFailure("solve_care: residual " + std::to_string(residual(pi)) +
                           " exceeds tolerance");
  if (!is_hurwitz(a - g * pi, 0.0))
    throw InfeasibleInput("solve_care: computed solution is not stabilizing");
  return SymmetricMatrix(pi);
}

}  // namespace numerics
}  // namespace qsrbc
