#pragma once

// Affine matrix expressions over a scalar decision vector, used to assemble
// KYP-type LMIs into conic program blocks. A matrix expression is
// M(x) = C0 + sum_k x_k C_k; symmetric matrix variables use the packed
// upper-triangle basis.

#include <qsrbc/conic.hpp>

#include <map>
#include <vector>

namespace qsrbc::lmi {

class AffineMatrix {
 public:
  AffineMatrix(Eigen::Index rows, Eigen::Index cols)
      : c0_(Matrix::Zero(rows, cols)) {}

  static AffineMatrix constant(Matrix m) {
    AffineMatrix e(m.rows(), m.cols());
    e.c0_ = std::move(m);
    return e;
  }

  Eigen::Index rows() const { return c0_.rows(); }
  Eigen::Index cols() const { return c0_.cols(); }
  bool is_constant() const { return coeff_.empty(); }
  const Matrix& constant_part() const { return c0_; }
  const std::map<int, Matrix>& terms() const { return coeff_; }

  void add_constant(const Matrix& m) { c0_ += m; }
  void add_term(int var, const Matrix& coef) {
    auto [it, inserted] = coeff_.try_emplace(var, coef);
    if (!inserted) it->second += coef;
  }

  Matrix eval(const Vector& x) const {
    Matrix m = c0_;
    for (const auto& [k, c] : coeff_) m += x(k) * c;
    return m;
  }

  AffineMatrix transpose() const {
    AffineMatrix out(cols(), rows());
    out.c0_ = c0_.transpose();
    for (const auto& [k, c] : coeff_) out.coeff_[k] = c.transpose();
    return out;
  }

  AffineMatrix operator-() const { return scaled(-1.0); }

  AffineMatrix scaled(double s) const {
    AffineMatrix out = *this;
    out.c0_ *= s;
    for (auto& [k, c] : out.coeff_) c *= s;
    return out;
  }

  AffineMatrix& operator+=(const AffineMatrix& o) {
    c0_ += o.c0_;
    for (const auto& [k, c] : o.coeff_) add_term(k, c);
    return *this;
  }

  friend AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b) {
    a += b;
    return a;
  }
  friend AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b) {
    a += b.scaled(-1.0);
    return a;
  }
  friend AffineMatrix operator*(const Matrix& l, const AffineMatrix& a) {
    AffineMatrix out(l.rows(), a.cols());
    out.c0_ = l * a.c0_;
    for (const auto& [k, c] : a.coeff_) out.coeff_[k] = l * c;
    return out;
  }
  friend AffineMatrix operator*(const AffineMatrix& a, const Matrix& r) {
    AffineMatrix out(a.rows(), r.cols());
    out.c0_ = a.c0_ * r;
    for (const auto& [k, c] : a.coeff_) out.coeff_[k] = c * r;
    return out;
  }

  /// Largest Frobenius norm among the constant and coefficient matrices;
  /// used to normalize LMIs before handing them to the solver.
  double scale() const {
    double s = c0_.norm();
    for (const auto& [k, c] : coeff_) s = std::max(s, c.norm());
    return s;
  }

 private:
  Matrix c0_;
  std::map<int, Matrix> coeff_;
};

/// Assemble a grid of conformal affine blocks into one expression.
inline AffineMatrix block_grid(const std::vector<std::vector<AffineMatrix>>& grid) {
  Eigen::Index rows = 0, cols = 0;
  for (const auto& row : grid) rows += row.at(0).rows();
  for (const auto& e : grid.at(0)) cols += e.cols();
  AffineMatrix out(rows, cols);
  Eigen::Index ro = 0;
  for (const auto& row : grid) {
    Eigen::Index co = 0;
    const Eigen::Index rh = row.at(0).rows();
    for (const auto& e : row) {
      if (e.rows() != rh) throw std::invalid_argument("block_grid: ragged rows");
      Matrix pad = Matrix::Zero(rows, cols);
      pad.block(ro, co, e.rows(), e.cols()) = e.constant_part();
      out.add_constant(pad);
      for (const auto& [k, c] : e.terms()) {
        Matrix cp = Matrix::Zero(rows, cols);
        cp.block(ro, co, e.rows(), e.cols()) = c;
        out.add_term(k, cp);
      }
      co += e.cols();
    }
    if (co != cols) throw std::invalid_argument("block_grid: ragged columns");
    ro += rh;
  }
  return out;
}

/// Decision-variable registry mapping matrix-shaped variables onto scalar
/// indices.
class VariableSpace {
 public:
  struct SymVar {
    int offset = 0;
    Eigen::Index n = 0;
  };
  struct MatVar {
    int offset = 0;
    Eigen::Index rows = 0, cols = 0;
  };

  int size() const { return size_; }

  SymVar add_symmetric(Eigen::Index n) {
    SymVar v{size_, n};
    size_ += static_cast<int>(n * (n + 1) / 2);
    return v;
  }
  MatVar add_matrix(Eigen::Index rows, Eigen::Index cols) {
    MatVar v{size_, rows, cols};
    size_ += static_cast<int>(rows * cols);
    return v;
  }
  int add_scalar() { return size_++; }

  AffineMatrix expr(const SymVar& v) const {
    AffineMatrix e(v.n, v.n);
    int idx = v.offset;
    for (Eigen::Index i = 0; i < v.n; ++i)
      for (Eigen::Index j = i; j < v.n; ++j, ++idx) {
        Matrix basis = Matrix::Zero(v.n, v.n);
        basis(i, j) = 1.0;
        basis(j, i) = 1.0;
        e.add_term(idx, basis);
      }
    return e;
  }

  AffineMatrix expr(const MatVar& v) const {
    AffineMatrix e(v.rows, v.cols);
    int idx = v.offset;
    for (Eigen::Index i = 0; i < v.rows; ++i)
      for (Eigen::Index j = 0; j < v.cols; ++j, ++idx) {
        Matrix basis = Matrix::Zero(v.rows, v.cols);
        basis(i, j) = 1.0;
        e.add_term(idx, basis);
      }
    return e;
  }

  AffineMatrix scalar_expr(int var, Eigen::Index order = 1) const {
    AffineMatrix e(order, order);
    e.add_term(var, Matrix::Identity(order, order));
    return e;
  }

  Matrix value(const SymVar& v, const Vector& x) const {
    Matrix m(v.n, v.n);
    int idx = v.offset;
    for (Eigen::Index i = 0; i < v.n; ++i)
      for (Eigen::Index j = i; j < v.n; ++j, ++idx) {
        m(i, j) = x(idx);
        m(j, i) = x(idx);
      }
    return m;
  }

  Matrix value(const MatVar& v, const Vector& x) const {
    Matrix m(v.rows, v.cols);
    int idx = v.offset;
    for (Eigen::Index i = 0; i < v.rows; ++i)
      for (Eigen::Index j = 0; j < v.cols; ++j, ++idx) m(i, j) = x(idx);
    return m;
  }

  void set(const SymVar& v, const Matrix& m, Vector& x) const {
    int idx = v.offset;
    for (Eigen::Index i = 0; i < v.n; ++i)
      for (Eigen::Index j = i; j < v.n; ++j, ++idx)
        x(idx) = 0.5 * (m(i, j) + m(j, i));
  }

  void set(const MatVar& v, const Matrix& m, Vector& x) const {
    int idx = v.offset;
    for (Eigen::Index i = 0; i < v.rows; ++i)
      for (Eigen::Index j = 0; j < v.cols; ++j, ++idx) x(idx) = m(i, j);
  }

 private:
  int size_ = 0;
};

/// Trace of a square affine expression as a 1x1 affine expression.
inline AffineMatrix trace_of(const AffineMatrix& expr) {
  AffineMatrix out(1, 1);
  out.add_constant(Matrix::Constant(1, 1, expr.constant_part().trace()));
  for (const auto& [k, c] : expr.terms())
    out.add_term(k, Matrix::Constant(1, 1, c.trace()));
  return out;
}

/// PSD constraint "expr >= 0" as a conic block over num_vars variables.
inline conic::Block psd_block(const AffineMatrix& expr) {
  conic::Block b;
  b.constant = 0.5 * (expr.constant_part() + expr.constant_part().transpose());
  for (const auto& [k, c] : expr.terms())
    b.terms.push_back({k, 0.5 * (c + c.transpose())});
  return b;
}

/// Linear equality system rows(x) = rhs collected from entries of affine
/// matrix expressions required to vanish.
struct EqualitySystem {
  std::vector<Vector> rows;
  std::vector<double> rhs;
  int num_vars = 0;

  explicit EqualitySystem(int nv) : num_vars(nv) {}

  void require_zero(const AffineMatrix& expr) {
    for (Eigen::Index i = 0; i < expr.rows(); ++i)
      for (Eigen::Index j = 0; j < expr.cols(); ++j) {
        Vector row = Vector::Zero(num_vars);
        for (const auto& [k, c] : expr.terms()) row(k) = c(i, j);
        if (row.cwiseAbs().maxCoeff() == 0.0 &&
            expr.constant_part()(i, j) == 0.0)
          continue;  // trivially satisfied
        rows.push_back(std::move(row));
        rhs.push_back(-expr.constant_part()(i, j));
      }
  }

  bool empty() const { return rows.empty(); }

  /// Null-space basis N and particular solution x0 with rows*x0 = rhs.
  /// Throws InfeasibleInput if the equalities are inconsistent.
  std::pair<Matrix, Vector> reduce() const {
    const int e = static_cast<int>(rows.size());
    Matrix a(e, num_vars);
    Vector b(e);
    for (int i = 0; i < e; ++i) {
      a.row(i) = rows[i].transpose();
      b(i) = rhs[i];
    }
    Eigen::FullPivLU<Matrix> lu(a);
    lu.setThreshold(1e-10);
    const Vector x0 = lu.solve(b);
    if ((a * x0 - b).norm() > 1e-8 * std::max(1.0, b.norm()))
      throw InfeasibleInput("EqualitySystem: inconsistent equality constraints");
    Matrix kernel = lu.kernel();
    if (lu.rank() == num_vars) kernel = Matrix::Zero(num_vars, 0);
    return {kernel, x0};
  }
};

}  // namespace qsrbc::lmi
