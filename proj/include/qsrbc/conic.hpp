#pragma once

// Small dense semidefinite-programming layer: linear objective, affine PSD
// block constraints, solved by barrier path-following with Newton steps.
// Adequate for blocks of order <= ~40 and a few hundred scalar variables.

#include <qsrbc/numerics.hpp>

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace qsrbc::conic {

/// One affine PSD constraint F0 + sum_i x_i F_i >= 0.
struct Block {
  Matrix constant;                                // F0
  std::vector<std::pair<int, Matrix>> terms;      // (variable index, F_i)
};

struct ConicProgram {
  int num_vars = 0;
  Vector objective;             // minimize objective . x
  std::vector<Block> blocks;
  // optional box bounds, converted to 1x1 blocks at solve time; NaN = none
  Vector lower, upper;

  void check() const {
    if (objective.size() != num_vars)
      throw std::invalid_argument("ConicProgram: objective size mismatch");
    for (const auto& b : blocks) {
      if (b.constant.rows() != b.constant.cols())
        throw std::invalid_argument("ConicProgram: block not square");
      for (const auto& [idx, f] : b.terms) {
        if (idx < 0 || idx >= num_vars)
          throw std::invalid_argument("ConicProgram: bad variable index");
        if (f.rows() != b.constant.rows() || f.cols() != b.constant.cols())
          throw std::invalid_argument("ConicProgram: coefficient size mismatch");
        if ((f - f.transpose()).norm() > 1e-12 * std::max(1.0, f.norm()))
          throw std::invalid_argument("ConicProgram: coefficient not symmetric");
      }
    }
  }
};

enum class SolveStatus { Optimal, Infeasible, MaxIterations, NumericalFailure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::MaxIterations: return "max-iterations";
    case SolveStatus::NumericalFailure: return "numerical-failure";
  }
  return "?";
}

struct SolveConfig {
  double mu_init = 1.0;
  double mu_factor = 0.2;
  double mu_min = 1e-9;        // stopping barrier parameter
  double newton_tol = 1e-8;    // decrement^2 / 2 threshold
  int max_newton = 500;        // total Newton step cap
  double feas_exit = 1e-3;     // phase-I early exit once this slack reached
  double psd_tol = 1e-8;       // post-solve PSD verification slack (relative)
  double phase1_box = 1e7;     // variable box during phase I (keeps the
                               // centering problem bounded)
};

struct SolveReport {
  SolveStatus status = SolveStatus::NumericalFailure;
  Vector x;
  double objective_value = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double gap = std::numeric_limits<double>::quiet_NaN();  // <= barrier suboptimality bound
  std::string message;
};

namespace detail {

inline Matrix eval_block(const Block& b, const Vector& x) {
  Matrix s = b.constant;
  for (const auto& [idx, f] : b.terms) s += x(idx) * f;
  return s;
}

// Cholesky of every block slack; nullopt if any block is not PD.
inline std::optional<std::vector<Eigen::LLT<Matrix>>> factor_all(
    const std::vector<Block>& blocks, const Vector& x) {
  std::vector<Eigen::LLT<Matrix>> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) {
    Matrix s = eval_block(b, x);
    if (!s.allFinite()) return std::nullopt;
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) return std::nullopt;
    // LLT can succeed on marginally indefinite input; insist on positive diag
    if (llt.matrixLLT().diagonal().minCoeff() <= 0.0) return std::nullopt;
    out.push_back(std::move(llt));
  }
  return out;
}

inline double barrier_value(const std::vector<Eigen::LLT<Matrix>>& factors) {
  double phi = 0.0;
  for (const auto& llt : factors)
    phi -= 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return phi;
}

// Append box bounds as 1x1 blocks.
inline std::vector<Block> blocks_with_bounds(const ConicProgram& prog) {
  std::vector<Block> blocks = prog.blocks;
  auto add_scalar = [&blocks](double f0, int var, double coef) {
    Block b;
    b.constant = Matrix::Constant(1, 1, f0);
    b.terms.push_back({var, Matrix::Constant(1, 1, coef)});
    blocks.push_back(std::move(b));
  };
  if (prog.lower.size() == prog.num_vars)
    for (int i = 0; i < prog.num_vars; ++i)
      if (std::isfinite(prog.lower(i))) add_scalar(-prog.lower(i), i, 1.0);
  if (prog.upper.size() == prog.num_vars)
    for (int i = 0; i < prog.num_vars; ++i)
      if (std::isfinite(prog.upper(i))) add_scalar(prog.upper(i), i, -1.0);
  return blocks;
}

struct PathResult {
  bool converged = false;
  Vector x;
  int newton_steps = 0;
  std::string message;
};

// Minimize c.x/mu + phi(x) along the decreasing-mu path from a strictly
// feasible start. early_exit, if set, stops as soon as value(x) < threshold
// (used to leave phase I once a comfortably interior point is found).
inline PathResult follow_path(const std::vector<Block>& blocks, const Vector& c,
                              Vector x, const SolveConfig& cfg,
                              const std::function<double(const Vector&)>& early_exit_value =
                                  nullptr,
                              double early_exit_threshold = 0.0) {
  PathResult res;
  const int n = static_cast<int>(c.size());
  auto factors0 = factor_all(blocks, x);
  if (!factors0) {
    res.message = "initial point not strictly feasible";
    return res;
  }

  double mu = cfg.mu_init;
  int total_newton = 0;
  while (true) {
    // Newton center at this mu.
    for (int inner = 0; inner < 60; ++inner) {
      if (total_newton >= cfg.max_newton) {
        res.x = x;
        res.newton_steps = total_newton;
        res.message = "newton iteration cap reached";
        return res;
      }
      auto factors = factor_all(blocks, x);
      if (!factors) {
        res.message = "iterate left the cone";
        return res;
      }
      Vector grad = c / mu;
      Matrix hess = Matrix::Zero(n, n);
      for (size_t j = 0; j < blocks.size(); ++j) {
        const auto& llt = (*factors)[j];
        const auto& terms = blocks[j].terms;
        std::vector<Matrix> w(terms.size());
        for (size_t i = 0; i < terms.size(); ++i) {
          // W_i = L^-1 F_i L^-T, symmetric
          Matrix tmp = llt.matrixL().solve(terms[i].second);
          w[i] = llt.matrixL().solve(tmp.transpose()).transpose();
          grad(terms[i].first) -= w[i].trace();
        }
        for (size_t i = 0; i < terms.size(); ++i)
          for (size_t k = i; k < terms.size(); ++k) {
            const double hik = (w[i].array() * w[k].array()).sum();
            hess(terms[i].first, terms[k].first) += hik;
            if (terms[i].first != terms[k].first)
              hess(terms[k].first, terms[i].first) += hik;
          }
      }

      Vector step;
      double ridge = 0.0;
      for (int attempt = 0; attempt < 4; ++attempt) {
        Eigen::LDLT<Matrix> ldlt(hess + ridge * Matrix::Identity(n, n));
        step = ldlt.solve(-grad);
        if (step.allFinite() && ldlt.info() == Eigen::Success) break;
        ridge = std::max(1e-12, ridge * 1e3 + 1e-12 * hess.norm());
      }
      if (!step.allFinite()) {
        res.message = "newton solve failed";
        return res;
      }
      const double decrement2 = -grad.dot(step);
      if (decrement2 <= 2.0 * cfg.newton_tol) break;  // centered

      // Backtracking line search: stay strictly feasible, Armijo on the
      // barrier objective.
      const double fval = c.dot(x) / mu + barrier_value(*factors);
      double alpha = 1.0;
      bool accepted = false;
      while (alpha > 1e-13) {
        Vector xn = x + alpha * step;
        auto fn = factor_all(blocks, xn);
        if (fn) {
          const double fvn = c.dot(xn) / mu + barrier_value(*fn);
          if (fvn <= fval + 0.25 * alpha * grad.dot(step)) {
            x = xn;
            accepted = true;
            break;
          }
        }
        alpha *= 0.5;
      }
      ++total_newton;
      if (!accepted) break;  // stalled; treat as centered at this mu
      if (early_exit_value && early_exit_value(x) < early_exit_threshold) {
        res.converged = true;
        res.x = x;
        res.newton_steps = total_newton;
        return res;
      }
    }
    if (mu <= cfg.mu_min) break;
    mu = std::max(cfg.mu_min, mu * cfg.mu_factor);
  }
  res.converged = true;
  res.x = x;
  res.newton_steps = total_newton;
  return res;
}

inline double min_block_eigenvalue(const std::vector<Block>& blocks,
                                   const Vector& x) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& b : blocks) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(eval_block(b, x),
                                             Eigen::EigenvaluesOnly);
    m = std::min(m, es.eigenvalues().minCoeff());
  }
  return m;
}

}  // namespace detail

/// Total order of all blocks (the barrier parameter nu).
inline double barrier_order(const ConicProgram& prog) {
  double nu = 0;
  for (const auto& b : prog.blocks) nu += static_cast<double>(b.constant.rows());
  if (prog.lower.size() == prog.num_vars)
    nu += (prog.lower.array().isFinite()).count();
  if (prog.upper.size() == prog.num_vars)
    nu += (prog.upper.array().isFinite()).count();
  return nu;
}

/// Minimize objective . x subject to all blocks PSD. If x0 is given and
/// strictly feasible it seeds the path; otherwise a phase-I margin problem
/// finds an interior point (reporting Infeasible when none exists).
inline SolveReport solve(const ConicProgram& prog, const SolveConfig& cfg = {},
                         const Vector* x0 = nullptr) {
  prog.check();
  SolveReport rep;
  const int n = prog.num_vars;
  auto blocks = detail::blocks_with_bounds(prog);

  Vector x = (x0 && x0->size() == n) ? *x0 : Vector::Zero(n);
  if (!detail::factor_all(blocks, x)) {
    // ---- phase I: maximize tau s.t. S_j(x) - tau I >= 0, tau <= cap ----
    const int nv = n + 1;  // [x; tau]
    std::vector<Block> p1 = blocks;
    double scale = 1.0;
    for (auto& b : p1) {
      scale = std::max(scale, b.constant.norm());
      b.terms.push_back({n, -Matrix::Identity(b.constant.rows(), b.constant.rows())});
    }
    const double tau_cap = 1.0;
    Block cap;
    cap.constant = Matrix::Constant(1, 1, tau_cap);
    cap.terms.push_back({n, Matrix::Constant(1, 1, -1.0)});
    p1.push_back(cap);
    // Box the x variables: without it the phase-I centering problem is
    // unbounded below along slack-growing directions.
    const double box = cfg.phase1_box * std::max(1.0, x.lpNorm<Eigen::Infinity>());
    for (int i = 0; i < n; ++i) {
      Block lo, hi;
      lo.constant = Matrix::Constant(1, 1, box);
      lo.terms.push_back({i, Matrix::Constant(1, 1, 1.0)});
      hi.constant = Matrix::Constant(1, 1, box);
      hi.terms.push_back({i, Matrix::Constant(1, 1, -1.0)});
      p1.push_back(lo);
      p1.push_back(hi);
    }

    Vector z = Vector::Zero(nv);
    z.head(n) = x;
    z(n) = detail::min_block_eigenvalue(blocks, x) - 1.0;
    Vector c1 = Vector::Zero(nv);
    c1(n) = -1.0;  // maximize tau

    const double exit_needed = std::min(cfg.feas_exit * scale, 0.5 * tau_cap);
    auto exit_value = [&](const Vector& v) { return -v(n); };
    auto p1res = detail::follow_path(p1, c1, z, cfg, exit_value, -exit_needed);
    rep.iterations += p1res.newton_steps;
    if (!p1res.converged) {
      rep.status = SolveStatus::NumericalFailure;
      rep.message = "phase I: " + p1res.message;
      return rep;
    }
    const double tau = p1res.x(n);
    if (tau <= 0.0) {
      rep.status = SolveStatus::Infeasible;
      rep.message = "phase I margin " + std::to_string(tau);
      rep.x = p1res.x.head(n);
      rep.objective_value = prog.objective.dot(rep.x);
      return rep;
    }
    x = p1res.x.head(n);
    if (!detail::factor_all(blocks, x)) {
      rep.status = SolveStatus::NumericalFailure;
      rep.message = "phase I returned a non-interior point";
      return rep;
    }
  }

  auto res = detail::follow_path(blocks, prog.objective, x, cfg);
  rep.iterations += res.newton_steps;
  rep.x = res.x.size() == n ? res.x : x;
  rep.objective_value = prog.objective.dot(rep.x);
  rep.gap = barrier_order(prog) * cfg.mu_min;
  if (!res.converged) {
    rep.status = res.message.find("cap") != std::string::npos
                     ? SolveStatus::MaxIterations
                     : SolveStatus::NumericalFailure;
    rep.message = res.message;
    return rep;
  }
  // Independent PSD re-check of the returned point.
  const double min_eig = detail::min_block_eigenvalue(blocks, rep.x);
  double scale = 1.0;
  for (const auto& b : blocks) scale = std::max(scale, b.constant.norm());
  if (min_eig < -cfg.psd_tol * scale) {
    rep.status = SolveStatus::NumericalFailure;
    rep.message = "returned point violates PSD re-check";
    return rep;
  }
  rep.status = SolveStatus::Optimal;
  return rep;
}

/// Feasibility via margin maximization: maximize t subject to
/// S_j(x) - t I >= 0 and t <= 1; feasible iff the maximized margin > 0.
/// The margin is returned in objective_value (sign flipped back).
inline SolveReport feasibility(const ConicProgram& prog,
                               const SolveConfig& cfg = {},
                               double var_box = 1e8) {
  prog.check();
  ConicProgram inj;
  inj.num_vars = prog.num_vars + 1;
  const int t = prog.num_vars;
  inj.objective = Vector::Zero(inj.num_vars);
  inj.objective(t) = -1.0;
  inj.blocks = prog.blocks;
  for (auto& b : inj.blocks)
    b.terms.push_back({t, -Matrix::Identity(b.constant.rows(), b.constant.rows())});
  Block cap;
  cap.constant = Matrix::Constant(1, 1, 1.0);
  cap.terms.push_back({t, Matrix::Constant(1, 1, -1.0)});
  inj.blocks.push_back(cap);
  // box the original variables so the analytic center exists
  inj.lower = Vector::Constant(inj.num_vars, -var_box);
  inj.upper = Vector::Constant(inj.num_vars, var_box);
  inj.lower(t) = std::numeric_limits<double>::quiet_NaN();
  inj.upper(t) = std::numeric_limits<double>::quiet_NaN();

  // strictly feasible start by construction
  Vector z = Vector::Zero(inj.num_vars);
  z(t) = std::min(detail::min_block_eigenvalue(prog.blocks, Vector::Zero(prog.num_vars)),
                  1.0) -
         1.0;
  SolveReport rep = solve(inj, cfg, &z);
  if (rep.x.size() == inj.num_vars) {
    const double margin = rep.x(t);
    rep.objective_value = margin;
    if (rep.status == SolveStatus::Optimal && margin <= 0.0)
      rep.status = SolveStatus::Infeasible;
    rep.x = rep.x.head(prog.num_vars).eval();
  }
  return rep;
}

/// Substitute x = x0 + N z, producing an equivalent program over z.
/// Used to eliminate linear equality constraints.
inline ConicProgram restrict_affine(const ConicProgram& prog, const Matrix& basis,
                                    const Vector& offset) {
  if (basis.rows() != prog.num_vars || offset.size() != prog.num_vars)
    throw std::invalid_argument("restrict_affine: dimension mismatch");
  ConicProgram out;
  out.num_vars = static_cast<int>(basis.cols());
  out.objective = basis.transpose() * prog.objective;
  for (const auto& b : prog.blocks) {
    Block nb;
    nb.constant = b.constant;
    std::vector<Matrix> cols(out.num_vars);
    std::vector<bool> used(out.num_vars, false);
    for (const auto& [idx, f] : b.terms) {
      nb.constant += offset(idx) * f;
      for (int j = 0; j < out.num_vars; ++j) {
        const double w = basis(idx, j);
        if (w == 0.0) continue;
        if (!used[j]) {
          cols[j] = w * f;
          used[j] = true;
        } else {
          cols[j] += w * f;
        }
      }
    }
    for (int j = 0; j < out.num_vars; ++j)
      if (used[j] && cols[j].norm() > 0.0) nb.terms.push_back({j, cols[j]});
    out.blocks.push_back(std::move(nb));
  }
  return out;
}

/// Sparse text dump (block index, variable index, row, col, value);
/// variable index -1 denotes the constant part. For cross-checking against
/// external solvers.
inline void dump_program(const ConicProgram& prog, std::ostream& os) {
  os << "conic-program vars " << prog.num_vars << " blocks " << prog.blocks.size()
     << "\n";
  os << "objective";
  for (int i = 0; i < prog.num_vars; ++i) os << " " << prog.objective(i);
  os << "\n";
  for (size_t j = 0; j < prog.blocks.size(); ++j) {
    const auto& b = prog.blocks[j];
    os << "block " << j << " order " << b.constant.rows() << "\n";
    auto emit = [&](int var, const Matrix& f) {
      for (Eigen::Index r = 0; r < f.rows(); ++r)
        for (Eigen::Index c = r; c < f.cols(); ++c)
          if (f(r, c) != 0.0)
            os << j << " " << var << " " << r << " " << c << " " << f(r, c)
               << "\n";
    };
    emit(-1, b.constant);
    for (const auto& [idx, f] : b.terms) emit(idx, f);
  }
}

}  // namespace qsrbc::conic
