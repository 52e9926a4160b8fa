#pragma once

// LMI-based verification and synthesis: KYP dissipativity certificates,
// the closed-loop QSR stability test with alpha search, stabilizing
// controller-QSR derivation, and the constructive feasible controller.

#include <qsrbc/interconnect.hpp>
#include <qsrbc/kyp.hpp>
#include <qsrbc/lmi.hpp>
#include <qsrbc/state_space.hpp>
#include <qsrbc/supply.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace qsrbc::certificates {

using systems::QSRTriple;
using systems::StateSpace;

enum class LmiForm { Eq1, Eq2, Eq4 };

inline const char* to_string(LmiForm f) {
  switch (f) {
    case LmiForm::Eq1: return "passivity-kyp";
    case LmiForm::Eq2: return "dissipativity-kyp";
    case LmiForm::Eq4: return "dissipativity-schur";
  }
  return "?";
}

/// Witness for an LMI-based property: P > 0 and the assembled LMI has
/// margin lmi_margin <= lmi_tol. Margins are reported for the assembly
/// normalized by max(1, largest block norm).
struct Certificate {
  Matrix P;
  double lmi_margin = 0.0;
  LmiForm which = LmiForm::Eq2;
};

struct VerifyOptions {
  double lmi_tol = 1e-8;  // normalized margin acceptance (also the SDP shift)
  double p_cap = 1e6;     // bound on ||P||
  double rank_tol = 1e-8;
  conic::SolveConfig solve = [] {
    conic::SolveConfig c;
    c.mu_min = 1e-10;  // margin suboptimality must resolve below lmi_tol
    return c;
  }();
};

struct VerifyResult {
  bool feasible = false;
  std::optional<Certificate> certificate;
  double solver_margin = 0.0;  // maximized shifted margin t*
  conic::SolveStatus solver_status = conic::SolveStatus::NumericalFailure;
  std::vector<std::string> warnings;
};

namespace detail {

using lmi::AffineMatrix;

inline AffineMatrix sym_part(const AffineMatrix& x) {
  return (x + x.transpose()).scaled(0.5);
}

/// Margin feasibility SDP for M(P) <= (lmi_tol - t) I with P >= tI,
/// ||P|| <= p_cap, t <= 1; maximize t. The lmi_tol shift makes instances
/// whose optimal margin is exactly zero (common: lossless chains,
/// constructive controllers) classify as feasible with certificates inside
/// the documented tolerance.
inline VerifyResult verify_margin(const lmi::VariableSpace& vars,
                                  const lmi::VariableSpace::SymVar& pvar,
                                  const AffineMatrix& m_raw, LmiForm which,
                                  const VerifyOptions& opts,
                                  std::vector<std::string> warnings) {
  const double scale = std::max(1.0, m_raw.scale());
  const AffineMatrix m = m_raw.scaled(1.0 / scale);
  const Eigen::Index n = pvar.n;
  const Eigen::Index mo = m.rows();

  lmi::VariableSpace all = vars;  // copy; append the margin variable
  const int tvar = all.add_scalar();

  conic::ConicProgram prog;
  prog.num_vars = all.size();
  prog.objective = Vector::Zero(prog.num_vars);
  prog.objective(tvar) = -1.0;  // maximize t

  // (lmi_tol - t) I - M(P) >= 0
  AffineMatrix slack = -m;
  slack.add_constant(opts.lmi_tol * Matrix::Identity(mo, mo));
  slack.add_term(tvar, -Matrix::Identity(mo, mo));
  prog.blocks.push_back(lmi::psd_block(slack));

  // P - t I >= 0
  AffineMatrix pblock = all.expr(pvar);
  pblock.add_term(tvar, -Matrix::Identity(n, n));
  prog.blocks.push_back(lmi::psd_block(pblock));

  // p_cap I - P >= 0
  AffineMatrix pcap = -all.expr(pvar);
  pcap.add_constant(opts.p_cap * Matrix::Identity(n, n));
  prog.blocks.push_back(lmi::psd_block(pcap));

  // 1 - t >= 0
  AffineMatrix cap(1, 1);
  cap.add_constant(Matrix::Constant(1, 1, 1.0));
  cap.add_term(tvar, Matrix::Constant(1, 1, -1.0));
  prog.blocks.push_back(lmi::psd_block(cap));

  // Strictly feasible start: P = I, t below every block's limit.
  Vector x0 = Vector::Zero(prog.num_vars);
  all.set(pvar, Matrix::Identity(n, n), x0);
  auto [ev_m, vec_m] = numerics::sym_eigen(
      numerics::SymmetricMatrix(m.eval(x0)));
  const double t_lim =
      std::min({opts.lmi_tol - ev_m(ev_m.size() - 1), 1.0, 1.0});
  x0(tvar) = t_lim - 0.5 * (1.0 + std::abs(t_lim));

  VerifyResult out;
  out.warnings = std::move(warnings);
  auto rep = conic::solve(prog, opts.solve, &x0);
  out.solver_status = rep.status;
  out.solver_margin = rep.x.size() == prog.num_vars ? rep.x(tvar) : -1.0;
  if (rep.status != conic::SolveStatus::Optimal) {
    out.feasible = false;
    out.warnings.push_back(std::string("solver: ") + conic::to_string(rep.status) +
                           (rep.message.empty() ? "" : " (" + rep.message + ")"));
    return out;
  }

  const Matrix p = all.value(pvar, rep.x);
  Vector xeval = Vector::Zero(all.size());
  all.set(pvar, p, xeval);
  auto [ev, vv] = numerics::sym_eigen(numerics::SymmetricMatrix(m.eval(xeval)));
  const double margin = ev(ev.size() - 1);
  auto [pev, pvv] = numerics::sym_eigen(numerics::SymmetricMatrix(p));

  out.feasible = out.solver_margin > 0.0 && margin <= opts.lmi_tol &&
                 pev(0) > 0.0;
  if (out.feasible) out.certificate = Certificate{p, margin, which};
  return out;
}

inline std::vector<std::string> minimality_warnings(const StateSpace& sys,
                                                    double tol) {
  std::vector<std::string> w;
  if (systems::controllability_rank(sys, tol) < sys.n())
    w.push_back("controllability matrix rank-deficient at tolerance");
  if (systems::observability_rank(sys, tol) < sys.n())
    w.push_back("observability matrix rank-deficient at tolerance");
  return w;
}

}  // namespace detail

/// Passivity certificate via the passivity KYP LMI (Eq. 1 route).
inline VerifyResult verify_passive(const StateSpace& sys,
                                   const VerifyOptions& opts = {}) {
  lmi::VariableSpace vars;
  auto pvar = vars.add_symmetric(sys.n());
  auto m = kyp::assemble_eq1(sys.A(), sys.B(), sys.D(), vars.expr(pvar),
                                lmi::AffineMatrix::constant(sys.C()));
  return detail::verify_margin(vars, pvar, m, LmiForm::Eq1, opts,
                               detail::minimality_warnings(sys, opts.rank_tol));
}

/// QSR-dissipativity certificate via the dissipativity KYP LMI (Eq. 2 route).
inline VerifyResult verify_qsr(const StateSpace& sys, const QSRTriple& qsr,
                               const VerifyOptions& opts = {}) {
  if (qsr.output_dim() != sys.p() || qsr.input_dim() != sys.m())
    throw std::invalid_argument("verify_qsr: QSR dimensions mismatch system");
  lmi::VariableSpace vars;
  auto pvar = vars.add_symmetric(sys.n());
  auto m = kyp::assemble_eq2(sys.A(), sys.B(), sys.D(), qsr, vars.expr(pvar),
                                lmi::AffineMatrix::constant(sys.C()));
  return detail::verify_margin(vars, pvar, m, LmiForm::Eq2, opts,
                               detail::minimality_warnings(sys, opts.rank_tol));
}

/// Schur-complement route (Eq. 4): equivalent to verify_qsr for Q < 0 and
/// D = 0 realizations.
inline VerifyResult verify_qsr_schur(const StateSpace& sys, const QSRTriple& qsr,
                                     const VerifyOptions& opts = {}) {
  if (qsr.output_dim() != sys.p() || qsr.input_dim() != sys.m())
    throw std::invalid_argument("verify_qsr_schur: QSR dimensions mismatch system");
  using numerics::Definiteness;
  using numerics::SymmetricMatrix;
  const auto qv = numerics::classify_definiteness(SymmetricMatrix(qsr.Q));
  if (qv.classification != Definiteness::ND)
    throw std::invalid_argument("verify_qsr_schur: requires Q < 0");
  if (sys.D().norm() > 1e-12 * std::max(1.0, sys.C().norm()))
    throw std::invalid_argument("verify_qsr_schur: requires D = 0");
  lmi::VariableSpace vars;
  auto pvar = vars.add_symmetric(sys.n());
  auto m = kyp::assemble_eq4(sys.A(), sys.B(), qsr, vars.expr(pvar),
                                lmi::AffineMatrix::constant(sys.C()));
  return detail::verify_margin(vars, pvar, m, LmiForm::Eq4, opts,
                               detail::minimality_warnings(sys, opts.rank_tol));
}

/// Closed-loop stability verdict from the two open-loop QSR triples.
struct StabilityVerdict {
  bool stable = false;
  double alpha = 0.0;   // the certifying weight when stable
  double margin = 0.0;  // max eigenvalue of the stability matrix at alpha
};

/// Stability matrix [[Q1 + a R2, -S1 + a S2'], [*, R1 + a Q2]].
inline Matrix stability_matrix(const QSRTriple& q1, const QSRTriple& q2,
                               double alpha) {
  const Eigen::Index p1 = q1.output_dim(), m1 = q1.input_dim();
  Matrix t(p1 + m1, p1 + m1);
  t.topLeftCorner(p1, p1) = q1.Q + alpha * q2.R;
  t.topRightCorner(p1, m1) = -q1.S + alpha * q2.S.transpose();
  t.bottomLeftCorner(m1, p1) = t.topRightCorner(p1, m1).transpose();
  t.bottomRightCorner(m1, m1) = q1.R + alpha * q2.Q;
  return t;
}

/// Search alpha > 0 making the stability matrix negative definite. The
/// matrix is affine in alpha, so its maximum eigenvalue is convex in alpha
/// and unimodal in log alpha; golden-section on log10 alpha in [-6, 6].
inline StabilityVerdict stability_check(const QSRTriple& q1, const QSRTriple& q2) {
  if (q2.output_dim() != q1.input_dim() || q2.input_dim() != q1.output_dim())
    throw std::invalid_argument(
        "stability_check: dimensions do not conform for negative feedback");
  auto h = [&](double u) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(
        stability_matrix(q1, q2, std::pow(10.0, u)), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
  };
  double lo = -6.0, hi = 6.0;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = h(x1), f2 = h(x2);
  double best_u = f1 < f2 ? x1 : x2;
  double best = std::min(f1, f2);
  for (int it = 0; it < 120; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = h(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = h(x2);
    }
    if (f1 < best) best = f1, best_u = x1;
    if (f2 < best) best = f2, best_u = x2;
  }
  StabilityVerdict v;
  v.margin = best;
  v.stable = best < -1e-9;
  v.alpha = v.stable ? std::pow(10.0, best_u) : 0.0;
  return v;
}

enum class ControllerQcMode { NegativeDefinite, Zero };

struct SynthesisOptions {
  ControllerQcMode qc_mode = ControllerQcMode::NegativeDefinite;
  double qc_eps = 1e-3;  // Q2 <= -eps I in the NegativeDefinite mode
  conic::SolveConfig solve;
};

/// Derive a controller supply triple (Q2, S2, R2) with R2 >= 0 that makes
/// the closed loop stable by the QSR stability theorem. Solved at alpha = 1
/// (no loss of generality: scaling the triple rescales alpha) with the
/// margin maximized under the trace normalization tr(R2) - tr(Q2) = p + m.
inline QSRTriple synthesize_controller_qsr(const QSRTriple& plant,
                                           const SynthesisOptions& opts = {}) {
  const Eigen::Index p = plant.output_dim();  // controller input dim
  const Eigen::Index m = plant.input_dim();   // controller output dim

  lmi::VariableSpace vars;
  const bool use_q = opts.qc_mode == ControllerQcMode::NegativeDefinite;
  lmi::VariableSpace::SymVar q2var{};
  if (use_q) q2var = vars.add_symmetric(m);
  auto s2var = vars.add_matrix(m, p);
  auto r2var = vars.add_symmetric(p);
  const int tvar = vars.add_scalar();

  auto q2 = use_q ? vars.expr(q2var)
                  : lmi::AffineMatrix::constant(Matrix::Zero(m, m));
  auto s2 = vars.expr(s2var);
  auto r2 = vars.expr(r2var);

  // stability matrix at alpha = 1, as an affine expression
  lmi::AffineMatrix tl = r2 + lmi::AffineMatrix::constant(plant.Q);
  lmi::AffineMatrix tr = s2.transpose() + lmi::AffineMatrix::constant(-plant.S);
  lmi::AffineMatrix br = q2 + lmi::AffineMatrix::constant(plant.R);
  auto tmat = lmi::block_grid({{tl, tr}, {tr.transpose(), br}});

  conic::ConicProgram prog;
  prog.num_vars = vars.size();
  prog.objective = Vector::Zero(prog.num_vars);
  prog.objective(tvar) = -1.0;

  lmi::AffineMatrix slack = -tmat;  // -T - tI >= 0
  slack.add_term(tvar, -Matrix::Identity(p + m, p + m));
  prog.blocks.push_back(lmi::psd_block(slack));
  prog.blocks.push_back(lmi::psd_block(r2));  // R2 >= 0
  if (use_q) {
    lmi::AffineMatrix qblock = -vars.expr(q2var);
    qblock.add_constant(-opts.qc_eps * Matrix::Identity(m, m));
    prog.blocks.push_back(lmi::psd_block(qblock));  // -Q2 - eps I >= 0
  }
  lmi::AffineMatrix cap(1, 1);
  cap.add_constant(Matrix::Constant(1, 1, 1.0));
  cap.add_term(tvar, Matrix::Constant(1, 1, -1.0));
  prog.blocks.push_back(lmi::psd_block(cap));

  // Trace bound tr(R2) + tr(-Q2) <= p + m pins the scale freedom (a strict
  // equality is infeasible for Q2 = 0 against small-Q plants).
  lmi::AffineMatrix trace_bound =
      lmi::AffineMatrix::constant(Matrix::Constant(1, 1, double(p + m))) -
      lmi::trace_of(r2) + lmi::trace_of(q2);
  prog.blocks.push_back(lmi::psd_block(trace_bound));

  auto rep = conic::solve(prog, opts.solve);
  if (rep.status == conic::SolveStatus::Infeasible)
    throw InfeasibleInput("synthesize_controller_qsr: no stabilizing QSR triple");
  if (rep.status != conic::SolveStatus::Optimal)
    throw NumericalFailure(std::string("synthesize_controller_qsr: solver ") +
                           conic::to_string(rep.status));
  const Vector& x = rep.x;
  if (x(tvar) <= 0.0)
    throw InfeasibleInput("synthesize_controller_qsr: no margin-positive triple");

  QSRTriple out(use_q ? vars.value(q2var, x) : Matrix::Zero(m, m),
                vars.value(s2var, x), vars.value(r2var, x));
  if (!stability_check(plant, out).stable)
    throw NumericalFailure(
        "synthesize_controller_qsr: synthesized triple failed the stability "
        "re-check");
  return out;
}

/// Constructive feasible feedback matrix Chat for a Hurwitz observer pair
/// (Ahat, Bhat) and a supply triple with S full column rank, R >= 0 and
/// Q < 0 or Q = 0: Chat' = P Bhat S+ with P from a Lyapunov solve.
/// Returns the matrix and its (boundary-tight) certificate.
inline std::pair<Matrix, Certificate> feasible_controller(const Matrix& ahat,
                                                          const Matrix& bhat,
                                                          const QSRTriple& qsr) {
  using numerics::Definiteness;
  using numerics::SymmetricMatrix;
  const Eigen::Index nhat = ahat.rows();
  if (bhat.rows() != nhat)
    throw std::invalid_argument("feasible_controller: Bhat row mismatch");
  if (!numerics::is_hurwitz(ahat))
    throw InfeasibleInput("feasible_controller: Ahat is not Hurwitz");

  const Matrix& s = qsr.S;  // m x p, full column rank required
  Eigen::ColPivHouseholderQR<Matrix> qr(s);
  qr.setThreshold(1e-10);
  if (qr.rank() < s.cols())
    throw std::invalid_argument("feasible_controller: S must have full column rank");
  const Matrix s_pinv =
      (s.transpose() * s).ldlt().solve(s.transpose());  // (S'S)^-1 S'

  const auto qv = numerics::classify_definiteness(SymmetricMatrix(qsr.Q));
  const auto rv = numerics::classify_definiteness(SymmetricMatrix(qsr.R));
  if (rv.min_eigenvalue < -1e-9 * std::max(1.0, qsr.R.norm()))
    throw std::invalid_argument("feasible_controller: R must be PSD");

  Matrix m_lyap;
  if (qv.classification == Definiteness::ND) {
    m_lyap = bhat * s_pinv * (-qsr.Q) * s_pinv.transpose() * bhat.transpose();
    m_lyap = 0.5 * (m_lyap + m_lyap.transpose()).eval();
    // keep M PD so Pi (hence P) is invertible even when Bhat*S+ is wide-rank-deficient
    m_lyap += 1e-8 * std::max(1.0, m_lyap.norm()) * Matrix::Identity(nhat, nhat);
  } else if (qsr.Q.norm() <= 1e-12 * std::max(1.0, qsr.S.norm())) {
    m_lyap = Matrix::Identity(nhat, nhat);
  } else {
    throw std::invalid_argument("feasible_controller: Q must be ND or zero");
  }

  const Matrix pi = numerics::solve_lyapunov(ahat, SymmetricMatrix(m_lyap)).matrix();
  Eigen::LLT<Matrix> llt(pi);
  if (llt.info() != Eigen::Success)
    throw NumericalFailure("feasible_controller: Lyapunov solution not PD");
  Matrix p = llt.solve(Matrix::Identity(nhat, nhat));
  p = 0.5 * (p + p.transpose()).eval();

  const Matrix chat = s_pinv.transpose() * bhat.transpose() * p;

  // certificate margin: normalized Eq.-2 assembly at (P, Chat)
  lmi::VariableSpace vars;
  auto pvar = vars.add_symmetric(nhat);
  auto massm = kyp::assemble_eq2(ahat, bhat, Matrix::Zero(chat.rows(), bhat.cols()),
                                    qsr, vars.expr(pvar),
                                    lmi::AffineMatrix::constant(chat));
  const double scale = std::max(1.0, massm.scale());
  Vector x = Vector::Zero(vars.size());
  vars.set(pvar, p, x);
  auto [ev, vv] =
      numerics::sym_eigen(SymmetricMatrix(massm.eval(x) / scale));
  return {chat, Certificate{p, ev(ev.size() - 1), LmiForm::Eq2}};
}

}  // namespace qsrbc::certificates
