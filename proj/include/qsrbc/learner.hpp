#pragma once

// Dissipativity-constrained behavior cloning: fit the feedback matrix Chat
// of a fixed observer pair (Ahat, Bhat) to state-estimate/action data while
// enforcing a QSR supply rate on the controller through a KYP LMI, plus the
// unconstrained ridge baseline.

#include <qsrbc/certificates.hpp>
#include <qsrbc/kyp.hpp>

#include <optional>
#include <sstream>
#include <string>

namespace qsrbc::learner {

using certificates::Certificate;
using certificates::LmiForm;
using systems::QSRTriple;

/// Column-stacked state-estimate/action pairs: xhat is nhat x N, u is m x N.
struct Dataset {
  Matrix xhat, u;

  Dataset(Matrix xhat_, Matrix u_) : xhat(std::move(xhat_)), u(std::move(u_)) {
    if (xhat.cols() != u.cols() || xhat.cols() < 1)
      throw std::invalid_argument("Dataset: need equal, nonzero sample counts");
    if (!xhat.allFinite() || !u.allFinite())
      throw std::invalid_argument("Dataset: non-finite samples");
  }

  Eigen::Index count() const { return xhat.cols(); }
  Eigen::Index nhat() const { return xhat.rows(); }
  Eigen::Index m() const { return u.rows(); }
};

enum class LmiRoute { Auto, Eq1, Eq2, Eq4 };

struct LearnerConfig {
  double eta = 0.05;
  systems::SupplyCase supply = systems::Passive{};
  LmiRoute route = LmiRoute::Auto;
  double recheck_tol = 1e-6;  // margin bound for the independent re-check
  bool omit_constraint = false;  // diagnostic: plain ridge through the SDP
  conic::SolveConfig solve = [] {
    conic::SolveConfig c;
    c.mu_min = 1e-10;
    return c;
  }();
};

struct LearnedController {
  Matrix Chat;
  Certificate certificate;
  double training_objective = 0.0;
  conic::SolveReport solver_report;
};

/// Learning SDP reported infeasible; the message carries the constructive
/// feasibility diagnosis (Hurwitz observer + full-rank S + PSD R guarantee
/// feasibility).
struct SdpInfeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnconstrainedFit {
  Matrix Chat;
  bool rank_deficient = false;  // eta = 0 with rank-deficient data
};

/// Ridge closed form: Chat = U Xhat' (Xhat Xhat' + N eta I)^-1; eta = 0 with
/// rank-deficient data falls back to the minimum-norm least-squares fit.
inline UnconstrainedFit learn_unconstrained(const Dataset& data, double eta) {
  if (eta < 0.0) throw std::invalid_argument("learn_unconstrained: eta < 0");
  const double n = static_cast<double>(data.count());
  if (eta > 0.0) {
    const Matrix g =
        data.xhat * data.xhat.transpose() +
        n * eta * Matrix::Identity(data.nhat(), data.nhat());
    return {g.llt().solve(data.xhat * data.u.transpose()).transpose(), false};
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(data.xhat.transpose());
  qr.setThreshold(1e-10);
  const bool deficient = qr.rank() < data.nhat();
  // min-norm least squares for Xhat' Chat' = U'
  Eigen::BDCSVD<Matrix> svd(data.xhat.transpose(),
                            Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.solve(data.u.transpose()).transpose(), deficient};
}

namespace detail {

inline std::string feasibility_diagnosis(const Matrix& ahat, const QSRTriple& qsr) {
  using numerics::SymmetricMatrix;
  std::ostringstream os;
  const bool hurwitz = numerics::is_hurwitz(ahat);
  Eigen::ColPivHouseholderQR<Matrix> qr(qsr.S);
  qr.setThreshold(1e-10);
  const bool s_rank = qr.rank() == qsr.S.cols();
  const auto rv = numerics::classify_definiteness(SymmetricMatrix(qsr.R));
  const bool r_psd = rv.min_eigenvalue >= -1e-9 * std::max(1.0, qsr.R.norm());
  os << "learning SDP infeasible; constructive feasibility requires a Hurwitz "
        "observer, full-column-rank S and R >= 0 with Q <= 0. Diagnosis: "
     << "Ahat Hurwitz: " << (hurwitz ? "yes" : "NO")
     << "; S full rank: " << (s_rank ? "yes" : "NO")
     << "; R PSD: " << (r_psd ? "yes" : "NO");
  return os.str();
}

struct Splitting {
  Matrix v_pos;     // eigenvectors of R with positive eigenvalues
  Vector lam_pos;   // the eigenvalues
  Matrix v_null;    // (near-)null eigenvectors
};

inline Splitting split_psd(const Matrix& r, const std::string& who) {
  using numerics::SymmetricMatrix;
  auto [ev, v] = numerics::sym_eigen(SymmetricMatrix(r));
  const double tol = 1e-9 * std::max(1.0, r.norm());
  if (ev.size() > 0 && ev(0) < -tol)
    throw SdpInfeasible(who + ": R has a negative eigenvalue; no feasible LMI");
  Splitting s;
  std::vector<int> pos, nul;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    (ev(i) > tol ? pos : nul).push_back(static_cast<int>(i));
  s.v_pos.resize(r.rows(), pos.size());
  s.lam_pos.resize(pos.size());
  for (size_t i = 0; i < pos.size(); ++i) {
    s.v_pos.col(i) = v.col(pos[i]);
    s.lam_pos(i) = ev(pos[i]);
  }
  s.v_null.resize(r.rows(), nul.size());
  for (size_t i = 0; i < nul.size(); ++i) s.v_null.col(i) = v.col(nul[i]);
  return s;
}

}  // namespace detail

/// Solve the dissipativity-constrained cloning problem
///   min (1/N) sum ||Chat xhat_k - u_k||^2 + eta tr(Chat Chat')
///   s.t. (Ahat, Bhat, Chat, 0) satisfies the selected KYP LMI with P > 0.
/// Singular parts of the constant (2,2) block are handled exactly by
/// eliminating the induced linear equalities, so boundary supply rates
/// (passivity: R = 0) solve without tolerance games.
inline LearnedController learn_constrained(const Matrix& ahat, const Matrix& bhat,
                                           const Dataset& data,
                                           const LearnerConfig& cfg) {
  using numerics::Definiteness;
  using numerics::SymmetricMatrix;

  const Eigen::Index nhat = ahat.rows();
  const Eigen::Index p = bhat.cols();  // controller input dimension
  const Eigen::Index m = data.m();     // controller output dimension
  if (ahat.cols() != nhat || bhat.rows() != nhat || data.nhat() != nhat)
    throw std::invalid_argument("learn_constrained: dimension mismatch");

  const QSRTriple qsr = systems::case_to_qsr(cfg.supply, m, p);

  // route resolution
  LmiRoute route = cfg.route;
  const auto qv = numerics::classify_definiteness(SymmetricMatrix(qsr.Q));
  const bool q_zero = qsr.Q.norm() <= 1e-12 * std::max(1.0, qsr.S.norm());
  if (route == LmiRoute::Auto)
    route = qv.classification == Definiteness::ND ? LmiRoute::Eq4 : LmiRoute::Eq2;
  if (route == LmiRoute::Eq4 && qv.classification != Definiteness::ND)
    throw std::invalid_argument("learn_constrained: Eq4 route requires Q < 0");
  if ((route == LmiRoute::Eq2 || route == LmiRoute::Eq1) && !q_zero)
    throw std::invalid_argument(
        "learn_constrained: Eq2/Eq1 learning requires Q = 0 (use Eq4 for Q < 0)");
  if (route == LmiRoute::Eq1 &&
      !(q_zero && (qsr.S - 0.5 * Matrix::Identity(m, p)).norm() <= 1e-12 &&
        qsr.R.norm() <= 1e-12))
    throw std::invalid_argument("learn_constrained: Eq1 route is the passivity LMI");

  // data moments
  const double n = static_cast<double>(data.count());
  Matrix g = data.xhat * data.xhat.transpose() / n +
             cfg.eta * Matrix::Identity(nhat, nhat);
  {
    auto gv = numerics::classify_definiteness(SymmetricMatrix(g));
    if (gv.min_eigenvalue <= 1e-12 * std::max(1.0, gv.max_eigenvalue))
      g += 1e-10 * std::max(1.0, gv.max_eigenvalue) *
           Matrix::Identity(nhat, nhat);
  }
  auto [gev, gvec] = numerics::sym_eigen(SymmetricMatrix(g));
  const Matrix g_half =
      gvec * gev.cwiseMax(0.0).cwiseSqrt().asDiagonal() * gvec.transpose();
  const Matrix h = data.xhat * data.u.transpose() / n;  // nhat x m
  const double c0 = data.u.squaredNorm() / n;

  // variables
  lmi::VariableSpace vars;
  auto pvar = vars.add_symmetric(nhat);
  auto cvar = vars.add_matrix(m, nhat);
  auto wvar = vars.add_symmetric(m);
  const int svar = vars.add_scalar();
  auto pexpr = vars.expr(pvar);
  auto cexpr = vars.expr(cvar);

  conic::ConicProgram prog;
  prog.num_vars = vars.size();
  prog.objective = Vector::Zero(prog.num_vars);
  prog.objective(svar) = 1.0;

  lmi::EqualitySystem eqs(prog.num_vars);
  double lmi_scale = 1.0;

  if (!cfg.omit_constraint) {
    lmi::AffineMatrix x = pexpr * ahat + (pexpr * ahat).transpose();
    lmi::AffineMatrix y = pexpr * bhat - cexpr.transpose() * qsr.S;
    if (route == LmiRoute::Eq1) y = pexpr * bhat - cexpr.transpose();

    lmi::AffineMatrix reduced(0, 0);
    if (route == LmiRoute::Eq4) {
      auto split = detail::split_psd(qsr.R, "learn_constrained");
      if (split.v_null.cols() > 0) eqs.require_zero(y * split.v_null);
      Eigen::LLT<Matrix> negq(Matrix(-qsr.Q));
      const Matrix qinv = -negq.solve(Matrix::Identity(m, m));
      auto zero = [](Eigen::Index r, Eigen::Index c) {
        return lmi::AffineMatrix::constant(Matrix::Zero(r, c));
      };
      const Eigen::Index rpos = split.v_pos.cols();
      if (rpos > 0) {
        auto ypos = y * split.v_pos;
        reduced = lmi::block_grid(
            {{x, ypos, cexpr.transpose()},
             {ypos.transpose(),
              lmi::AffineMatrix::constant(Matrix(Matrix(split.lam_pos.asDiagonal()) * -1.0)),
              zero(rpos, m)},
             {cexpr, zero(m, rpos), lmi::AffineMatrix::constant(qinv)}});
      } else {
        reduced = lmi::block_grid(
            {{x, cexpr.transpose()},
             {cexpr, lmi::AffineMatrix::constant(qinv)}});
      }
    } else {
      // Eq1 / Eq2 with Q = 0: constant (2,2) block is -R (or 0 for Eq1)
      const Matrix rblock =
          route == LmiRoute::Eq1 ? Matrix::Zero(p, p) : Matrix(qsr.R);
      auto split = detail::split_psd(rblock, "learn_constrained");
      if (split.v_null.cols() > 0) eqs.require_zero(y * split.v_null);
      const Eigen::Index rpos = split.v_pos.cols();
      if (rpos > 0) {
        auto ypos = y * split.v_pos;
        reduced = lmi::block_grid(
            {{x, ypos},
             {ypos.transpose(),
              lmi::AffineMatrix::constant(Matrix(Matrix(split.lam_pos.asDiagonal()) * -1.0))}});
      } else {
        reduced = x;
      }
    }
    lmi_scale = std::max(1.0, reduced.scale());
    prog.blocks.push_back(lmi::psd_block(-reduced.scaled(1.0 / lmi_scale)));
  }

  // epigraph block [[W, C G^1/2], [G^1/2 C', I]] >= 0
  {
    auto cg = cexpr * g_half;
    auto w = vars.expr(wvar);
    auto epi = lmi::block_grid(
        {{w, cg},
         {cg.transpose(),
          lmi::AffineMatrix::constant(Matrix::Identity(nhat, nhat))}});
    prog.blocks.push_back(lmi::psd_block(epi));
  }
  // s - tr(W) + 2 tr(C h) >= 0
  {
    lmi::AffineMatrix sexpr = vars.scalar_expr(svar) -
                              lmi::trace_of(vars.expr(wvar)) +
                              lmi::trace_of(cexpr * h).scaled(2.0);
    prog.blocks.push_back(lmi::psd_block(sexpr));
  }

  // constructive initializer (also fixes the P box)
  std::optional<std::pair<Matrix, Certificate>> init;
  if (!cfg.omit_constraint) {
    try {
      init = certificates::feasible_controller(ahat, bhat, qsr);
    } catch (const std::exception&) {
      init.reset();  // fall back to phase I; diagnosis on failure below
    }
  }
  double p_floor = 1e-9, p_cap = 1e9;
  if (init) {
    auto [pev, pv] = numerics::sym_eigen(SymmetricMatrix(init->second.P));
    p_floor = std::max(1e-12, 1e-6 * pev(0));
    p_cap = 1e6 * std::max(1.0, pev(pev.size() - 1));
  }
  if (!cfg.omit_constraint) {
    lmi::AffineMatrix pfl = pexpr;
    pfl.add_constant(-p_floor * Matrix::Identity(nhat, nhat));
    prog.blocks.push_back(lmi::psd_block(pfl));
    lmi::AffineMatrix pcap = -pexpr;
    pcap.add_constant(p_cap * Matrix::Identity(nhat, nhat));
    prog.blocks.push_back(lmi::psd_block(pcap));
  }

  // equality elimination
  Matrix basis;
  Vector xpart;
  if (!eqs.empty()) {
    std::tie(basis, xpart) = eqs.reduce();
  } else {
    basis = Matrix::Identity(prog.num_vars, prog.num_vars);
    xpart = Vector::Zero(prog.num_vars);
  }
  auto reduced_prog = conic::restrict_affine(prog, basis, xpart);

  // strictly feasible start from the constructive controller
  std::optional<Vector> z0;
  {
    Vector x0 = Vector::Zero(prog.num_vars);
    Matrix c_init = Matrix::Zero(m, nhat);
    Matrix p_init = Matrix::Identity(nhat, nhat);
    bool have_interior = cfg.omit_constraint;
    if (init) {
      c_init = init->first;
      p_init = init->second.P;
      have_interior = true;
    }
    if (have_interior) {
      vars.set(pvar, p_init, x0);
      vars.set(cvar, c_init, x0);
      const Matrix w0 = c_init * g * c_init.transpose() +
                        Matrix::Identity(m, m) * (1.0 + c_init.norm());
      vars.set(wvar, w0, x0);
      x0(svar) = w0.trace() - 2.0 * (c_init * h).trace() + 1.0 + c0;
      if (!eqs.empty()) {
        // project onto the equality manifold (exact for the initializer)
        const Vector z = (basis.transpose() * basis)
                             .ldlt()
                             .solve(basis.transpose() * (x0 - xpart));
        if ((basis * z + xpart - x0).norm() <= 1e-6 * std::max(1.0, x0.norm()))
          z0 = z;
      } else {
        z0 = x0;
      }
    }
  }

  auto rep = conic::solve(reduced_prog, cfg.solve, z0 ? &*z0 : nullptr);
  if (rep.status == conic::SolveStatus::Infeasible)
    throw SdpInfeasible(detail::feasibility_diagnosis(ahat, qsr));
  if (rep.status != conic::SolveStatus::Optimal)
    throw NumericalFailure(std::string("learn_constrained: solver ") +
                           conic::to_string(rep.status) +
                           (rep.message.empty() ? "" : ": " + rep.message));

  const Vector x = basis * rep.x + xpart;
  const Matrix chat = vars.value(cvar, x);
  const Matrix pmat = vars.value(pvar, x);

  // independent re-check on the full (unreduced) assembly
  double margin = 0.0;
  LmiForm form = LmiForm::Eq2;
  if (!cfg.omit_constraint) {
    lmi::VariableSpace vcheck;
    auto pv = vcheck.add_symmetric(nhat);
    lmi::AffineMatrix full(0, 0);
    const Matrix dzero = Matrix::Zero(m, p);
    const auto cconst = lmi::AffineMatrix::constant(chat);
    switch (route) {
      case LmiRoute::Eq1:
        full = kyp::assemble_eq1(ahat, bhat, dzero, vcheck.expr(pv), cconst);
        form = LmiForm::Eq1;
        break;
      case LmiRoute::Eq4:
        full = kyp::assemble_eq4(ahat, bhat, qsr, vcheck.expr(pv), cconst);
        form = LmiForm::Eq4;
        break;
      default:
        full = kyp::assemble_eq2(ahat, bhat, dzero, qsr, vcheck.expr(pv), cconst);
        form = LmiForm::Eq2;
        break;
    }
    const double scale = std::max(1.0, full.scale());
    Vector xc = Vector::Zero(vcheck.size());
    vcheck.set(pv, pmat, xc);
    auto [ev, vv] = numerics::sym_eigen(SymmetricMatrix(full.eval(xc) / scale));
    margin = ev(ev.size() - 1);
    if (margin > cfg.recheck_tol)
      throw NumericalFailure(
          "learn_constrained: returned controller failed the LMI re-check "
          "(margin " +
          std::to_string(margin) + ")");
  }

  LearnedController out;
  out.Chat = chat;
  out.certificate = Certificate{pmat, margin, form};
  out.training_objective =
      (chat * data.xhat - data.u).squaredNorm() / n +
      cfg.eta * chat.squaredNorm();
  out.solver_report = rep;
  return out;
}

}  // namespace qsrbc::learner
