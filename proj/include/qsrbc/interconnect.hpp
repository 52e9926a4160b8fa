#pragma once

// Subsystem interconnections: u_i = r_i - sum_j H_ij y_j. Network QSR
// composition and LTI network reduction.

#include <qsrbc/state_space.hpp>
#include <qsrbc/supply.hpp>

#include <numeric>
#include <vector>

namespace qsrbc::systems {

/// Block interconnection u = r - H y with per-subsystem (input, output)
/// dimensions fixing the partition of H.
struct Interconnection {
  Matrix H;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> block_dims;  // (m_i, p_i)

  Interconnection(Matrix h, std::vector<std::pair<Eigen::Index, Eigen::Index>> dims)
      : H(std::move(h)), block_dims(std::move(dims)) {
    Eigen::Index mtot = 0, ptot = 0;
    for (const auto& [m, p] : block_dims) {
      mtot += m;
      ptot += p;
    }
    if (H.rows() != mtot || H.cols() != ptot)
      throw std::invalid_argument("Interconnection: H does not partition conformably");
  }
};

/// Plant/controller negative feedback u1 = r1 - y2, u2 = r2 + y1:
/// H = [[0, I], [-I, 0]] in the u = r - H y convention.
inline Interconnection negative_feedback(
    std::pair<Eigen::Index, Eigen::Index> plant_dims,
    std::pair<Eigen::Index, Eigen::Index> controller_dims) {
  const auto [m1, p1] = plant_dims;
  const auto [m2, p2] = controller_dims;
  if (m1 != p2 || m2 != p1)
    throw std::invalid_argument(
        "negative_feedback: plant output dim must equal controller input dim "
        "and vice versa");
  Matrix h = Matrix::Zero(m1 + m2, p1 + p2);
  h.topRightCorner(m1, p2) = Matrix::Identity(m1, p2);
  h.bottomLeftCorner(m2, p1) = -Matrix::Identity(m2, p1);
  return Interconnection(std::move(h), {{m1, p1}, {m2, p2}});
}

/// Network QSR composition: with Q, S, R the block-diagonal assemblies of
/// the subsystem triples,
///   Qbar = Q + H'RH - SH - H'S',  Sbar = S - H'R,  Rbar = R.
inline QSRTriple network_qsr(const std::vector<QSRTriple>& subsystems,
                             const Interconnection& ic) {
  if (subsystems.size() != ic.block_dims.size())
    throw std::invalid_argument("network_qsr: subsystem count mismatch");
  Eigen::Index mtot = 0, ptot = 0;
  for (size_t i = 0; i < subsystems.size(); ++i) {
    const auto& [m, p] = ic.block_dims[i];
    if (subsystems[i].input_dim() != m || subsystems[i].output_dim() != p)
      throw std::invalid_argument("network_qsr: block dimensions nonconforming");
    mtot += m;
    ptot += p;
  }
  Matrix q = Matrix::Zero(ptot, ptot);
  Matrix s = Matrix::Zero(ptot, mtot);
  Matrix r = Matrix::Zero(mtot, mtot);
  Eigen::Index mo = 0, po = 0;
  for (const auto& sub : subsystems) {
    const Eigen::Index m = sub.input_dim(), p = sub.output_dim();
    q.block(po, po, p, p) = sub.Q;
    s.block(po, mo, p, m) = sub.S;
    r.block(mo, mo, m, m) = sub.R;
    mo += m;
    po += p;
  }
  const Matrix& h = ic.H;
  Matrix qbar = q + h.transpose() * r * h - s * h - h.transpose() * s.transpose();
  Matrix sbar = s - h.transpose() * r;
  qbar = 0.5 * (qbar + qbar.transpose()).eval();
  return QSRTriple(std::move(qbar), std::move(sbar), r);
}

/// Reduce an LTI network u = r - H y to a single quadruple from r to y.
/// Well-posedness requires I + D H invertible (D the block-diagonal
/// feedthrough).
inline StateSpace interconnect_lti(const std::vector<StateSpace>& subsystems,
                                   const Interconnection& ic) {
  if (subsystems.size() != ic.block_dims.size())
    throw std::invalid_argument("interconnect_lti: subsystem count mismatch");
  Eigen::Index ntot = 0, mtot = 0, ptot = 0;
  for (size_t i = 0; i < subsystems.size(); ++i) {
    const auto& [m, p] = ic.block_dims[i];
    if (subsystems[i].m() != m || subsystems[i].p() != p)
      throw std::invalid_argument("interconnect_lti: block dimensions nonconforming");
    ntot += subsystems[i].n();
    mtot += m;
    ptot += p;
  }
  Matrix a = Matrix::Zero(ntot, ntot), b = Matrix::Zero(ntot, mtot);
  Matrix c = Matrix::Zero(ptot, ntot), d = Matrix::Zero(ptot, mtot);
  Eigen::Index no = 0, mo = 0, po = 0;
  for (const auto& sub : subsystems) {
    a.block(no, no, sub.n(), sub.n()) = sub.A();
    b.block(no, mo, sub.n(), sub.m()) = sub.B();
    c.block(po, no, sub.p(), sub.n()) = sub.C();
    d.block(po, mo, sub.p(), sub.m()) = sub.D();
    no += sub.n();
    mo += sub.m();
    po += sub.p();
  }
  // y = Cx + D(r - Hy)  =>  (I + DH) y = Cx + Dr.
  const Matrix& h = ic.H;
  Matrix w = Matrix::Identity(ptot, ptot) + d * h;
  Eigen::FullPivLU<Matrix> lu(w);
  if (!lu.isInvertible())
    throw InfeasibleInput("interconnect_lti: network not well posed (I + DH singular)");
  const Matrix cy = lu.solve(c);   // (I+DH)^-1 C
  const Matrix dy = lu.solve(d);   // (I+DH)^-1 D
  Matrix an = a - b * h * cy;
  Matrix bn = b * (Matrix::Identity(mtot, mtot) - h * dy);
  return StateSpace(std::move(an), std::move(bn), cy, dy);
}

}  // namespace qsrbc::systems
