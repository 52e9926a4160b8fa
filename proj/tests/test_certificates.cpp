#include <catch2/catch_amalgamated.hpp>

#include <qsrbc/certificates.hpp>
#include <qsrbc/chain.hpp>

#include <random>

using namespace qsrbc;
using namespace qsrbc::systems;
using namespace qsrbc::certificates;

namespace {

Matrix randn(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = dist(rng);
  return m;
}

Matrix random_hurwitz(Eigen::Index n, std::mt19937_64& rng) {
  Matrix m = randn(n, n, rng);
  Eigen::EigenSolver<Matrix> es(m, false);
  return m - (es.eigenvalues().real().maxCoeff() + 0.5) * Matrix::Identity(n, n);
}

const StateSpace kScalarLag = StateSpace::siso(-1, 1, 1, 0);

}  // namespace

TEST_CASE("verify_passive") {
  SECTION("scalar lag is passive; P = 1 certifies with matrix diag(-2, 0)") {
    auto res = verify_passive(kScalarLag);
    REQUIRE(res.feasible);
    REQUIRE(res.certificate.has_value());
    const Matrix p = res.certificate->P;
    REQUIRE(p(0, 0) > 0.0);
    Matrix assembled(2, 2);
    assembled << -2.0 * p(0, 0), p(0, 0) - 1.0, p(0, 0) - 1.0, 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(assembled, Eigen::EigenvaluesOnly);
    REQUIRE(es.eigenvalues().maxCoeff() <= 1e-7);
    REQUIRE(res.certificate->lmi_margin <= 1e-8);
  }
  SECTION("sign-flipped lag is not passive") {
    auto res = verify_passive(StateSpace::siso(-1, 1, -1, 0));
    REQUIRE_FALSE(res.feasible);
    REQUIRE(res.solver_status == conic::SolveStatus::Optimal);
    REQUIRE(res.solver_margin < 0.0);
  }
  SECTION("random damped chains with collocated velocity outputs are passive") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 5; ++trial) {
      auto [nom, tru] = sample_chain(rng, 4, {0.001, 10.0}, {0.001, 1.0}, 0.5);
      auto sys = build_chain(tru, {0, 1, 2, 3});
      auto res = verify_passive(sys);
      REQUIRE(res.feasible);
      REQUIRE(res.certificate->lmi_margin <= 1e-8);
    }
  }
}

TEST_CASE("verify_qsr") {
  SECTION("passive supply reduces to the passivity result") {
    auto res = verify_qsr(kScalarLag, case_to_qsr(Passive{}, 1, 1));
    REQUIRE(res.feasible);
  }
  SECTION("gain bound 1 holds for the scalar lag (H-inf norm is exactly 1)") {
    auto res = verify_qsr(kScalarLag, case_to_qsr(BoundedGain{1.0}, 1, 1));
    REQUIRE(res.feasible);
  }
  SECTION("gain bound 0.5 fails for the scalar lag") {
    auto res = verify_qsr(kScalarLag, case_to_qsr(BoundedGain{0.5}, 1, 1));
    REQUIRE_FALSE(res.feasible);
  }
  SECTION("cone[-2,-1] holds for the lag with feedthrough -1") {
    // G(s) = -1/(s+1) - 1 maps [0, inf) onto the segment [-2, -1].
    auto res = verify_qsr(StateSpace::siso(-1, 1, -1, -1),
                          QSRTriple::scalar(-1.0, -1.5, -2.0));
    REQUIRE(res.feasible);
  }
}

TEST_CASE("verify_qsr_schur agrees with verify_qsr") {
  SECTION("bounded gain 1 on the lag") {
    auto res = verify_qsr_schur(kScalarLag, case_to_qsr(BoundedGain{1.0}, 1, 1));
    REQUIRE(res.feasible);
    REQUIRE(res.certificate->which == LmiForm::Eq4);
  }
  SECTION("bounded gain 0.5 infeasible on both routes") {
    auto r2 = verify_qsr(kScalarLag, case_to_qsr(BoundedGain{0.5}, 1, 1));
    auto r4 = verify_qsr_schur(kScalarLag, case_to_qsr(BoundedGain{0.5}, 1, 1));
    REQUIRE_FALSE(r2.feasible);
    REQUIRE_FALSE(r4.feasible);
  }
  SECTION("Q = 0 rejected") {
    REQUIRE_THROWS_AS(
        verify_qsr_schur(kScalarLag, QSRTriple::scalar(0.0, 0.5, 0.0)),
        std::invalid_argument);
  }
  SECTION("agreement on random instances (Q < 0)") {
    std::mt19937_64 rng(2718);
    int agreements = 0;
    for (int trial = 0; trial < 60; ++trial) {
      const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 6);
      const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng() % 2);
      const Eigen::Index p = 1 + static_cast<Eigen::Index>(rng() % 2);
      StateSpace sys(random_hurwitz(n, rng), randn(n, m, rng), randn(p, n, rng),
                     Matrix::Zero(p, m));
      Matrix qroot = randn(p, p, rng);
      Matrix rroot = randn(m, m, rng);
      QSRTriple qsr(-(qroot * qroot.transpose()) - 0.1 * Matrix::Identity(p, p),
                    randn(p, m, rng),
                    rroot * rroot.transpose() + 0.5 * Matrix::Identity(m, m));
      auto r2 = verify_qsr(sys, qsr);
      auto r4 = verify_qsr_schur(sys, qsr);
      REQUIRE(r2.feasible == r4.feasible);
      ++agreements;
    }
    REQUIRE(agreements == 60);
  }
}

TEST_CASE("stability_check") {
  SECTION("small gains 0.5 x 0.5 stable with margin about -3/4") {
    auto v = stability_check(QSRTriple::scalar(-1, 0, 0.25),
                             QSRTriple::scalar(-1, 0, 0.25));
    REQUIRE(v.stable);
    REQUIRE(v.margin == Catch::Approx(-0.75).margin(1e-6));
    REQUIRE(v.alpha == Catch::Approx(1.0).epsilon(0.05));
  }
  SECTION("unit gains sit on the stability boundary") {
    auto v = stability_check(QSRTriple::scalar(-1, 0, 1.0),
                             QSRTriple::scalar(-1, 0, 1.0));
    REQUIRE_FALSE(v.stable);
  }
  SECTION("small-gain rule recovered on a gain grid") {
    for (int i = 1; i <= 20; ++i)
      for (int j = 1; j <= 20; ++j) {
        const double g1 = 0.1 * i, g2 = 0.1 * j;
        if (std::abs(g1 * g2 - 1.0) < 1e-3) continue;
        auto v = stability_check(QSRTriple::scalar(-1, 0, g1 * g1),
                                 QSRTriple::scalar(-1, 0, g2 * g2));
        REQUIRE(v.stable == (g1 * g2 < 1.0));
      }
  }
  SECTION("max eigenvalue is unimodal in log alpha (sampled)") {
    const QSRTriple q1 = QSRTriple::scalar(-1.0, -1.5, -2.0);
    const QSRTriple q2 = QSRTriple::scalar(-0.52, -1.5, 0.45);
    int sign_changes = 0;
    double prev_slope = 0.0;
    double prev = 0.0;
    bool first = true;
    for (int k = 0; k <= 200; ++k) {
      const double u = -6.0 + 12.0 * k / 200.0;
      Eigen::SelfAdjointEigenSolver<Matrix> es(
          stability_matrix(q1, q2, std::pow(10.0, u)), Eigen::EigenvaluesOnly);
      const double val = es.eigenvalues().maxCoeff();
      if (!first) {
        const double slope = val - prev;
        if (prev_slope < -1e-12 && slope > 1e-12) ++sign_changes;
        if (std::abs(slope) > 1e-12) prev_slope = slope;
      }
      prev = val;
      first = false;
    }
    REQUIRE(sign_changes <= 1);
  }
}

TEST_CASE("theorem-1 fixture from the network example") {
  Matrix qbar(2, 2), sbar(2, 2), rbar(2, 2);
  qbar << -1, 1, 1, -2;
  sbar << -1.5, 0, 2, 0.5;
  rbar << -2, 0, 0, 0;
  Matrix qc(2, 2), sc(2, 2), rc(2, 2);
  qc << -0.52, 0, 0, -1.04;
  sc << -1.5, 2, 0, 0.5;
  rc << 0.45, -0.48, -0.48, 0.92;
  auto v = stability_check(QSRTriple(qbar, sbar, rbar), QSRTriple(qc, sc, rc));
  REQUIRE(v.stable);
  REQUIRE(v.margin < 0.0);
  REQUIRE(v.alpha > 0.0);
}

TEST_CASE("synthesize_controller_qsr") {
  SECTION("exactly passive plant admits no strict triple with R2 >= 0") {
    // (1,1) block of the stability matrix is alpha*R2 >= 0, never ND.
    auto plant = case_to_qsr(Passive{}, 1, 1);
    REQUIRE_THROWS_AS(synthesize_controller_qsr(plant), InfeasibleInput);
  }
  SECTION("output-strictly-passive plant") {
    auto plant = GeneralQsr{QSRTriple::scalar(-0.1, 0.5, 0.0)};
    auto qsr = case_to_qsr(plant, 1, 1);
    auto ctrl = synthesize_controller_qsr(qsr);
    REQUIRE(stability_check(qsr, ctrl).stable);
    using numerics::SymmetricMatrix;
    REQUIRE(numerics::classify_definiteness(SymmetricMatrix(ctrl.R)).min_eigenvalue >=
            -1e-9);
  }
  SECTION("gain-bounded plant") {
    auto plant = case_to_qsr(BoundedGain{0.5}, 1, 1);
    auto ctrl = synthesize_controller_qsr(plant);
    REQUIRE(stability_check(plant, ctrl).stable);
  }
  SECTION("network example plant admits a synthesized triple") {
    Matrix qbar(2, 2), sbar(2, 2), rbar(2, 2);
    qbar << -1, 1, 1, -2;
    sbar << -1.5, 0, 2, 0.5;
    rbar << -2, 0, 0, 0;
    QSRTriple plant(qbar, sbar, rbar);
    auto ctrl = synthesize_controller_qsr(plant);
    REQUIRE(stability_check(plant, ctrl).stable);
  }
  SECTION("Q2 = 0 mode on a plant with R < 0") {
    auto plant = QSRTriple::scalar(-1.0, -1.5, -2.0);  // cone [-2,-1]
    SynthesisOptions opts;
    opts.qc_mode = ControllerQcMode::Zero;
    auto ctrl = synthesize_controller_qsr(plant, opts);
    REQUIRE(ctrl.Q.isZero(0));
    REQUIRE(stability_check(plant, ctrl).stable);
  }
}

TEST_CASE("feasible_controller") {
  SECTION("passive case fixture: Chat = 2 P") {
    auto [chat, cert] = feasible_controller(-Matrix::Identity(2, 2),
                                            Matrix::Identity(2, 2),
                                            case_to_qsr(Passive{}, 2, 2));
    REQUIRE((chat - 2.0 * cert.P).norm() < 1e-10);
    REQUIRE(cert.lmi_margin <= 1e-8);
  }
  SECTION("scalar Q < 0 branch verifies") {
    auto qsr = QSRTriple::scalar(-1.0, 0.5, 1.0);
    auto [chat, cert] = feasible_controller(Matrix::Constant(1, 1, -1.0),
                                            Matrix::Constant(1, 1, 1.0), qsr);
    auto res = verify_qsr(
        StateSpace(Matrix::Constant(1, 1, -1.0), Matrix::Constant(1, 1, 1.0),
                   chat, Matrix::Zero(1, 1)),
        qsr);
    REQUIRE(res.feasible);
  }
  SECTION("unstable observer rejected") {
    REQUIRE_THROWS_AS(
        feasible_controller(Matrix::Constant(1, 1, 1.0),
                            Matrix::Constant(1, 1, 1.0),
                            QSRTriple::scalar(-1.0, 0.5, 1.0)),
        InfeasibleInput);
  }
  SECTION("rank-deficient S rejected") {
    Matrix s = Matrix::Zero(2, 2);
    REQUIRE_THROWS_AS(
        feasible_controller(-Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                            QSRTriple(Matrix::Zero(2, 2), s, Matrix::Zero(2, 2))),
        std::invalid_argument);
  }
  SECTION("random draws verify on both branches") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 40; ++trial) {
      const Eigen::Index nhat = 1 + static_cast<Eigen::Index>(rng() % 5);
      const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng() % 2);
      const Matrix ahat = random_hurwitz(nhat, rng);
      const Matrix bhat = randn(nhat, m, rng);
      const bool neg_q = (trial % 2) == 0;
      Matrix qroot = randn(m, m, rng);
      Matrix rroot = randn(m, m, rng);
      Matrix s = randn(m, m, rng);
      while (std::abs(s.determinant()) < 1e-3) s = randn(m, m, rng);
      QSRTriple qsr(neg_q ? Matrix(-(qroot * qroot.transpose()) -
                                   0.2 * Matrix::Identity(m, m))
                          : Matrix(Matrix::Zero(m, m)),
                    s, rroot * rroot.transpose());
      auto [chat, cert] = feasible_controller(ahat, bhat, qsr);
      StateSpace ctrl(ahat, bhat, chat, Matrix::Zero(m, m));
      auto res = verify_qsr(ctrl, qsr);
      REQUIRE(res.feasible);
      // independent reassembly with the returned P
      REQUIRE(res.certificate->lmi_margin <= 1e-8);
    }
  }
}
