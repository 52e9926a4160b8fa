#include <catch2/catch_amalgamated.hpp>

#include <qsrbc/conic.hpp>

#include <random>
#include <sstream>

using namespace qsrbc;
using namespace qsrbc::conic;

namespace {

Matrix randn_sym(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = dist(rng);
  return 0.5 * (m + m.transpose()).eval();
}

// min t s.t. t I - M >= 0, whose optimum is lambda_max(M).
ConicProgram lambda_max_program(const Matrix& m) {
  ConicProgram prog;
  prog.num_vars = 1;
  prog.objective = Vector::Ones(1);
  Block b;
  b.constant = -m;
  b.terms.push_back({0, Matrix::Identity(m.rows(), m.rows())});
  prog.blocks.push_back(b);
  return prog;
}

}  // namespace

TEST_CASE("solve: lambda_max fixtures") {
  SECTION("diag(1,3)") {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = 1;
    m(1, 1) = 3;
    auto rep = solve(lambda_max_program(m));
    REQUIRE(rep.status == SolveStatus::Optimal);
    REQUIRE(rep.objective_value == Catch::Approx(3.0).margin(1e-6));
  }
  SECTION("scalar zero") {
    auto rep = solve(lambda_max_program(Matrix::Zero(1, 1)));
    REQUIRE(rep.status == SolveStatus::Optimal);
    REQUIRE(rep.objective_value == Catch::Approx(0.0).margin(1e-6));
  }
  SECTION("maximize margin of the scalar-lag passivity matrix") {
    // Eq.-1 matrix for the scalar lag is M = diag(-2, 0); its margin
    // max{t : M + tI <= 0} = -lambda_max(M) = 0.
    ConicProgram prog;
    prog.num_vars = 1;
    prog.objective = -Vector::Ones(1);
    Block b;
    b.constant = Matrix::Zero(2, 2);
    b.constant(0, 0) = 2.0;  // -M
    b.terms.push_back({0, -Matrix::Identity(2, 2)});
    prog.blocks.push_back(b);
    auto rep = solve(prog);
    REQUIRE(rep.status == SolveStatus::Optimal);
    REQUIRE(rep.x(0) == Catch::Approx(0.0).margin(1e-6));
  }
}

TEST_CASE("solve: oracle property against direct eigenvalue computation") {
  std::mt19937_64 rng(314);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 8);
    const Matrix m = randn_sym(n, rng);
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    const double lmax = es.eigenvalues().maxCoeff();
    auto rep = solve(lambda_max_program(m));
    REQUIRE(rep.status == SolveStatus::Optimal);
    REQUIRE(std::abs(rep.objective_value - lmax) <=
            1e-6 * std::max(1.0, std::abs(lmax)));
  }
}

TEST_CASE("solve: deterministic across reruns") {
  std::mt19937_64 rng(5150);
  const Matrix m = randn_sym(5, rng);
  auto r1 = solve(lambda_max_program(m));
  auto r2 = solve(lambda_max_program(m));
  REQUIRE(r1.status == r2.status);
  REQUIRE(r1.iterations == r2.iterations);
  REQUIRE(r1.x == r2.x);  // bitwise
}

TEST_CASE("feasibility: fixtures") {
  SECTION("identity block is feasible with margin 1") {
    ConicProgram prog;
    prog.num_vars = 1;
    prog.objective = Vector::Zero(1);
    Block b;
    b.constant = Matrix::Identity(2, 2);
    b.terms.push_back({0, Matrix::Zero(2, 2)});
    prog.blocks.push_back(b);
    auto rep = feasibility(prog);
    REQUIRE(rep.status == SolveStatus::Optimal);
    REQUIRE(rep.objective_value == Catch::Approx(1.0).margin(1e-5));
  }
  SECTION("constant negative block is infeasible") {
    ConicProgram prog;
    prog.num_vars = 0;
    prog.objective = Vector::Zero(0);
    Block b;
    b.constant = -Matrix::Identity(2, 2);
    prog.blocks.push_back(b);
    auto rep = feasibility(prog);
    REQUIRE(rep.status == SolveStatus::Infeasible);
    REQUIRE(rep.objective_value < 0.0);
  }
}

TEST_CASE("solve: infeasible program detected by phase I") {
  ConicProgram prog;
  prog.num_vars = 1;
  prog.objective = Vector::Ones(1);
  // x >= 1 and -x >= 0 simultaneously
  Block b1, b2;
  b1.constant = Matrix::Constant(1, 1, -1.0);
  b1.terms.push_back({0, Matrix::Constant(1, 1, 1.0)});
  b2.constant = Matrix::Zero(1, 1);
  b2.terms.push_back({0, Matrix::Constant(1, 1, -1.0)});
  prog.blocks = {b1, b2};
  auto rep = solve(prog);
  REQUIRE(rep.status == SolveStatus::Infeasible);
}

TEST_CASE("solve: returned Optimal points re-verified PSD per block") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix m = randn_sym(4, rng);
    auto rep = solve(lambda_max_program(m));
    REQUIRE(rep.status == SolveStatus::Optimal);
    const Matrix slack = rep.x(0) * Matrix::Identity(4, 4) - m;
    Eigen::SelfAdjointEigenSolver<Matrix> es(slack, Eigen::EigenvaluesOnly);
    REQUIRE(es.eigenvalues().minCoeff() >= -1e-8 * std::max(1.0, m.norm()));
  }
}

TEST_CASE("restrict_affine: equality elimination preserves the optimum") {
  // min x0 + x1 s.t. diag(x0, x1) - I >= 0 and equality x0 = x1,
  // i.e. x = N z with N = [1;1]: optimum z = 1, x = (1,1).
  ConicProgram prog;
  prog.num_vars = 2;
  prog.objective = Vector::Ones(2);
  Block b;
  b.constant = -Matrix::Identity(2, 2);
  Matrix e0 = Matrix::Zero(2, 2), e1 = Matrix::Zero(2, 2);
  e0(0, 0) = 1;
  e1(1, 1) = 1;
  b.terms.push_back({0, e0});
  b.terms.push_back({1, e1});
  prog.blocks.push_back(b);
  Matrix basis(2, 1);
  basis << 1, 1;
  auto reduced = restrict_affine(prog, basis, Vector::Zero(2));
  REQUIRE(reduced.num_vars == 1);
  auto rep = solve(reduced);
  REQUIRE(rep.status == SolveStatus::Optimal);
  REQUIRE(rep.x(0) == Catch::Approx(1.0).margin(1e-5));
}

TEST_CASE("dump_program emits the documented sparse format") {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 1;
  m(1, 1) = 3;
  std::ostringstream os;
  dump_program(lambda_max_program(m), os);
  const std::string text = os.str();
  REQUIRE(text.find("conic-program vars 1 blocks 1") != std::string::npos);
  REQUIRE(text.find("block 0 order 2") != std::string::npos);
  REQUIRE(text.find("0 -1 0 0 -1") != std::string::npos);  // constant entry
  REQUIRE(text.find("0 0 0 0 1") != std::string::npos);    // variable entry
}
