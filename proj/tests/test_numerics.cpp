#include <catch2/catch_amalgamated.hpp>

#include <qsrbc/numerics.hpp>

#include <cmath>
#include <random>

using namespace qsrbc;
using namespace qsrbc::numerics;

namespace {

// Random matrix with N(0,1) entries.
Matrix randn(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = dist(rng);
  return m;
}

// Shift a random matrix left of its spectrum so it is Hurwitz by a margin.
Matrix random_hurwitz(Eigen::Index n, std::mt19937_64& rng) {
  Matrix m = randn(n, n, rng);
  Eigen::EigenSolver<Matrix> es(m, false);
  const double shift = es.eigenvalues().real().maxCoeff() + 0.5;
  return m - shift * Matrix::Identity(n, n);
}

}  // namespace

TEST_CASE("sym_eigen: fixtures") {
  SECTION("diagonal") {
    Matrix m(2, 2);
    m << 3, 0, 0, 1;
    auto [evals, evecs] = sym_eigen(SymmetricMatrix(m));
    REQUIRE(evals(0) == Catch::Approx(1.0));
    REQUIRE(evals(1) == Catch::Approx(3.0));
  }
  SECTION("zero matrix") {
    auto [evals, evecs] = sym_eigen(SymmetricMatrix(Matrix::Zero(2, 2)));
    REQUIRE(evals.cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("off-diagonal 2x2") {
    Matrix m(2, 2);
    m << 0, 1, 1, 0;
    auto [evals, evecs] = sym_eigen(SymmetricMatrix(m));
    REQUIRE(evals(0) == Catch::Approx(-1.0));
    REQUIRE(evals(1) == Catch::Approx(1.0));
  }
}

TEST_CASE("sym_eigen: reconstruction and ordering on random symmetric matrices") {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng() % 9);
    SymmetricMatrix m(randn(n, n, rng));
    auto [evals, evecs] = sym_eigen(m);
    const Matrix recon =
        evecs * evals.asDiagonal() * evecs.transpose();
    REQUIRE((recon - m.matrix()).norm() <=
            1e-10 * std::max(1.0, m.matrix().norm()));
    REQUIRE((evecs.transpose() * evecs - Matrix::Identity(n, n)).norm() < 1e-12);
    for (Eigen::Index i = 0; i + 1 < n; ++i) REQUIRE(evals(i) <= evals(i + 1));
  }
}

TEST_CASE("sym_eigen matches closed-form characteristic roots, orders 2-3") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    // order 2: roots of l^2 - tr l + det
    SymmetricMatrix m2(randn(2, 2, rng));
    const Matrix& a = m2.matrix();
    const double tr = a.trace(), det = a.determinant();
    const double disc = std::sqrt(tr * tr / 4.0 - det);
    auto [evals, evecs] = sym_eigen(m2);
    REQUIRE(evals(0) == Catch::Approx(tr / 2.0 - disc).margin(1e-10));
    REQUIRE(evals(1) == Catch::Approx(tr / 2.0 + disc).margin(1e-10));

    // order 3: check each computed eigenvalue solves det(M - l I) = 0
    SymmetricMatrix m3(randn(3, 3, rng));
    auto [e3, v3] = sym_eigen(m3);
    for (int i = 0; i < 3; ++i) {
      const Matrix shifted =
          m3.matrix() - e3(i) * Matrix::Identity(3, 3);
      REQUIRE(std::abs(shifted.determinant()) < 1e-8);
    }
  }
}

TEST_CASE("is_hurwitz fixtures") {
  REQUIRE(is_hurwitz(-Matrix::Identity(3, 3)));

  Matrix rot(2, 2);
  rot << 0, 1, -1, 0;  // purely imaginary spectrum
  REQUIRE_FALSE(is_hurwitz(rot));

  // x'' + c x' + k x with k=5, c=0.001: roots (-c +- sqrt(c^2-4k))/2,
  // real part -c/2 < 0 by the quadratic formula.
  Matrix osc(2, 2);
  osc << 0, 1, -5, -0.001;
  REQUIRE(is_hurwitz(osc));
}

TEST_CASE("definiteness classification") {
  const Matrix eye = Matrix::Identity(3, 3);
  REQUIRE(classify_definiteness(SymmetricMatrix(eye)).classification ==
          Definiteness::PD);
  REQUIRE(classify_definiteness(SymmetricMatrix(-eye)).classification ==
          Definiteness::ND);
  REQUIRE(classify_definiteness(SymmetricMatrix(Matrix::Zero(2, 2)))
              .classification == Definiteness::PSD);
  Matrix ind(2, 2);
  ind << 1, 0, 0, -1;
  REQUIRE(classify_definiteness(SymmetricMatrix(ind)).classification ==
          Definiteness::Indefinite);
  Matrix psd(2, 2);
  psd << 1, 0, 0, 0;
  REQUIRE(classify_definiteness(SymmetricMatrix(psd)).classification ==
          Definiteness::PSD);
}

TEST_CASE("solve_lyapunov: fixtures") {
  SECTION("scalar") {
    Matrix a(1, 1), m(1, 1);
    a << -1.0;
    m << 2.0;
    REQUIRE(solve_lyapunov(a, SymmetricMatrix(m)).matrix()(0, 0) ==
            Catch::Approx(1.0));
  }
  SECTION("minus identity") {
    const Matrix pi =
        solve_lyapunov(-Matrix::Identity(2, 2),
                       SymmetricMatrix(Matrix::Identity(2, 2)))
            .matrix();
    REQUIRE((pi - 0.5 * Matrix::Identity(2, 2)).norm() < 1e-12);
  }
  SECTION("random order-4 instance is PD with small residual") {
    std::mt19937_64 rng(5);
    const Matrix a = random_hurwitz(4, rng);
    const Matrix m = Matrix::Identity(4, 4);
    const Matrix pi = solve_lyapunov(a, SymmetricMatrix(m)).matrix();
    REQUIRE((a * pi + pi * a.transpose() + m).norm() < 1e-9);
    REQUIRE(classify_definiteness(SymmetricMatrix(pi)).classification ==
            Definiteness::PD);
  }
  SECTION("non-Hurwitz input rejected") {
    Matrix a(1, 1);
    a << 1.0;
    REQUIRE_THROWS_AS(solve_lyapunov(a, SymmetricMatrix(Matrix::Identity(1, 1))),
                      InfeasibleInput);
  }
}

TEST_CASE("solve_lyapunov: residual property on random Hurwitz instances") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 10);
    const Matrix a = random_hurwitz(n, rng);
    Matrix mraw = randn(n, n, rng);
    const SymmetricMatrix m(mraw * mraw.transpose() +
                            0.1 * Matrix::Identity(n, n));
    const Matrix pi = solve_lyapunov(a, m).matrix();
    REQUIRE((a * pi + pi * a.transpose() + m.matrix()).norm() <=
            1e-9 * std::max(1.0, m.matrix().norm()));
    // Lyapunov's Lemma: PD right-hand side gives PD solution.
    REQUIRE(classify_definiteness(SymmetricMatrix(pi)).classification ==
            Definiteness::PD);
  }
}

TEST_CASE("solve_care: fixtures") {
  SECTION("scalar, a=0") {
    Matrix a(1, 1), b(1, 1), e(1, 1), f(1, 1);
    a << 0;
    b << 1;
    e << 1;
    f << 1;
    const Matrix pi =
        solve_care(a, b, SymmetricMatrix(e), SymmetricMatrix(f)).matrix();
    REQUIRE(pi(0, 0) == Catch::Approx(1.0));
    REQUIRE(is_hurwitz(a - b * b.transpose() * pi));
  }
  SECTION("scalar, a=1, zero weight picks the stabilizing root") {
    Matrix a(1, 1), b(1, 1), e(1, 1), f(1, 1);
    a << 1;
    b << 1;
    e << 1;
    f << 0;
    const Matrix pi =
        solve_care(a, b, SymmetricMatrix(e), SymmetricMatrix(f)).matrix();
    REQUIRE(pi(0, 0) == Catch::Approx(2.0));
  }
  SECTION("unstabilizable pair rejected") {
    Matrix a(1, 1), b(1, 1), e(1, 1), f(1, 1);
    a << 1;
    b << 0;
    e << 1;
    f << 1;
    REQUIRE_THROWS_AS(
        solve_care(a, b, SymmetricMatrix(e), SymmetricMatrix(f)),
        InfeasibleInput);
  }
}

TEST_CASE("solve_care: residual and closed-loop property on random instances") {
  std::mt19937_64 rng(99);
  int done = 0;
  while (done < 100) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 8);
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng() % 3);
    const Matrix a = randn(n, n, rng);
    const Matrix b = randn(n, m, rng);
    const Matrix c = randn(n, n, rng);
    const SymmetricMatrix e(Matrix::Identity(m, m));
    const SymmetricMatrix f(c.transpose() * c + 1e-6 * Matrix::Identity(n, n));
    Matrix pi;
    try {
      pi = solve_care(a, b, e, f).matrix();
    } catch (const InfeasibleInput&) {
      continue;  // rare non-stabilizable draw
    }
    ++done;
    const Matrix g = b * b.transpose();
    const double resid =
        (a.transpose() * pi + pi * a - pi * g * pi + f.matrix()).norm();
    // relative to the largest term of the equation (backward error)
    const double scale =
        std::max({1.0, f.matrix().norm(), (pi * g * pi).norm()});
    REQUIRE(resid <= 1e-8 * scale);
    REQUIRE(is_hurwitz(a - g * pi, 0.0));
    REQUIRE(classify_definiteness(SymmetricMatrix(pi)).min_eigenvalue >=
            -1e-9 * std::max(1.0, pi.norm()));
  }
}

TEST_CASE("Lyapunov's Lemma both directions on random samples") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng() % 6);
    const Matrix a = random_hurwitz(n, rng);
    REQUIRE(is_hurwitz(a));
    const Matrix pi =
        solve_lyapunov(a, SymmetricMatrix(Matrix::Identity(n, n))).matrix();
    REQUIRE(classify_definiteness(SymmetricMatrix(pi)).classification ==
            Definiteness::PD);
  }
}
