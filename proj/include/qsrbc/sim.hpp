#pragma once

// Fixed-step RK4 simulation of open- and closed-loop systems (LTI and
// nonlinear), zero-order-hold input noise, expert demonstration recording
// and the evaluation cost.

#include <qsrbc/example2.hpp>
#include <qsrbc/learner.hpp>
#include <qsrbc/state_space.hpp>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <vector>

namespace qsrbc::sim {

using systems::NonlinearSubsystem;
using systems::StateSpace;

struct SimConfig {
  double dt = 1e-3;
  double duration = 10.0;
  double sample_period = 0.01;       // noise hold and dataset sampling period
  double noise_std_plant = 0.0;      // rhat, added at the plant input
  double noise_std_controller = 0.0; // r, added at the controller input
  std::uint64_t seed = 0;
  double divergence_threshold = 1e6;

  void check() const {
    if (!(dt > 0.0) || !(duration > 0.0) || !(sample_period > 0.0))
      throw std::invalid_argument("SimConfig: dt, duration, sample_period must be > 0");
    if (sample_period < dt - 1e-12)
      throw std::invalid_argument("SimConfig: sample_period must be >= dt");
    if (duration < sample_period - 1e-12)
      throw std::invalid_argument("SimConfig: duration must be >= sample_period");
    const double spd = sample_period / dt;
    if (std::abs(spd - std::round(spd)) > 1e-6)
      throw std::invalid_argument("SimConfig: sample_period must be a multiple of dt");
    const double dsp = duration / sample_period;
    if (std::abs(dsp - std::round(dsp)) > 1e-6)
      throw std::invalid_argument(
          "SimConfig: duration must be a multiple of sample_period");
  }

  int steps_per_sample() const { return static_cast<int>(std::round(sample_period / dt)); }
  int n_samples() const { return static_cast<int>(std::round(duration / sample_period)); }
};

struct Trajectory {
  std::vector<double> times;
  Matrix x;     // plant states, n x (steps+1)
  Matrix xhat;  // observer states, nhat x (steps+1) (0 rows when absent)
  Matrix u;     // plant inputs, m x (steps+1)
  bool bounded = true;
};

/// Zero-order-hold noise: one Gaussian draw per sample period and channel.
struct NoiseTable {
  Matrix rhat;  // m x n_samples, plant-input channel
  Matrix r;     // p x n_samples, controller-input channel
};

inline NoiseTable draw_noise(Eigen::Index m, Eigen::Index p, int n_samples,
                             double std_plant, double std_controller,
                             std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  NoiseTable t;
  t.rhat.resize(m, n_samples);
  t.r.resize(p, n_samples);
  for (int k = 0; k < n_samples; ++k) {
    for (Eigen::Index i = 0; i < m; ++i) t.rhat(i, k) = std_plant * dist(rng);
    for (Eigen::Index i = 0; i < p; ++i) t.r(i, k) = std_controller * dist(rng);
  }
  return t;
}

/// FNV-1a over the bit patterns of both tables; used to assert the
/// matched-randomness contract across controllers in one evaluation cell.
inline std::uint64_t hash_noise(const NoiseTable& t) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const Matrix& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::uint64_t bits;
        const double v = m(i, j);
        std::memcpy(&bits, &v, sizeof bits);
        for (int b = 0; b < 8; ++b) {
          h ^= (bits >> (8 * b)) & 0xff;
          h *= 1099511628211ull;
        }
      }
  };
  mix(t.rhat);
  mix(t.r);
  return h;
}

namespace detail {

// One classical RK4 step of xdot = f(x, t).
template <typename F>
Vector rk4_step(const F& f, const Vector& x, double t, double dt) {
  const Vector k1 = f(x, t);
  const Vector k2 = f(x + 0.5 * dt * k1, t + 0.5 * dt);
  const Vector k3 = f(x + 0.5 * dt * k2, t + 0.5 * dt);
  const Vector k4 = f(x + dt * k3, t + dt);
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

struct IntegrationResult {
  bool bounded = true;
  int last_step = 0;  // index of the last recorded step
};

/// Integrate xdot = f(x, t, sample_index) with per-sample ZOH inputs,
/// recording every dt step through `record(step, t, x)`. On divergence the
/// recording stops at the last finite in-threshold state.
template <typename F, typename Rec>
IntegrationResult integrate(const F& f, Vector x, const SimConfig& cfg,
                            const Rec& record) {
  const int sps = cfg.steps_per_sample();
  const int n_samples = cfg.n_samples();
  int step = 0;
  record(step, 0.0, x);
  for (int k = 0; k < n_samples; ++k) {
    auto fk = [&](const Vector& z, double t) { return f(z, t, k); };
    for (int s = 0; s < sps; ++s) {
      const double t = step * cfg.dt;
      x = detail::rk4_step(fk, x, t, cfg.dt);
      if (!x.allFinite() || x.norm() > cfg.divergence_threshold)
        return {false, step};
      ++step;
      record(step, step * cfg.dt, x);
    }
  }
  return {true, step};
}

inline void finish(Trajectory& traj, const IntegrationResult& res) {
  traj.bounded = res.bounded;
  const int cols = res.last_step + 1;
  if (cols < static_cast<int>(traj.times.size())) {
    traj.times.resize(cols);
    traj.x.conservativeResize(Eigen::NoChange, cols);
    traj.xhat.conservativeResize(Eigen::NoChange, cols);
    traj.u.conservativeResize(Eigen::NoChange, cols);
  }
}

/// LQR weight scalars; expanded to lambda * I of the right order at use.
struct LQRWeights {
  double e1 = 10.0, f1 = 0.1;  // expert
  double e2 = 0.5, f2 = 0.1;   // observer

  void check() const {
    if (!(e1 > 0.0 && f1 > 0.0 && e2 > 0.0 && f2 > 0.0))
      throw std::invalid_argument("LQRWeights: weights must be positive");
  }
};

/// Static expert gain K = inv(E1) B' Pi with Pi the stabilizing solution of
/// A'Pi + Pi A - Pi B inv(E1) B' Pi + C' F1 C = 0.
inline Matrix design_expert(const StateSpace& sys, const LQRWeights& w) {
  w.check();
  using numerics::SymmetricMatrix;
  const SymmetricMatrix e(w.e1 * Matrix::Identity(sys.m(), sys.m()));
  const SymmetricMatrix f(Matrix(w.f1 * sys.C().transpose() * sys.C()));
  const Matrix pi = numerics::solve_care(sys.A(), sys.B(), e, f).matrix();
  return (1.0 / w.e1) * sys.B().transpose() * pi;
}

/// Observer pair (Ahat, Bhat) = (A - L C, L), L = Pi C' inv(E2) with Pi the
/// stabilizing solution of the dual equation
/// Pi A' + A Pi - Pi C' inv(E2) C Pi + B F2 B' = 0.
inline std::pair<Matrix, Matrix> design_observer(const StateSpace& sys,
                                                 const LQRWeights& w) {
  w.check();
  using numerics::SymmetricMatrix;
  const SymmetricMatrix e(w.e2 * Matrix::Identity(sys.p(), sys.p()));
  const SymmetricMatrix f(Matrix(w.f2 * sys.B() * sys.B().transpose()));
  const Matrix pi =
      numerics::solve_care(sys.A().transpose(), sys.C().transpose(), e, f)
          .matrix();
  const Matrix l = pi * sys.C().transpose() / w.e2;
  return {sys.A() - l * sys.C(), l};
}

/// Closed loop of an LTI plant with the dynamic controller (Ahat, Bhat,
/// Chat, 0) under u = rhat - Chat xhat, uhat = r + y.
inline Trajectory simulate_closed_loop(const StateSpace& plant, const Matrix& ahat,
                                       const Matrix& bhat, const Matrix& chat,
                                       const SimConfig& cfg, const Vector& x0,
                                       const Vector& xhat0,
                                       const NoiseTable& noise) {
  cfg.check();
  const Eigen::Index n = plant.n(), nhat = ahat.rows();
  if (x0.size() != n || xhat0.size() != nhat)
    throw std::invalid_argument("simulate_closed_loop: initial state size mismatch");

  Trajectory traj;
  const int steps = cfg.n_samples() * cfg.steps_per_sample();
  traj.times.resize(steps + 1);
  traj.x.setZero(n, steps + 1);
  traj.xhat.setZero(nhat, steps + 1);
  traj.u.setZero(plant.m(), steps + 1);

  Vector z(n + nhat);
  z << x0, xhat0;
  auto f = [&](const Vector& zz, double, int k) {
    const Vector xs = zz.head(n), xh = zz.tail(nhat);
    const Vector u = noise.rhat.col(k) - chat * xh;
    const Vector y = plant.C() * xs + plant.D() * u;
    Vector dz(n + nhat);
    dz.head(n) = plant.A() * xs + plant.B() * u;
    dz.tail(nhat) = ahat * xh + bhat * (noise.r.col(k) + y);
    return dz;
  };
  auto record = [&](int step, double t, const Vector& zz) {
    traj.times[step] = t;
    traj.x.col(step) = zz.head(n);
    traj.xhat.col(step) = zz.tail(nhat);
    const int k = std::min(step / cfg.steps_per_sample(), cfg.n_samples() - 1);
    traj.u.col(step) = noise.rhat.col(k) - chat * zz.tail(nhat);
  };
  finish(traj, integrate(f, z, cfg, record));
  return traj;
}

/// Closed loop of a nonlinear plant with the dynamic controller.
inline Trajectory simulate_closed_loop(const NonlinearSubsystem& plant,
                                       const Matrix& ahat, const Matrix& bhat,
                                       const Matrix& chat, const SimConfig& cfg,
                                       const Vector& x0, const Vector& xhat0,
                                       const NoiseTable& noise) {
  cfg.check();
  const Eigen::Index n = plant.state_dim, nhat = ahat.rows();
  Trajectory traj;
  const int steps = cfg.n_samples() * cfg.steps_per_sample();
  traj.times.resize(steps + 1);
  traj.x.setZero(n, steps + 1);
  traj.xhat.setZero(nhat, steps + 1);
  traj.u.setZero(plant.input_dim, steps + 1);

  Vector z(n + nhat);
  z << x0, xhat0;
  auto f = [&](const Vector& zz, double t, int k) {
    const Vector xs = zz.head(n), xh = zz.tail(nhat);
    const Vector u = noise.rhat.col(k) - chat * xh;
    const Vector y = plant.output(xs, u);
    Vector dz(n + nhat);
    dz.head(n) = plant.rhs(xs, u, t);
    dz.tail(nhat) = ahat * xh + bhat * (noise.r.col(k) + y);
    return dz;
  };
  auto record = [&](int step, double t, const Vector& zz) {
    traj.times[step] = t;
    traj.x.col(step) = zz.head(n);
    traj.xhat.col(step) = zz.tail(nhat);
    const int k = std::min(step / cfg.steps_per_sample(), cfg.n_samples() - 1);
    traj.u.col(step) = noise.rhat.col(k) - chat * zz.tail(nhat);
  };
  finish(traj, integrate(f, z, cfg, record));
  return traj;
}

/// Expert run u = -K x + rhat on an LTI plant, with the observer running
/// alongside (uhat = r + y) exactly as during deployment.
inline Trajectory simulate_expert(const StateSpace& plant, const Matrix& gain,
                                  const Matrix& ahat, const Matrix& bhat,
                                  const SimConfig& cfg, const Vector& x0,
                                  const Vector& xhat0, const NoiseTable& noise) {
  cfg.check();
  const Eigen::Index n = plant.n(), nhat = ahat.rows();
  Trajectory traj;
  const int steps = cfg.n_samples() * cfg.steps_per_sample();
  traj.times.resize(steps + 1);
  traj.x.setZero(n, steps + 1);
  traj.xhat.setZero(nhat, steps + 1);
  traj.u.setZero(plant.m(), steps + 1);

  Vector z(n + nhat);
  z << x0, xhat0;
  auto f = [&](const Vector& zz, double, int k) {
    const Vector xs = zz.head(n), xh = zz.tail(nhat);
    const Vector u = -gain * xs + noise.rhat.col(k);
    const Vector y = plant.C() * xs + plant.D() * u;
    Vector dz(n + nhat);
    dz.head(n) = plant.A() * xs + plant.B() * u;
    dz.tail(nhat) = ahat * xh + bhat * (noise.r.col(k) + y);
    return dz;
  };
  auto record = [&](int step, double t, const Vector& zz) {
    traj.times[step] = t;
    traj.x.col(step) = zz.head(n);
    traj.xhat.col(step) = zz.tail(nhat);
    const int k = std::min(step / cfg.steps_per_sample(), cfg.n_samples() - 1);
    traj.u.col(step) = -gain * zz.head(n) + noise.rhat.col(k);
  };
  finish(traj, integrate(f, z, cfg, record));
  return traj;
}

/// Expert run on a nonlinear plant (gain acts on the true state).
inline Trajectory simulate_expert(const NonlinearSubsystem& plant,
                                  const Matrix& gain, const Matrix& ahat,
                                  const Matrix& bhat, const SimConfig& cfg,
                                  const Vector& x0, const Vector& xhat0,
                                  const NoiseTable& noise) {
  cfg.check();
  const Eigen::Index n = plant.state_dim, nhat = ahat.rows();
  Trajectory traj;
  const int steps = cfg.n_samples() * cfg.steps_per_sample();
  traj.times.resize(steps + 1);
  traj.x.setZero(n, steps + 1);
  traj.xhat.setZero(nhat, steps + 1);
  traj.u.setZero(plant.input_dim, steps + 1);

  Vector z(n + nhat);
  z << x0, xhat0;
  auto f = [&](const Vector& zz, double t, int k) {
    const Vector xs = zz.head(n), xh = zz.tail(nhat);
    const Vector u = -gain * xs + noise.rhat.col(k);
    const Vector y = plant.output(xs, u);
    Vector dz(n + nhat);
    dz.head(n) = plant.rhs(xs, u, t);
    dz.tail(nhat) = ahat * xh + bhat * (noise.r.col(k) + y);
    return dz;
  };
  auto record = [&](int step, double t, const Vector& zz) {
    traj.times[step] = t;
    traj.x.col(step) = zz.head(n);
    traj.xhat.col(step) = zz.tail(nhat);
    const int k = std::min(step / cfg.steps_per_sample(), cfg.n_samples() - 1);
    traj.u.col(step) = -gain * zz.head(n) + noise.rhat.col(k);
  };
  finish(traj, integrate(f, z, cfg, record));
  return traj;
}

/// Average squared state deviation between matched expert and learned runs;
/// +infinity when the learned run diverged.
inline double evaluation_cost(const Trajectory& expert, const Trajectory& learned) {
  if (!learned.bounded) return std::numeric_limits<double>::infinity();
  if (expert.times.size() != learned.times.size())
    throw std::invalid_argument("evaluation_cost: mismatched time grids");
  for (size_t i = 0; i < expert.times.size(); ++i)
    if (std::abs(expert.times[i] - learned.times[i]) > 1e-12)
      throw std::invalid_argument("evaluation_cost: mismatched time grids");
  double acc = 0.0;
  const Eigen::Index cols = expert.x.cols();
  for (Eigen::Index k = 0; k < cols; ++k)
    acc += (expert.x.col(k) - learned.x.col(k)).squaredNorm();
  return acc / static_cast<double>(cols);
}

using StateSampler = std::function<Vector(std::mt19937_64&)>;

inline StateSampler gaussian_sampler(Eigen::Index n, double std) {
  return [n, std](std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = std * dist(rng);
    return v;
  };
}

inline StateSampler zero_sampler(Eigen::Index n) {
  return [n](std::mt19937_64&) { return Vector(Vector::Zero(n)); };
}

/// Uniform in the ball ||x|| <= radius.
inline StateSampler ball_sampler(Eigen::Index n, double radius) {
  return [n, radius](std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = dist(rng);
    const double nv = v.norm();
    if (nv == 0.0) return Vector(Vector::Zero(n));
    return Vector(v * (radius * std::pow(unif(rng), 1.0 / double(n)) / nv));
  };
}

struct ExpertDataResult {
  learner::Dataset data;
  std::vector<std::string> warnings;
  int trajectories_used = 0;
};

namespace detail {

// Record the per-sample pairs (xhat_k, d_k) with d_k = K x_k - rhat_k: the
// controller-output value reproducing the applied expert input under the
// u = rhat - yhat loop convention.
template <typename Plant>
ExpertDataResult generate_expert_data_impl(const Plant& plant, const Matrix& gain,
                                           const Matrix& ahat, const Matrix& bhat,
                                           const SimConfig& cfg, int n_traj,
                                           const StateSampler& x0_sampler,
                                           const StateSampler& xhat0_sampler,
                                           std::mt19937_64& rng) {
  cfg.check();
  const Eigen::Index nhat = ahat.rows();
  const Eigen::Index m = gain.rows();
  const int per_traj = cfg.n_samples();
  Matrix xs(nhat, 0), us(m, 0);
  std::vector<std::string> warnings;
  int used = 0;
  for (int tr = 0; tr < n_traj; ++tr) {
    const Vector x0 = x0_sampler(rng);
    const Vector xh0 = xhat0_sampler(rng);
    Eigen::Index pdim = bhat.cols();
    const auto noise = draw_noise(m, pdim, per_traj, cfg.noise_std_plant,
                                  cfg.noise_std_controller, rng);
    const Trajectory traj =
        simulate_expert(plant, gain, ahat, bhat, cfg, x0, xh0, noise);
    if (!traj.bounded) {
      warnings.push_back("expert trajectory " + std::to_string(tr) +
                         " diverged; excluded from the dataset");
      continue;
    }
    const Eigen::Index base = xs.cols();
    xs.conservativeResize(Eigen::NoChange, base + per_traj);
    us.conservativeResize(Eigen::NoChange, base + per_traj);
    const int sps = cfg.steps_per_sample();
    for (int k = 0; k < per_traj; ++k) {
      const int step = k * sps;
      xs.col(base + k) = traj.xhat.col(step);
      us.col(base + k) = gain * traj.x.col(step) - noise.rhat.col(k);
    }
    ++used;
  }
  if (xs.cols() == 0)
    throw NumericalFailure("generate_expert_data: every trajectory diverged");
  ExpertDataResult out{learner::Dataset(xs, us), std::move(warnings), used};
  return out;
}

}  // namespace detail

inline ExpertDataResult generate_expert_data(const StateSpace& plant,
                                             const Matrix& gain, const Matrix& ahat,
                                             const Matrix& bhat, const SimConfig& cfg,
                                             int n_traj, const StateSampler& x0s,
                                             const StateSampler& xh0s,
                                             std::mt19937_64& rng) {
  return detail::generate_expert_data_impl(plant, gain, ahat, bhat, cfg, n_traj,
                                           x0s, xh0s, rng);
}

inline ExpertDataResult generate_expert_data(const NonlinearSubsystem& plant,
                                             const Matrix& gain, const Matrix& ahat,
                                             const Matrix& bhat, const SimConfig& cfg,
                                             int n_traj, const StateSampler& x0s,
                                             const StateSampler& xh0s,
                                             std::mt19937_64& rng) {
  return detail::generate_expert_data_impl(plant, gain, ahat, bhat, cfg, n_traj,
                                           x0s, xh0s, rng);
}

/// Trajectory dump: delimited text with a documented header, one row per
/// step: t, x..., xhat..., u...
inline void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
  os << "t";
  for (Eigen::Index i = 0; i < traj.x.rows(); ++i) os << ",x" << i;
  for (Eigen::Index i = 0; i < traj.xhat.rows(); ++i) os << ",xhat" << i;
  for (Eigen::Index i = 0; i < traj.u.rows(); ++i) os << ",u" << i;
  os << "\n";
  char buf[32];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (size_t s = 0; s < traj.times.size(); ++s) {
    emit(traj.times[s]);
    for (Eigen::Index i = 0; i < traj.x.rows(); ++i) {
      os << ",";
      emit(traj.x(i, s));
    }
    for (Eigen::Index i = 0; i < traj.xhat.rows(); ++i) {
      os << ",";
      emit(traj.xhat(i, s));
    }
    for (Eigen::Index i = 0; i < traj.u.rows(); ++i) {
      os << ",";
      emit(traj.u(i, s));
    }
    os << "\n";
  }
}

}  // namespace qsrbc::sim
