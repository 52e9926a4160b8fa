#pragma once

// The two-subsystem network plant: a scalar nonlinear subsystem known to lie
// in cone[-2,-1] coupled with a poorly modeled passive mass chain. Provides
// the true nonlinear plant, its linearization for expert design, and the
// nominal model used for observer design.

#include <qsrbc/chain.hpp>
#include <qsrbc/interconnect.hpp>

#include <functional>

namespace qsrbc::systems {

/// Nonlinear input-output subsystem: xdot = rhs(x, e, t), y = output(x, e).
struct NonlinearSubsystem {
  Eigen::Index state_dim = 0, input_dim = 0, output_dim = 0;
  std::function<Vector(const Vector&, const Vector&, double)> rhs;
  std::function<Vector(const Vector&, const Vector&)> output;
};

struct Example2Plants {
  NonlinearSubsystem true_g1;    // xdot = -x^3 - x + e, y = -x^3 - x - e
  StateSpace true_g2;            // two-mass chain, m=0.5, k=5, c=1e-3
  NonlinearSubsystem true_plant; // coupled network, state [x1; x2], u -> y
  StateSpace true_linearized;    // network linearized about the origin
  StateSpace nominal;            // nominal network (scalar lag + single mass)
  Interconnection coupling;      // e1 = u1 - y2, e2 = u2 - y1
  QSRTriple g1_supply;           // cone[-2,-1] as a general QSR triple
  QSRTriple g2_supply;           // passivity

  Example2Plants()
      : true_g2(build_chain(ChainParams::uniform(2, 0.5, 5.0, 1e-3), {0})),
        true_linearized(StateSpace::siso(0, 0, 0, 0)),  // set below
        nominal(StateSpace::siso(0, 0, 0, 0)),
        coupling(make_coupling()),
        g1_supply(QSRTriple::scalar(-1.0, -1.5, -2.0)),
        g2_supply(QSRTriple::scalar(0.0, 0.5, 0.0)) {
    true_g1.state_dim = 1;
    true_g1.input_dim = 1;
    true_g1.output_dim = 1;
    true_g1.rhs = [](const Vector& x, const Vector& e, double) {
      Vector d(1);
      d(0) = -x(0) * x(0) * x(0) - x(0) + e(0);
      return d;
    };
    // y = xdot - 2e, substituted so no input derivative is needed
    true_g1.output = [](const Vector& x, const Vector& e) {
      Vector y(1);
      y(0) = -x(0) * x(0) * x(0) - x(0) - e(0);
      return y;
    };

    const StateSpace g1_lin = StateSpace::siso(-1, 1, -1, -1);
    true_linearized = interconnect_lti({g1_lin, true_g2}, coupling);

    const StateSpace g1_nominal = StateSpace::siso(-1, 1, -1, -1);
    const StateSpace g2_nominal =
        build_chain(ChainParams::uniform(1, 1.0, 2.5, 0.05), {0});
    nominal = interconnect_lti({g1_nominal, g2_nominal}, coupling);

    true_plant = make_true_plant(true_g1, true_g2);
  }

 private:
  static Interconnection make_coupling() {
    // The convention that reproduces the network QSR triple used for design.
    Matrix h(2, 2);
    h << 0, 1, 1, 0;
    return Interconnection(h, {{1, 1}, {1, 1}});
  }

  static NonlinearSubsystem make_true_plant(const NonlinearSubsystem& g1,
                                            const StateSpace& g2) {
    NonlinearSubsystem net;
    net.state_dim = g1.state_dim + g2.n();
    net.input_dim = 2;
    net.output_dim = 2;
    const Matrix a2 = g2.A(), b2 = g2.B(), c2 = g2.C();
    auto outputs = [g1, c2](const Vector& z, const Vector& u) {
      const Vector x1 = z.head(1);
      const Vector x2 = z.tail(z.size() - 1);
      const double y2 = (c2 * x2)(0);
      Vector e1(1);
      e1(0) = u(0) - y2;  // e1 = u1 - y2
      const double y1 = g1.output(x1, e1)(0);
      Vector y(2);
      y << y1, y2;
      return std::make_pair(y, e1);
    };
    net.output = [outputs](const Vector& z, const Vector& u) {
      return outputs(z, u).first;
    };
    net.rhs = [g1, a2, b2, outputs](const Vector& z, const Vector& u, double t) {
      const auto [y, e1] = outputs(z, u);
      const Vector x1 = z.head(1);
      const Vector x2 = z.tail(z.size() - 1);
      Vector e2(1);
      e2(0) = u(1) - y(0);  // e2 = u2 - y1
      Vector dz(z.size());
      dz.head(1) = g1.rhs(x1, e1, t);
      dz.tail(z.size() - 1) = a2 * x2 + b2 * e2;
      return dz;
    };
    return net;
  }
};

inline Example2Plants example2_plants() { return Example2Plants(); }

}  // namespace qsrbc::systems
