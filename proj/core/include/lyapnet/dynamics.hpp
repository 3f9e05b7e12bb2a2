#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "lyapnet/network.hpp"

namespace lyapnet {

struct Box {
  Eigen::VectorXd lower, upper;

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
  static Box centered_unit(int dim);  // [-1,1]^dim
};

// Continuous-time vector field dx/dt = f(x) or f(x, u). control_dim == 0
// means autonomous and the control argument is ignored. Instances are
// immutable after construction; eval is safe to call concurrently.
struct DynamicalSystem {
  int dim = 0;
  int control_dim = 0;
  std::function<void(const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::VectorXd& out)>
      field;
  // Optional analytic d f / d u (dim x control_dim); finite differences are
  // used when absent.
  std::function<void(const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::MatrixXd& out)>
      control_jacobian;
  std::optional<double> lipschitz_bound;  // upper bound when set analytically
  Box domain;
  Eigen::VectorXd equilibrium;
  std::string name;

  void eval(const Eigen::VectorXd& x, Eigen::VectorXd& out) const;  // autonomous
  void eval(const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::VectorXd& out) const;
  Eigen::VectorXd f(const Eigen::VectorXd& x) const;
  Eigen::VectorXd f(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
};

// State feedback u(x) through a network, optionally squashed by
// saturation * tanh(.) on the raw output. With zero biases the feedback
// vanishes at x = 0 exactly.
struct ControlLaw {
  Network net;
  std::optional<double> saturation;
  bool train_bias = false;

  int input_dim() const { return net.input_dim(); }
  int output_dim() const { return net.output_dim(); }
  void eval(const Eigen::VectorXd& x, NetWorkspace& ws, Eigen::VectorXd& out) const;
  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const;
};

ControlLaw make_linear_control(int state_dim, int control_dim, std::uint64_t seed,
                               std::optional<double> saturation);

nlohmann::json control_to_json(const ControlLaw& c);
ControlLaw control_from_json(const nlohmann::json& j);

// Planar curve-tracking model: state (rho, phi) with
//   rho' = -sin(phi)
//   phi' = (rho - 1) cos(phi) - 6.42 sin(phi) + 0.15
// on [0,2] x [-pi/2, pi/2]. The stored equilibrium is the actual zero of the
// field, (0.85, 0); an explicit override is accepted for experimentation but
// leaves the non-zero residual to the caller.
DynamicalSystem curve_tracking(std::optional<Eigen::Vector2d> equilibrium_override = {});

// Inverted pendulum: state (theta, omega), input torque u,
//   theta' = omega
//   omega' = (0.7365 sin(theta) - 0.1 omega + u) / 0.0375
// on [-pi,pi] x [-8,8], equilibrium (0,0) with u = 0.
DynamicalSystem pendulum();

// Random stable nonlinear field f(x) = -D x + eps * C tanh.(x) with
// D diagonal in [0.5, 2], C entries in [-1, 1], and eps small enough that the
// origin stays exponentially stable. Domain [-1,1]^dim, equilibrium 0.
DynamicalSystem synthetic(int dim, std::uint64_t seed);

// Toy field f(x) = -rate * x on [-1,1]^dim (rate < 0 makes it anti-stable).
// Exact Lipschitz constant |rate|.
DynamicalSystem linear_system(int dim, double rate);

// k independent copies of `base` stacked block-diagonally.
DynamicalSystem block_concat(const DynamicalSystem& base, int copies);

// Affine change of variables mapping `system.domain` centered at its
// equilibrium onto [-1,1]^d with the equilibrium at 0:
//   x = x* + h .* y,  h_i = min(x*_i - lo_i, up_i - x*_i),
//   g(y) = h^{-1} .* f(x* + h .* y).
// Orbital derivatives of V(y) under g match those of V((x - x*)/h) under f,
// so certificates transfer. Throws InputError if the equilibrium touches the
// domain boundary.
DynamicalSystem normalize(const DynamicalSystem& system);

// Autonomous system f(x, u(x)). The control is captured by value.
DynamicalSystem closed_loop(const DynamicalSystem& system, const ControlLaw& control);

// Damped Newton iteration on f from `guess`; returns x with ||f(x)|| <= 1e-10.
// Autonomous systems only. Throws on non-convergence with the residual.
Eigen::VectorXd refine_equilibrium(const DynamicalSystem& system, const Eigen::VectorXd& guess);

// Empirical lower bound on the Lipschitz constant of the field over its
// domain: max finite-difference slope over random pairs, short-range jitter
// pairs, and the spectral norm of finite-difference Jacobians at random
// points plus the equilibrium and domain center. Monotone in `samples` for a
// fixed seed (prefix-stable draws). Stores the estimate in lipschitz_bound if
// unset.
double estimate_lipschitz(DynamicalSystem& system, long samples, std::uint64_t seed);

}  // namespace lyapnet
