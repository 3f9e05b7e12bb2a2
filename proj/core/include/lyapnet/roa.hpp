#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "lyapnet/dynamics.hpp"
#include "lyapnet/lyapunov_net.hpp"

namespace lyapnet {

struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  bool reached_ball = false;  // entered B(x*; delta_target)
  bool exit = false;          // left the domain box
};

// Classical fixed-step 4th-order Runge-Kutta on an autonomous system,
// stopping at t_max, on entering B(x*; delta_target) (disabled when
// delta_target <= 0), or on leaving the domain. A non-finite state aborts,
// returning the finite prefix.
Trajectory rk4_integrate(const DynamicalSystem& system, const Eigen::VectorXd& x0, double h,
                         double t_max, double delta_target);

// Level-set region-of-attraction estimate on a 2d node grid. A node is
// accepted when its orbital derivative is negative, it lies within
// exclusion_radius of the equilibrium, or it is the start node (nearest the
// equilibrium) with a non-positive orbital derivative. c_star is the largest
// node value of V whose sublevel component around the equilibrium contains
// only accepted nodes and touches the domain boundary at most tangentially
// (boundary nodes strictly below the level are rejected).
struct RoaEstimate {
  double c_star = 0.0;
  double valid_fraction = 0.0;  // accepted nodes / all nodes
  double area_fraction = 0.0;   // component nodes / all nodes
  int resolution = 0;
  Box domain;
  Eigen::MatrixXd values;            // V at nodes, values(i,j) ~ (axis0_i, axis1_j)
  Eigen::MatrixXd orbital;           // grad V . f at nodes
  std::vector<std::uint8_t> valid;   // row-major accepted-node mask (i*res + j)
  std::vector<std::uint8_t> inside;  // row-major component mask (i*res + j)
};

RoaEstimate estimate_roa(const LyapunovNet& model, const DynamicalSystem& system, int resolution,
                         double exclusion_radius = 0.0);

// Samples n_starts points of {V <= c_star} uniformly (rejection from the
// box), integrates each, and returns the fraction that reach
// B(x*; delta_target) without leaving the domain.
double validate_roa(const LyapunovNet& model, const DynamicalSystem& system,
                    const RoaEstimate& estimate, long n_starts, std::uint64_t seed,
                    double delta_target, double t_max, double h = 0.01);

}  // namespace lyapnet
