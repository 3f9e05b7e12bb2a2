#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "lyapnet/dynamics.hpp"
#include "lyapnet/lyapunov_net.hpp"

namespace lyapnet {

// Monte-Carlo sample of the study domain, optionally excluding a ball of
// radius delta_excluded around x*.
struct SampleSet {
  Eigen::MatrixXd points;  // one sample per row
  Box domain;
  double delta_excluded = 0.0;
  std::uint64_t seed = 0;

  long size() const { return points.rows(); }
  int dim() const { return static_cast<int>(points.cols()); }
};

// Uniform rejection sampling; deterministic per seed. Throws InputError when
// the exclusion ball rejects more than 99% of draws.
SampleSet sample_uniform(const Box& domain, long n, double delta_excluded,
                         const Eigen::VectorXd& x_star, std::uint64_t seed);

struct RiskValue {
  double value = 0.0;
  long violation_count = 0;   // samples with a positive hinge argument
  double max_violation = 0.0;  // largest positive hinge argument, 0 if none
};

struct RiskConfig {
  double gamma = 0.1;     // decrease margin per unit distance from x*
  double dl_upper = 20.0;  // sandwich coefficients for the squared-hinge
  double dl_lower = 0.2;   // baseline objective
};

// mean_i (grad V(x_i) . f(x_i) + gamma ||x_i - x*||)_+^2 for an autonomous
// system. Permutation of the samples changes the value by at most ~1e-12
// relative (pairwise summation).
RiskValue risk_ln(const LyapunovNet& model, const DynamicalSystem& system,
                  const SampleSet& samples, const RiskConfig& cfg);

// Same hinge with f(x, u(x)): the control-affine closed loop.
RiskValue risk_clf(const LyapunovNet& model, const DynamicalSystem& system,
                   const ControlLaw& control, const SampleSet& samples, const RiskConfig& cfg);

// Squared-hinge baseline on a plain network W:
//   mean_i [ (gW.f + ||e||^2)_+^2 + (up ||e||^2 - W)_+^2 + (W - lo ||e||^2)_+^2 ],
// e = x - x*.
RiskValue risk_dl(const Network& net, const DynamicalSystem& system, const SampleSet& samples,
                  const RiskConfig& cfg);

// Unsquared baseline W(x*)^2 + mean_i [ (gW.f)_+ + (-W)_+ ]. Also usable as a
// scalar quality metric for any Lyapunov candidate, hence the second overload.
RiskValue risk_nl(const Network& net, const DynamicalSystem& system, const SampleSet& samples);
RiskValue risk_nl(const LyapunovNet& model, const DynamicalSystem& system,
                  const SampleSet& samples);

// Gradient variants: value and parameter gradient in one pass. Gradients are
// with respect to the flat get_params layout of the trained network (phi for
// the Lyapunov model; alpha_bar stays fixed). When nl_metric is non-null it
// receives the unsquared-baseline metric on the same samples for free.
RiskValue risk_ln_grad(const LyapunovNet& model, const DynamicalSystem& system,
                       const SampleSet& samples, const RiskConfig& cfg, Eigen::VectorXd& grad,
                       double* nl_metric = nullptr);

RiskValue risk_clf_grad(const LyapunovNet& model, const DynamicalSystem& system,
                        const ControlLaw& control, const SampleSet& samples,
                        const RiskConfig& cfg, Eigen::VectorXd& grad_model,
                        Eigen::VectorXd& grad_control, double* nl_metric = nullptr);

RiskValue risk_dl_grad(const Network& net, const DynamicalSystem& system,
                       const SampleSet& samples, const RiskConfig& cfg, Eigen::VectorXd& grad);

RiskValue risk_nl_grad(const Network& net, const DynamicalSystem& system,
                       const SampleSet& samples, Eigen::VectorXd& grad);

}  // namespace lyapnet
