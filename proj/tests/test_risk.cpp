#include "lyapnet/risk.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lyapnet/errors.hpp"
#include "lyapnet/numeric.hpp"
#include "lyapnet/rng.hpp"

using namespace lyapnet;

namespace {

LyapunovNet smooth_model(std::uint64_t seed, Psi psi = Psi::kSquare) {
  return make_lyapunov_net({2, 6, 6, 1}, Activation::kTanh, 0.5, Eigen::VectorXd::Zero(2), seed,
                           psi, Augmentation::kNorm);
}

DynamicalSystem linear_field(double rate) {
  DynamicalSystem s;
  s.dim = 2;
  s.field = [rate](const Eigen::VectorXd& x, const Eigen::VectorXd&, Eigen::VectorXd& out) {
    out = rate * x;
  };
  s.domain = Box::centered_unit(2);
  s.equilibrium = Eigen::VectorXd::Zero(2);
  s.name = rate < 0 ? "decay" : "growth";
  return s;
}

// Independent recomputation through the public evaluation API, sequential
// long-double accumulation.
double brute_risk_ln(const LyapunovNet& model, const DynamicalSystem& system,
                     const SampleSet& samples, double gamma) {
  long double acc = 0.0L;
  for (long i = 0; i < samples.size(); ++i) {
    const Eigen::VectorXd x = samples.points.row(i).transpose();
    const LyapEval e = lyap_eval(model, x);
    const double h = e.grad.dot(system.f(x)) + gamma * (x - model.equilibrium).norm();
    if (h > 0.0) acc += static_cast<long double>(h) * h;
  }
  return static_cast<double>(acc / samples.size());
}

Eigen::VectorXd fd_model_grad(LyapunovNet model, const DynamicalSystem& system,
                              const SampleSet& samples, const RiskConfig& cfg, double h) {
  Eigen::VectorXd p = get_params(model.phi);
  Eigen::VectorXd g(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    set_params(model.phi, p);
    const double up = risk_ln(model, system, samples, cfg).value;
    p[i] = orig - h;
    set_params(model.phi, p);
    const double dn = risk_ln(model, system, samples, cfg).value;
    p[i] = orig;
    g[i] = (up - dn) / (2.0 * h);
  }
  set_params(model.phi, p);
  return g;
}

}  // namespace

TEST(Risk, SampleUniformRespectsDomainAndExclusion) {
  const Box box{Eigen::Vector2d(-1.0, 0.5), Eigen::Vector2d(1.0, 2.5)};
  const Eigen::VectorXd center = Eigen::Vector2d(0.0, 1.5);
  const SampleSet s = sample_uniform(box, 5000, 0.3, center, 42);
  ASSERT_EQ(s.size(), 5000);
  for (long i = 0; i < s.size(); ++i) {
    const Eigen::VectorXd x = s.points.row(i).transpose();
    EXPECT_TRUE(box.contains(x));
    EXPECT_GE((x - center).norm(), 0.3);
  }
  // Deterministic per seed.
  const SampleSet again = sample_uniform(box, 5000, 0.3, center, 42);
  EXPECT_EQ(s.points, again.points);
  const SampleSet other = sample_uniform(box, 5000, 0.3, center, 43);
  EXPECT_NE(s.points, other.points);
}

TEST(Risk, SampleUniformRejectsDegenerateExclusion) {
  const Box box = Box::centered_unit(2);
  // A ball that swallows the whole box rejects everything.
  EXPECT_THROW(sample_uniform(box, 100, 5.0, Eigen::Vector2d(0, 0), 1), InputError);
  EXPECT_THROW(sample_uniform(box, 0, 0.0, Eigen::Vector2d(0, 0), 1), InputError);
}

TEST(Risk, LnMatchesBruteForceRecomputation) {
  const LyapunovNet model = smooth_model(3);
  DynamicalSystem sys = normalize(curve_tracking());
  const SampleSet samples = sample_uniform(sys.domain, 500, 0.0, sys.equilibrium, 7);
  RiskConfig cfg;
  cfg.gamma = 0.1;
  const RiskValue r = risk_ln(model, sys, samples, cfg);
  const double brute = brute_risk_ln(model, sys, samples, cfg.gamma);
  EXPECT_NEAR(r.value, brute, 1e-12 * (1.0 + brute));
}

TEST(Risk, ValueIsZeroIffNoViolations) {
  // phi == 0, alpha_bar = 0.5: V = 0.5||x||, grad V . (-x) = -0.5||x||.
  LyapunovNet model;
  model.phi = make_network({2, 4, 1}, Activation::kRePU);
  model.alpha_bar = 0.5;
  model.equilibrium = Eigen::VectorXd::Zero(2);
  RiskConfig cfg;
  cfg.gamma = 0.1;
  const DynamicalSystem stable = linear_field(-1.0);
  const SampleSet samples = sample_uniform(stable.domain, 2000, 0.0, stable.equilibrium, 11);
  const RiskValue good = risk_ln(model, stable, samples, cfg);
  EXPECT_EQ(good.value, 0.0);
  EXPECT_EQ(good.violation_count, 0);
  EXPECT_EQ(good.max_violation, 0.0);

  const DynamicalSystem unstable = linear_field(1.0);
  const RiskValue bad = risk_ln(model, unstable, samples, cfg);
  EXPECT_GT(bad.value, 0.0);
  EXPECT_EQ(bad.violation_count, samples.size());
  EXPECT_GT(bad.max_violation, 0.0);
}

TEST(Risk, ValueIsPermutationInvariant) {
  const LyapunovNet model = smooth_model(5);
  const DynamicalSystem sys = linear_field(1.0);  // all hinges active
  SampleSet samples = sample_uniform(sys.domain, 4000, 0.0, sys.equilibrium, 13);
  RiskConfig cfg;
  const double before = risk_ln(model, sys, samples, cfg).value;
  // Reverse the sample order.
  samples.points = samples.points.colwise().reverse().eval();
  const double after = risk_ln(model, sys, samples, cfg).value;
  EXPECT_NEAR(before, after, 1e-12 * std::abs(before));
}

TEST(Risk, LnGradMatchesFiniteDifferences) {
  DynamicalSystem sys = normalize(curve_tracking());
  RiskConfig cfg;
  cfg.gamma = 0.1;
  for (Psi psi : {Psi::kSquare, Psi::kAbs, Psi::kHuber}) {
    const LyapunovNet model = smooth_model(17, psi);
    const SampleSet samples = sample_uniform(sys.domain, 60, 0.0, sys.equilibrium, 19);
    Eigen::VectorXd grad;
    risk_ln_grad(model, sys, samples, cfg, grad);
    const Eigen::VectorXd fd = fd_model_grad(model, sys, samples, cfg, 1e-6);
    const double scale = 1.0 + fd.cwiseAbs().maxCoeff();
    EXPECT_LT((grad - fd).cwiseAbs().maxCoeff() / scale, 1e-4) << psi_name(psi);
  }
}

TEST(Risk, LnGradAndValueAgreeWithValueOnlyPath) {
  const LyapunovNet model = smooth_model(23, Psi::kAbs);
  DynamicalSystem sys = normalize(curve_tracking());
  const SampleSet samples = sample_uniform(sys.domain, 1000, 0.0, sys.equilibrium, 29);
  RiskConfig cfg;
  Eigen::VectorXd grad;
  double nl = -1.0;
  const RiskValue a = risk_ln_grad(model, sys, samples, cfg, grad, &nl);
  const RiskValue b = risk_ln(model, sys, samples, cfg);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.violation_count, b.violation_count);
  // The free unsquared metric matches its dedicated evaluation.
  const RiskValue nl_direct = risk_nl(model, sys, samples);
  EXPECT_NEAR(nl, nl_direct.value, 1e-12 * (1.0 + nl_direct.value));
}

TEST(Risk, ClfGradMatchesFiniteDifferencesAnalyticJacobian) {
  const DynamicalSystem plant = pendulum();
  const LyapunovNet model =
      make_lyapunov_net({2, 6, 1}, Activation::kTanh, 0.5, Eigen::VectorXd::Zero(2), 31,
                        Psi::kSquare, Augmentation::kNorm);
  const ControlLaw control = make_linear_control(2, 1, 37, 6.0);
  const SampleSet samples = sample_uniform(plant.domain, 50, 0.0, plant.equilibrium, 41);
  RiskConfig cfg;
  cfg.gamma = 0.1;
  Eigen::VectorXd gm, gc;
  risk_clf_grad(model, plant, control, samples, cfg, gm, gc);

  // Model-parameter check.
  {
    LyapunovNet work = model;
    Eigen::VectorXd p = get_params(work.phi);
    Eigen::VectorXd fd(p.size());
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double orig = p[i];
      p[i] = orig + h;
      set_params(work.phi, p);
      const double up = risk_clf(work, plant, control, samples, cfg).value;
      p[i] = orig - h;
      set_params(work.phi, p);
      const double dn = risk_clf(work, plant, control, samples, cfg).value;
      p[i] = orig;
      fd[i] = (up - dn) / (2.0 * h);
    }
    EXPECT_LT((gm - fd).cwiseAbs().maxCoeff() / (1.0 + fd.cwiseAbs().maxCoeff()), 1e-4);
  }
  // Control-parameter check (biases frozen, so compare weight entries only).
  {
    ControlLaw work = control;
    Eigen::VectorXd p = get_params(work.net);
    Eigen::VectorXd fd(p.size());
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double orig = p[i];
      p[i] = orig + h;
      set_params(work.net, p);
      const double up = risk_clf(model, plant, work, samples, cfg).value;
      p[i] = orig - h;
      set_params(work.net, p);
      const double dn = risk_clf(model, plant, work, samples, cfg).value;
      p[i] = orig;
      fd[i] = (up - dn) / (2.0 * h);
    }
    zero_bias_entries(control.net, fd);
    EXPECT_LT((gc - fd).cwiseAbs().maxCoeff() / (1.0 + fd.cwiseAbs().maxCoeff()), 1e-4);
  }
}

TEST(Risk, ClfGradFiniteDifferenceJacobianFallback) {
  // Control enters non-affinely and no analytic d f/d u is provided.
  DynamicalSystem plant;
  plant.dim = 2;
  plant.control_dim = 2;
  plant.field = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::VectorXd& out) {
    out[0] = -x[0] + std::sin(u[0]);
    out[1] = -x[1] + u[0] * u[1] * u[1] + 0.5 * u[1];
  };
  plant.domain = Box::centered_unit(2);
  plant.equilibrium = Eigen::VectorXd::Zero(2);
  plant.name = "toy";

  const LyapunovNet model =
      make_lyapunov_net({2, 6, 1}, Activation::kTanh, 0.5, Eigen::VectorXd::Zero(2), 43,
                        Psi::kSquare, Augmentation::kSqNorm);
  ControlLaw control = make_linear_control(2, 2, 47, std::nullopt);
  control.train_bias = true;
  const SampleSet samples = sample_uniform(plant.domain, 40, 0.0, plant.equilibrium, 53);
  RiskConfig cfg;
  Eigen::VectorXd gm, gc;
  risk_clf_grad(model, plant, control, samples, cfg, gm, gc);

  ControlLaw work = control;
  Eigen::VectorXd p = get_params(work.net);
  Eigen::VectorXd fd(p.size());
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    set_params(work.net, p);
    const double up = risk_clf(model, plant, work, samples, cfg).value;
    p[i] = orig - h;
    set_params(work.net, p);
    const double dn = risk_clf(model, plant, work, samples, cfg).value;
    p[i] = orig;
    fd[i] = (up - dn) / (2.0 * h);
  }
  EXPECT_LT((gc - fd).cwiseAbs().maxCoeff() / (1.0 + fd.cwiseAbs().maxCoeff()), 1e-4);
}

TEST(Risk, DlHandComputedSingleSample) {
  // Linear "net": V(x) = w.x + b with w = (0.5, -0.25), b = 0.1.
  Network net = make_network({2, 1}, Activation::kRePU);
  net.weights[0] << 0.5, -0.25;
  net.biases[0][0] = 0.1;
  const DynamicalSystem sys = linear_field(-1.0);
  SampleSet samples;
  samples.points.resize(1, 2);
  samples.points << 0.4, 0.2;
  samples.domain = sys.domain;
  RiskConfig cfg;  // sandwich 20 / 0.2
  // V = 0.5*0.4 - 0.25*0.2 + 0.1 = 0.25; grad V = w; f = -x;
  // gV.f = -(0.5*0.4 - 0.25*0.2) = -0.15; ||x||^2 = 0.2.
  const double t1 = std::max(-0.15 + 0.2, 0.0);          // 0.05
  const double t2 = std::max(20.0 * 0.2 - 0.25, 0.0);    // 3.75
  const double t3 = std::max(0.25 - 0.2 * 0.2, 0.0);     // 0.21
  const RiskValue r = risk_dl(net, sys, samples, cfg);
  EXPECT_NEAR(r.value, t1 * t1 + t2 * t2 + t3 * t3, 1e-14);
  EXPECT_EQ(r.violation_count, 3);  // all three hinge arguments positive
  EXPECT_NEAR(r.max_violation, t2, 1e-14);
}

TEST(Risk, DlGradMatchesFiniteDifferences) {
  Network net = xavier_init({2, 8, 1}, Activation::kSoftplus, 59);
  const DynamicalSystem sys = linear_field(-1.0);
  const SampleSet samples = sample_uniform(sys.domain, 50, 0.0, sys.equilibrium, 61);
  RiskConfig cfg;
  Eigen::VectorXd grad;
  risk_dl_grad(net, sys, samples, cfg, grad);
  Eigen::VectorXd p = get_params(net);
  Eigen::VectorXd fd(p.size());
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    set_params(net, p);
    const double up = risk_dl(net, sys, samples, cfg).value;
    p[i] = orig - h;
    set_params(net, p);
    const double dn = risk_dl(net, sys, samples, cfg).value;
    p[i] = orig;
    fd[i] = (up - dn) / (2.0 * h);
  }
  set_params(net, p);
  EXPECT_LT((grad - fd).cwiseAbs().maxCoeff() / (1.0 + fd.cwiseAbs().maxCoeff()), 1e-4);
}

TEST(Risk, NlGradMatchesFiniteDifferences) {
  Network net = xavier_init({2, 8, 1}, Activation::kTanh, 67);
  const DynamicalSystem sys = linear_field(-1.0);
  const SampleSet samples = sample_uniform(sys.domain, 60, 0.0, sys.equilibrium, 71);
  Eigen::VectorXd grad;
  risk_nl_grad(net, sys, samples, grad);
  Eigen::VectorXd p = get_params(net);
  Eigen::VectorXd fd(p.size());
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    set_params(net, p);
    const double up = risk_nl(net, sys, samples).value;
    p[i] = orig - h;
    set_params(net, p);
    const double dn = risk_nl(net, sys, samples).value;
    p[i] = orig;
    fd[i] = (up - dn) / (2.0 * h);
  }
  set_params(net, p);
  EXPECT_LT((grad - fd).cwiseAbs().maxCoeff() / (1.0 + fd.cwiseAbs().maxCoeff()), 1e-4);
}

TEST(Risk, NlOnConstructedModelHasNoOriginPenalty) {
  // V(x*) = 0 exactly for the constructed model, so the unsquared metric is
  // the mean positive orbital derivative alone; V >= 0 kills the (-V)_+ term.
  const LyapunovNet model = smooth_model(73);
  const DynamicalSystem sys = linear_field(1.0);
  const SampleSet samples = sample_uniform(sys.domain, 500, 0.0, sys.equilibrium, 79);
  const RiskValue r = risk_nl(model, sys, samples);
  long double acc = 0.0L;
  for (long i = 0; i < samples.size(); ++i) {
    const Eigen::VectorXd x = samples.points.row(i).transpose();
    const LyapEval e = lyap_eval(model, x);
    EXPECT_GE(e.value, 0.0);
    acc += std::max(e.grad.dot(sys.f(x)), 0.0);
  }
  EXPECT_NEAR(r.value, static_cast<double>(acc / samples.size()), 1e-12 * (1.0 + r.value));
}

TEST(Risk, MonteCarloAgreesWithMidpointQuadrature) {
  // Smooth integrand: squared hinge of a tanh model on the normalized
  // curve-tracking field. 400x400 midpoint quadrature vs 200k MC samples.
  const LyapunovNet model = smooth_model(83);
  DynamicalSystem sys = normalize(curve_tracking());
  RiskConfig cfg;
  cfg.gamma = 0.1;

  const int res = 400;
  std::vector<double> cell(static_cast<std::size_t>(res) * res);
  LyapWorkspace ws(model);
  Eigen::VectorXd x(2), fx(2);
  static const Eigen::VectorXd kEmpty;
  for (int i = 0; i < res; ++i) {
    x[0] = -1.0 + (i + 0.5) * (2.0 / res);
    for (int j = 0; j < res; ++j) {
      x[1] = -1.0 + (j + 0.5) * (2.0 / res);
      const LyapEval e = lyap_eval_ws(model, x, ws);
      sys.field(x, kEmpty, fx);
      const double h = e.grad.dot(fx) + cfg.gamma * x.norm();
      cell[static_cast<std::size_t>(i) * res + j] = h > 0.0 ? h * h : 0.0;
    }
  }
  const double quad = pairwise_mean(cell);

  const SampleSet samples = sample_uniform(sys.domain, 200000, 0.0, sys.equilibrium, 89);
  const RiskValue mc = risk_ln(model, sys, samples, cfg);
  EXPECT_NEAR(mc.value, quad, 0.02 * std::max(quad, 1e-6));
}

TEST(Risk, RejectsMismatchedInputs) {
  const LyapunovNet model = smooth_model(97);
  const DynamicalSystem plant = pendulum();  // controlled
  const SampleSet samples = sample_uniform(Box::centered_unit(2), 10, 0.0,
                                           Eigen::VectorXd::Zero(2), 1);
  RiskConfig cfg;
  EXPECT_THROW(risk_ln(model, plant, samples, cfg), InputError);
  const DynamicalSystem sys = linear_field(-1.0);
  const ControlLaw control = make_linear_control(2, 1, 3, 6.0);
  EXPECT_THROW(risk_clf(model, sys, control, samples, cfg), InputError);
  SampleSet wrong = samples;
  wrong.points.resize(10, 3);
  wrong.points.setZero();
  EXPECT_THROW(risk_ln(model, sys, wrong, cfg), InputError);
}
