#include "lyapnet/train.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "lyapnet/errors.hpp"

using namespace lyapnet;

namespace {

DynamicalSystem decay_field(int dim) {
  DynamicalSystem s;
  s.dim = dim;
  s.field = [](const Eigen::VectorXd& x, const Eigen::VectorXd&, Eigen::VectorXd& out) {
    out = -x;
  };
  s.domain = Box::centered_unit(dim);
  s.equilibrium = Eigen::VectorXd::Zero(dim);
  s.name = "decay";
  return s;
}

DynamicalSystem growth_field(int dim) {
  DynamicalSystem s = decay_field(dim);
  s.field = [](const Eigen::VectorXd& x, const Eigen::VectorXd&, Eigen::VectorXd& out) {
    out = x;
  };
  s.name = "growth";
  return s;
}

}  // namespace

TEST(Train, AdamFirstStepHandValue) {
  AdamConfig cfg;  // lr 0.005, betas 0.9/0.999, eps 1e-8
  AdamState st = make_adam(cfg, 2);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd g(2);
  g << 1.0, -2.0;
  adam_step(st, p, g);
  // First step: mhat = g, vhat = g^2, delta = -lr * g / (|g| + eps).
  EXPECT_NEAR(p[0], -0.005 / (1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p[1], 0.005 / (1.0 + 1e-8 / 2.0), 1e-15);
  EXPECT_EQ(st.t, 1);
}

TEST(Train, AdamMatchesIndependentReimplementation) {
  AdamConfig cfg;
  cfg.lr = 0.01;
  AdamState st = make_adam(cfg, 3);
  Eigen::VectorXd p(3), m = Eigen::VectorXd::Zero(3), v = Eigen::VectorXd::Zero(3);
  p << 0.3, -0.2, 0.05;
  Eigen::VectorXd expect = p;
  for (long t = 1; t <= 5; ++t) {
    Eigen::VectorXd g(3);
    g << std::sin(static_cast<double>(t)), 0.5 * t, -1.0 / t;
    adam_step(st, p, g);
    for (int i = 0; i < 3; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mhat = m[i] / (1.0 - std::pow(0.9, t));
      const double vhat = v[i] / (1.0 - std::pow(0.999, t));
      expect[i] -= 0.01 * mhat / (std::sqrt(vhat) + 1e-8);
    }
  }
  // Identical up to FMA-contraction rounding accumulated over the steps.
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p[i], expect[i], 5e-15 * (1.0 + std::abs(expect[i])));
}

TEST(Train, AdamRejectsNonFiniteGradient) {
  AdamState st = make_adam(AdamConfig{}, 2);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd g(2);
  g << 1.0, std::numeric_limits<double>::infinity();
  EXPECT_THROW(adam_step(st, p, g), InputError);
}

TEST(Train, ConvergesOnNormalizedCurveTracking) {
  // Asymmetric field, so the random initialization starts with violations
  // (a plain radial field is already risk-free for this architecture).
  const DynamicalSystem sys = normalize(curve_tracking());
  LyapunovNet model = make_lyapunov_net({2, 10, 10, 1}, Activation::kRePU, 0.5,
                                        Eigen::VectorXd::Zero(2), 3);
  TrainConfig cfg;
  cfg.max_iters = 300;
  cfg.n_samples = 2000;
  cfg.seed = 7;
  cfg.gamma = 0.1;
  const TrainReport rep = train_lyapunov(model, sys, cfg);
  EXPECT_GT(rep.curve.front().risk, 0.0);
  EXPECT_EQ(rep.stop_reason, StopReason::kConverged);
  EXPECT_LT(rep.final_risk, 1e-4);
  EXPECT_LE(rep.iters, 300);
  ASSERT_GE(rep.curve.size(), 2u);
  EXPECT_LT(rep.curve.back().risk, rep.curve.front().risk);
  // Iteration indices are contiguous from zero and wall clock is monotone.
  for (std::size_t i = 0; i < rep.curve.size(); ++i) {
    EXPECT_EQ(rep.curve[i].iter, static_cast<long>(i));
    if (i > 0) EXPECT_GE(rep.curve[i].wall_clock_s, rep.curve[i - 1].wall_clock_s);
  }
}

TEST(Train, DeterministicPerSeedAndSensitiveToSeed) {
  const DynamicalSystem sys = growth_field(2);  // violations keep gradients non-zero
  TrainConfig cfg;
  cfg.max_iters = 20;
  cfg.tol = 0.0;  // run all iterations
  cfg.n_samples = 500;
  cfg.seed = 11;

  LyapunovNet a = make_lyapunov_net({2, 6, 1}, Activation::kRePU, 0.5,
                                    Eigen::VectorXd::Zero(2), 5);
  LyapunovNet b = make_lyapunov_net({2, 6, 1}, Activation::kRePU, 0.5,
                                    Eigen::VectorXd::Zero(2), 5);
  const TrainReport ra = train_lyapunov(a, sys, cfg);
  const TrainReport rb = train_lyapunov(b, sys, cfg);
  EXPECT_EQ(get_params(a.phi), get_params(b.phi));
  ASSERT_EQ(ra.curve.size(), rb.curve.size());
  for (std::size_t i = 0; i < ra.curve.size(); ++i) {
    EXPECT_EQ(ra.curve[i].risk, rb.curve[i].risk);
  }

  TrainConfig cfg2 = cfg;
  cfg2.seed = 12;
  LyapunovNet c = make_lyapunov_net({2, 6, 1}, Activation::kRePU, 0.5,
                                    Eigen::VectorXd::Zero(2), 5);
  train_lyapunov(c, sys, cfg2);
  EXPECT_NE(get_params(a.phi), get_params(c.phi));
}

TEST(Train, ClipKeepsParametersInUnitBox) {
  const DynamicalSystem sys = growth_field(2);  // keeps gradients active
  LyapunovNet model = make_lyapunov_net({2, 6, 1}, Activation::kRePU, 0.5,
                                        Eigen::VectorXd::Zero(2), 9);
  TrainConfig cfg;
  cfg.max_iters = 50;
  cfg.tol = 0.0;
  cfg.n_samples = 200;
  cfg.adam.lr = 0.2;  // large steps would leave the box without clipping
  const TrainReport rep = train_lyapunov(model, sys, cfg);
  EXPECT_EQ(rep.stop_reason, StopReason::kMaxIters);
  EXPECT_LE(get_params(model.phi).cwiseAbs().maxCoeff(), 1.0);
}

TEST(Train, StopsAtMaxItersOnUnstableField) {
  const DynamicalSystem sys = growth_field(2);
  LyapunovNet model = make_lyapunov_net({2, 6, 1}, Activation::kTanh, 0.5,
                                        Eigen::VectorXd::Zero(2), 13);
  TrainConfig cfg;
  cfg.max_iters = 3;
  cfg.n_samples = 200;
  const TrainReport rep = train_lyapunov(model, sys, cfg);
  EXPECT_EQ(rep.stop_reason, StopReason::kMaxIters);
  EXPECT_EQ(rep.iters, 3);
  EXPECT_EQ(rep.curve.size(), 4u);  // iterates 0..3
  EXPECT_GT(rep.final_risk, 0.0);
}

TEST(Train, HookSeesEveryIteration) {
  const DynamicalSystem sys = decay_field(2);
  LyapunovNet model = make_lyapunov_net({2, 4, 1}, Activation::kTanh, 0.5,
                                        Eigen::VectorXd::Zero(2), 15);
  TrainConfig cfg;
  cfg.max_iters = 5;
  cfg.tol = 0.0;
  cfg.n_samples = 100;
  std::vector<long> seen;
  const TrainReport rep = train_lyapunov(model, sys, cfg,
                                         [&](long iter, double) { seen.push_back(iter); });
  ASSERT_EQ(seen.size(), rep.curve.size());
  for (std::size_t i = 0; i < seen.size(); ++i) EXPECT_EQ(seen[i], rep.curve[i].iter);
}

TEST(Train, ClfImprovesRiskAndMovesControl) {
  const DynamicalSystem plant = pendulum();
  LyapunovNet model = make_lyapunov_net({2, 10, 10, 1}, Activation::kTanh, 0.5,
                                        Eigen::VectorXd::Zero(2), 17);
  ControlLaw control = make_linear_control(2, 1, 19, 6.0);
  const Eigen::VectorXd ctrl_before = get_params(control.net);
  TrainConfig cfg;
  cfg.max_iters = 60;
  cfg.tol = 0.0;
  cfg.n_samples = 800;
  cfg.seed = 21;
  const TrainReport rep = train_clf(model, plant, control, cfg);
  EXPECT_LT(rep.curve.back().risk, 0.5 * rep.curve.front().risk);
  EXPECT_NE(get_params(control.net), ctrl_before);
  // Bias entries stay frozen at zero: u(0) = 0 is preserved.
  EXPECT_EQ(control.net.biases[0].cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(control(Eigen::Vector2d(0.0, 0.0)).norm(), 0.0);
}

TEST(Train, BaselinesReduceTheirObjectives) {
  const DynamicalSystem sys = decay_field(3);
  TrainConfig cfg;
  cfg.max_iters = 80;
  cfg.tol = 0.0;
  cfg.n_samples = 400;
  cfg.seed = 23;
  {
    Network net = xavier_init({3, 10, 1}, Activation::kSoftplus, 25);
    const TrainReport rep = train_baseline(net, sys, BaselineKind::kSquaredHinge, cfg);
    EXPECT_LT(rep.curve.back().risk, rep.curve.front().risk);
  }
  {
    Network net = xavier_init({3, 10, 1}, Activation::kTanh, 27);
    const TrainReport rep = train_baseline(net, sys, BaselineKind::kUnsquared, cfg);
    EXPECT_LT(rep.curve.back().risk, rep.curve.front().risk);
    // For the unsquared objective the metric column is the objective itself.
    EXPECT_EQ(rep.curve.back().nl_metric, rep.curve.back().risk);
  }
}

TEST(Train, RejectsInconsistentInputs) {
  const DynamicalSystem sys = decay_field(2);
  LyapunovNet model = make_lyapunov_net({2, 4, 1}, Activation::kTanh, 0.5,
                                        Eigen::Vector2d(0.5, 0.5), 1);  // wrong equilibrium
  TrainConfig cfg;
  cfg.n_samples = 10;
  EXPECT_THROW(train_lyapunov(model, sys, cfg), InputError);
  LyapunovNet ok = make_lyapunov_net({2, 4, 1}, Activation::kTanh, 0.5,
                                     Eigen::VectorXd::Zero(2), 1);
  TrainConfig bad = cfg;
  bad.max_iters = 0;
  EXPECT_THROW(train_lyapunov(ok, sys, bad), InputError);
  ControlLaw control = make_linear_control(2, 1, 1, 6.0);
  EXPECT_THROW(train_clf(ok, sys, control, cfg), InputError);  // sys is autonomous
}
