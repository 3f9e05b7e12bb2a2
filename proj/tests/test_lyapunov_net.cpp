#include "lyapnet/lyapunov_net.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "lyapnet/dynamics.hpp"
#include "lyapnet/errors.hpp"
#include "lyapnet/rng.hpp"

using namespace lyapnet;

namespace {

LyapunovNet random_model(Psi psi, Augmentation aug, std::uint64_t seed,
                         const Eigen::VectorXd& eq) {
  return make_lyapunov_net({static_cast<int>(eq.size()), 8, 8, 1}, Activation::kTanh, 0.5, eq,
                           seed, psi, aug);
}

}  // namespace

TEST(LyapunovNet, ZeroPhiReducesToAugmentation) {
  // With phi == 0 the value is alpha_bar * ||x - x*|| and the gradient is the
  // radial direction times alpha_bar.
  LyapunovNet model;
  model.phi = make_network({2, 4, 1}, Activation::kRePU);
  model.alpha_bar = 0.5;
  model.psi = Psi::kAbs;
  model.augmentation = Augmentation::kNorm;
  model.equilibrium = Eigen::Vector2d(0.0, 0.0);
  const LyapEval e = lyap_eval(model, Eigen::Vector2d(0.6, 0.8));
  EXPECT_DOUBLE_EQ(e.value, 0.5);
  EXPECT_NEAR(e.grad[0], 0.5 * 0.6, 1e-15);
  EXPECT_NEAR(e.grad[1], 0.5 * 0.8, 1e-15);
}

TEST(LyapunovNet, ExactZeroAtEquilibriumForAnyParameters) {
  Rng rng(3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Eigen::VectorXd eq(3);
    for (int i = 0; i < 3; ++i) eq[i] = rng.uniform(-0.5, 0.5);
    for (Psi psi : {Psi::kAbs, Psi::kSquare, Psi::kHuber}) {
      const LyapunovNet model = random_model(psi, Augmentation::kNorm, seed, eq);
      // Bitwise zero: psi(phi(x*) - phi(x*)) = psi(0) = 0 and r(0) = 0.
      EXPECT_EQ(lyap_eval(model, eq).value, 0.0);
    }
  }
}

TEST(LyapunovNet, PositiveDefiniteAndDominatesRadialTerm) {
  Rng rng(5);
  const Eigen::VectorXd eq = Eigen::VectorXd::Zero(2);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const LyapunovNet model = random_model(Psi::kAbs, Augmentation::kNorm, seed, eq);
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::VectorXd x(2);
      for (int i = 0; i < 2; ++i) x[i] = rng.uniform(-1.0, 1.0);
      const double v = lyap_eval(model, x).value;
      EXPECT_GE(v, model.alpha_bar * (x - eq).norm() - 1e-15);
      if ((x - eq).norm() > 1e-12) EXPECT_GT(v, 0.0);
    }
  }
}

TEST(LyapunovNet, GradientMatchesFiniteDifferences) {
  Rng rng(7);
  const Eigen::VectorXd eq = Eigen::Vector2d(0.1, -0.2);
  for (Psi psi : {Psi::kAbs, Psi::kSquare, Psi::kHuber}) {
    for (Augmentation aug : {Augmentation::kNorm, Augmentation::kSqNorm, Augmentation::kLogSq}) {
      const LyapunovNet model = random_model(psi, aug, 42, eq);
      for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd x(2);
        for (int i = 0; i < 2; ++i) x[i] = rng.uniform(-1.0, 1.0);
        if ((x - eq).norm() < 0.05) continue;  // keep away from the norm kink
        const LyapEval e = lyap_eval(model, x);
        const double h = 1e-5;
        for (int j = 0; j < 2; ++j) {
          Eigen::VectorXd xp = x, xm = x;
          xp[j] += h;
          xm[j] -= h;
          const double fd =
              (lyap_eval(model, xp).value - lyap_eval(model, xm).value) / (2.0 * h);
          EXPECT_NEAR(e.grad[j], fd, 2e-5 * (1.0 + std::abs(fd)))
              << psi_name(psi) << "/" << augmentation_name(aug);
        }
      }
    }
  }
}

TEST(LyapunovNet, OrbitalDerivativeMatchesChainRule) {
  DynamicalSystem sys = curve_tracking();
  sys = normalize(sys);
  const LyapunovNet model = random_model(Psi::kAbs, Augmentation::kNorm, 9,
                                         Eigen::VectorXd::Zero(2));
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x(2);
    for (int i = 0; i < 2; ++i) x[i] = rng.uniform(-1.0, 1.0);
    const LyapEval e = lyap_eval(model, x);
    const double dv = orbital_derivative(model, sys, x);
    EXPECT_NEAR(dv, e.grad.dot(sys.f(x)), 1e-12);
  }
}

TEST(LyapunovNet, WorkspaceCachesPhiStarConsistently) {
  const Eigen::VectorXd eq = Eigen::Vector2d(0.3, 0.3);
  const LyapunovNet model = random_model(Psi::kSquare, Augmentation::kSqNorm, 17, eq);
  LyapWorkspace ws(model);
  Eigen::VectorXd x(2);
  x << -0.4, 0.9;
  const LyapEval a = lyap_eval_ws(model, x, ws);
  const LyapEval b = lyap_eval(model, x);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.grad, b.grad);
}

TEST(LyapunovNet, JsonRoundTripIsExact) {
  const LyapunovNet model =
      random_model(Psi::kHuber, Augmentation::kLogSq, 21, Eigen::Vector2d(0.85, 0.0));
  const nlohmann::json j = lyapunov_net_to_json(model);
  const LyapunovNet back = lyapunov_net_from_json(j);
  EXPECT_EQ(get_params(back.phi), get_params(model.phi));
  EXPECT_EQ(back.alpha_bar, model.alpha_bar);
  EXPECT_EQ(back.psi, model.psi);
  EXPECT_EQ(back.augmentation, model.augmentation);
  EXPECT_EQ(back.equilibrium, model.equilibrium);
  EXPECT_EQ(lyapunov_net_to_json(back).dump(), j.dump());
}

TEST(LyapunovNet, RejectsBadConstruction) {
  EXPECT_THROW(make_lyapunov_net({2, 4, 2}, Activation::kRePU, 0.5, Eigen::Vector2d(0, 0), 1),
               InputError);
  EXPECT_THROW(make_lyapunov_net({2, 4, 1}, Activation::kRePU, -0.5, Eigen::Vector2d(0, 0), 1),
               InputError);
  EXPECT_THROW(make_lyapunov_net({3, 4, 1}, Activation::kRePU, 0.5, Eigen::Vector2d(0, 0), 1),
               InputError);
}
