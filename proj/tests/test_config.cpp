#include "lyapnet/config.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <nlohmann/json.hpp>

#include "lyapnet/errors.hpp"

namespace lyapnet {
namespace {

using nlohmann::json;

std::string error_of(const json& j) {
  try {
    config_from_json(j);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

TEST(ConfigParse, DefaultsRoundTripExactly) {
  RunConfig cfg;
  json echoed = config_to_json(cfg);
  RunConfig reparsed = config_from_json(echoed);
  EXPECT_EQ(config_to_json(reparsed), echoed);
}

TEST(ConfigParse, CustomizedRoundTripExactly) {
  json j = {
      {"seed", 42},
      {"out_dir", "runs/a"},
      {"wall_clock", "zero"},
      {"system",
       {{"kind", "block_concat"},
        {"copies", 3},
        {"base", {{"kind", "linear"}, {"dim", 2}, {"rate", 0.5}}},
        {"normalize", true}}},
      {"model", {{"depth", 2}, {"width", 6}, {"psi", "square"}, {"augmentation", "sqnorm"}}},
      {"train", {{"max_iters", 7}, {"adam", {{"lr", 0.01}}}}},
      {"certify", {{"c", 0.25}}},
  };
  RunConfig cfg = config_from_json(j);
  json echoed = config_to_json(cfg);
  EXPECT_EQ(config_to_json(config_from_json(echoed)), echoed);
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.train.seed, 42u);
  EXPECT_EQ(cfg.train.max_iters, 7);
  EXPECT_DOUBLE_EQ(cfg.train.adam.lr, 0.01);
  ASSERT_TRUE(cfg.certify.c.has_value());
  EXPECT_DOUBLE_EQ(*cfg.certify.c, 0.25);
  ASSERT_TRUE(cfg.system.base);
  EXPECT_EQ(cfg.system.base->kind, "linear");
}

TEST(ConfigParse, UnknownKeysReportDottedPath) {
  EXPECT_NE(error_of({{"frobnicate", 1}}).find("frobnicate"), std::string::npos);
  EXPECT_NE(error_of({{"train", {{"max_iter", 5}}}}).find("train.max_iter"),
            std::string::npos);
  EXPECT_NE(error_of({{"system", {{"kind", "block_concat"}, {"base", {{"rates", 1}}}}}})
                .find("system.base.rates"),
            std::string::npos);
}

TEST(ConfigParse, RangeChecksNameTheKey) {
  EXPECT_NE(error_of({{"train", {{"max_iters", 0}}}}).find("train.max_iters"),
            std::string::npos);
  EXPECT_NE(error_of({{"roa", {{"resolution", 10}}}}).find("roa.resolution"), std::string::npos);
  EXPECT_NE(error_of({{"model", {{"depth", 0}}}}).find("model.depth"), std::string::npos);
  EXPECT_NE(error_of({{"certify", {{"delta", 1.5}}}}).find("certify.delta"), std::string::npos);
  EXPECT_NE(error_of({{"wall_clock", "sometimes"}}).find("wall_clock"), std::string::npos);
  EXPECT_NE(error_of({{"train", {{"adam", {{"beta1", 1.0}}}}}}).find("train.adam.beta1"),
            std::string::npos);
}

TEST(ConfigParse, TypeErrorsNameTheKey) {
  EXPECT_NE(error_of({{"train", {{"max_iters", "lots"}}}}).find("train.max_iters"),
            std::string::npos);
  EXPECT_NE(error_of({{"system", "pendulum"}}).find("system"), std::string::npos);
}

TEST(ConfigParse, CertificationContractionAcceptsAutoOrNumber) {
  RunConfig cfg = config_from_json({{"certify", {{"c", "auto"}}}});
  EXPECT_FALSE(cfg.certify.c.has_value());
  cfg = config_from_json({{"certify", {{"c", 0.3}}}});
  ASSERT_TRUE(cfg.certify.c.has_value());
  EXPECT_DOUBLE_EQ(*cfg.certify.c, 0.3);
  EXPECT_NE(error_of({{"certify", {{"c", 1.5}}}}).find("certify.c"), std::string::npos);
  EXPECT_NE(error_of({{"certify", {{"c", "tiny"}}}}).find("certify.c"), std::string::npos);
}

TEST(ConfigParse, FamilySpecificKeysAreRejectedElsewhere) {
  EXPECT_NE(error_of({{"system", {{"kind", "synthetic"}, {"dim", 3}, {"rate", 2.0}}}})
                .find("system.rate"),
            std::string::npos);
  EXPECT_NE(error_of({{"system", {{"kind", "pendulum"}, {"seed", 1}}}}).find("system.seed"),
            std::string::npos);
  EXPECT_NE(error_of({{"system", {{"kind", "curve_tracking"}, {"dim", 2}}}}).find("system.dim"),
            std::string::npos);
  EXPECT_NE(
      error_of({{"system", {{"kind", "pendulum"}, {"equilibrium", {0.0, 0.0}}}}})
          .find("system.equilibrium"),
      std::string::npos);
  EXPECT_NE(error_of({{"system", {{"kind", "linear"}, {"dim", 2}, {"copies", 2}}}})
                .find("system.copies"),
            std::string::npos);
}

TEST(ConfigParse, SyntheticAndLinearRequireDimension) {
  EXPECT_NE(error_of({{"system", {{"kind", "synthetic"}}}}).find("system.dim"),
            std::string::npos);
  EXPECT_NE(error_of({{"system", {{"kind", "linear"}, {"dim", 0}}}}).find("system.dim"),
            std::string::npos);
}

TEST(ConfigParse, UnknownSystemKindListsTheFamilies) {
  std::string msg = error_of({{"system", {{"kind", "lorenz"}}}});
  EXPECT_NE(msg.find("system.kind"), std::string::npos);
  EXPECT_NE(msg.find("block_concat"), std::string::npos);
}

TEST(ConfigLoad, SyntaxErrorsAreLineAnchored) {
  std::string path = testing::TempDir() + "broken_config.json";
  std::ofstream(path) << "{\n  \"seed\": 1,\n  \"out_dir\" \"oops\"\n}\n";
  try {
    load_config(path);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find(path + ":3:"), std::string::npos) << e.what();
  }
}

TEST(ConfigLoad, MissingFileNamesThePath) {
  try {
    load_config("/nonexistent/nope.json");
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/nope.json"), std::string::npos);
  }
}

TEST(MakeSystem, BuildsEveryFamily) {
  SystemConfig sc;
  sc.kind = "curve_tracking";
  DynamicalSystem ct = make_system(sc);
  EXPECT_EQ(ct.dim, 2);
  EXPECT_NEAR(ct.equilibrium[0], 0.85, 1e-6);

  sc = SystemConfig{};
  sc.kind = "pendulum";
  DynamicalSystem pend = make_system(sc);
  EXPECT_EQ(pend.dim, 2);
  EXPECT_EQ(pend.control_dim, 1);

  sc = SystemConfig{};
  sc.kind = "synthetic";
  sc.dim = 7;
  sc.seed = 3;
  EXPECT_EQ(make_system(sc).dim, 7);

  sc = SystemConfig{};
  sc.kind = "linear";
  sc.dim = 3;
  sc.rate = 2.0;
  DynamicalSystem lin = make_system(sc);
  Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 0.5), f(3);
  lin.eval(x, f);
  EXPECT_NEAR((f + 2.0 * x).norm(), 0.0, 1e-15);

  sc = SystemConfig{};
  sc.kind = "block_concat";
  sc.copies = 3;
  EXPECT_EQ(make_system(sc).dim, 6);  // default base is curve tracking

  SystemConfig base;
  base.kind = "linear";
  base.dim = 3;
  base.rate = 1.0;
  sc.base = std::make_shared<SystemConfig>(base);
  EXPECT_EQ(make_system(sc).dim, 9);
}

TEST(MakeSystem, EquilibriumOverrideIsHonored) {
  SystemConfig sc;
  sc.kind = "curve_tracking";
  sc.equilibrium = Eigen::Vector2d(1.0, 0.0);
  DynamicalSystem sys = make_system(sc);
  EXPECT_DOUBLE_EQ(sys.equilibrium[0], 1.0);
  EXPECT_DOUBLE_EQ(sys.equilibrium[1], 0.0);
}

TEST(MakeSystem, DomainOverrideValidatesShapeAndEquilibrium) {
  SystemConfig sc;
  sc.kind = "linear";
  sc.dim = 2;
  Box b;
  b.lower = Eigen::Vector2d(-2.0, -2.0);
  b.upper = Eigen::Vector2d(2.0, 2.0);
  sc.domain = b;
  DynamicalSystem sys = make_system(sc);
  EXPECT_DOUBLE_EQ(sys.domain.upper[0], 2.0);

  b.lower = Eigen::Vector2d(1.0, 1.0);  // excludes the origin equilibrium
  sc.domain = b;
  EXPECT_THROW(make_system(sc), InputError);

  Box wrong;
  wrong.lower = Eigen::VectorXd::Constant(3, -1.0);
  wrong.upper = Eigen::VectorXd::Constant(3, 1.0);
  sc.domain = wrong;
  EXPECT_THROW(make_system(sc), InputError);
}

TEST(MakeSystem, NormalizeFlagYieldsUnitBoxAndCenteredEquilibrium) {
  SystemConfig sc;
  sc.kind = "pendulum";
  sc.normalize = true;
  DynamicalSystem sys = make_system(sc);
  EXPECT_NEAR((sys.domain.lower + Eigen::Vector2d::Ones()).norm(), 0.0, 1e-12);
  EXPECT_NEAR((sys.domain.upper - Eigen::Vector2d::Ones()).norm(), 0.0, 1e-12);
  EXPECT_NEAR(sys.equilibrium.norm(), 0.0, 1e-12);
}

TEST(MakeModel, DepthCountsWeightLayers) {
  SystemConfig sc;
  sc.kind = "linear";
  sc.dim = 2;
  DynamicalSystem sys = make_system(sc);
  ModelConfig mc;
  mc.depth = 3;
  mc.width = 10;
  LyapunovNet m = make_model(mc, sys, 1);
  EXPECT_EQ(m.phi.layer_widths, (std::vector<int>{2, 10, 10, 1}));
  mc.depth = 1;
  EXPECT_EQ(make_model(mc, sys, 1).phi.layer_widths, (std::vector<int>{2, 1}));
}

TEST(MakeModel, SeedControlsInitialization) {
  SystemConfig sc;
  sc.kind = "linear";
  sc.dim = 2;
  DynamicalSystem sys = make_system(sc);
  ModelConfig mc;
  Eigen::VectorXd a = get_params(make_model(mc, sys, 5).phi);
  Eigen::VectorXd b = get_params(make_model(mc, sys, 5).phi);
  Eigen::VectorXd c = get_params(make_model(mc, sys, 6).phi);
  EXPECT_EQ((a - b).norm(), 0.0);
  EXPECT_GT((a - c).norm(), 0.0);
}

TEST(MakeControl, SizesFromSystemAndRejectsAutonomous) {
  SystemConfig sc;
  sc.kind = "pendulum";
  DynamicalSystem pend = make_system(sc);
  ControlConfig cc;
  cc.present = true;
  ControlLaw law = make_control(cc, pend, 1);
  EXPECT_EQ(law.input_dim(), 2);
  EXPECT_EQ(law.output_dim(), 1);
  ASSERT_TRUE(law.saturation.has_value());
  EXPECT_DOUBLE_EQ(*law.saturation, 6.0);

  cc.saturation = 0.0;
  EXPECT_FALSE(make_control(cc, pend, 1).saturation.has_value());

  sc = SystemConfig{};
  sc.kind = "linear";
  sc.dim = 2;
  EXPECT_THROW(make_control(cc, make_system(sc), 1), InputError);
}

TEST(CertifyOptionsMapping, CopiesFieldsAndRunSeed) {
  RunConfig cfg;
  cfg.seed = 77;
  cfg.certify.delta = 0.2;
  cfg.certify.c = 0.4;
  cfg.certify.gamma_bar = 0.01;
  cfg.certify.m_method = "empirical";
  cfg.certify.m_safety = 2.0;
  cfg.certify.grid_budget = 1e5;
  cfg.certify.m_samples = 11;
  cfg.certify.mc_samples = 22;
  CertifyOptions opt = certify_options(cfg);
  EXPECT_DOUBLE_EQ(opt.delta, 0.2);
  ASSERT_TRUE(opt.c.has_value());
  EXPECT_DOUBLE_EQ(*opt.c, 0.4);
  EXPECT_DOUBLE_EQ(opt.gamma_bar, 0.01);
  EXPECT_EQ(opt.m_method, MMethod::kEmpirical);
  EXPECT_DOUBLE_EQ(opt.m_safety, 2.0);
  EXPECT_DOUBLE_EQ(opt.grid_budget, 1e5);
  EXPECT_EQ(opt.m_samples, 11);
  EXPECT_EQ(opt.mc_samples, 22);
  EXPECT_EQ(opt.seed, 77u);
}

}  // namespace
}  // namespace lyapnet
