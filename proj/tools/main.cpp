#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "lyapnet/commands.hpp"
#include "lyapnet/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Neural Lyapunov candidates: training, certification, and ROA studies"};
  app.require_subcommand(1);

  std::string config_path, model_path, control_path, out_dir;
  std::optional<std::uint64_t> seed;
  bool have_out_dir = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run configuration")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "override the configured seed");
    cmd->add_option("--out-dir", out_dir, "override the configured output directory")
        ->each([&](const std::string&) { have_out_dir = true; });
  };

  CLI::App* train =
      app.add_subcommand("train", "train a candidate (plus a control law when configured)");
  add_common(train);

  CLI::App* certify = app.add_subcommand("certify", "certify a trained model on a covering grid");
  add_common(certify);
  certify->add_option("--model", model_path, "trained model JSON")
      ->required()
      ->check(CLI::ExistingFile);

  CLI::App* roa = app.add_subcommand("roa", "estimate and validate a region of attraction");
  add_common(roa);
  roa->add_option("--model", model_path, "trained model JSON")
      ->required()
      ->check(CLI::ExistingFile);
  roa->add_option("--control", control_path, "trained control-law JSON")
      ->check(CLI::ExistingFile);

  CLI::App* compare =
      app.add_subcommand("compare", "race the training objectives with a shared metric");
  add_common(compare);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return lyapnet::kExitConfig;
  }

  lyapnet::RunConfig cfg;
  try {
    cfg = lyapnet::load_config(config_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return lyapnet::kExitConfig;
  }
  if (seed) {
    cfg.seed = *seed;
    cfg.train.seed = *seed;
  }
  if (have_out_dir) cfg.out_dir = out_dir;

  if (train->parsed()) return lyapnet::cmd_train(cfg);
  if (certify->parsed()) return lyapnet::cmd_certify(cfg, model_path);
  if (roa->parsed()) return lyapnet::cmd_roa(cfg, model_path, control_path);
  return lyapnet::cmd_compare(cfg);
}
