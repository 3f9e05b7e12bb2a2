#pragma once

#include <string>

#include "lyapnet/config.hpp"

namespace lyapnet {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;             // success / certified
inline constexpr int kExitConfig = 1;         // bad config, inputs, or files
inline constexpr int kExitMaxIters = 2;       // training stopped on the iteration cap
inline constexpr int kExitGridBudget = 3;     // covering grid exceeds its budget
inline constexpr int kExitUnsupportedDim = 4; // command needs a different dimension
inline constexpr int kExitNotCertified = 5;   // certificate produced but verdict negative

// Trains the configured candidate (jointly with a control law when the
// config has a "control" block). Writes config_effective.json, model.json,
// control.json (when trained), risk.csv, summary.json into cfg.out_dir.
int cmd_train(const RunConfig& cfg);
int cmd_train(const std::string& config_path);

// Certifies a trained model against the configured system. Writes
// certificate.json; on a blown grid budget writes mc_audit.json instead and
// returns kExitGridBudget.
int cmd_certify(const RunConfig& cfg, const std::string& model_path);
int cmd_certify(const std::string& config_path, const std::string& model_path);

// Level-set region-of-attraction study for 2d systems; control_path supplies
// the feedback for controlled systems ("" = none). Writes roa_grid.csv,
// roa_trajectories.csv, roa_summary.json.
int cmd_roa(const RunConfig& cfg, const std::string& model_path,
            const std::string& control_path = "");
int cmd_roa(const std::string& config_path, const std::string& model_path,
            const std::string& control_path = "");

// Races the configured training objectives on one system with a shared
// held-out metric; writes compare.csv and compare_summary.json.
int cmd_compare(const RunConfig& cfg);
int cmd_compare(const std::string& config_path);

}  // namespace lyapnet
