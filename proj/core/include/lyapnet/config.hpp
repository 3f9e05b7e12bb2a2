#pragma once

#include <cstdint>
#include <optional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lyapnet/certify.hpp"
#include "lyapnet/dynamics.hpp"
#include "lyapnet/lyapunov_net.hpp"
#include "lyapnet/train.hpp"

namespace lyapnet {

// "system" block: which vector field to study and how to present it.
// `dim` must be spelled out for the synthetic and linear families; the other
// families fix it themselves. `normalize` wraps the field so its domain
// becomes [-1,1]^d with the equilibrium at the origin, the form certification
// needs.
struct SystemConfig {
  std::string kind = "synthetic";  // curve_tracking | pendulum | synthetic | block_concat | linear
  int dim = 2;
  std::uint64_t seed = 0;      // synthetic coefficient draw
  double rate = 1.0;           // linear only: f(x) = -rate * x
  int copies = 2;              // block_concat only
  std::shared_ptr<SystemConfig> base;  // block_concat only; absent = curve_tracking
  bool normalize = false;
  std::optional<Eigen::VectorXd> equilibrium;  // curve_tracking override
  std::optional<Box> domain;                   // replaces the family default
  long lipschitz_samples = 20000;  // slope estimation when no analytic bound exists
};

// "model" block. `depth` counts weight layers, so depth 3 / width 10 on a
// d-dimensional system gives phi shape {d, 10, 10, 1}.
struct ModelConfig {
  int depth = 3;
  int width = 10;
  std::string activation = "repu";
  double alpha_bar = 0.5;
  std::string psi = "abs";
  std::string augmentation = "norm";
  double huber_delta = 0.1;
};

// "control" block: a saturated linear state feedback trained jointly with
// the Lyapunov candidate. saturation <= 0 removes the squashing.
struct ControlConfig {
  bool present = false;
  double saturation = 6.0;
  bool train_bias = false;
};

// "certify" block; mirrors CertifyOptions (seed comes from the run).
struct CertifyConfig {
  double delta = 0.1;
  std::optional<double> c;  // absent ("auto") picks 0.95 * gamma_bar / M
  double gamma_bar = 0.05;
  std::string m_method = "analytic";
  double m_safety = 1.5;
  double grid_budget = 1e7;
  long m_samples = 20000;
  long mc_samples = 100000;
};

// "roa" block: 2d level-set estimation plus trajectory validation.
struct RoaConfig {
  int resolution = 401;
  double exclusion_radius = 0.0;
  double delta_target = 0.05;
  double t_max = 20.0;
  double h = 0.01;
  long n_starts = 100;
  long n_trajectories = 10;  // sample trajectories written for plotting
};

// "compare" block: which training objectives race on the shared system.
struct CompareConfig {
  std::vector<std::string> methods = {"ln", "dl", "nl"};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  long n_metric = 10000;  // held-out sample count for the common metric
  std::string dl_activation = "softplus";
  std::string nl_activation = "tanh";
};

// Whole run: one file drives any command; commands read the blocks they
// need. wall_clock "zero" writes 0 into every timing column so artifacts
// become byte-reproducible across machines.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  std::string wall_clock = "measured";  // measured | zero
  SystemConfig system;
  ModelConfig model;
  ControlConfig control;
  TrainConfig train;
  CertifyConfig certify;
  RoaConfig roa;
  CompareConfig compare;
};

// Strict parse: unknown keys, malformed values, and out-of-range settings
// all throw InputError naming the dotted key path.
RunConfig config_from_json(const nlohmann::json& j);

// Reads and parses `path`; JSON syntax errors report path:line.
RunConfig load_config(const std::string& path);

// Defaults-resolved echo; config_from_json(config_to_json(cfg)) reproduces
// cfg exactly.
nlohmann::json config_to_json(const RunConfig& cfg);

// Builds the configured field, applying the domain override and optional
// normalization. Throws InputError on inconsistent settings.
DynamicalSystem make_system(const SystemConfig& sc);

// Layer widths of the configured phi on a dim-dimensional state:
// {dim, width x (depth-1), 1}.
std::vector<int> model_widths(const ModelConfig& mc, int dim);

// Fresh candidate with the configured shape, anchored at the system
// equilibrium; weight initialization is deterministic in `seed`.
LyapunovNet make_model(const ModelConfig& mc, const DynamicalSystem& system, std::uint64_t seed);

// Saturated linear feedback sized for the system's control channel.
ControlLaw make_control(const ControlConfig& cc, const DynamicalSystem& system,
                        std::uint64_t seed);

// CertifyConfig + run seed -> the options certify() consumes.
CertifyOptions certify_options(const RunConfig& cfg);

}  // namespace lyapnet
