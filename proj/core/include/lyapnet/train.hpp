#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "lyapnet/risk.hpp"

namespace lyapnet {

struct AdamConfig {
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  Eigen::VectorXd m, v;  // first/second moment accumulators
  long t = 0;            // completed steps
};

AdamState make_adam(const AdamConfig& cfg, long dim);

// Bias-corrected update: params -= lr * mhat / (sqrt(vhat) + eps).
// Throws InputError on non-finite gradients, reporting the step index.
void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grad);

enum class StopReason { kConverged, kMaxIters };

struct TrainConfig {
  long max_iters = 500;
  double tol = 1e-4;        // stop once the empirical risk drops below this
  long n_samples = 100000;
  double gamma = 0.1;
  double delta_exclusion = 0.0;
  bool resample_each_iter = true;
  bool clip_params = true;  // project trained weights onto [-1,1] after steps
  std::uint64_t seed = 0;
  AdamConfig adam;
  double control_lr = -1.0;  // learning rate for the control net; <0 reuses adam.lr
  double dl_upper = 20.0;    // squared-hinge baseline sandwich
  double dl_lower = 0.2;

  RiskConfig risk_config() const {
    RiskConfig r;
    r.gamma = gamma;
    r.dl_upper = dl_upper;
    r.dl_lower = dl_lower;
    return r;
  }
};

// One row per evaluated iterate. Row `iter` describes the parameters after
// `iter` optimizer steps; wall_clock_s counts compute time only (sampling,
// risk/gradient evaluation, stepping), never logging or hook evaluation.
struct TrainRow {
  long iter = 0;
  double wall_clock_s = 0.0;
  double risk = 0.0;
  double nl_metric = 0.0;  // unsquared-baseline metric on the same samples
  long violation_count = 0;
  double max_violation = 0.0;
};

struct TrainReport {
  std::vector<TrainRow> curve;
  StopReason stop_reason = StopReason::kMaxIters;
  double final_risk = 0.0;
  long iters = 0;  // optimizer steps taken
};

// Called once per recorded row, outside the timed sections; useful for
// held-out metric tracking.
using IterHook = std::function<void(long iter, double wall_clock_s)>;

// Minimizes the hinge risk over phi's parameters in place. Sampling is
// deterministic per cfg.seed (fresh draw every iteration when
// resample_each_iter, one fixed set otherwise).
TrainReport train_lyapunov(LyapunovNet& model, const DynamicalSystem& system,
                           const TrainConfig& cfg, const IterHook& hook = {});

// Joint descent on the model and a control law: both gradients come from the
// same sample pass, each parameter set has its own Adam state. The control
// net is not clipped (its outputs are bounded by the saturation instead).
TrainReport train_clf(LyapunovNet& model, const DynamicalSystem& system, ControlLaw& control,
                      const TrainConfig& cfg, const IterHook& hook = {});

enum class BaselineKind { kSquaredHinge, kUnsquared };

// Trains a plain network on one of the baseline objectives; no weight
// clipping (those formulations put no box on the parameters). The nl_metric
// column holds the unsquared objective on the same samples.
TrainReport train_baseline(Network& net, const DynamicalSystem& system, BaselineKind kind,
                           const TrainConfig& cfg, const IterHook& hook = {});

}  // namespace lyapnet
