#include "lyapnet/train.hpp"

#include <chrono>
#include <cmath>

#include "lyapnet/errors.hpp"
#include "lyapnet/rng.hpp"

namespace lyapnet {

AdamState make_adam(const AdamConfig& cfg, long dim) {
  if (cfg.lr <= 0.0 || cfg.eps <= 0.0 || cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 ||
      cfg.beta2 < 0.0 || cfg.beta2 >= 1.0) {
    throw InputError("invalid Adam configuration");
  }
  AdamState s;
  s.cfg = cfg;
  s.m = Eigen::VectorXd::Zero(dim);
  s.v = Eigen::VectorXd::Zero(dim);
  s.t = 0;
  return s;
}

void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (params.size() != state.m.size() || grad.size() != state.m.size()) {
    throw InputError("Adam step dimension mismatch");
  }
  if (!grad.allFinite()) {
    throw InputError("non-finite gradient at Adam step " + std::to_string(state.t + 1));
  }
  const AdamConfig& c = state.cfg;
  ++state.t;
  state.m = c.beta1 * state.m + (1.0 - c.beta1) * grad;
  state.v = c.beta2 * state.v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  params.array() -=
      c.lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + c.eps);
}

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& tic) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();
}

void check_train_config(const TrainConfig& cfg) {
  if (cfg.max_iters < 1) throw InputError("max_iters must be at least 1");
  if (cfg.tol < 0.0) throw InputError("tol must be non-negative");
  if (cfg.n_samples < 1) throw InputError("n_samples must be positive");
  if (cfg.gamma < 0.0) throw InputError("gamma must be non-negative");
  if (cfg.delta_exclusion < 0.0) throw InputError("delta_exclusion must be non-negative");
}

// Shared evaluate/step/stop skeleton. `eval` computes risk and gradients at
// the current parameters on the given samples; `step` applies one optimizer
// update from those gradients. Row k describes the iterate after k steps.
TrainReport run_loop(const DynamicalSystem& system, const Eigen::VectorXd& x_star,
                     const TrainConfig& cfg, const IterHook& hook,
                     const std::function<RiskValue(const SampleSet&, double*)>& eval,
                     const std::function<void()>& step) {
  check_train_config(cfg);
  TrainReport rep;
  double t_accum = 0.0;
  SampleSet samples;
  for (long k = 0;; ++k) {
    auto tic = std::chrono::steady_clock::now();
    if (k == 0 || cfg.resample_each_iter) {
      samples = sample_uniform(system.domain, cfg.n_samples, cfg.delta_exclusion, x_star,
                               mix_seed(cfg.seed, static_cast<std::uint64_t>(k)));
    }
    RiskValue r;
    double nl = 0.0;
    try {
      r = eval(samples, &nl);
    } catch (const InputError&) {
      throw;
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("training aborted at iteration " + std::to_string(k) + ": " +
                               e.what());
    }
    t_accum += seconds_since(tic);
    rep.curve.push_back({k, t_accum, r.value, nl, r.violation_count, r.max_violation});
    if (hook) hook(k, t_accum);
    if (r.value < cfg.tol) {
      rep.stop_reason = StopReason::kConverged;
      break;
    }
    if (k == cfg.max_iters) {
      rep.stop_reason = StopReason::kMaxIters;
      break;
    }
    tic = std::chrono::steady_clock::now();
    step();
    t_accum += seconds_since(tic);
  }
  rep.final_risk = rep.curve.back().risk;
  rep.iters = rep.curve.back().iter;
  return rep;
}

void check_equilibrium_consistency(const Eigen::VectorXd& model_eq,
                                   const Eigen::VectorXd& system_eq) {
  if (model_eq.size() != system_eq.size() || (model_eq - system_eq).norm() > 1e-9) {
    throw InputError("model equilibrium does not match the system equilibrium");
  }
}

}  // namespace

TrainReport train_lyapunov(LyapunovNet& model, const DynamicalSystem& system,
                           const TrainConfig& cfg, const IterHook& hook) {
  if (system.control_dim != 0) {
    throw InputError("train_lyapunov needs an autonomous system (use train_clf or closed_loop)");
  }
  if (model.dim() != system.dim) throw InputError("model dimension does not match the system");
  check_equilibrium_consistency(model.equilibrium, system.equilibrium);

  Eigen::VectorXd params = get_params(model.phi);
  AdamState adam = make_adam(cfg.adam, params.size());
  Eigen::VectorXd grad(params.size());
  const RiskConfig rcfg = cfg.risk_config();

  auto eval = [&](const SampleSet& s, double* nl) {
    return risk_ln_grad(model, system, s, rcfg, grad, nl);
  };
  auto step = [&]() {
    adam_step(adam, params, grad);
    if (cfg.clip_params) params = params.cwiseMax(-1.0).cwiseMin(1.0);
    set_params(model.phi, params);
  };
  return run_loop(system, model.equilibrium, cfg, hook, eval, step);
}

TrainReport train_clf(LyapunovNet& model, const DynamicalSystem& system, ControlLaw& control,
                      const TrainConfig& cfg, const IterHook& hook) {
  if (system.control_dim == 0) {
    throw InputError("train_clf needs a controlled system (use train_lyapunov)");
  }
  if (model.dim() != system.dim) throw InputError("model dimension does not match the system");
  if (control.input_dim() != system.dim || control.output_dim() != system.control_dim) {
    throw InputError("control dimensions do not match the system");
  }
  check_equilibrium_consistency(model.equilibrium, system.equilibrium);

  Eigen::VectorXd params = get_params(model.phi);
  Eigen::VectorXd cparams = get_params(control.net);
  AdamState adam = make_adam(cfg.adam, params.size());
  AdamConfig ctrl_cfg = cfg.adam;
  if (cfg.control_lr > 0.0) ctrl_cfg.lr = cfg.control_lr;
  AdamState cadam = make_adam(ctrl_cfg, cparams.size());
  Eigen::VectorXd grad(params.size()), cgrad(cparams.size());
  const RiskConfig rcfg = cfg.risk_config();

  auto eval = [&](const SampleSet& s, double* nl) {
    return risk_clf_grad(model, system, control, s, rcfg, grad, cgrad, nl);
  };
  auto step = [&]() {
    adam_step(adam, params, grad);
    if (cfg.clip_params) params = params.cwiseMax(-1.0).cwiseMin(1.0);
    set_params(model.phi, params);
    adam_step(cadam, cparams, cgrad);
    set_params(control.net, cparams);
  };
  return run_loop(system, model.equilibrium, cfg, hook, eval, step);
}

TrainReport train_baseline(Network& net, const DynamicalSystem& system, BaselineKind kind,
                           const TrainConfig& cfg, const IterHook& hook) {
  if (system.control_dim != 0) {
    throw InputError("train_baseline needs an autonomous system (use closed_loop)");
  }
  if (net.input_dim() != system.dim || net.output_dim() != 1) {
    throw InputError("baseline network must map the state space to a scalar");
  }

  Eigen::VectorXd params = get_params(net);
  AdamState adam = make_adam(cfg.adam, params.size());
  Eigen::VectorXd grad(params.size());
  const RiskConfig rcfg = cfg.risk_config();

  auto eval = [&](const SampleSet& s, double* nl) {
    if (kind == BaselineKind::kSquaredHinge) {
      const RiskValue r = risk_dl_grad(net, system, s, rcfg, grad);
      if (nl) *nl = risk_nl(net, system, s).value;
      return r;
    }
    const RiskValue r = risk_nl_grad(net, system, s, grad);
    if (nl) *nl = r.value;
    return r;
  };
  auto step = [&]() {
    adam_step(adam, params, grad);
    set_params(net, params);
  };
  return run_loop(system, system.equilibrium, cfg, hook, eval, step);
}

}  // namespace lyapnet
