#include "lyapnet/risk.hpp"

#include <cmath>
#include <vector>

#include "lyapnet/errors.hpp"
#include "lyapnet/numeric.hpp"
#include "lyapnet/rng.hpp"

namespace lyapnet {

namespace {

constexpr long kBlock = 4096;

void check_samples(const SampleSet& samples, int dim) {
  if (samples.size() < 1) throw InputError("risk evaluation needs at least one sample");
  if (samples.dim() != dim) throw InputError("sample dimension does not match the system");
}

void check_finite(double value) {
  if (!std::isfinite(value)) throw std::runtime_error("risk evaluation produced non-finite value");
}

struct ViolationStats {
  long count = 0;
  double max_arg = 0.0;
  void note(double arg) {
    if (arg > 0.0) {
      ++count;
      if (arg > max_arg) max_arg = arg;
    }
  }
};

// d f / d u at (x, u): analytic when available, central differences otherwise.
void control_jacobian_at(const DynamicalSystem& system, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, Eigen::MatrixXd& out) {
  if (system.control_jacobian) {
    system.control_jacobian(x, u, out);
    return;
  }
  const int n = system.control_dim;
  out.resize(system.dim, n);
  Eigen::VectorXd up = u, um = u, fp(system.dim), fm(system.dim);
  for (int j = 0; j < n; ++j) {
    const double h = 1e-6 * (1.0 + std::abs(u[j]));
    up[j] = u[j] + h;
    um[j] = u[j] - h;
    system.field(x, up, fp);
    system.field(x, um, fm);
    out.col(j) = (fp - fm) / (2.0 * h);
    up[j] = u[j];
    um[j] = u[j];
  }
}

// Shared implementation for the decrease-condition hinge risks. `control` is
// null for the autonomous case. When `grad` is non-null the parameter
// gradient of phi is accumulated (and of the control net into grad_control).
RiskValue hinge_risk_impl(const LyapunovNet& model, const DynamicalSystem& system,
                          const ControlLaw* control, const SampleSet& samples,
                          const RiskConfig& cfg, Eigen::VectorXd* grad,
                          Eigen::VectorXd* grad_control, double* nl_metric) {
  check_samples(samples, model.dim());
  if (control == nullptr && system.control_dim != 0) {
    throw InputError("autonomous risk on a controlled system (wrap with closed_loop or use the "
                     "control-law variant)");
  }
  if (control != nullptr) {
    if (system.control_dim == 0) throw InputError("control-law risk on an autonomous system");
    if (control->input_dim() != system.dim || control->output_dim() != system.control_dim) {
      throw InputError("control dimensions do not match the system");
    }
  }

  const long n = samples.size();
  const int d = model.dim();
  LyapWorkspace lws(model);
  NetWorkspace cws;
  if (control != nullptr) cws.resize(control->net);

  std::vector<double> terms(n, 0.0);
  std::vector<double> nl_terms;
  if (nl_metric != nullptr) nl_terms.assign(n, 0.0);
  ViolationStats stats;

  std::vector<Eigen::VectorXd> grad_blocks, ctrl_blocks;
  std::vector<double> star_seeds;
  GradAccumulator* acc = nullptr;
  GradAccumulator* cacc = nullptr;
  GradAccumulator acc_storage = GradAccumulator(model.phi);
  GradAccumulator cacc_storage =
      control != nullptr ? GradAccumulator(control->net) : GradAccumulator(model.phi);
  if (grad != nullptr) acc = &acc_storage;
  if (grad_control != nullptr && control != nullptr) cacc = &cacc_storage;

  Eigen::VectorXd x(d), e(d), fx(d), grad_v(d), raw, u, cot_u, cot_raw;
  Eigen::MatrixXd jfu;
  double star_seed_block = 0.0;
  static const Eigen::VectorXd kEmpty;

  for (long i = 0; i < n; ++i) {
    x = samples.points.row(i).transpose();
    const JointEval je = forward_joint_ws(model.phi, x, lws.net_ws());
    const double uval = je.value - lws.phi_star();
    const double dpsi = psi_deriv(model.psi, uval, model.huber_delta);
    const double ddpsi = psi_second(model.psi, uval, model.huber_delta);
    e = x - model.equilibrium;
    grad_v = dpsi * je.input_grad + model.alpha_bar * aug_grad(model.augmentation, e);

    if (control != nullptr) {
      forward_vec_ws(control->net, x, cws, raw);
      if (control->saturation) {
        u = (*control->saturation) * raw.array().tanh();
      } else {
        u = raw;
      }
      system.field(x, u, fx);
    } else {
      system.field(x, kEmpty, fx);
    }

    const double dvf = grad_v.dot(fx);
    const double h = dvf + cfg.gamma * e.norm();
    if (h > 0.0) terms[i] = h * h;
    stats.note(h);
    if (nl_metric != nullptr) {
      const double v = psi_value(model.psi, uval, model.huber_delta) +
                       model.alpha_bar * aug_value(model.augmentation, e);
      nl_terms[i] = (dvf > 0.0 ? dvf : 0.0) + (v < 0.0 ? -v : 0.0);
    }

    if (h > 0.0 && (acc != nullptr || cacc != nullptr)) {
      const double w = 2.0 * h;
      if (acc != nullptr) {
        const double wv = w * ddpsi * je.input_grad.dot(fx);
        acc->add(x, wv, (w * dpsi) * fx);
        star_seed_block -= wv;
      }
      if (cacc != nullptr) {
        control_jacobian_at(system, x, u, jfu);
        cot_u.noalias() = w * (jfu.transpose() * grad_v);
        if (control->saturation) {
          const double b = *control->saturation;
          cot_raw = cot_u;
          for (Eigen::Index j = 0; j < cot_raw.size(); ++j) {
            const double t = std::tanh(raw[j]);
            cot_raw[j] *= b * (1.0 - t * t);
          }
          cacc->add_value_seed(x, cot_raw);
        } else {
          cacc->add_value_seed(x, cot_u);
        }
      }
    }

    if ((i + 1) % kBlock == 0 || i + 1 == n) {
      if (acc != nullptr) {
        grad_blocks.push_back(acc->take());
        star_seeds.push_back(star_seed_block);
        star_seed_block = 0.0;
      }
      if (cacc != nullptr) ctrl_blocks.push_back(cacc->take());
    }
  }

  RiskValue out;
  out.value = pairwise_mean(terms);
  out.violation_count = stats.count;
  out.max_violation = stats.max_arg;
  check_finite(out.value);
  if (nl_metric != nullptr) *nl_metric = pairwise_mean(nl_terms);

  if (acc != nullptr) {
    Eigen::VectorXd g = pairwise_sum_vectors(grad_blocks);
    const double star = pairwise_sum(star_seeds);
    if (star != 0.0) {
      GradAccumulator sacc(model.phi);
      sacc.add(model.equilibrium, star, kEmpty);
      g += sacc.take();
    }
    *grad = g / static_cast<double>(n);
    if (!grad->allFinite()) throw std::runtime_error("risk gradient is non-finite");
  }
  if (cacc != nullptr) {
    *grad_control = pairwise_sum_vectors(ctrl_blocks) / static_cast<double>(n);
    if (!control->train_bias) zero_bias_entries(control->net, *grad_control);
    if (!grad_control->allFinite()) throw std::runtime_error("control gradient is non-finite");
  }
  return out;
}

// Shared implementation for the two plain-network baselines.
RiskValue baseline_risk_impl(const Network& net, const DynamicalSystem& system,
                             const SampleSet& samples, const RiskConfig& cfg, bool squared_form,
                             Eigen::VectorXd* grad) {
  check_samples(samples, system.dim);
  if (net.input_dim() != system.dim || net.output_dim() != 1) {
    throw InputError("baseline risk needs a scalar net matching the system dimension");
  }
  if (system.control_dim != 0) {
    throw InputError("baseline risk on a controlled system (wrap with closed_loop)");
  }
  const long n = samples.size();
  const int d = system.dim;
  NetWorkspace ws(net);
  std::vector<double> terms(n, 0.0);
  ViolationStats stats;
  std::vector<Eigen::VectorXd> grad_blocks;
  GradAccumulator acc(net);

  Eigen::VectorXd x(d), e(d), fx(d);
  static const Eigen::VectorXd kEmpty;
  for (long i = 0; i < n; ++i) {
    x = samples.points.row(i).transpose();
    const JointEval je = forward_joint_ws(net, x, ws);
    e = x - system.equilibrium;
    system.field(x, kEmpty, fx);
    const double dvf = je.input_grad.dot(fx);
    if (squared_form) {
      const double e2 = e.squaredNorm();
      const double t1 = std::max(dvf + e2, 0.0);
      const double t2 = std::max(cfg.dl_upper * e2 - je.value, 0.0);
      const double t3 = std::max(je.value - cfg.dl_lower * e2, 0.0);
      terms[i] = t1 * t1 + t2 * t2 + t3 * t3;
      stats.note(t1);
      stats.note(t2);
      stats.note(t3);
      if (grad != nullptr && (t1 > 0.0 || t2 > 0.0 || t3 > 0.0)) {
        acc.add(x, 2.0 * (t3 - t2), (2.0 * t1) * fx);
      }
    } else {
      const double t1 = std::max(dvf, 0.0);
      const double t2 = std::max(-je.value, 0.0);
      terms[i] = t1 + t2;
      stats.note(dvf);
      stats.note(-je.value);
      if (grad != nullptr && (t1 > 0.0 || t2 > 0.0)) {
        const double wv = t2 > 0.0 ? -1.0 : 0.0;
        if (t1 > 0.0) {
          acc.add(x, wv, fx);
        } else {
          acc.add(x, wv, kEmpty);
        }
      }
    }
    if (grad != nullptr && ((i + 1) % kBlock == 0 || i + 1 == n)) {
      grad_blocks.push_back(acc.take());
    }
  }

  RiskValue out;
  out.value = pairwise_mean(terms);
  out.violation_count = stats.count;
  out.max_violation = stats.max_arg;

  if (grad != nullptr) {
    *grad = pairwise_sum_vectors(grad_blocks) / static_cast<double>(n);
  }
  if (!squared_form) {
    // Origin anchor W(x*)^2; counts as one violation when non-zero.
    const double vstar = forward_value_ws(net, system.equilibrium, ws);
    out.value += vstar * vstar;
    if (vstar != 0.0) {
      ++out.violation_count;
      out.max_violation = std::max(out.max_violation, std::abs(vstar));
      if (grad != nullptr) {
        acc.add(system.equilibrium, 2.0 * vstar, kEmpty);
        *grad += acc.take();
      }
    }
  }
  check_finite(out.value);
  if (grad != nullptr && !grad->allFinite()) {
    throw std::runtime_error("risk gradient is non-finite");
  }
  return out;
}

}  // namespace

SampleSet sample_uniform(const Box& domain, long n, double delta_excluded,
                         const Eigen::VectorXd& x_star, std::uint64_t seed) {
  const int d = domain.dim();
  if (n < 1) throw InputError("sample count must be positive");
  if (d < 1 || domain.upper.size() != d) throw InputError("malformed sampling domain");
  for (int i = 0; i < d; ++i) {
    if (!(domain.lower[i] < domain.upper[i])) {
      throw InputError("sampling domain must have positive extent on every axis");
    }
  }
  if (delta_excluded < 0.0) throw InputError("exclusion radius must be non-negative");
  if (delta_excluded > 0.0 && x_star.size() != d) {
    throw InputError("exclusion center dimension does not match the domain");
  }

  SampleSet out;
  out.points.resize(n, d);
  out.domain = domain;
  out.delta_excluded = delta_excluded;
  out.seed = seed;

  Rng rng(seed);
  Eigen::VectorXd x(d);
  long attempts = 0, accepted = 0;
  const long hard_cap = 1000 * n + 100000;
  for (long i = 0; i < n; ++i) {
    for (;;) {
      ++attempts;
      for (int j = 0; j < d; ++j) x[j] = rng.uniform(domain.lower[j], domain.upper[j]);
      if (delta_excluded == 0.0 || (x - x_star).norm() >= delta_excluded) {
        out.points.row(i) = x.transpose();
        ++accepted;
        break;
      }
      if (attempts > 10000 && accepted * 100 < attempts) {
        throw InputError("exclusion ball rejects more than 99% of draws; shrink delta");
      }
      if (attempts > hard_cap) {
        throw InputError("uniform sampling failed to fill the requested count");
      }
    }
  }
  return out;
}

RiskValue risk_ln(const LyapunovNet& model, const DynamicalSystem& system,
                  const SampleSet& samples, const RiskConfig& cfg) {
  return hinge_risk_impl(model, system, nullptr, samples, cfg, nullptr, nullptr, nullptr);
}

RiskValue risk_clf(const LyapunovNet& model, const DynamicalSystem& system,
                   const ControlLaw& control, const SampleSet& samples, const RiskConfig& cfg) {
  return hinge_risk_impl(model, system, &control, samples, cfg, nullptr, nullptr, nullptr);
}

RiskValue risk_dl(const Network& net, const DynamicalSystem& system, const SampleSet& samples,
                  const RiskConfig& cfg) {
  return baseline_risk_impl(net, system, samples, cfg, true, nullptr);
}

RiskValue risk_nl(const Network& net, const DynamicalSystem& system, const SampleSet& samples) {
  RiskConfig cfg;
  return baseline_risk_impl(net, system, samples, cfg, false, nullptr);
}

RiskValue risk_nl(const LyapunovNet& model, const DynamicalSystem& system,
                  const SampleSet& samples) {
  // Evaluate the unsquared objective through lyap_eval; gradients are not
  // offered for this metric-only path.
  check_samples(samples, model.dim());
  if (system.control_dim != 0) {
    throw InputError("baseline metric on a controlled system (wrap with closed_loop)");
  }
  const long n = samples.size();
  LyapWorkspace ws(model);
  std::vector<double> terms(n, 0.0);
  ViolationStats stats;
  Eigen::VectorXd x(model.dim()), fx(model.dim());
  static const Eigen::VectorXd kEmpty;
  for (long i = 0; i < n; ++i) {
    x = samples.points.row(i).transpose();
    const LyapEval ev = lyap_eval_ws(model, x, ws);
    system.field(x, kEmpty, fx);
    const double dvf = ev.grad.dot(fx);
    terms[i] = std::max(dvf, 0.0) + std::max(-ev.value, 0.0);
    stats.note(dvf);
    stats.note(-ev.value);
  }
  RiskValue out;
  out.value = pairwise_mean(terms);
  const double vstar = lyap_eval_ws(model, model.equilibrium, ws).value;
  out.value += vstar * vstar;  // exactly zero by construction
  if (vstar != 0.0) {
    ++stats.count;
    stats.max_arg = std::max(stats.max_arg, std::abs(vstar));
  }
  out.violation_count = stats.count;
  out.max_violation = stats.max_arg;
  check_finite(out.value);
  return out;
}

RiskValue risk_ln_grad(const LyapunovNet& model, const DynamicalSystem& system,
                       const SampleSet& samples, const RiskConfig& cfg, Eigen::VectorXd& grad,
                       double* nl_metric) {
  return hinge_risk_impl(model, system, nullptr, samples, cfg, &grad, nullptr, nl_metric);
}

RiskValue risk_clf_grad(const LyapunovNet& model, const DynamicalSystem& system,
                        const ControlLaw& control, const SampleSet& samples,
                        const RiskConfig& cfg, Eigen::VectorXd& grad_model,
                        Eigen::VectorXd& grad_control, double* nl_metric) {
  return hinge_risk_impl(model, system, &control, samples, cfg, &grad_model, &grad_control,
                         nl_metric);
}

RiskValue risk_dl_grad(const Network& net, const DynamicalSystem& system,
                       const SampleSet& samples, const RiskConfig& cfg, Eigen::VectorXd& grad) {
  return baseline_risk_impl(net, system, samples, cfg, true, &grad);
}

RiskValue risk_nl_grad(const Network& net, const DynamicalSystem& system,
                       const SampleSet& samples, Eigen::VectorXd& grad) {
  RiskConfig cfg;
  return baseline_risk_impl(net, system, samples, cfg, false, &grad);
}

}  // namespace lyapnet
