#include "lyapnet/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <nlohmann/json.hpp>

#include "lyapnet/errors.hpp"
#include "lyapnet/rng.hpp"

namespace lyapnet {

namespace {
constexpr std::uint64_t kSaltSynthetic = 0x73796e7468ULL;
constexpr std::uint64_t kSaltLipschitz = 0x6c697073ULL;
constexpr std::uint64_t kSaltControl = 0x6374726cULL;
}  // namespace

bool Box::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] < lower[i] - tol || x[i] > upper[i] + tol) return false;
  }
  return true;
}

Box Box::centered_unit(int dim) {
  return Box{Eigen::VectorXd::Constant(dim, -1.0), Eigen::VectorXd::Constant(dim, 1.0)};
}

void DynamicalSystem::eval(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
  if (control_dim != 0) {
    throw InputError("system '" + name + "' needs a control input (wrap with closed_loop)");
  }
  static const Eigen::VectorXd kNoControl;
  out.resize(dim);
  field(x, kNoControl, out);
}

void DynamicalSystem::eval(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                           Eigen::VectorXd& out) const {
  if (u.size() != control_dim) {
    throw InputError("control input has dimension " + std::to_string(u.size()) + ", expected " +
                     std::to_string(control_dim));
  }
  out.resize(dim);
  field(x, u, out);
}

Eigen::VectorXd DynamicalSystem::f(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(dim);
  eval(x, out);
  return out;
}

Eigen::VectorXd DynamicalSystem::f(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  Eigen::VectorXd out(dim);
  eval(x, u, out);
  return out;
}

void ControlLaw::eval(const Eigen::VectorXd& x, NetWorkspace& ws, Eigen::VectorXd& out) const {
  forward_vec_ws(net, x, ws, out);
  if (saturation) {
    const double b = *saturation;
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = b * std::tanh(out[i]);
  }
}

Eigen::VectorXd ControlLaw::operator()(const Eigen::VectorXd& x) const {
  NetWorkspace ws(net);
  Eigen::VectorXd out;
  eval(x, ws, out);
  return out;
}

ControlLaw make_linear_control(int state_dim, int control_dim, std::uint64_t seed,
                               std::optional<double> saturation) {
  if (state_dim <= 0 || control_dim <= 0) throw InputError("control dimensions must be positive");
  if (saturation && *saturation <= 0.0) throw InputError("saturation bound must be positive");
  ControlLaw c;
  c.net = xavier_init({state_dim, control_dim}, Activation::kTanh, mix_seed(seed, kSaltControl));
  c.saturation = saturation;
  c.train_bias = false;
  return c;
}

nlohmann::json control_to_json(const ControlLaw& c) {
  nlohmann::json j;
  j["network"] = network_to_json(c.net);
  if (c.saturation) {
    j["saturation"] = *c.saturation;
  } else {
    j["saturation"] = nullptr;
  }
  j["train_bias"] = c.train_bias;
  return j;
}

ControlLaw control_from_json(const nlohmann::json& j) {
  try {
    ControlLaw c;
    c.net = network_from_json(j.at("network"));
    if (j.contains("saturation") && !j.at("saturation").is_null()) {
      c.saturation = j.at("saturation").get<double>();
    }
    c.train_bias = j.value("train_bias", false);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed control JSON: ") + e.what());
  }
}

DynamicalSystem curve_tracking(std::optional<Eigen::Vector2d> equilibrium_override) {
  constexpr double kRho0 = 1.0;
  constexpr double kMu = 6.42;
  constexpr double kOffset = 0.15;
  DynamicalSystem s;
  s.dim = 2;
  s.control_dim = 0;
  s.field = [](const Eigen::VectorXd& x, const Eigen::VectorXd&, Eigen::VectorXd& out) {
    const double rho = x[0], phi = x[1];
    out[0] = -std::sin(phi);
    out[1] = (rho - kRho0) * std::cos(phi) - kMu * std::sin(phi) + kOffset;
  };
  s.domain.lower = Eigen::Vector2d(0.0, -M_PI / 2.0);
  s.domain.upper = Eigen::Vector2d(2.0, M_PI / 2.0);
  // The field vanishes at rho = rho0 - offset, phi = 0.
  s.equilibrium = equilibrium_override ? Eigen::VectorXd(*equilibrium_override)
                                       : Eigen::VectorXd(Eigen::Vector2d(kRho0 - kOffset, 0.0));
  s.name = "curve_tracking";
  return s;
}

DynamicalSystem pendulum() {
  constexpr double kGravity = 0.7365;  // m g l
  constexpr double kDamping = 0.1;
  constexpr double kInertia = 0.0375;  // m l^2
  DynamicalSystem s;
  s.dim = 2;
  s.control_dim = 1;
  s.field = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::VectorXd& out) {
    out[0] = x[1];
    out[1] = (kGravity * std::sin(x[0]) - kDamping * x[1] + u[0]) / kInertia;
  };
  s.control_jacobian = [](const Eigen::VectorXd&, const Eigen::VectorXd&, Eigen::MatrixXd& out) {
    out.setZero(2, 1);
    out(1, 0) = 1.0 / kInertia;
  };
  s.domain.lower = Eigen::Vector2d(-M_PI, -8.0);
  s.domain.upper = Eigen::Vector2d(M_PI, 8.0);
  s.equilibrium = Eigen::Vector2d(0.0, 0.0);
  s.name = "pendulum";
  return s;
}

DynamicalSystem synthetic(int dim, std::uint64_t seed) {
  if (dim <= 0) throw InputError("synthetic system dimension must be positive");
  Rng rng(mix_seed(seed, kSaltSynthetic));
  Eigen::VectorXd diag(dim);
  for (int i = 0; i < dim; ++i) diag[i] = rng.uniform(0.5, 2.0);
  auto coupling = std::make_shared<Eigen::MatrixXd>(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) (*coupling)(i, j) = rng.uniform(-1.0, 1.0);
  }
  const double cnorm = coupling->norm();  // Frobenius, >= spectral
  const double eps = cnorm > 0.0 ? 0.25 * diag.minCoeff() / cnorm : 0.0;

  DynamicalSystem s;
  s.dim = dim;
  s.control_dim = 0;
  auto d = std::make_shared<Eigen::VectorXd>(std::move(diag));
  s.field = [d, coupling, eps](const Eigen::VectorXd& x, const Eigen::VectorXd&,
                               Eigen::VectorXd& out) {
    Eigen::VectorXd t = x.array().tanh();
    out.noalias() = *coupling * t;
    out *= eps;
    out -= d->cwiseProduct(x);
  };
  s.domain = Box::centered_unit(dim);
  s.equilibrium = Eigen::VectorXd::Zero(dim);
  s.lipschitz_bound = d->maxCoeff() + eps * cnorm;
  s.name = "synthetic" + std::to_string(dim);
  return s;
}

DynamicalSystem linear_system(int dim, double rate) {
  if (dim <= 0) throw InputError("linear system dimension must be positive");
  if (rate == 0.0 || !std::isfinite(rate)) throw InputError("linear system rate must be finite and non-zero");
  DynamicalSystem s;
  s.dim = dim;
  s.control_dim = 0;
  s.field = [rate](const Eigen::VectorXd& x, const Eigen::VectorXd&, Eigen::VectorXd& out) {
    out = -rate * x;
  };
  s.domain = Box::centered_unit(dim);
  s.equilibrium = Eigen::VectorXd::Zero(dim);
  s.lipschitz_bound = std::abs(rate);
  s.name = "linear" + std::to_string(dim);
  return s;
}

DynamicalSystem block_concat(const DynamicalSystem& base, int copies) {
  if (copies <= 0) throw InputError("block_concat needs at least one copy");
  if (base.control_dim != 0) throw InputError("block_concat supports autonomous systems only");
  const int d = base.dim;
  auto inner = std::make_shared<DynamicalSystem>(base);
  DynamicalSystem s;
  s.dim = d * copies;
  s.control_dim = 0;
  s.field = [inner, d, copies](const Eigen::VectorXd& x, const Eigen::VectorXd&,
                               Eigen::VectorXd& out) {
    Eigen::VectorXd xi(d), fi(d);
    static const Eigen::VectorXd kNoControl;
    for (int k = 0; k < copies; ++k) {
      xi = x.segment(k * d, d);
      inner->field(xi, kNoControl, fi);
      out.segment(k * d, d) = fi;
    }
  };
  s.domain.lower.resize(s.dim);
  s.domain.upper.resize(s.dim);
  s.equilibrium.resize(s.dim);
  for (int k = 0; k < copies; ++k) {
    s.domain.lower.segment(k * d, d) = base.domain.lower;
    s.domain.upper.segment(k * d, d) = base.domain.upper;
    s.equilibrium.segment(k * d, d) = base.equilibrium;
  }
  s.lipschitz_bound = base.lipschitz_bound;  // block-diagonal Jacobian, same norm
  s.name = base.name + "_x" + std::to_string(copies);
  return s;
}

DynamicalSystem normalize(const DynamicalSystem& system) {
  const int d = system.dim;
  Eigen::VectorXd h(d);
  for (int i = 0; i < d; ++i) {
    h[i] = std::min(system.equilibrium[i] - system.domain.lower[i],
                    system.domain.upper[i] - system.equilibrium[i]);
    if (!(h[i] > 0.0)) {
      throw InputError("normalize: equilibrium must be strictly inside the domain (axis " +
                       std::to_string(i) + ")");
    }
  }
  auto inner = std::make_shared<DynamicalSystem>(system);
  auto scale = std::make_shared<Eigen::VectorXd>(h);
  auto center = std::make_shared<Eigen::VectorXd>(system.equilibrium);

  DynamicalSystem s;
  s.dim = d;
  s.control_dim = system.control_dim;
  s.field = [inner, scale, center](const Eigen::VectorXd& y, const Eigen::VectorXd& u,
                                   Eigen::VectorXd& out) {
    Eigen::VectorXd x = *center + scale->cwiseProduct(y);
    inner->field(x, u, out);
    out.array() /= scale->array();
  };
  if (system.control_jacobian) {
    s.control_jacobian = [inner, scale, center](const Eigen::VectorXd& y, const Eigen::VectorXd& u,
                                                Eigen::MatrixXd& out) {
      Eigen::VectorXd x = *center + scale->cwiseProduct(y);
      inner->control_jacobian(x, u, out);
      out.array().colwise() /= scale->array();
    };
  }
  if (system.lipschitz_bound) {
    s.lipschitz_bound = *system.lipschitz_bound * h.maxCoeff() / h.minCoeff();
  }
  s.domain = Box::centered_unit(d);
  s.equilibrium = Eigen::VectorXd::Zero(d);
  s.name = system.name + "_normalized";
  return s;
}

DynamicalSystem closed_loop(const DynamicalSystem& system, const ControlLaw& control) {
  if (system.control_dim == 0) throw InputError("closed_loop: system is already autonomous");
  if (control.input_dim() != system.dim || control.output_dim() != system.control_dim) {
    throw InputError("closed_loop: control dimensions do not match the system");
  }
  auto inner = std::make_shared<DynamicalSystem>(system);
  auto ctrl = std::make_shared<ControlLaw>(control);
  DynamicalSystem s;
  s.dim = system.dim;
  s.control_dim = 0;
  s.field = [inner, ctrl](const Eigen::VectorXd& x, const Eigen::VectorXd&, Eigen::VectorXd& out) {
    const Eigen::VectorXd u = (*ctrl)(x);
    inner->field(x, u, out);
  };
  s.domain = system.domain;
  s.equilibrium = system.equilibrium;  // exact when u vanishes at x*
  s.name = system.name + "+u";
  return s;
}

namespace {

// Central-difference Jacobian; the fields are defined slightly outside the
// study box, so no clamping is needed.
Eigen::MatrixXd fd_jacobian(const DynamicalSystem& s, const Eigen::VectorXd& x) {
  const int d = s.dim;
  Eigen::MatrixXd jac(d, d);
  Eigen::VectorXd xp = x, xm = x, fp(d), fm(d);
  for (int j = 0; j < d; ++j) {
    const double h = 1e-6 * (1.0 + std::abs(x[j]));
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    s.eval(xp, fp);
    s.eval(xm, fm);
    jac.col(j) = (fp - fm) / (2.0 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return jac;
}

double spectral_norm(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

}  // namespace

Eigen::VectorXd refine_equilibrium(const DynamicalSystem& system, const Eigen::VectorXd& guess) {
  if (system.control_dim != 0) {
    throw InputError("refine_equilibrium requires an autonomous system (wrap with closed_loop)");
  }
  if (guess.size() != system.dim) throw InputError("equilibrium guess has wrong dimension");
  Eigen::VectorXd x = guess, fx(system.dim), trial(system.dim), ftrial(system.dim);
  system.eval(x, fx);
  for (int it = 0; it < 100; ++it) {
    if (fx.norm() <= 1e-10) return x;
    const Eigen::MatrixXd jac = fd_jacobian(system, x);
    const Eigen::VectorXd step = jac.colPivHouseholderQr().solve(-fx);
    double lambda = 1.0;
    bool accepted = false;
    for (int half = 0; half < 40; ++half) {
      trial = x + lambda * step;
      system.eval(trial, ftrial);
      if (ftrial.norm() < fx.norm() * (1.0 - 0.25 * lambda)) {
        x = trial;
        fx = ftrial;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) break;
  }
  if (fx.norm() <= 1e-10) return x;
  throw std::runtime_error("refine_equilibrium did not converge; residual " +
                           std::to_string(fx.norm()));
}

double estimate_lipschitz(DynamicalSystem& system, long samples, std::uint64_t seed) {
  if (system.control_dim != 0) {
    throw InputError("estimate_lipschitz requires an autonomous system (wrap with closed_loop)");
  }
  if (samples <= 0) throw InputError("estimate_lipschitz needs a positive sample count");
  const int d = system.dim;
  const Box& box = system.domain;
  const Eigen::VectorXd range = box.upper - box.lower;

  double best = 0.0;
  // Deterministic anchors: the equilibrium (where f vanishes but its Jacobian
  // does not) and the domain center.
  best = std::max(best, spectral_norm(fd_jacobian(system, system.equilibrium)));
  best = std::max(best, spectral_norm(fd_jacobian(system, 0.5 * (box.lower + box.upper))));

  Rng rng(mix_seed(seed, kSaltLipschitz));
  Eigen::VectorXd x(d), y(d), fx(d), fy(d);
  const double jitter = 1e-4 * range.norm();
  for (long s = 0; s < samples; ++s) {
    for (int i = 0; i < d; ++i) x[i] = rng.uniform(box.lower[i], box.upper[i]);
    for (int i = 0; i < d; ++i) y[i] = rng.uniform(box.lower[i], box.upper[i]);
    const double dist = (x - y).norm();
    if (dist > 1e-12) {
      system.eval(x, fx);
      system.eval(y, fy);
      best = std::max(best, (fx - fy).norm() / dist);
    }
    // Short-range probe around x in a random direction.
    for (int i = 0; i < d; ++i) y[i] = rng.uniform(-1.0, 1.0);
    const double dn = y.norm();
    if (dn > 1e-12) {
      y = x + (jitter / dn) * y;
      system.eval(x, fx);
      system.eval(y, fy);
      best = std::max(best, (fx - fy).norm() / jitter);
    }
    if (s % 8 == 0) best = std::max(best, spectral_norm(fd_jacobian(system, x)));
  }
  if (!system.lipschitz_bound) system.lipschitz_bound = best;
  return best;
}

}  // namespace lyapnet
