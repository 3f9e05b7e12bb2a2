#include "lyapnet/lyapunov_net.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "lyapnet/dynamics.hpp"
#include "lyapnet/errors.hpp"

namespace lyapnet {

double psi_value(Psi psi, double u, double huber_delta) {
  switch (psi) {
    case Psi::kAbs: return std::abs(u);
    case Psi::kSquare: return u * u;
    case Psi::kHuber: {
      const double k = huber_delta;
      return std::abs(u) <= k ? u * u / (2.0 * k) : std::abs(u) - k / 2.0;
    }
  }
  return 0.0;
}

double psi_deriv(Psi psi, double u, double huber_delta) {
  switch (psi) {
    case Psi::kAbs: return u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
    case Psi::kSquare: return 2.0 * u;
    case Psi::kHuber: {
      const double k = huber_delta;
      if (std::abs(u) <= k) return u / k;
      return u > 0.0 ? 1.0 : -1.0;
    }
  }
  return 0.0;
}

double psi_second(Psi psi, double u, double huber_delta) {
  switch (psi) {
    case Psi::kAbs: return 0.0;
    case Psi::kSquare: return 2.0;
    case Psi::kHuber: return std::abs(u) <= huber_delta ? 1.0 / huber_delta : 0.0;
  }
  return 0.0;
}

double aug_value(Augmentation a, const Eigen::VectorXd& e) {
  const double n2 = e.squaredNorm();
  switch (a) {
    case Augmentation::kNorm: return std::sqrt(n2);
    case Augmentation::kSqNorm: return n2;
    case Augmentation::kLogSq: return std::log1p(n2);
  }
  return 0.0;
}

Eigen::VectorXd aug_grad(Augmentation a, const Eigen::VectorXd& e) {
  const double n2 = e.squaredNorm();
  switch (a) {
    case Augmentation::kNorm: {
      const double n = std::sqrt(n2);
      if (n == 0.0) return Eigen::VectorXd::Zero(e.size());
      return e / n;
    }
    case Augmentation::kSqNorm: return 2.0 * e;
    case Augmentation::kLogSq: return (2.0 / (1.0 + n2)) * e;
  }
  return Eigen::VectorXd::Zero(e.size());
}

LyapunovNet make_lyapunov_net(const std::vector<int>& phi_widths, Activation activation,
                              double alpha_bar, const Eigen::VectorXd& equilibrium,
                              std::uint64_t seed, Psi psi, Augmentation augmentation,
                              double huber_delta) {
  if (phi_widths.empty() || phi_widths.back() != 1) {
    throw InputError("lyapunov net requires a scalar-output phi network");
  }
  if (phi_widths.front() != equilibrium.size()) {
    throw InputError("equilibrium dimension does not match phi input width");
  }
  if (alpha_bar <= 0.0) throw InputError("alpha_bar must be positive");
  if (huber_delta <= 0.0) throw InputError("huber_delta must be positive");
  LyapunovNet model;
  model.phi = xavier_init(phi_widths, activation, seed);
  model.alpha_bar = alpha_bar;
  model.psi = psi;
  model.augmentation = augmentation;
  model.huber_delta = huber_delta;
  model.equilibrium = equilibrium;
  return model;
}

LyapWorkspace::LyapWorkspace(const LyapunovNet& model) { resize(model); }

void LyapWorkspace::resize(const LyapunovNet& model) {
  ws_.resize(model.phi);
  refresh_star(model);
}

void LyapWorkspace::refresh_star(const LyapunovNet& model) {
  phi_star_ = forward_value_ws(model.phi, model.equilibrium, ws_);
}

LyapParts lyap_parts_ws(const LyapunovNet& model, const Eigen::VectorXd& x, LyapWorkspace& ws) {
  if (x.size() != model.dim()) throw InputError("lyapunov eval input has wrong dimension");
  LyapParts p;
  const JointEval je = forward_joint_ws(model.phi, x, ws.net_ws());
  p.u = je.value - ws.phi_star();
  p.psi_u = psi_value(model.psi, p.u, model.huber_delta);
  p.dpsi = psi_deriv(model.psi, p.u, model.huber_delta);
  p.ddpsi = psi_second(model.psi, p.u, model.huber_delta);
  p.phi_grad = je.input_grad;
  const Eigen::VectorXd e = x - model.equilibrium;
  p.value = p.psi_u + model.alpha_bar * aug_value(model.augmentation, e);
  p.grad = p.dpsi * p.phi_grad + model.alpha_bar * aug_grad(model.augmentation, e);
  return p;
}

LyapEval lyap_eval_ws(const LyapunovNet& model, const Eigen::VectorXd& x, LyapWorkspace& ws) {
  LyapParts p = lyap_parts_ws(model, x, ws);
  return LyapEval{p.value, std::move(p.grad)};
}

LyapEval lyap_eval(const LyapunovNet& model, const Eigen::VectorXd& x) {
  LyapWorkspace ws(model);
  return lyap_eval_ws(model, x, ws);
}

double orbital_derivative(const LyapunovNet& model, const DynamicalSystem& system,
                          const Eigen::VectorXd& x) {
  if (system.control_dim != 0) {
    throw InputError("orbital_derivative requires an autonomous system (wrap with closed_loop)");
  }
  const LyapEval e = lyap_eval(model, x);
  Eigen::VectorXd fx(system.dim);
  system.eval(x, fx);
  return e.grad.dot(fx);
}

std::string psi_name(Psi p) {
  switch (p) {
    case Psi::kAbs: return "abs";
    case Psi::kSquare: return "square";
    case Psi::kHuber: return "huber";
  }
  return "?";
}

Psi psi_from_name(const std::string& n) {
  if (n == "abs") return Psi::kAbs;
  if (n == "square") return Psi::kSquare;
  if (n == "huber") return Psi::kHuber;
  throw InputError("unknown psi '" + n + "' (expected abs|square|huber)");
}

std::string augmentation_name(Augmentation a) {
  switch (a) {
    case Augmentation::kNorm: return "norm";
    case Augmentation::kSqNorm: return "sqnorm";
    case Augmentation::kLogSq: return "logsq";
  }
  return "?";
}

Augmentation augmentation_from_name(const std::string& n) {
  if (n == "norm") return Augmentation::kNorm;
  if (n == "sqnorm") return Augmentation::kSqNorm;
  if (n == "logsq") return Augmentation::kLogSq;
  throw InputError("unknown augmentation '" + n + "' (expected norm|sqnorm|logsq)");
}

nlohmann::json lyapunov_net_to_json(const LyapunovNet& model) {
  nlohmann::json j;
  j["network"] = network_to_json(model.phi);
  j["alpha_bar"] = model.alpha_bar;
  j["psi"] = psi_name(model.psi);
  j["augmentation"] = augmentation_name(model.augmentation);
  j["huber_delta"] = model.huber_delta;
  nlohmann::json eq = nlohmann::json::array();
  for (Eigen::Index i = 0; i < model.equilibrium.size(); ++i) eq.push_back(model.equilibrium[i]);
  j["equilibrium"] = std::move(eq);
  return j;
}

LyapunovNet lyapunov_net_from_json(const nlohmann::json& j) {
  try {
    LyapunovNet model;
    model.phi = network_from_json(j.at("network"));
    model.alpha_bar = j.at("alpha_bar").get<double>();
    model.psi = psi_from_name(j.at("psi").get<std::string>());
    model.augmentation = augmentation_from_name(j.at("augmentation").get<std::string>());
    model.huber_delta = j.value("huber_delta", 0.1);
    const auto& eq = j.at("equilibrium");
    model.equilibrium.resize(eq.size());
    for (std::size_t i = 0; i < eq.size(); ++i) model.equilibrium[i] = eq[i].get<double>();
    if (model.equilibrium.size() != model.phi.input_dim()) {
      throw InputError("model JSON equilibrium dimension mismatch");
    }
    if (model.alpha_bar <= 0.0) throw InputError("model JSON alpha_bar must be positive");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed model JSON: ") + e.what());
  }
}

}  // namespace lyapnet
