#pragma once

#include <Eigen/Dense>
#include <string>

#include "lyapnet/network.hpp"

#include <nlohmann/json_fwd.hpp>

namespace lyapnet {

// Outer convex-ish shaping psi applied to phi(x) - phi(x*). All choices
// satisfy psi >= 0 and psi(0) = 0, so V below is positive definite for any
// parameter values.
enum class Psi { kAbs, kSquare, kHuber };

// Radial augmentation r(x - x*), zero exactly at x* and positive elsewhere.
enum class Augmentation { kNorm, kSqNorm, kLogSq };

// V(x) = psi(phi(x) - phi(x*)) + alpha_bar * r(x - x*).
struct LyapunovNet {
  Network phi;  // scalar output
  double alpha_bar = 0.5;
  Psi psi = Psi::kAbs;
  Augmentation augmentation = Augmentation::kNorm;
  double huber_delta = 0.1;
  Eigen::VectorXd equilibrium;

  int dim() const { return phi.input_dim(); }
};

LyapunovNet make_lyapunov_net(const std::vector<int>& phi_widths, Activation activation,
                              double alpha_bar, const Eigen::VectorXd& equilibrium,
                              std::uint64_t seed, Psi psi = Psi::kAbs,
                              Augmentation augmentation = Augmentation::kNorm,
                              double huber_delta = 0.1);

struct LyapEval {
  double value = 0.0;
  Eigen::VectorXd grad;  // dV/dx
};

// Everything risk gradients need about one evaluation point.
struct LyapParts {
  double u = 0.0;          // phi(x) - phi(x_star)
  double psi_u = 0.0;      // psi(u)
  double dpsi = 0.0;       // psi'(u)
  double ddpsi = 0.0;      // psi''(u)
  Eigen::VectorXd phi_grad;  // grad_x phi(x)
  double value = 0.0;        // V(x)
  Eigen::VectorXd grad;      // grad_x V(x)
};

// Scratch for repeated evaluation; caches phi(x*) for the current parameters.
class LyapWorkspace {
 public:
  LyapWorkspace() = default;
  explicit LyapWorkspace(const LyapunovNet& model);
  void resize(const LyapunovNet& model);
  // Must be called whenever the parameters of phi change.
  void refresh_star(const LyapunovNet& model);
  double phi_star() const { return phi_star_; }
  NetWorkspace& net_ws() { return ws_; }

 private:
  NetWorkspace ws_;
  double phi_star_ = 0.0;
};

double psi_value(Psi psi, double u, double huber_delta);
double psi_deriv(Psi psi, double u, double huber_delta);
double psi_second(Psi psi, double u, double huber_delta);

double aug_value(Augmentation a, const Eigen::VectorXd& e);
Eigen::VectorXd aug_grad(Augmentation a, const Eigen::VectorXd& e);

// V and its exact input gradient.
LyapEval lyap_eval(const LyapunovNet& model, const Eigen::VectorXd& x);
LyapEval lyap_eval_ws(const LyapunovNet& model, const Eigen::VectorXd& x, LyapWorkspace& ws);
LyapParts lyap_parts_ws(const LyapunovNet& model, const Eigen::VectorXd& x, LyapWorkspace& ws);

struct DynamicalSystem;  // dynamics.hpp

// grad V(x) . f(x) for an autonomous system.
double orbital_derivative(const LyapunovNet& model, const DynamicalSystem& system,
                          const Eigen::VectorXd& x);

std::string psi_name(Psi p);
Psi psi_from_name(const std::string& n);
std::string augmentation_name(Augmentation a);
Augmentation augmentation_from_name(const std::string& n);

nlohmann::json lyapunov_net_to_json(const LyapunovNet& model);
LyapunovNet lyapunov_net_from_json(const nlohmann::json& j);

}  // namespace lyapnet
