#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lyapnet/dynamics.hpp"
#include "lyapnet/lyapunov_net.hpp"

namespace lyapnet {

// Geometric covering grid of Omega_delta = [-1,1]^d \ B(0, delta): per axis
// the values {+-r_1, ..., +-r_k} with r_j = (1+c)^(j-1) * delta / sqrt(d) and
// k chosen so the shells reach the box corners. Every grid point x satisfies
// delta <= ||x|| and ||x||_inf <= 1.
struct CertGrid {
  int dim = 0;
  double delta = 0.0;
  double c = 0.0;
  int shells = 0;             // k
  std::vector<double> radii;  // r_1..r_k
  double count = 0.0;         // (2k)^dim; double because d=30 overflows static_cast<long>
};

// Throws InputError on bad parameters and GridBudgetError (with the required
// count) when (2k)^dim exceeds `budget`.
CertGrid build_grid(int dim, double delta, double c, double budget = 1e7);

// Streams every grid point in a fixed odometer order (last axis fastest).
// The visitor gets a reference that is only valid during the call.
void for_each_grid_point(const CertGrid& grid,
                         const std::function<void(const Eigen::VectorXd&)>& fn);

// Materializes the full grid; refuses counts above 2^20 (tests/small runs).
std::vector<Eigen::VectorXd> grid_points(const CertGrid& grid);

// Samples Omega_delta uniformly and measures how much of it the balls
// B(x; c||x||), x in the grid, fail to cover. worst_margin is the largest
// min_x (||x - y|| - c ||x||) seen (positive = a hole), worst_point a sample
// attaining it.
struct CoveringReport {
  long samples = 0;
  long violations = 0;
  double worst_margin = 0.0;
  Eigen::VectorXd worst_point;
};
CoveringReport covering_check(const CertGrid& grid, long samples, std::uint64_t seed);

enum class MMethod { kAnalytic, kEmpirical };
std::string m_method_name(MMethod m);
MMethod m_method_from_name(const std::string& n);

// Upper-bound flavour (kAnalytic): layer-wise norm propagation through phi
// (spectral norms, activation derivative ranges from interval bounds on the
// pre-activations) combined with psi'/psi'' bounds and the augmentation
// curvature; requires system.lipschitz_bound. Lower-bound flavour
// (kEmpirical): max finite-difference slope of x -> grad V(x).f(x) over
// random pairs and short-range jitters; monotone in `samples` for fixed seed.
double lipschitz_bound_M(const LyapunovNet& model, const DynamicalSystem& system,
                         MMethod method, long samples, std::uint64_t seed);

enum class Verdict { kCertified, kGridFail, kMarginFail };
std::string verdict_name(Verdict v);

struct CertifyOptions {
  double delta = 0.1;
  std::optional<double> c;  // absent: pick 0.95 * gamma_bar / M automatically
  double gamma_bar = 0.05;
  MMethod m_method = MMethod::kAnalytic;
  double m_safety = 1.5;    // multiplies empirical (lower-bound) estimates
  double grid_budget = 1e7;
  long m_samples = 20000;
  long mc_samples = 100000;
  std::uint64_t seed = 0;
};

struct Certificate {
  Verdict verdict = Verdict::kGridFail;
  int dim = 0;
  double delta = 0.0, c = 0.0, gamma_bar = 0.0;
  double m_value = 0.0;  // the M used in the margin (safety already applied)
  double m_raw = 0.0;    // direct estimate before any safety factor
  std::string m_method;
  int shells = 0;
  double grid_count = 0.0;
  double grid_max_residual = 0.0;  // max over grid of grad V.f + gamma_bar ||x||
  long grid_violations = 0;        // grid points with positive residual
  double margin = 0.0;             // (gamma_bar - M c) * delta
  long mc_samples = 0;
  long mc_violations = 0;  // sampled points with grad V.f >= 0
  double mc_max = 0.0;     // largest sampled grad V.f
};

// Requires the normalized setting: domain [-1,1]^d with the equilibrium at
// the origin (wrap physical systems with normalize()). Throws
// GridBudgetError when no grid fits the budget.
Certificate certify(const LyapunovNet& model, const DynamicalSystem& system,
                    const CertifyOptions& opt);

// Monte-Carlo-only audit of the decrease condition on Omega_delta; used as
// the fallback artifact when the covering grid exceeds its budget. Not a
// certificate.
struct McAudit {
  long samples = 0;
  long violations = 0;
  double max_value = 0.0;
};
McAudit mc_audit(const LyapunovNet& model, const DynamicalSystem& system, double delta, long n,
                 std::uint64_t seed);

// Residual decrease rate available for certification after accounting for a
// training accuracy eps against a field with Lipschitz constant l_f:
// a = gamma - eps * l_f, usable only while eps < gamma / (sqrt(dim) * l_f).
struct AccuracyBudget {
  double gamma = 0.0, eps = 0.0, l_f = 0.0;
  double a = 0.0;
  bool admissible = false;
};
AccuracyBudget accuracy_budget(double gamma, double eps, double l_f, int dim);

nlohmann::json certificate_to_json(const Certificate& cert);

}  // namespace lyapnet
