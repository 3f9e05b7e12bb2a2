#include "lyapnet/certify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>

#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include "lyapnet/errors.hpp"
#include "lyapnet/risk.hpp"
#include "lyapnet/rng.hpp"

namespace lyapnet {

namespace {

constexpr std::uint64_t kSaltCovering = 0x636f766572;  // "cover"
constexpr std::uint64_t kSaltSlopes = 0x736c6f7065;    // "slope"
constexpr std::uint64_t kSaltMcAudit = 0x6d6361;       // "mca"

double axis_value(const CertGrid& grid, int digit) {
  return digit < grid.shells ? grid.radii[digit] : -grid.radii[digit - grid.shells];
}

void require_normalized(const LyapunovNet& model, const DynamicalSystem& system) {
  if (system.control_dim != 0) {
    throw InputError("certify expects an autonomous system; close the loop first");
  }
  if (model.dim() != system.dim) throw InputError("model/system dimension mismatch");
  const double tol = 1e-9;
  for (int i = 0; i < system.dim; ++i) {
    if (std::abs(system.domain.lower[i] + 1.0) > tol || std::abs(system.domain.upper[i] - 1.0) > tol) {
      throw InputError("certify expects the normalized domain [-1,1]^d; wrap the system with normalize()");
    }
  }
  if (system.equilibrium.lpNorm<Eigen::Infinity>() > tol ||
      model.equilibrium.lpNorm<Eigen::Infinity>() > tol) {
    throw InputError("certify expects the equilibrium at the origin; wrap the system with normalize()");
  }
}

// Largest singular value; the nets here are small, so exact SVD is cheap.
double spectral_norm(const Eigen::MatrixXd& w) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(w);
  return svd.singularValues()(0);
}

struct ActSup {
  double value = 0.0;   // sup |act(z)|    on [-zmax, zmax]
  double deriv = 0.0;   // sup |act'(z)|
  double second = 0.0;  // sup |act''(z)|
};

ActSup act_sup(Activation act, double zmax) {
  ActSup s;
  switch (act) {
    case Activation::kRePU:
      s.value = zmax * zmax;
      s.deriv = 2.0 * zmax;
      s.second = 2.0;
      break;
    case Activation::kTanh:
      s.value = std::tanh(zmax);
      s.deriv = 1.0;
      s.second = 4.0 / (3.0 * std::sqrt(3.0));  // max |tanh''| over the reals
      break;
    case Activation::kSoftplus:
      s.value = zmax > 30.0 ? zmax : std::log1p(std::exp(zmax));
      s.deriv = 1.0 / (1.0 + std::exp(-zmax));
      s.second = 0.25;
      break;
  }
  return s;
}

// Norm-propagation bounds for phi over the domain: gphi >= sup ||grad phi||,
// hphi >= Lip(x -> grad phi(x)). Works layer by layer from per-unit
// pre-activation ranges and spectral norms.
struct PhiBounds {
  double gphi = 0.0;
  double hphi = 0.0;
};

PhiBounds phi_norm_bounds(const Network& net, double input_norm_bound) {
  double a_norm = input_norm_bound;  // bound on the layer output's 2-norm
  double g = 1.0;                    // bound on the layer Jacobian's 2-norm
  double h = 0.0;                    // bound on the Jacobian's Lipschitz constant
  const int hidden = net.num_layers() - 1;
  for (int l = 0; l < hidden; ++l) {
    const Eigen::MatrixXd& w = net.weights[l];
    const Eigen::VectorXd& b = net.biases[l];
    const double wn = spectral_norm(w);
    double zmax = 0.0;
    double value_sq = 0.0;
    for (int i = 0; i < w.rows(); ++i) {
      const double zi = w.row(i).norm() * a_norm + std::abs(b[i]);
      zmax = std::max(zmax, zi);
      const double vi = act_sup(net.activation, zi).value;
      value_sq += vi * vi;
    }
    const ActSup s = act_sup(net.activation, zmax);
    // J_l = diag(act'(z)) W J_{l-1}; the diagonal difference term is bounded
    // through sup |act''| and the row norms (<= spectral norm) of W.
    h = s.deriv * wn * h + s.second * (wn * g) * (wn * g);
    g = s.deriv * wn * g;
    a_norm = std::sqrt(value_sq);
  }
  const double wn = spectral_norm(net.weights[hidden]);
  return PhiBounds{wn * g, wn * h};
}

double analytic_m(const LyapunovNet& model, const DynamicalSystem& system) {
  if (!system.lipschitz_bound.has_value()) {
    throw InputError("analytic Lipschitz bound needs system.lipschitz_bound; call estimate_lipschitz first");
  }
  if (model.psi == Psi::kAbs) {
    throw InputError(
        "the abs shaping has a discontinuous gradient, so no analytic orbital-derivative "
        "Lipschitz bound exists; use the empirical method or a smooth shaping");
  }
  const double l_f = *system.lipschitz_bound;
  const Box& box = system.domain;
  // sup over the domain of ||x|| and ||x - x*||
  double input_norm_sq = 0.0, excursion_sq = 0.0;
  for (int i = 0; i < box.dim(); ++i) {
    input_norm_sq += std::pow(std::max(std::abs(box.lower[i]), std::abs(box.upper[i])), 2);
    excursion_sq += std::pow(std::max(std::abs(box.lower[i] - model.equilibrium[i]),
                                      std::abs(box.upper[i] - model.equilibrium[i])),
                             2);
  }
  const double excursion = std::sqrt(excursion_sq);
  const double f_max = l_f * excursion;  // ||f(x)|| = ||f(x) - f(x*)|| <= L_f ||x - x*||

  const PhiBounds pb = phi_norm_bounds(model.phi, std::sqrt(input_norm_sq));
  const double u_sup = pb.gphi * excursion;  // |phi(x) - phi(x*)| <= gphi ||x - x*||
  double psi1 = 0.0, psi2 = 0.0;             // sup |psi'|, sup |psi''|
  switch (model.psi) {
    case Psi::kAbs: break;  // rejected above
    case Psi::kSquare:
      psi1 = 2.0 * u_sup;
      psi2 = 2.0;
      break;
    case Psi::kHuber:
      psi1 = std::min(1.0, u_sup / model.huber_delta);
      psi2 = 1.0 / model.huber_delta;
      break;
  }
  // Product rule on the net part: sup||D^2 psi(phi)|| * sup||f|| + sup||D psi(phi)|| * L_f.
  const double net_term =
      (psi2 * pb.gphi * pb.gphi + psi1 * pb.hphi) * f_max + psi1 * pb.gphi * l_f;
  // Augmentation part, Lip of grad r(x - x*) . f(x) in closed form.
  double aug_term = 0.0;
  switch (model.augmentation) {
    case Augmentation::kNorm:
      // grad r is the unit radial field; ||f(x)||/||x - x*|| <= L_f tames its
      // unbounded curvature at x*, leaving Lip <= 2 L_f on the whole punctured box.
      aug_term = 2.0 * l_f;
      break;
    case Augmentation::kSqNorm:
      aug_term = 2.0 * f_max + 2.0 * l_f * excursion;
      break;
    case Augmentation::kLogSq:
      aug_term = 2.0 * f_max + l_f;  // ||D grad r|| <= 2 and ||grad r|| <= 1
      break;
  }
  return net_term + model.alpha_bar * aug_term;
}

// Clamped central finite-difference gradient norm of g at x (one-sided at the
// domain boundary).
double fd_gradient_norm(const std::function<double(const Eigen::VectorXd&)>& g,
                        const Eigen::VectorXd& x, const Box& box) {
  const int d = static_cast<int>(x.size());
  Eigen::VectorXd xp = x, xm = x;
  double norm_sq = 0.0;
  for (int i = 0; i < d; ++i) {
    const double h = 1e-5 * (box.upper[i] - box.lower[i]);
    const double hi = std::min(x[i] + h, box.upper[i]);
    const double lo = std::max(x[i] - h, box.lower[i]);
    if (hi <= lo) continue;
    xp[i] = hi;
    xm[i] = lo;
    const double di = (g(xp) - g(xm)) / (hi - lo);
    norm_sq += di * di;
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return std::sqrt(norm_sq);
}

double empirical_m(const LyapunovNet& model, const DynamicalSystem& system, long samples,
                   std::uint64_t seed) {
  if (samples <= 0) throw InputError("empirical Lipschitz bound needs samples > 0");
  const Box& box = system.domain;
  const int d = box.dim();
  LyapWorkspace lws(model);
  Eigen::VectorXd fbuf(d);
  auto g = [&](const Eigen::VectorXd& x) {
    const LyapEval ev = lyap_eval_ws(model, x, lws);
    system.eval(x, fbuf);
    return ev.grad.dot(fbuf);
  };

  double best = 0.0;
  // Deterministic anchors first: gradient norms at the corners (small d), the
  // axis extremes, the center, and the equilibrium.
  std::vector<Eigen::VectorXd> anchors;
  const Eigen::VectorXd center = 0.5 * (box.lower + box.upper);
  anchors.push_back(center);
  anchors.push_back(model.equilibrium);
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd lo = center, hi = center;
    lo[i] = box.lower[i];
    hi[i] = box.upper[i];
    anchors.push_back(lo);
    anchors.push_back(hi);
  }
  if (d <= 16) {
    for (std::uint64_t mask = 0; mask < (UINT64_C(1) << d); ++mask) {
      Eigen::VectorXd corner(d);
      for (int i = 0; i < d; ++i) corner[i] = (mask >> i) & 1 ? box.upper[i] : box.lower[i];
      anchors.push_back(corner);
    }
  }
  for (const Eigen::VectorXd& a : anchors) best = std::max(best, fd_gradient_norm(g, a, box));

  // Streamed random pairs and short-range jitters; the running max is
  // monotone in `samples` for a fixed seed.
  Rng rng(mix_seed(seed, kSaltSlopes));
  Eigen::VectorXd x(d), y(d), z(d);
  for (long s = 0; s < samples; ++s) {
    for (int i = 0; i < d; ++i) x[i] = rng.uniform(box.lower[i], box.upper[i]);
    for (int i = 0; i < d; ++i) y[i] = rng.uniform(box.lower[i], box.upper[i]);
    const double gx = g(x);
    const double dxy = (x - y).norm();
    if (dxy > 0.0) best = std::max(best, std::abs(gx - g(y)) / dxy);
    for (int i = 0; i < d; ++i) {
      const double step = 1e-4 * (box.upper[i] - box.lower[i]) * rng.uniform(-1.0, 1.0);
      z[i] = std::clamp(x[i] + step, box.lower[i], box.upper[i]);
    }
    const double dxz = (x - z).norm();
    if (dxz > 0.0) best = std::max(best, std::abs(gx - g(z)) / dxz);
    if (s % 8 == 0) best = std::max(best, fd_gradient_norm(g, x, box));
  }
  return best;
}

}  // namespace

CertGrid build_grid(int dim, double delta, double c, double budget) {
  if (dim < 1) throw InputError("grid dimension must be at least 1");
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("grid delta must lie in (0,1)");
  if (!(c > 0.0 && c < 1.0)) throw InputError("grid c must lie in (0,1)");
  if (!(budget >= 2.0)) throw InputError("grid budget must be at least 2 points");
  CertGrid grid;
  grid.dim = dim;
  grid.delta = delta;
  grid.c = c;
  const double root_d = std::sqrt(static_cast<double>(dim));
  const int k = static_cast<int>(std::floor(-std::log(delta / root_d) / std::log1p(c))) + 1;
  grid.shells = k;
  grid.radii.resize(k);
  double r = delta / root_d;
  for (int j = 0; j < k; ++j) {
    grid.radii[j] = r;  // r_k <= 1 by the choice of k, so every point stays in the box
    r *= 1.0 + c;
  }
  grid.count = std::pow(2.0 * k, dim);
  if (!(grid.count <= budget)) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "covering grid needs %.6g points (budget %.6g); increase c or delta, or fall "
                  "back to the Monte-Carlo audit",
                  grid.count, budget);
    throw GridBudgetError(msg, grid.count);
  }
  return grid;
}

void for_each_grid_point(const CertGrid& grid,
                         const std::function<void(const Eigen::VectorXd&)>& fn) {
  const int d = grid.dim;
  const int base = 2 * grid.shells;
  std::vector<int> digit(d, 0);
  Eigen::VectorXd x(d);
  x.setConstant(axis_value(grid, 0));
  for (;;) {
    fn(x);
    int ax = d - 1;
    for (; ax >= 0; --ax) {
      if (++digit[ax] < base) {
        x[ax] = axis_value(grid, digit[ax]);
        break;
      }
      digit[ax] = 0;
      x[ax] = axis_value(grid, 0);
    }
    if (ax < 0) return;
  }
}

std::vector<Eigen::VectorXd> grid_points(const CertGrid& grid) {
  if (grid.count > 1048576.0) {
    throw InputError("refusing to materialize a grid with more than 2^20 points");
  }
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(static_cast<std::size_t>(grid.count));
  for_each_grid_point(grid, [&](const Eigen::VectorXd& x) { pts.push_back(x); });
  return pts;
}

CoveringReport covering_check(const CertGrid& grid, long samples, std::uint64_t seed) {
  if (samples <= 0) throw InputError("covering check needs samples > 0");
  const std::vector<Eigen::VectorXd> pts = grid_points(grid);
  const Box box = Box::centered_unit(grid.dim);
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(grid.dim);
  const SampleSet set =
      sample_uniform(box, samples, grid.delta, origin, mix_seed(seed, kSaltCovering));
  CoveringReport report;
  report.samples = samples;
  report.worst_margin = -std::numeric_limits<double>::infinity();
  report.worst_point = origin;
  for (long s = 0; s < samples; ++s) {
    const Eigen::VectorXd y = set.points.row(s).transpose();
    double margin = std::numeric_limits<double>::infinity();
    for (const Eigen::VectorXd& x : pts) {
      margin = std::min(margin, (x - y).norm() - grid.c * x.norm());
      if (margin <= 0.0) break;
    }
    if (margin > 0.0) ++report.violations;
    if (margin > report.worst_margin) {
      report.worst_margin = margin;
      report.worst_point = y;
    }
  }
  return report;
}

std::string m_method_name(MMethod m) {
  return m == MMethod::kAnalytic ? "analytic" : "empirical";
}

MMethod m_method_from_name(const std::string& n) {
  if (n == "analytic") return MMethod::kAnalytic;
  if (n == "empirical") return MMethod::kEmpirical;
  throw InputError("unknown Lipschitz bound method '" + n + "' (use analytic or empirical)");
}

double lipschitz_bound_M(const LyapunovNet& model, const DynamicalSystem& system, MMethod method,
                         long samples, std::uint64_t seed) {
  if (system.control_dim != 0) {
    throw InputError("Lipschitz bound expects an autonomous system; close the loop first");
  }
  if (model.dim() != system.dim) throw InputError("model/system dimension mismatch");
  return method == MMethod::kAnalytic ? analytic_m(model, system)
                                      : empirical_m(model, system, samples, seed);
}

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kCertified: return "certified";
    case Verdict::kGridFail: return "grid_fail";
    case Verdict::kMarginFail: return "margin_fail";
  }
  return "grid_fail";
}

McAudit mc_audit(const LyapunovNet& model, const DynamicalSystem& system, double delta, long n,
                 std::uint64_t seed) {
  require_normalized(model, system);
  if (n <= 0) throw InputError("audit needs a positive sample count");
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("audit delta must lie in (0,1)");
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(system.dim);
  const SampleSet set =
      sample_uniform(system.domain, n, delta, origin, mix_seed(seed, kSaltMcAudit));
  LyapWorkspace lws(model);
  Eigen::VectorXd fbuf(system.dim);
  McAudit audit;
  audit.samples = n;
  audit.max_value = -std::numeric_limits<double>::infinity();
  for (long s = 0; s < n; ++s) {
    const Eigen::VectorXd x = set.points.row(s).transpose();
    const LyapEval ev = lyap_eval_ws(model, x, lws);
    system.eval(x, fbuf);
    const double dvf = ev.grad.dot(fbuf);
    if (dvf >= 0.0) ++audit.violations;
    audit.max_value = std::max(audit.max_value, dvf);
  }
  return audit;
}

Certificate certify(const LyapunovNet& model, const DynamicalSystem& system,
                    const CertifyOptions& opt) {
  require_normalized(model, system);
  if (!(opt.gamma_bar > 0.0)) throw InputError("gamma_bar must be positive");
  if (!(opt.m_safety >= 1.0)) throw InputError("m_safety must be at least 1");
  if (opt.c && !(*opt.c > 0.0 && *opt.c < 1.0)) throw InputError("c must lie in (0,1)");

  Certificate cert;
  cert.dim = system.dim;
  cert.delta = opt.delta;
  cert.gamma_bar = opt.gamma_bar;
  cert.m_method = m_method_name(opt.m_method);
  cert.m_raw = lipschitz_bound_M(model, system, opt.m_method, opt.m_samples, opt.seed);
  cert.m_value = opt.m_method == MMethod::kEmpirical ? cert.m_raw * opt.m_safety : cert.m_raw;

  double c;
  if (opt.c) {
    c = *opt.c;
  } else {
    // Largest admissible contraction (fewest grid points) with 5% headroom
    // below the margin constraint c < gamma_bar / M.
    c = cert.m_value > 0.0 ? 0.95 * opt.gamma_bar / cert.m_value : 0.5;
    if (!(c < 1.0)) c = 0.99;
    if (!(c > 0.0) || !std::isfinite(c)) throw InputError("cannot pick c: degenerate Lipschitz bound");
  }
  cert.c = c;

  const CertGrid grid = build_grid(system.dim, opt.delta, c, opt.grid_budget);
  cert.shells = grid.shells;
  cert.grid_count = grid.count;

  LyapWorkspace lws(model);
  Eigen::VectorXd fbuf(system.dim);
  double max_residual = -std::numeric_limits<double>::infinity();
  long violations = 0;
  for_each_grid_point(grid, [&](const Eigen::VectorXd& x) {
    const LyapEval ev = lyap_eval_ws(model, x, lws);
    system.eval(x, fbuf);
    const double residual = ev.grad.dot(fbuf) + opt.gamma_bar * x.norm();
    if (residual > 0.0) ++violations;
    max_residual = std::max(max_residual, residual);
  });
  cert.grid_max_residual = max_residual;
  cert.grid_violations = violations;
  cert.margin = (opt.gamma_bar - cert.m_value * c) * opt.delta;

  if (violations > 0) {
    cert.verdict = Verdict::kGridFail;
  } else if (!(cert.margin > 0.0)) {
    cert.verdict = Verdict::kMarginFail;
  } else {
    cert.verdict = Verdict::kCertified;
  }

  const McAudit audit = mc_audit(model, system, opt.delta, opt.mc_samples, opt.seed);
  cert.mc_samples = audit.samples;
  cert.mc_violations = audit.violations;
  cert.mc_max = audit.max_value;
  return cert;
}

AccuracyBudget accuracy_budget(double gamma, double eps, double l_f, int dim) {
  if (!(gamma > 0.0)) throw InputError("gamma must be positive");
  if (!(eps > 0.0)) throw InputError("eps must be positive");
  if (!(l_f > 0.0)) throw InputError("l_f must be positive (a constant field is degenerate)");
  if (dim < 1) throw InputError("dimension must be at least 1");
  AccuracyBudget b;
  b.gamma = gamma;
  b.eps = eps;
  b.l_f = l_f;
  b.a = gamma - eps * l_f;
  b.admissible = eps < gamma / (std::sqrt(static_cast<double>(dim)) * l_f) && b.a > 0.0;
  return b;
}

nlohmann::json certificate_to_json(const Certificate& cert) {
  return nlohmann::json{
      {"delta", cert.delta},
      {"c", cert.c},
      {"gamma_bar", cert.gamma_bar},
      {"M", {{"value", cert.m_value}, {"method", cert.m_method}}},
      {"grid", {{"k", cert.shells}, {"count", cert.grid_count}}},
      {"grid_max_residual", cert.grid_max_residual},
      {"margin", cert.margin},
      {"verdict", verdict_name(cert.verdict)},
      {"mc_audit", {{"n", cert.mc_samples}, {"violations", cert.mc_violations}}},
  };
}

}  // namespace lyapnet
