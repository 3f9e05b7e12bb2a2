#include "lyapnet/roa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lyapnet/errors.hpp"
#include "lyapnet/rng.hpp"

namespace lyapnet {

namespace {

constexpr std::uint64_t kSaltRoaStarts = 0x726f61;  // "roa"

}  // namespace

Trajectory rk4_integrate(const DynamicalSystem& system, const Eigen::VectorXd& x0, double h,
                         double t_max, double delta_target) {
  if (system.control_dim != 0) {
    throw InputError("rk4_integrate expects an autonomous system; close the loop first");
  }
  if (x0.size() != system.dim) throw InputError("initial state has the wrong dimension");
  if (!system.domain.contains(x0, 1e-9)) throw InputError("initial state lies outside the domain");
  if (!(h > 0.0)) throw InputError("step size must be positive");
  if (!(t_max >= 0.0)) throw InputError("t_max must be non-negative");

  Trajectory traj;
  Eigen::VectorXd x = x0;
  double t = 0.0;
  traj.times.push_back(t);
  traj.states.push_back(x);
  const bool ball_stop = delta_target > 0.0;
  if (ball_stop && (x - system.equilibrium).norm() <= delta_target) {
    traj.reached_ball = true;
    return traj;
  }

  Eigen::VectorXd k1(system.dim), k2(system.dim), k3(system.dim), k4(system.dim);
  Eigen::VectorXd xs(system.dim);
  while (t < t_max - 1e-12) {
    system.eval(x, k1);
    xs = x + (0.5 * h) * k1;
    system.eval(xs, k2);
    xs = x + (0.5 * h) * k2;
    system.eval(xs, k3);
    xs = x + h * k3;
    system.eval(xs, k4);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += h;
    if (!x.allFinite()) break;  // keep the finite prefix
    traj.times.push_back(t);
    traj.states.push_back(x);
    if (ball_stop && (x - system.equilibrium).norm() <= delta_target) {
      traj.reached_ball = true;
      break;
    }
    if (!system.domain.contains(x, 1e-12)) {
      traj.exit = true;
      break;
    }
  }
  return traj;
}

RoaEstimate estimate_roa(const LyapunovNet& model, const DynamicalSystem& system, int resolution,
                         double exclusion_radius) {
  if (system.control_dim != 0) {
    throw InputError("estimate_roa expects an autonomous system; close the loop first");
  }
  if (system.dim != 2) {
    throw UnsupportedDimError("the level-set ROA scan only supports 2d systems");
  }
  if (model.dim() != 2) throw InputError("model/system dimension mismatch");
  if (resolution < 50) throw InputError("ROA grid needs at least 50 nodes per axis");
  if (exclusion_radius < 0.0) throw InputError("exclusion radius must be non-negative");

  const int res = resolution;
  const Box& box = system.domain;
  Eigen::VectorXd axis0(res), axis1(res);
  for (int i = 0; i < res; ++i) {
    const double s = static_cast<double>(i) / (res - 1);
    axis0[i] = box.lower[0] + s * (box.upper[0] - box.lower[0]);
    axis1[i] = box.lower[1] + s * (box.upper[1] - box.lower[1]);
  }

  RoaEstimate est;
  est.resolution = res;
  est.domain = box;
  est.values.resize(res, res);
  est.orbital.resize(res, res);
  est.inside.assign(static_cast<std::size_t>(res) * res, 0);

  LyapWorkspace lws(model);
  Eigen::VectorXd x(2), fbuf(2);
  for (int i = 0; i < res; ++i) {
    for (int j = 0; j < res; ++j) {
      x[0] = axis0[i];
      x[1] = axis1[j];
      const LyapEval ev = lyap_eval_ws(model, x, lws);
      system.eval(x, fbuf);
      est.values(i, j) = ev.value;
      est.orbital(i, j) = ev.grad.dot(fbuf);
    }
  }

  // start node: nearest to the equilibrium
  int si = 0, sj = 0;
  {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < res; ++i) {
      for (int j = 0; j < res; ++j) {
        const double d = std::hypot(axis0[i] - system.equilibrium[0],
                                    axis1[j] - system.equilibrium[1]);
        if (d < best) {
          best = d;
          si = i;
          sj = j;
        }
      }
    }
  }

  est.valid.assign(static_cast<std::size_t>(res) * res, 0);
  std::vector<std::uint8_t>& valid = est.valid;
  long valid_count = 0;
  for (int i = 0; i < res; ++i) {
    for (int j = 0; j < res; ++j) {
      const double dist =
          std::hypot(axis0[i] - system.equilibrium[0], axis1[j] - system.equilibrium[1]);
      const bool ok = est.orbital(i, j) < 0.0 || dist <= exclusion_radius ||
                      (i == si && j == sj && est.orbital(i, j) <= 0.0);
      valid[static_cast<std::size_t>(i) * res + j] = ok ? 1 : 0;
      if (ok) ++valid_count;
    }
  }
  est.valid_fraction = static_cast<double>(valid_count) / (static_cast<double>(res) * res);

  // Feasibility of a level c: flood fill {V <= c} from the start node; every
  // component node must be accepted, and boundary nodes may only touch the
  // level (V == c), not lie strictly below it.
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(res) * res, 0);
  std::vector<int> stack;
  auto feasible = [&](double c, std::vector<std::uint8_t>* component) {
    if (est.values(si, sj) > c) return false;
    std::fill(seen.begin(), seen.end(), 0);
    stack.clear();
    stack.push_back(si * res + sj);
    seen[static_cast<std::size_t>(si) * res + sj] = 1;
    bool ok = true;
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      const int i = node / res, j = node % res;
      if (!valid[static_cast<std::size_t>(node)]) {
        ok = false;
        break;
      }
      if ((i == 0 || i == res - 1 || j == 0 || j == res - 1) && est.values(i, j) < c) {
        ok = false;
        break;
      }
      const int ni[4] = {i - 1, i + 1, i, i};
      const int nj[4] = {j, j, j - 1, j + 1};
      for (int t = 0; t < 4; ++t) {
        if (ni[t] < 0 || ni[t] >= res || nj[t] < 0 || nj[t] >= res) continue;
        const std::size_t idx = static_cast<std::size_t>(ni[t]) * res + nj[t];
        if (seen[idx] || est.values(ni[t], nj[t]) > c) continue;
        seen[idx] = 1;
        stack.push_back(static_cast<int>(idx));
      }
    }
    if (ok && component) *component = seen;
    return ok;
  };

  std::vector<double> cands(est.values.data(), est.values.data() + est.values.size());
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

  // feasibility is monotone in c, so binary search the largest feasible level
  long lo = 0, hi = static_cast<long>(cands.size()) - 1, best = -1;
  while (lo <= hi) {
    const long mid = lo + (hi - lo) / 2;
    if (feasible(cands[mid], nullptr)) {
      best = mid;
      lo = mid + 1;
    } else {
      hi = mid - 1;
    }
  }
  if (best < 0) {
    est.c_star = 0.0;
    est.area_fraction = 0.0;
    return est;
  }
  est.c_star = cands[best];
  feasible(est.c_star, &est.inside);
  const long count = std::count(est.inside.begin(), est.inside.end(), std::uint8_t{1});
  est.area_fraction = static_cast<double>(count) / (static_cast<double>(res) * res);
  return est;
}

double validate_roa(const LyapunovNet& model, const DynamicalSystem& system,
                    const RoaEstimate& estimate, long n_starts, std::uint64_t seed,
                    double delta_target, double t_max, double h) {
  if (system.control_dim != 0) {
    throw InputError("validate_roa expects an autonomous system; close the loop first");
  }
  if (n_starts <= 0) throw InputError("validation needs a positive number of starts");
  if (!(delta_target > 0.0)) throw InputError("delta_target must be positive");
  if (!(estimate.c_star > 0.0)) {
    throw InputError("the estimated sublevel set is empty; nothing to validate");
  }

  LyapWorkspace lws(model);
  Rng rng(mix_seed(seed, kSaltRoaStarts));
  const Box& box = system.domain;
  Eigen::VectorXd x(system.dim);
  long converged = 0;
  const long max_attempts = 1000 * n_starts + 10000;
  long attempts = 0;
  for (long s = 0; s < n_starts; ++s) {
    for (;;) {
      if (++attempts > max_attempts) {
        throw InputError("could not sample the sublevel set; it has nearly zero volume");
      }
      for (int i = 0; i < system.dim; ++i) x[i] = rng.uniform(box.lower[i], box.upper[i]);
      if (lyap_eval_ws(model, x, lws).value <= estimate.c_star) break;
    }
    const Trajectory traj = rk4_integrate(system, x, h, t_max, delta_target);
    if (traj.reached_ball && !traj.exit) ++converged;
  }
  return static_cast<double>(converged) / static_cast<double>(n_starts);
}

}  // namespace lyapnet
