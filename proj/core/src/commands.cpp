#include "lyapnet/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lyapnet/certify.hpp"
#include "lyapnet/errors.hpp"
#include "lyapnet/rng.hpp"
#include "lyapnet/roa.hpp"
#include "lyapnet/train.hpp"

namespace lyapnet {
namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kSaltModelInit = 0x6d6f64656c;    // "model"
constexpr std::uint64_t kSaltControlInit = 0x63696e6974;  // "cinit"
constexpr std::uint64_t kSaltMetric = 0x6d657472;         // "metr"
constexpr std::uint64_t kSaltTraj = 0x726f6174;           // "roat"

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_json_file(const fs::path& p, const nlohmann::json& j) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot write '" + p.string() + "'");
  out << j.dump(2) << '\n';
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

// Creates the output directory and drops the defaults-resolved config echo;
// re-running from that echo reproduces the run.
fs::path prepare_out_dir(const RunConfig& cfg) {
  fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw InputError("cannot create output directory '" + cfg.out_dir + "': " + ec.message());
  write_json_file(dir / "config_effective.json", config_to_json(cfg));
  return dir;
}

void apply_wall_mode(const RunConfig& cfg, std::vector<TrainRow>& rows) {
  if (cfg.wall_clock != "zero") return;
  for (auto& r : rows) r.wall_clock_s = 0.0;
}

void write_risk_csv(const fs::path& p, const std::vector<TrainRow>& rows) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot write '" + p.string() + "'");
  out << "iter,wall_clock_s,risk_ln,risk_nl_metric,violation_count,max_violation\n";
  for (const auto& r : rows)
    out << r.iter << ',' << fmt(r.wall_clock_s) << ',' << fmt(r.risk) << ',' << fmt(r.nl_metric)
        << ',' << r.violation_count << ',' << fmt(r.max_violation) << '\n';
}

nlohmann::json train_summary(const TrainReport& rep) {
  const TrainRow& last = rep.curve.back();
  nlohmann::json j;
  j["stop_reason"] = rep.stop_reason == StopReason::kConverged ? "converged" : "max_iters";
  j["iters"] = rep.iters;
  j["final_risk"] = rep.final_risk;
  j["final_nl_metric"] = last.nl_metric;
  j["violation_count"] = last.violation_count;
  j["max_violation"] = last.max_violation;
  j["wall_clock_s"] = last.wall_clock_s;
  return j;
}

void check_model_matches(const LyapunovNet& model, const DynamicalSystem& system) {
  if (model.dim() != system.dim)
    throw InputError("model dimension " + std::to_string(model.dim()) +
                     " does not match system dimension " + std::to_string(system.dim));
  if ((model.equilibrium - system.equilibrium).lpNorm<Eigen::Infinity>() > 1e-9)
    throw InputError("model equilibrium does not match the system equilibrium");
}

int guard(const std::function<int()>& body) {
  try {
    return body();
  } catch (const GridBudgetError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitGridBudget;
  } catch (const UnsupportedDimError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUnsupportedDim;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
}

int cmd_train_impl(const RunConfig& cfg) {
  DynamicalSystem system = make_system(cfg.system);
  if (system.control_dim > 0 && !cfg.control.present)
    throw InputError("system '" + system.name +
                     "' has a control input; add a control block to train one");
  if (system.control_dim == 0 && cfg.control.present)
    throw InputError("config: control: system '" + system.name + "' has no control input");

  LyapunovNet model = make_model(cfg.model, system, mix_seed(cfg.seed, kSaltModelInit));
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;

  fs::path dir = prepare_out_dir(cfg);
  std::optional<ControlLaw> control;
  TrainReport rep;
  if (cfg.control.present) {
    control = make_control(cfg.control, system, mix_seed(cfg.seed, kSaltControlInit));
    rep = train_clf(model, system, *control, tc);
  } else {
    rep = train_lyapunov(model, system, tc);
  }
  apply_wall_mode(cfg, rep.curve);

  write_json_file(dir / "model.json", lyapunov_net_to_json(model));
  if (control) write_json_file(dir / "control.json", control_to_json(*control));
  write_risk_csv(dir / "risk.csv", rep.curve);
  write_json_file(dir / "summary.json", train_summary(rep));
  return rep.stop_reason == StopReason::kConverged ? kExitOk : kExitMaxIters;
}

int cmd_certify_impl(const RunConfig& cfg, const std::string& model_path) {
  DynamicalSystem system = make_system(cfg.system);
  if (system.control_dim > 0)
    throw InputError("certification runs on autonomous fields; close the loop first");
  LyapunovNet model = lyapunov_net_from_json(read_json_file(model_path));
  check_model_matches(model, system);

  CertifyOptions opt = certify_options(cfg);
  if (opt.m_method == MMethod::kAnalytic && !system.lipschitz_bound)
    estimate_lipschitz(system, cfg.system.lipschitz_samples, cfg.seed);

  fs::path dir = prepare_out_dir(cfg);
  try {
    Certificate cert = certify(model, system, opt);
    write_json_file(dir / "certificate.json", certificate_to_json(cert));
    std::printf("verdict: %s\n", verdict_name(cert.verdict).c_str());
    return cert.verdict == Verdict::kCertified ? kExitOk : kExitNotCertified;
  } catch (const GridBudgetError& e) {
    // No grid fits the budget; fall back to the sampling-only audit so the
    // run still leaves evidence behind.
    std::fprintf(stderr, "error: %s\n", e.what());
    McAudit audit = mc_audit(model, system, opt.delta, opt.mc_samples, opt.seed);
    nlohmann::json j;
    j["samples"] = audit.samples;
    j["violations"] = audit.violations;
    j["max_value"] = audit.max_value;
    j["required_grid_points"] = e.required_points;
    write_json_file(dir / "mc_audit.json", j);
    return kExitGridBudget;
  }
}

void write_roa_grid_csv(const fs::path& p, const RoaEstimate& est) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot write '" + p.string() + "'");
  out << "x1,x2,V,DVf,valid,in_roa\n";
  const int res = est.resolution;
  const Box& box = est.domain;
  for (int i = 0; i < res; ++i) {
    const double s = static_cast<double>(i) / (res - 1);
    const double x1 = box.lower[0] + s * (box.upper[0] - box.lower[0]);
    for (int j = 0; j < res; ++j) {
      const double t = static_cast<double>(j) / (res - 1);
      const double x2 = box.lower[1] + t * (box.upper[1] - box.lower[1]);
      const std::size_t node = static_cast<std::size_t>(i) * res + j;
      out << fmt(x1) << ',' << fmt(x2) << ',' << fmt(est.values(i, j)) << ','
          << fmt(est.orbital(i, j)) << ',' << int(est.valid[node]) << ','
          << int(est.inside[node]) << '\n';
    }
  }
}

void write_trajectories_csv(const fs::path& p, const LyapunovNet& model,
                            const DynamicalSystem& system, const RoaEstimate& est,
                            const RoaConfig& rc, std::uint64_t seed) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot write '" + p.string() + "'");
  out << "traj_id,t,x1,x2\n";
  if (!(est.c_star > 0.0) || rc.n_trajectories <= 0) return;

  Rng rng(mix_seed(seed, kSaltTraj));
  const Box& box = system.domain;
  Eigen::VectorXd x0(2);
  for (long id = 0; id < rc.n_trajectories; ++id) {
    long attempts = 0;
    do {
      for (int k = 0; k < 2; ++k) x0[k] = rng.uniform(box.lower[k], box.upper[k]);
      if (++attempts > 100000)
        throw InputError("could not sample trajectory starts inside the level set");
    } while (lyap_eval(model, x0).value > est.c_star);
    Trajectory traj = rk4_integrate(system, x0, rc.h, rc.t_max, rc.delta_target);
    for (std::size_t k = 0; k < traj.times.size(); ++k)
      out << id << ',' << fmt(traj.times[k]) << ',' << fmt(traj.states[k][0]) << ','
          << fmt(traj.states[k][1]) << '\n';
  }
}

int cmd_roa_impl(const RunConfig& cfg, const std::string& model_path,
                 const std::string& control_path) {
  DynamicalSystem system = make_system(cfg.system);
  if (system.dim != 2)
    throw UnsupportedDimError("the ROA scan needs a 2d system, got dimension " +
                              std::to_string(system.dim));

  DynamicalSystem closed = system;
  if (system.control_dim > 0) {
    if (control_path.empty())
      throw InputError("system '" + system.name + "' has a control input; pass --control");
    ControlLaw control = control_from_json(read_json_file(control_path));
    if (control.input_dim() != system.dim || control.output_dim() != system.control_dim)
      throw InputError("control law shape does not match the system");
    closed = closed_loop(system, control);
  } else if (!control_path.empty()) {
    throw InputError("system '" + system.name + "' is autonomous; drop --control");
  }
  LyapunovNet model = lyapunov_net_from_json(read_json_file(model_path));
  check_model_matches(model, closed);

  fs::path dir = prepare_out_dir(cfg);
  RoaEstimate est = estimate_roa(model, closed, cfg.roa.resolution, cfg.roa.exclusion_radius);
  double validated = 0.0;
  if (est.c_star > 0.0 && cfg.roa.n_starts > 0)
    validated = validate_roa(model, closed, est, cfg.roa.n_starts, cfg.seed,
                             cfg.roa.delta_target, cfg.roa.t_max, cfg.roa.h);

  write_roa_grid_csv(dir / "roa_grid.csv", est);
  write_trajectories_csv(dir / "roa_trajectories.csv", model, closed, est, cfg.roa, cfg.seed);
  nlohmann::json summary;
  summary["c_star"] = est.c_star;
  summary["area_fraction"] = est.area_fraction;
  summary["validated_fraction"] = validated;
  write_json_file(dir / "roa_summary.json", summary);
  std::printf("c_star: %s  area_fraction: %s  validated_fraction: %s\n", fmt(est.c_star).c_str(),
              fmt(est.area_fraction).c_str(), fmt(validated).c_str());
  return kExitOk;
}

struct CompareRow {
  std::string method;
  std::uint64_t seed = 0;
  long iter = 0;
  double wall_clock_s = 0.0;
  double l2_metric = 0.0;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_compare_impl(const RunConfig& cfg) {
  DynamicalSystem system = make_system(cfg.system);
  if (system.control_dim > 0)
    throw InputError("the comparison runs autonomous systems only");

  fs::path dir = prepare_out_dir(cfg);
  std::vector<CompareRow> rows;
  std::map<std::string, std::vector<double>> finals;

  for (std::uint64_t seed : cfg.compare.seeds) {
    SampleSet held =
        sample_uniform(system.domain, cfg.compare.n_metric, cfg.train.delta_exclusion,
                       system.equilibrium, mix_seed(seed, kSaltMetric));
    for (const std::string& method : cfg.compare.methods) {
      TrainConfig tc = cfg.train;
      tc.seed = seed;
      double last = 0.0;
      if (method == "ln") {
        LyapunovNet model = make_model(cfg.model, system, mix_seed(seed, kSaltModelInit));
        train_lyapunov(model, system, tc, [&](long iter, double wall) {
          last = risk_nl(model, system, held).value;
          rows.push_back({method, seed, iter, wall, last});
        });
      } else {
        const std::string& act_name =
            method == "dl" ? cfg.compare.dl_activation : cfg.compare.nl_activation;
        Network net = xavier_init(model_widths(cfg.model, system.dim),
                                  activation_from_name(act_name), mix_seed(seed, kSaltModelInit));
        const BaselineKind kind =
            method == "dl" ? BaselineKind::kSquaredHinge : BaselineKind::kUnsquared;
        train_baseline(net, system, kind, tc, [&](long iter, double wall) {
          last = risk_nl(net, system, held).value;
          rows.push_back({method, seed, iter, wall, last});
        });
      }
      finals[method].push_back(last);
    }
  }

  if (cfg.wall_clock == "zero")
    for (auto& r : rows) r.wall_clock_s = 0.0;

  std::ofstream out(dir / "compare.csv", std::ios::binary);
  if (!out) throw InputError("cannot write compare.csv");
  out << "method,seed,iter,wall_clock_s,l2_metric\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.seed << ',' << r.iter << ',' << fmt(r.wall_clock_s) << ','
        << fmt(r.l2_metric) << '\n';
  out.close();

  nlohmann::json summary;
  for (const auto& [method, vals] : finals) summary["median_final_l2"][method] = median(vals);
  write_json_file(dir / "compare_summary.json", summary);
  return kExitOk;
}

}  // namespace

int cmd_train(const RunConfig& cfg) {
  return guard([&] { return cmd_train_impl(cfg); });
}
int cmd_train(const std::string& config_path) {
  return guard([&] { return cmd_train_impl(load_config(config_path)); });
}

int cmd_certify(const RunConfig& cfg, const std::string& model_path) {
  return guard([&] { return cmd_certify_impl(cfg, model_path); });
}
int cmd_certify(const std::string& config_path, const std::string& model_path) {
  return guard([&] { return cmd_certify_impl(load_config(config_path), model_path); });
}

int cmd_roa(const RunConfig& cfg, const std::string& model_path,
            const std::string& control_path) {
  return guard([&] { return cmd_roa_impl(cfg, model_path, control_path); });
}
int cmd_roa(const std::string& config_path, const std::string& model_path,
            const std::string& control_path) {
  return guard([&] { return cmd_roa_impl(load_config(config_path), model_path, control_path); });
}

int cmd_compare(const RunConfig& cfg) {
  return guard([&] { return cmd_compare_impl(cfg); });
}
int cmd_compare(const std::string& config_path) {
  return guard([&] { return cmd_compare_impl(load_config(config_path)); });
}

}  // namespace lyapnet
