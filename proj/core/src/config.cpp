#include "lyapnet/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "lyapnet/errors.hpp"

namespace lyapnet {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw InputError("config: " + path + ": " + what);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object, got " + std::string(j.type_name()));
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  expect_object(j, path);
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) fail(join(path, item.key()), "unknown key");
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    fail(join(path, key), e.what());
  }
}

void require_absent(const json& j, const char* key, const std::string& path,
                    const std::string& why) {
  if (j.contains(key)) fail(join(path, key), why);
}

Box parse_box(const json& j, const std::string& path) {
  check_keys(j, path, {"lower", "upper"});
  std::vector<double> lo, up;
  read_field(j, "lower", lo, path);
  read_field(j, "upper", up, path);
  if (lo.empty() || lo.size() != up.size())
    fail(path, "lower/upper must be non-empty arrays of equal length");
  Box b;
  b.lower = Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<long>(lo.size()));
  b.upper = Eigen::Map<const Eigen::VectorXd>(up.data(), static_cast<long>(up.size()));
  for (int i = 0; i < b.dim(); ++i)
    if (!(b.lower[i] < b.upper[i]))
      fail(path, "lower[" + std::to_string(i) + "] must be below upper[" + std::to_string(i) +
                     "]");
  return b;
}

json box_to_json(const Box& b) {
  json j;
  j["lower"] = std::vector<double>(b.lower.data(), b.lower.data() + b.dim());
  j["upper"] = std::vector<double>(b.upper.data(), b.upper.data() + b.dim());
  return j;
}

SystemConfig parse_system(const json& j, const std::string& path) {
  check_keys(j, path,
             {"kind", "dim", "seed", "rate", "copies", "base", "normalize", "equilibrium",
              "domain", "lipschitz_samples"});
  SystemConfig sc;
  read_field(j, "kind", sc.kind, path);
  const bool is_synthetic = sc.kind == "synthetic";
  const bool is_linear = sc.kind == "linear";
  const bool is_block = sc.kind == "block_concat";
  const bool is_curve = sc.kind == "curve_tracking";
  if (!is_synthetic && !is_linear && !is_block && !is_curve && sc.kind != "pendulum")
    fail(join(path, "kind"),
         "unknown system '" + sc.kind +
             "' (curve_tracking, pendulum, synthetic, block_concat, linear)");

  if (!is_synthetic) require_absent(j, "seed", path, "only the synthetic family draws one");
  if (!is_linear) require_absent(j, "rate", path, "only the linear family has a rate");
  if (!is_block) {
    require_absent(j, "copies", path, "only block_concat stacks copies");
    require_absent(j, "base", path, "only block_concat nests a base system");
  }
  if (!is_curve)
    require_absent(j, "equilibrium", path, "only curve_tracking accepts an override");
  if (!is_synthetic && !is_linear)
    require_absent(j, "dim", path, "dimension is fixed by the family");

  read_field(j, "dim", sc.dim, path);
  read_field(j, "seed", sc.seed, path);
  read_field(j, "rate", sc.rate, path);
  read_field(j, "copies", sc.copies, path);
  read_field(j, "normalize", sc.normalize, path);
  read_field(j, "lipschitz_samples", sc.lipschitz_samples, path);

  if ((is_synthetic || is_linear) && (!j.contains("dim") || sc.dim < 1))
    fail(join(path, "dim"), "required and must be >= 1");
  if (is_linear && !(std::isfinite(sc.rate) && sc.rate != 0.0))
    fail(join(path, "rate"), "must be finite and non-zero");
  if (is_block && sc.copies < 1) fail(join(path, "copies"), "must be >= 1");
  if (sc.lipschitz_samples < 1) fail(join(path, "lipschitz_samples"), "must be >= 1");

  if (auto it = j.find("equilibrium"); it != j.end()) {
    std::vector<double> e;
    read_field(j, "equilibrium", e, path);
    if (e.size() != 2) fail(join(path, "equilibrium"), "must be a 2-vector");
    sc.equilibrium = Eigen::Map<const Eigen::VectorXd>(e.data(), 2);
  }
  if (auto it = j.find("domain"); it != j.end())
    sc.domain = parse_box(*it, join(path, "domain"));
  if (auto it = j.find("base"); it != j.end())
    sc.base = std::make_shared<SystemConfig>(parse_system(*it, join(path, "base")));
  return sc;
}

json system_to_json(const SystemConfig& sc) {
  json j;
  j["kind"] = sc.kind;
  if (sc.kind == "synthetic") j["seed"] = sc.seed;
  if (sc.kind == "synthetic" || sc.kind == "linear") j["dim"] = sc.dim;
  if (sc.kind == "linear") j["rate"] = sc.rate;
  if (sc.kind == "block_concat") {
    j["copies"] = sc.copies;
    if (sc.base) j["base"] = system_to_json(*sc.base);
  }
  j["normalize"] = sc.normalize;
  j["lipschitz_samples"] = sc.lipschitz_samples;
  if (sc.equilibrium)
    j["equilibrium"] = std::vector<double>(sc.equilibrium->data(),
                                           sc.equilibrium->data() + sc.equilibrium->size());
  if (sc.domain) j["domain"] = box_to_json(*sc.domain);
  return j;
}

ModelConfig parse_model(const json& j, const std::string& path) {
  check_keys(j, path,
             {"depth", "width", "activation", "alpha_bar", "psi", "augmentation", "huber_delta"});
  ModelConfig mc;
  read_field(j, "depth", mc.depth, path);
  read_field(j, "width", mc.width, path);
  read_field(j, "activation", mc.activation, path);
  read_field(j, "alpha_bar", mc.alpha_bar, path);
  read_field(j, "psi", mc.psi, path);
  read_field(j, "augmentation", mc.augmentation, path);
  read_field(j, "huber_delta", mc.huber_delta, path);
  if (mc.depth < 1) fail(join(path, "depth"), "must be >= 1");
  if (mc.width < 1) fail(join(path, "width"), "must be >= 1");
  if (!(mc.alpha_bar > 0.0)) fail(join(path, "alpha_bar"), "must be > 0");
  if (!(mc.huber_delta > 0.0)) fail(join(path, "huber_delta"), "must be > 0");
  try {
    activation_from_name(mc.activation);
    psi_from_name(mc.psi);
    augmentation_from_name(mc.augmentation);
  } catch (const InputError& e) {
    fail(path, e.what());
  }
  return mc;
}

json model_to_json(const ModelConfig& mc) {
  json j;
  j["depth"] = mc.depth;
  j["width"] = mc.width;
  j["activation"] = mc.activation;
  j["alpha_bar"] = mc.alpha_bar;
  j["psi"] = mc.psi;
  j["augmentation"] = mc.augmentation;
  j["huber_delta"] = mc.huber_delta;
  return j;
}

ControlConfig parse_control(const json& j, const std::string& path) {
  check_keys(j, path, {"saturation", "train_bias"});
  ControlConfig cc;
  cc.present = true;
  read_field(j, "saturation", cc.saturation, path);
  read_field(j, "train_bias", cc.train_bias, path);
  if (!std::isfinite(cc.saturation)) fail(join(path, "saturation"), "must be finite");
  return cc;
}

TrainConfig parse_train(const json& j, const std::string& path) {
  check_keys(j, path,
             {"max_iters", "tol", "n_samples", "gamma", "delta_exclusion", "resample_each_iter",
              "clip_params", "adam", "control_lr", "dl_upper", "dl_lower"});
  TrainConfig tc;
  read_field(j, "max_iters", tc.max_iters, path);
  read_field(j, "tol", tc.tol, path);
  read_field(j, "n_samples", tc.n_samples, path);
  read_field(j, "gamma", tc.gamma, path);
  read_field(j, "delta_exclusion", tc.delta_exclusion, path);
  read_field(j, "resample_each_iter", tc.resample_each_iter, path);
  read_field(j, "clip_params", tc.clip_params, path);
  read_field(j, "control_lr", tc.control_lr, path);
  read_field(j, "dl_upper", tc.dl_upper, path);
  read_field(j, "dl_lower", tc.dl_lower, path);
  if (auto it = j.find("adam"); it != j.end()) {
    const std::string apath = join(path, "adam");
    check_keys(*it, apath, {"lr", "beta1", "beta2", "eps"});
    read_field(*it, "lr", tc.adam.lr, apath);
    read_field(*it, "beta1", tc.adam.beta1, apath);
    read_field(*it, "beta2", tc.adam.beta2, apath);
    read_field(*it, "eps", tc.adam.eps, apath);
    if (!(tc.adam.lr > 0.0)) fail(join(apath, "lr"), "must be > 0");
    if (!(tc.adam.beta1 >= 0.0 && tc.adam.beta1 < 1.0))
      fail(join(apath, "beta1"), "must lie in [0,1)");
    if (!(tc.adam.beta2 >= 0.0 && tc.adam.beta2 < 1.0))
      fail(join(apath, "beta2"), "must lie in [0,1)");
    if (!(tc.adam.eps > 0.0)) fail(join(apath, "eps"), "must be > 0");
  }
  if (tc.max_iters < 1) fail(join(path, "max_iters"), "must be >= 1");
  if (!(tc.tol >= 0.0)) fail(join(path, "tol"), "must be >= 0");
  if (tc.n_samples < 1) fail(join(path, "n_samples"), "must be >= 1");
  if (!(tc.gamma >= 0.0)) fail(join(path, "gamma"), "must be >= 0");
  if (!(tc.delta_exclusion >= 0.0)) fail(join(path, "delta_exclusion"), "must be >= 0");
  if (!(tc.dl_lower > 0.0) || !(tc.dl_upper > tc.dl_lower))
    fail(join(path, "dl_upper"), "need 0 < dl_lower < dl_upper");
  return tc;
}

json train_to_json(const TrainConfig& tc) {
  json j;
  j["max_iters"] = tc.max_iters;
  j["tol"] = tc.tol;
  j["n_samples"] = tc.n_samples;
  j["gamma"] = tc.gamma;
  j["delta_exclusion"] = tc.delta_exclusion;
  j["resample_each_iter"] = tc.resample_each_iter;
  j["clip_params"] = tc.clip_params;
  j["adam"] = {{"lr", tc.adam.lr},
               {"beta1", tc.adam.beta1},
               {"beta2", tc.adam.beta2},
               {"eps", tc.adam.eps}};
  j["control_lr"] = tc.control_lr;
  j["dl_upper"] = tc.dl_upper;
  j["dl_lower"] = tc.dl_lower;
  return j;
}

CertifyConfig parse_certify(const json& j, const std::string& path) {
  check_keys(j, path,
             {"delta", "c", "gamma_bar", "m_method", "m_safety", "grid_budget", "m_samples",
              "mc_samples"});
  CertifyConfig cc;
  read_field(j, "delta", cc.delta, path);
  read_field(j, "gamma_bar", cc.gamma_bar, path);
  read_field(j, "m_method", cc.m_method, path);
  read_field(j, "m_safety", cc.m_safety, path);
  read_field(j, "grid_budget", cc.grid_budget, path);
  read_field(j, "m_samples", cc.m_samples, path);
  read_field(j, "mc_samples", cc.mc_samples, path);
  if (auto it = j.find("c"); it != j.end()) {
    if (it->is_string()) {
      if (it->get<std::string>() != "auto")
        fail(join(path, "c"), "must be a number in (0,1) or \"auto\"");
    } else {
      double v = 0.0;
      read_field(j, "c", v, path);
      if (!(v > 0.0 && v < 1.0)) fail(join(path, "c"), "must lie in (0,1)");
      cc.c = v;
    }
  }
  if (!(cc.delta > 0.0 && cc.delta < 1.0)) fail(join(path, "delta"), "must lie in (0,1)");
  if (!(cc.gamma_bar > 0.0)) fail(join(path, "gamma_bar"), "must be > 0");
  if (!(cc.m_safety >= 1.0)) fail(join(path, "m_safety"), "must be >= 1");
  if (!(cc.grid_budget >= 1.0)) fail(join(path, "grid_budget"), "must be >= 1");
  if (cc.m_samples < 1) fail(join(path, "m_samples"), "must be >= 1");
  if (cc.mc_samples < 0) fail(join(path, "mc_samples"), "must be >= 0");
  try {
    m_method_from_name(cc.m_method);
  } catch (const InputError& e) {
    fail(join(path, "m_method"), e.what());
  }
  return cc;
}

json certify_to_json(const CertifyConfig& cc) {
  json j;
  j["delta"] = cc.delta;
  if (cc.c)
    j["c"] = *cc.c;
  else
    j["c"] = "auto";
  j["gamma_bar"] = cc.gamma_bar;
  j["m_method"] = cc.m_method;
  j["m_safety"] = cc.m_safety;
  j["grid_budget"] = cc.grid_budget;
  j["m_samples"] = cc.m_samples;
  j["mc_samples"] = cc.mc_samples;
  return j;
}

RoaConfig parse_roa(const json& j, const std::string& path) {
  check_keys(j, path,
             {"resolution", "exclusion_radius", "delta_target", "t_max", "h", "n_starts",
              "n_trajectories"});
  RoaConfig rc;
  read_field(j, "resolution", rc.resolution, path);
  read_field(j, "exclusion_radius", rc.exclusion_radius, path);
  read_field(j, "delta_target", rc.delta_target, path);
  read_field(j, "t_max", rc.t_max, path);
  read_field(j, "h", rc.h, path);
  read_field(j, "n_starts", rc.n_starts, path);
  read_field(j, "n_trajectories", rc.n_trajectories, path);
  if (rc.resolution < 50) fail(join(path, "resolution"), "must be >= 50");
  if (!(rc.exclusion_radius >= 0.0)) fail(join(path, "exclusion_radius"), "must be >= 0");
  if (!std::isfinite(rc.delta_target)) fail(join(path, "delta_target"), "must be finite");
  if (!(rc.t_max > 0.0)) fail(join(path, "t_max"), "must be > 0");
  if (!(rc.h > 0.0)) fail(join(path, "h"), "must be > 0");
  if (rc.n_starts < 0) fail(join(path, "n_starts"), "must be >= 0");
  if (rc.n_trajectories < 0) fail(join(path, "n_trajectories"), "must be >= 0");
  return rc;
}

json roa_to_json(const RoaConfig& rc) {
  json j;
  j["resolution"] = rc.resolution;
  j["exclusion_radius"] = rc.exclusion_radius;
  j["delta_target"] = rc.delta_target;
  j["t_max"] = rc.t_max;
  j["h"] = rc.h;
  j["n_starts"] = rc.n_starts;
  j["n_trajectories"] = rc.n_trajectories;
  return j;
}

CompareConfig parse_compare(const json& j, const std::string& path) {
  check_keys(j, path, {"methods", "seeds", "n_metric", "dl_activation", "nl_activation"});
  CompareConfig cc;
  read_field(j, "methods", cc.methods, path);
  read_field(j, "seeds", cc.seeds, path);
  read_field(j, "n_metric", cc.n_metric, path);
  read_field(j, "dl_activation", cc.dl_activation, path);
  read_field(j, "nl_activation", cc.nl_activation, path);
  if (cc.methods.empty()) fail(join(path, "methods"), "must list at least one method");
  for (const auto& m : cc.methods)
    if (m != "ln" && m != "dl" && m != "nl")
      fail(join(path, "methods"), "unknown method '" + m + "' (ln, dl, nl)");
  if (cc.seeds.empty()) fail(join(path, "seeds"), "must list at least one seed");
  if (cc.n_metric < 1) fail(join(path, "n_metric"), "must be >= 1");
  try {
    activation_from_name(cc.dl_activation);
    activation_from_name(cc.nl_activation);
  } catch (const InputError& e) {
    fail(path, e.what());
  }
  return cc;
}

json compare_to_json(const CompareConfig& cc) {
  json j;
  j["methods"] = cc.methods;
  j["seeds"] = cc.seeds;
  j["n_metric"] = cc.n_metric;
  j["dl_activation"] = cc.dl_activation;
  j["nl_activation"] = cc.nl_activation;
  return j;
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& j) {
  check_keys(j, "",
             {"seed", "out_dir", "wall_clock", "system", "model", "control", "train", "certify",
              "roa", "compare"});
  RunConfig cfg;
  read_field(j, "seed", cfg.seed, "");
  read_field(j, "out_dir", cfg.out_dir, "");
  read_field(j, "wall_clock", cfg.wall_clock, "");
  if (cfg.out_dir.empty()) fail("out_dir", "must not be empty");
  if (cfg.wall_clock != "measured" && cfg.wall_clock != "zero")
    fail("wall_clock", "must be \"measured\" or \"zero\"");
  if (auto it = j.find("system"); it != j.end()) cfg.system = parse_system(*it, "system");
  if (auto it = j.find("model"); it != j.end()) cfg.model = parse_model(*it, "model");
  if (auto it = j.find("control"); it != j.end()) cfg.control = parse_control(*it, "control");
  if (auto it = j.find("train"); it != j.end()) cfg.train = parse_train(*it, "train");
  if (auto it = j.find("certify"); it != j.end()) cfg.certify = parse_certify(*it, "certify");
  if (auto it = j.find("roa"); it != j.end()) cfg.roa = parse_roa(*it, "roa");
  if (auto it = j.find("compare"); it != j.end()) cfg.compare = parse_compare(*it, "compare");
  cfg.train.seed = cfg.seed;
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t upto = e.byte > 0 ? e.byte - 1 : 0;
    if (upto > text.size()) upto = text.size();
    long line = 1 + static_cast<long>(std::count(text.begin(), text.begin() + upto, '\n'));
    throw InputError(path + ":" + std::to_string(line) + ": " + e.what());
  }
  return config_from_json(j);
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  j["wall_clock"] = cfg.wall_clock;
  j["system"] = system_to_json(cfg.system);
  j["model"] = model_to_json(cfg.model);
  if (cfg.control.present)
    j["control"] = {{"saturation", cfg.control.saturation},
                    {"train_bias", cfg.control.train_bias}};
  j["train"] = train_to_json(cfg.train);
  j["certify"] = certify_to_json(cfg.certify);
  j["roa"] = roa_to_json(cfg.roa);
  j["compare"] = compare_to_json(cfg.compare);
  return j;
}

DynamicalSystem make_system(const SystemConfig& sc) {
  DynamicalSystem sys;
  if (sc.kind == "curve_tracking") {
    std::optional<Eigen::Vector2d> eq;
    if (sc.equilibrium) eq = Eigen::Vector2d(*sc.equilibrium);
    sys = curve_tracking(eq);
  } else if (sc.kind == "pendulum") {
    sys = pendulum();
  } else if (sc.kind == "synthetic") {
    sys = synthetic(sc.dim, sc.seed);
  } else if (sc.kind == "linear") {
    sys = linear_system(sc.dim, sc.rate);
  } else if (sc.kind == "block_concat") {
    SystemConfig base_cfg;
    base_cfg.kind = "curve_tracking";
    if (sc.base) base_cfg = *sc.base;
    sys = block_concat(make_system(base_cfg), sc.copies);
  } else {
    throw InputError("config: system.kind: unknown system '" + sc.kind + "'");
  }
  if (sc.domain) {
    if (sc.domain->dim() != sys.dim)
      throw InputError("config: system.domain: expected dimension " + std::to_string(sys.dim) +
                       ", got " + std::to_string(sc.domain->dim()));
    if (!sc.domain->contains(sys.equilibrium))
      throw InputError("config: system.domain: must contain the equilibrium");
    sys.domain = *sc.domain;
  }
  if (sc.normalize) sys = normalize(sys);
  return sys;
}

std::vector<int> model_widths(const ModelConfig& mc, int dim) {
  std::vector<int> widths;
  widths.push_back(dim);
  for (int i = 0; i + 1 < mc.depth; ++i) widths.push_back(mc.width);
  widths.push_back(1);
  return widths;
}

LyapunovNet make_model(const ModelConfig& mc, const DynamicalSystem& system,
                       std::uint64_t seed) {
  return make_lyapunov_net(model_widths(mc, system.dim), activation_from_name(mc.activation), mc.alpha_bar,
                           system.equilibrium, seed, psi_from_name(mc.psi),
                           augmentation_from_name(mc.augmentation), mc.huber_delta);
}

ControlLaw make_control(const ControlConfig& cc, const DynamicalSystem& system,
                        std::uint64_t seed) {
  if (system.control_dim < 1)
    throw InputError("config: control block present but system '" + system.name +
                     "' has no control input");
  std::optional<double> sat;
  if (cc.saturation > 0.0) sat = cc.saturation;
  ControlLaw law = make_linear_control(system.dim, system.control_dim, seed, sat);
  law.train_bias = cc.train_bias;
  return law;
}

CertifyOptions certify_options(const RunConfig& cfg) {
  CertifyOptions opt;
  opt.delta = cfg.certify.delta;
  opt.c = cfg.certify.c;
  opt.gamma_bar = cfg.certify.gamma_bar;
  opt.m_method = m_method_from_name(cfg.certify.m_method);
  opt.m_safety = cfg.certify.m_safety;
  opt.grid_budget = cfg.certify.grid_budget;
  opt.m_samples = cfg.certify.m_samples;
  opt.mc_samples = cfg.certify.mc_samples;
  opt.seed = cfg.seed;
  return opt;
}

}  // namespace lyapnet
