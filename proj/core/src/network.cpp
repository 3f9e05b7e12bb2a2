#include "lyapnet/network.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "lyapnet/errors.hpp"
#include "lyapnet/rng.hpp"

namespace lyapnet {

namespace {

void check_shape(const std::vector<int>& widths) {
  if (widths.size() < 2) throw InputError("network needs at least an input and an output layer");
  for (int w : widths) {
    if (w <= 0) throw InputError("network layer widths must be positive");
  }
}

void check_input(const Network& net, const Eigen::VectorXd& x) {
  if (x.size() != net.input_dim()) {
    throw InputError("network input has dimension " + std::to_string(x.size()) +
                     ", expected " + std::to_string(net.input_dim()));
  }
}

}  // namespace

long Network::param_count() const {
  long n = 0;
  for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l) {
    n += static_cast<long>(layer_widths[l + 1]) * (layer_widths[l] + 1);
  }
  return n;
}

Network make_network(const std::vector<int>& layer_widths, Activation activation) {
  check_shape(layer_widths);
  Network net;
  net.layer_widths = layer_widths;
  net.activation = activation;
  for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l) {
    net.weights.emplace_back(Eigen::MatrixXd::Zero(layer_widths[l + 1], layer_widths[l]));
    net.biases.emplace_back(Eigen::VectorXd::Zero(layer_widths[l + 1]));
  }
  return net;
}

Network xavier_init(const std::vector<int>& layer_widths, Activation activation,
                    std::uint64_t seed) {
  Network net = make_network(layer_widths, activation);
  Rng rng(seed);
  for (auto& w : net.weights) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        w(i, j) = std::clamp(rng.uniform(-bound, bound), -1.0, 1.0);
      }
    }
  }
  return net;
}

void clip_params(Network& net) {
  for (auto& w : net.weights) w = w.cwiseMax(-1.0).cwiseMin(1.0);
  for (auto& b : net.biases) b = b.cwiseMax(-1.0).cwiseMin(1.0);
}

Eigen::VectorXd get_params(const Network& net) {
  Eigen::VectorXd p(net.param_count());
  long at = 0;
  for (int l = 0; l < net.num_layers(); ++l) {
    const auto& w = net.weights[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) p[at++] = w(i, j);
    }
    const auto& b = net.biases[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) p[at++] = b[i];
  }
  return p;
}

void zero_bias_entries(const Network& net, Eigen::VectorXd& flat) {
  if (flat.size() != net.param_count()) {
    throw InputError("flat vector length does not match the network");
  }
  long at = 0;
  for (int l = 0; l < net.num_layers(); ++l) {
    at += net.weights[l].rows() * net.weights[l].cols();
    flat.segment(at, net.biases[l].size()).setZero();
    at += net.biases[l].size();
  }
}

void set_params(Network& net, const Eigen::VectorXd& params) {
  if (params.size() != net.param_count()) {
    throw InputError("parameter vector has length " + std::to_string(params.size()) +
                     ", expected " + std::to_string(net.param_count()));
  }
  long at = 0;
  for (int l = 0; l < net.num_layers(); ++l) {
    auto& w = net.weights[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = params[at++];
    }
    auto& b = net.biases[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = params[at++];
  }
}

void NetWorkspace::resize(const Network& net) {
  const int L = net.num_layers();
  const int d = net.input_dim();
  z_.resize(L);
  a_.resize(L);
  jac_.resize(L);
  u_.resize(L);
  zbar_.resize(L);
  jbar_.resize(L);
  ubar_.resize(L);
  for (int l = 0; l < L; ++l) {
    const int w = net.layer_widths[l + 1];
    z_[l].resize(w);
    a_[l].resize(w);
    jac_[l].resize(w, d);
    u_[l].resize(w, d);
    zbar_[l].resize(w);
    jbar_[l].resize(w, d);
    ubar_[l].resize(w, d);
  }
}

namespace {

// Plain forward; fills ws.z_ and ws.a_.
void forward_plain(const Network& net, const Eigen::VectorXd& x, NetWorkspace& ws,
                   std::vector<Eigen::VectorXd>& z, std::vector<Eigen::VectorXd>& a) {
  (void)ws;
  const int L = net.num_layers();
  const Eigen::VectorXd* prev = &x;
  for (int l = 0; l < L; ++l) {
    z[l].noalias() = net.weights[l] * (*prev);
    z[l] += net.biases[l];
    if (l < L - 1) {
      for (Eigen::Index i = 0; i < z[l].size(); ++i) a[l][i] = act_value(net.activation, z[l][i]);
    } else {
      a[l] = z[l];
    }
    prev = &a[l];
  }
}

// Joint forward; fills z_, a_, u_, jac_.
void forward_with_jacobian(const Network& net, const Eigen::VectorXd& x, NetWorkspace& ws) {
  const int L = net.num_layers();
  const Eigen::VectorXd* prev = &x;
  for (int l = 0; l < L; ++l) {
    ws.z_[l].noalias() = net.weights[l] * (*prev);
    ws.z_[l] += net.biases[l];
    if (l == 0) {
      ws.u_[0] = net.weights[0];
    } else {
      ws.u_[l].noalias() = net.weights[l] * ws.jac_[l - 1];
    }
    if (l < L - 1) {
      for (Eigen::Index i = 0; i < ws.z_[l].size(); ++i) {
        const double d = act_deriv(net.activation, ws.z_[l][i]);
        ws.a_[l][i] = act_value(net.activation, ws.z_[l][i]);
        ws.jac_[l].row(i) = d * ws.u_[l].row(i);
      }
    } else {
      ws.a_[l] = ws.z_[l];
      ws.jac_[l] = ws.u_[l];
    }
    prev = &ws.a_[l];
  }
}

}  // namespace

double forward_value_ws(const Network& net, const Eigen::VectorXd& x, NetWorkspace& ws) {
  check_input(net, x);
  if (net.output_dim() != 1) throw InputError("forward_value requires a scalar-output network");
  forward_plain(net, x, ws, ws.z_, ws.a_);
  return ws.a_.back()[0];
}

double forward_value(const Network& net, const Eigen::VectorXd& x) {
  NetWorkspace ws(net);
  return forward_value_ws(net, x, ws);
}

void forward_vec_ws(const Network& net, const Eigen::VectorXd& x, NetWorkspace& ws,
                    Eigen::VectorXd& out) {
  check_input(net, x);
  forward_plain(net, x, ws, ws.z_, ws.a_);
  out = ws.a_.back();
}

Eigen::VectorXd forward_vec(const Network& net, const Eigen::VectorXd& x) {
  NetWorkspace ws(net);
  Eigen::VectorXd out;
  forward_vec_ws(net, x, ws, out);
  return out;
}

JointEval forward_joint_ws(const Network& net, const Eigen::VectorXd& x, NetWorkspace& ws) {
  check_input(net, x);
  if (net.output_dim() != 1) throw InputError("forward_joint requires a scalar-output network");
  forward_with_jacobian(net, x, ws);
  JointEval out;
  out.value = ws.a_.back()[0];
  out.input_grad = ws.jac_.back().row(0).transpose();
  return out;
}

JointEval forward_joint(const Network& net, const Eigen::VectorXd& x) {
  NetWorkspace ws(net);
  return forward_joint_ws(net, x, ws);
}

void forward_joint_vec_ws(const Network& net, const Eigen::VectorXd& x, NetWorkspace& ws,
                          Eigen::VectorXd& value, Eigen::MatrixXd& jac) {
  check_input(net, x);
  forward_with_jacobian(net, x, ws);
  value = ws.a_.back();
  jac = ws.jac_.back();
}

GradAccumulator::GradAccumulator(const Network& net) : net_(&net), ws_(net) {
  wgrad_.reserve(net.num_layers());
  bgrad_.reserve(net.num_layers());
  for (int l = 0; l < net.num_layers(); ++l) {
    wgrad_.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    bgrad_.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
}

void GradAccumulator::reset() {
  for (auto& w : wgrad_) w.setZero();
  for (auto& b : bgrad_) b.setZero();
}

// Reverse pass. Forward state must be in ws_. Cotangents:
//   value side:    wv (scalar out) or cot (vector out)
//   Jacobian side: wg (row cotangent on the scalar output's input gradient)
// The pre-activation cotangent picks up a second-derivative term from the
// Jacobian path: zbar[i] += act''(z[i]) * (Jbar.row(i) . U.row(i)).
void GradAccumulator::backward(double wv_scalar, const Eigen::VectorXd* cot,
                               const Eigen::VectorXd& wg, const Eigen::VectorXd& x,
                               bool with_jacobian) {
  const Network& net = *net_;
  const int L = net.num_layers();
  const int last = L - 1;

  // Output layer is linear: zbar = abar, Ubar = Jbar.
  if (cot != nullptr) {
    ws_.zbar_[last] = *cot;
  } else {
    ws_.zbar_[last].setZero();
    ws_.zbar_[last][0] = wv_scalar;
  }
  if (with_jacobian) {
    ws_.jbar_[last].setZero();
    ws_.jbar_[last].row(0) = wg.transpose();
    ws_.ubar_[last] = ws_.jbar_[last];
  }

  for (int l = last; l >= 0; --l) {
    if (l != last) {
      // a_l = act(z_l), J_l = diag(act'(z_l)) U_l.
      for (Eigen::Index i = 0; i < ws_.z_[l].size(); ++i) {
        const double zi = ws_.z_[l][i];
        double zb = act_deriv(net.activation, zi) * ws_.zbar_[l][i];
        if (with_jacobian) {
          zb += act_second(net.activation, zi) * ws_.jbar_[l].row(i).dot(ws_.u_[l].row(i));
          ws_.ubar_[l].row(i) = act_deriv(net.activation, zi) * ws_.jbar_[l].row(i);
        }
        ws_.zbar_[l][i] = zb;
      }
    }
    // z_l = W_l a_{l-1} + b_l and U_l = W_l J_{l-1} (J_{-1} = I).
    const Eigen::VectorXd& a_prev = (l == 0) ? x : ws_.a_[l - 1];
    wgrad_[l].noalias() += ws_.zbar_[l] * a_prev.transpose();
    if (with_jacobian) {
      if (l == 0) {
        wgrad_[0] += ws_.ubar_[0];
      } else {
        wgrad_[l].noalias() += ws_.ubar_[l] * ws_.jac_[l - 1].transpose();
      }
    }
    bgrad_[l] += ws_.zbar_[l];
    if (l > 0) {
      ws_.zbar_[l - 1].noalias() = net.weights[l].transpose() * ws_.zbar_[l];
      if (with_jacobian) {
        ws_.jbar_[l - 1].noalias() = net.weights[l].transpose() * ws_.ubar_[l];
      }
    }
  }
}

void GradAccumulator::add(const Eigen::VectorXd& x, double wv, const Eigen::VectorXd& wg) {
  const Network& net = *net_;
  check_input(net, x);
  if (net.output_dim() != 1) throw InputError("GradAccumulator::add requires scalar output");
  if (!x.allFinite() || !std::isfinite(wv) || (wg.size() > 0 && !wg.allFinite())) {
    throw InputError("non-finite gradient seed");
  }
  const bool with_jac = wg.size() > 0;
  if (with_jac && wg.size() != net.input_dim()) {
    throw InputError("input-gradient seed has wrong dimension");
  }
  if (with_jac) {
    forward_with_jacobian(net, x, ws_);
    backward(wv, nullptr, wg, x, true);
  } else {
    forward_plain(net, x, ws_, ws_.z_, ws_.a_);
    static const Eigen::VectorXd kEmpty;
    backward(wv, nullptr, kEmpty, x, false);
  }
}

void GradAccumulator::add_value_seed(const Eigen::VectorXd& x, const Eigen::VectorXd& cot) {
  const Network& net = *net_;
  check_input(net, x);
  if (cot.size() != net.output_dim()) throw InputError("output cotangent has wrong dimension");
  if (!x.allFinite() || !cot.allFinite()) throw InputError("non-finite gradient seed");
  forward_plain(net, x, ws_, ws_.z_, ws_.a_);
  static const Eigen::VectorXd kEmpty;
  backward(0.0, &cot, kEmpty, x, false);
}

Eigen::VectorXd GradAccumulator::take() {
  const Network& net = *net_;
  Eigen::VectorXd g(net.param_count());
  long at = 0;
  for (int l = 0; l < net.num_layers(); ++l) {
    const auto& w = wgrad_[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) g[at++] = w(i, j);
    }
    const auto& b = bgrad_[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) g[at++] = b[i];
  }
  reset();
  return g;
}

Eigen::VectorXd param_grad(const Network& net, const std::vector<GradSeed>& seeds) {
  GradAccumulator acc(net);
  for (const auto& s : seeds) acc.add(s.x, s.weight_on_value, s.weight_on_input_grad);
  return acc.take();
}

nlohmann::json network_to_json(const Network& net) {
  nlohmann::json j;
  j["layer_widths"] = net.layer_widths;
  j["activation"] = activation_name(net.activation);
  nlohmann::json weights = nlohmann::json::array();
  for (const auto& w : net.weights) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index jx = 0; jx < w.cols(); ++jx) row.push_back(w(i, jx));
      rows.push_back(std::move(row));
    }
    weights.push_back(std::move(rows));
  }
  j["weights"] = std::move(weights);
  nlohmann::json biases = nlohmann::json::array();
  for (const auto& b : net.biases) {
    nlohmann::json vec = nlohmann::json::array();
    for (Eigen::Index i = 0; i < b.size(); ++i) vec.push_back(b[i]);
    biases.push_back(std::move(vec));
  }
  j["biases"] = std::move(biases);
  return j;
}

Network network_from_json(const nlohmann::json& j) {
  try {
    std::vector<int> widths = j.at("layer_widths").get<std::vector<int>>();
    Network net = make_network(widths, activation_from_name(j.at("activation").get<std::string>()));
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (static_cast<int>(weights.size()) != net.num_layers() ||
        static_cast<int>(biases.size()) != net.num_layers()) {
      throw InputError("network JSON has wrong number of layers");
    }
    for (int l = 0; l < net.num_layers(); ++l) {
      auto& w = net.weights[l];
      const auto& rows = weights[l];
      if (static_cast<Eigen::Index>(rows.size()) != w.rows()) {
        throw InputError("network JSON weight matrix has wrong shape");
      }
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        const auto& row = rows[i];
        if (static_cast<Eigen::Index>(row.size()) != w.cols()) {
          throw InputError("network JSON weight matrix has wrong shape");
        }
        for (Eigen::Index jx = 0; jx < w.cols(); ++jx) w(i, jx) = row[jx].get<double>();
      }
      auto& b = net.biases[l];
      const auto& vec = biases[l];
      if (static_cast<Eigen::Index>(vec.size()) != b.size()) {
        throw InputError("network JSON bias vector has wrong shape");
      }
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = vec[i].get<double>();
    }
    if (!get_params(net).allFinite()) throw InputError("network JSON contains non-finite values");
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed network JSON: ") + e.what());
  }
}

}  // namespace lyapnet
