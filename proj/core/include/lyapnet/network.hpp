#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "lyapnet/activation.hpp"

#include <nlohmann/json_fwd.hpp>

namespace lyapnet {

// Fully connected feed-forward net. layer_widths = {d_in, h_1, ..., h_k, d_out};
// hidden layers use `activation`, the output layer is linear.
// weights[l] has shape widths[l+1] x widths[l]; biases[l] has length widths[l+1].
struct Network {
  std::vector<int> layer_widths;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Activation activation = Activation::kRePU;

  int input_dim() const { return layer_widths.front(); }
  int output_dim() const { return layer_widths.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }
  long param_count() const;
};

// Zero-initialized net of the given shape. Throws InputError on widths with
// fewer than two entries or non-positive entries.
Network make_network(const std::vector<int>& layer_widths, Activation activation);

// Xavier-uniform weights (+-sqrt(6/(fan_in+fan_out)), clipped to [-1,1]),
// zero biases. Deterministic in `seed`; draw order is layer by layer,
// row-major within each weight matrix.
Network xavier_init(const std::vector<int>& layer_widths, Activation activation,
                    std::uint64_t seed);

// Projects every weight and bias onto [-1,1] in place.
void clip_params(Network& net);

// Flat parameter vector: for each layer, weights row-major then biases.
Eigen::VectorXd get_params(const Network& net);
void set_params(Network& net, const Eigen::VectorXd& params);

// Zeroes the entries of `flat` that correspond to bias parameters (used to
// freeze biases during training).
void zero_bias_entries(const Network& net, Eigen::VectorXd& flat);

struct JointEval {
  double value = 0.0;
  Eigen::VectorXd input_grad;  // d(value)/dx, length input_dim
};

// One reverse-pass request: the gradient of
//   weight_on_value * net(x) + weight_on_input_grad . grad_x net(x)
// with respect to the parameters. weight_on_input_grad may be empty (treated
// as zero). Scalar-output nets only.
struct GradSeed {
  Eigen::VectorXd x;
  double weight_on_value = 0.0;
  Eigen::VectorXd weight_on_input_grad;
};

// Scratch buffers for repeated evaluation of one network shape. Not shared
// across threads; cheap to construct once per worker. The buffers are an
// implementation detail of the forward/backward passes below.
struct NetWorkspace {
  NetWorkspace() = default;
  explicit NetWorkspace(const Network& net) { resize(net); }
  void resize(const Network& net);

  // Forward state per layer: pre-activation z, activation a, input Jacobian J
  // of a w.r.t. x, and U = W * J_prev (needed again in reverse).
  std::vector<Eigen::VectorXd> z_, a_;
  std::vector<Eigen::MatrixXd> jac_, u_;
  // Reverse state.
  std::vector<Eigen::VectorXd> zbar_;
  std::vector<Eigen::MatrixXd> jbar_, ubar_;
};

// Plain forward pass, scalar output.
double forward_value(const Network& net, const Eigen::VectorXd& x);
double forward_value_ws(const Network& net, const Eigen::VectorXd& x, NetWorkspace& ws);

// Forward pass with vector output (control nets).
Eigen::VectorXd forward_vec(const Network& net, const Eigen::VectorXd& x);
void forward_vec_ws(const Network& net, const Eigen::VectorXd& x, NetWorkspace& ws,
                    Eigen::VectorXd& out);

// Value and exact input gradient in one pass, propagating the layer Jacobians
// J_l = diag(act'(z_l)) W_l J_{l-1} alongside the activations. Scalar output.
JointEval forward_joint(const Network& net, const Eigen::VectorXd& x);
JointEval forward_joint_ws(const Network& net, const Eigen::VectorXd& x, NetWorkspace& ws);

// Vector-output variant: fills `value` (d_out) and `jac` (d_out x d_in).
void forward_joint_vec_ws(const Network& net, const Eigen::VectorXd& x, NetWorkspace& ws,
                          Eigen::VectorXd& value, Eigen::MatrixXd& jac);

// Accumulates parameter gradients of weighted (value, input-gradient) seeds
// across many inputs; the result of take() is the flat-parameter gradient in
// get_params() layout. Accumulation order is the call order, so results are
// reproducible for a fixed call sequence.
class GradAccumulator {
 public:
  explicit GradAccumulator(const Network& net);

  // Adds the gradient of wv * net(x) + wg . grad_x net(x). wg may be empty.
  void add(const Eigen::VectorXd& x, double wv, const Eigen::VectorXd& wg);

  // Vector-output nets: adds the gradient of cot . net(x) (no input-gradient
  // seed). Used for control networks.
  void add_value_seed(const Eigen::VectorXd& x, const Eigen::VectorXd& cot);

  // Flat gradient accumulated so far; resets the accumulator.
  Eigen::VectorXd take();

  void reset();

 private:
  void backward(double wv_scalar, const Eigen::VectorXd* cot,
                const Eigen::VectorXd& wg, const Eigen::VectorXd& x, bool with_jacobian);

  const Network* net_;
  NetWorkspace ws_;
  std::vector<Eigen::MatrixXd> wgrad_;
  std::vector<Eigen::VectorXd> bgrad_;
};

// Gradient of sum_i [wv_i * net(x_i) + wg_i . grad_x net(x_i)] w.r.t. the flat
// parameter vector. Throws InputError on non-finite seeds or dimension
// mismatches.
Eigen::VectorXd param_grad(const Network& net, const std::vector<GradSeed>& seeds);

nlohmann::json network_to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);

}  // namespace lyapnet
