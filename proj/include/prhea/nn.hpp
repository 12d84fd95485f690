#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "prhea/rng.hpp"

namespace prhea {

// Hidden activation is a leaky rectifier with this slope; outputs are linear.
inline constexpr double kLeakySlope = 0.2;
inline constexpr int kHiddenWidth = 128;

struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

struct MlpGrads {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

/// Mutable view of one parameter tensor, used by the optimizer.
struct ParamView {
  double* data;
  Eigen::Index size;
};
struct GradView {
  const double* data;
  Eigen::Index size;
};

/// Plain fully-connected network. Batched calls treat columns as samples.
class Mlp {
 public:
  Mlp() = default;

  /// widths = {input, hidden..., output}; weights uniform in
  /// +-sqrt(6 / (fan_in + fan_out)), biases zero.
  Mlp(const std::vector<int>& widths, Rng& rng) {
    if (widths.size() < 2) throw std::invalid_argument("mlp: need at least input and output widths");
    for (size_t k = 0; k + 1 < widths.size(); ++k) {
      const int fan_in = widths[k];
      const int fan_out = widths[k + 1];
      if (fan_in <= 0 || fan_out <= 0) throw std::invalid_argument("mlp: widths must be positive");
      Layer layer;
      layer.weight.resize(fan_out, fan_in);
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (int i = 0; i < fan_out; ++i)
        for (int j = 0; j < fan_in; ++j) layer.weight(i, j) = rng.uniform(-bound, bound);
      layer.bias = Eigen::VectorXd::Zero(fan_out);
      layers_.push_back(std::move(layer));
    }
  }

  int input_dim() const { return static_cast<int>(layers_.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers_.back().weight.rows()); }

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const {
    check_input(x);
    Eigen::MatrixXd a = x;
    for (size_t k = 0; k < layers_.size(); ++k) {
      Eigen::MatrixXd z = (layers_[k].weight * a).colwise() + layers_[k].bias;
      a = (k + 1 < layers_.size()) ? leaky(z) : z;
    }
    return a;
  }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
    return forward(Eigen::MatrixXd(x)).col(0);
  }

  /// Forward pass keeping per-layer pre-activations and activations for
  /// backprop. activations[0] is the input batch.
  struct Trace {
    std::vector<Eigen::MatrixXd> pre;          // z_k, one per layer
    std::vector<Eigen::MatrixXd> activations;  // a_0 = input, then a_k
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Trace& trace) const {
    check_input(x);
    trace.pre.clear();
    trace.activations.clear();
    trace.activations.push_back(x);
    for (size_t k = 0; k < layers_.size(); ++k) {
      Eigen::MatrixXd z = (layers_[k].weight * trace.activations.back()).colwise() + layers_[k].bias;
      trace.pre.push_back(z);
      trace.activations.push_back(k + 1 < layers_.size() ? leaky(z) : z);
    }
    return trace.activations.back();
  }

  /// Backpropagates d_out = dL/d(output) through the trace, accumulating
  /// parameter gradients. Returns dL/d(input).
  Eigen::MatrixXd backward(const Trace& trace, Eigen::MatrixXd d_out, MlpGrads& grads) const {
    if (grads.weights.empty()) grads = zero_grads();
    for (int k = static_cast<int>(layers_.size()) - 1; k >= 0; --k) {
      Eigen::MatrixXd dz = (k + 1 < static_cast<int>(layers_.size()))
                               ? (d_out.array() * leaky_grad(trace.pre[k]).array()).matrix()
                               : std::move(d_out);
      grads.weights[k].noalias() += dz * trace.activations[k].transpose();
      grads.biases[k] += dz.rowwise().sum();
      d_out = layers_[k].weight.transpose() * dz;
    }
    return d_out;
  }

  MlpGrads zero_grads() const {
    MlpGrads g;
    for (const auto& layer : layers_) {
      g.weights.emplace_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
      g.biases.emplace_back(Eigen::VectorXd::Zero(layer.bias.size()));
    }
    return g;
  }

  std::vector<ParamView> param_views() {
    std::vector<ParamView> v;
    for (auto& layer : layers_) {
      v.push_back({layer.weight.data(), layer.weight.size()});
      v.push_back({layer.bias.data(), layer.bias.size()});
    }
    return v;
  }

  static Eigen::MatrixXd leaky(const Eigen::MatrixXd& z) {
    return z.unaryExpr([](double v) { return v >= 0.0 ? v : kLeakySlope * v; });
  }
  static Eigen::MatrixXd leaky_grad(const Eigen::MatrixXd& z) {
    return z.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : kLeakySlope; });
  }

 private:
  void check_input(const Eigen::MatrixXd& x) const {
    if (layers_.empty()) throw std::logic_error("mlp: uninitialized");
    if (x.rows() != layers_.front().weight.cols())
      throw std::invalid_argument("mlp: input dimension mismatch");
  }

  std::vector<Layer> layers_;
};

inline std::vector<GradView> grad_views(const MlpGrads& g) {
  std::vector<GradView> v;
  for (size_t k = 0; k < g.weights.size(); ++k) {
    v.push_back({g.weights[k].data(), g.weights[k].size()});
    v.push_back({g.biases[k].data(), g.biases[k].size()});
  }
  return v;
}

/// Diagonal-Gaussian policy: an MLP for the mean plus a state-independent
/// trainable log standard deviation vector.
struct GaussianPolicy {
  Mlp mean_net;
  Eigen::VectorXd log_std;

  GaussianPolicy() = default;
  GaussianPolicy(int state_dim, int action_dim, Rng& rng,
                 std::vector<int> hidden = {kHiddenWidth, kHiddenWidth}) {
    std::vector<int> widths{state_dim};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(action_dim);
    mean_net = Mlp(widths, rng);
    log_std = Eigen::VectorXd::Zero(action_dim);
  }

  int state_dim() const { return mean_net.input_dim(); }
  int action_dim() const { return mean_net.output_dim(); }

  std::vector<ParamView> param_views() {
    auto v = mean_net.param_views();
    v.push_back({log_std.data(), log_std.size()});
    return v;
  }
};

struct PolicyGrads {
  MlpGrads mean_net;
  Eigen::VectorXd log_std;
};

inline std::vector<GradView> grad_views(const PolicyGrads& g) {
  auto v = grad_views(g.mean_net);
  v.push_back({g.log_std.data(), g.log_std.size()});
  return v;
}

/// Scalar state-value network.
struct ValueNet {
  Mlp net;

  ValueNet() = default;
  ValueNet(int state_dim, Rng& rng, std::vector<int> hidden = {kHiddenWidth, kHiddenWidth}) {
    std::vector<int> widths{state_dim};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(1);
    net = Mlp(widths, rng);
  }

  int state_dim() const { return net.input_dim(); }
  std::vector<ParamView> param_views() { return net.param_views(); }
};

inline std::pair<Eigen::VectorXd, Eigen::VectorXd> policy_forward(const GaussianPolicy& policy,
                                                                  const Eigen::VectorXd& state) {
  return {policy.mean_net.forward(state), policy.log_std.array().exp().matrix()};
}

/// Draws mean + std * z with z standard normal, one normal per dimension.
inline Eigen::VectorXd policy_sample(const GaussianPolicy& policy, const Eigen::VectorXd& state,
                                     Rng& rng) {
  auto [mean, std] = policy_forward(policy, state);
  for (int i = 0; i < mean.size(); ++i) mean(i) += std(i) * rng.normal();
  return mean;
}

/// Diagonal-Gaussian log density summed over action dimensions.
inline double policy_log_prob(const GaussianPolicy& policy, const Eigen::VectorXd& state,
                              const Eigen::VectorXd& action) {
  if (action.size() != policy.action_dim())
    throw std::invalid_argument("policy_log_prob: action dimension mismatch");
  static constexpr double kLog2Pi = 1.8378770664093454;
  auto [mean, std] = policy_forward(policy, state);
  double lp = 0.0;
  for (int i = 0; i < mean.size(); ++i) {
    const double z = (action(i) - mean(i)) / std(i);
    lp -= 0.5 * (z * z + 2.0 * policy.log_std(i) + kLog2Pi);
  }
  return lp;
}

inline double value_forward(const ValueNet& value, const Eigen::VectorXd& state) {
  return value.net.forward(state)(0);
}

/// Loss and exact gradients of the joint objective, averaged over the batch:
///   mean_j [ -log p(a*_j | s_j) + 1/2 (R*_j - V(s_j))^2 ].
/// Policy and value gradients do not mix; the networks share no parameters.
struct JointLossResult {
  double loss = 0.0;
  double policy_nll = 0.0;
  double value_mse = 0.0;
  PolicyGrads policy_grads;
  MlpGrads value_grads;
};

inline JointLossResult joint_loss(const GaussianPolicy& policy, const ValueNet& value,
                                  const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                                  const Eigen::VectorXd& returns) {
  const Eigen::Index batch = states.cols();
  if (batch == 0) throw std::invalid_argument("joint_loss: empty batch");
  if (actions.cols() != batch || returns.size() != batch)
    throw std::invalid_argument("joint_loss: batch size mismatch");
  if (!states.allFinite() || !actions.allFinite() || !returns.allFinite())
    throw std::invalid_argument("joint_loss: non-finite inputs");

  static constexpr double kLog2Pi = 1.8378770664093454;
  const double inv_b = 1.0 / static_cast<double>(batch);
  JointLossResult out;

  // --- policy term ---
  Mlp::Trace trace;
  Eigen::MatrixXd mean = policy.mean_net.forward(states, trace);
  Eigen::ArrayXd std = policy.log_std.array().exp();
  Eigen::ArrayXXd z = (actions - mean).array().colwise() / std;

  out.policy_nll = inv_b * (0.5 * z.square().sum()) + policy.log_std.sum() +
                   0.5 * kLog2Pi * static_cast<double>(policy.action_dim());

  Eigen::MatrixXd d_mean = ((-z).colwise() / std).matrix() * inv_b;
  out.policy_grads.mean_net = policy.mean_net.zero_grads();
  policy.mean_net.backward(trace, d_mean, out.policy_grads.mean_net);
  out.policy_grads.log_std = ((1.0 - z.square()).rowwise().sum() * inv_b).matrix();

  // --- value term ---
  Mlp::Trace vtrace;
  Eigen::RowVectorXd v = value.net.forward(states, vtrace).row(0);
  Eigen::RowVectorXd err = v - returns.transpose();
  out.value_mse = 0.5 * inv_b * err.squaredNorm();
  out.value_grads = value.net.zero_grads();
  value.net.backward(vtrace, Eigen::MatrixXd(err * inv_b), out.value_grads);

  out.loss = out.policy_nll + out.value_mse;
  return out;
}

/// RMSProp with clipping of the global gradient norm per call. One optimizer
/// instance per network; the accumulator layout mirrors the parameter views.
struct RmsPropConfig {
  double learning_rate = 3e-3;
  double decay = 0.99;
  double gradient_clip = 0.5;
  double epsilon = 1e-8;
};

class RmsProp {
 public:
  RmsProp() = default;
  explicit RmsProp(RmsPropConfig cfg) : cfg_(cfg) {}

  void step(std::vector<ParamView> params, const std::vector<GradView>& grads) {
    if (params.size() != grads.size()) throw std::invalid_argument("rmsprop: view count mismatch");
    if (acc_.empty())
      for (const auto& p : params) acc_.emplace_back(Eigen::VectorXd::Zero(p.size));
    if (acc_.size() != params.size()) throw std::invalid_argument("rmsprop: accumulator mismatch");

    double sq_norm = 0.0;
    for (size_t k = 0; k < grads.size(); ++k) {
      if (params[k].size != grads[k].size || acc_[k].size() != params[k].size)
        throw std::invalid_argument("rmsprop: shape mismatch");
      Eigen::Map<const Eigen::VectorXd> g(grads[k].data, grads[k].size);
      if (!g.allFinite()) throw std::invalid_argument("rmsprop: non-finite gradient");
      sq_norm += g.squaredNorm();
    }
    const double norm = std::sqrt(sq_norm);
    const double scale = (norm > cfg_.gradient_clip && norm > 0.0) ? cfg_.gradient_clip / norm : 1.0;

    for (size_t k = 0; k < grads.size(); ++k) {
      Eigen::Map<const Eigen::VectorXd> g(grads[k].data, grads[k].size);
      Eigen::Map<Eigen::VectorXd> p(params[k].data, params[k].size);
      Eigen::VectorXd clipped = g * scale;
      acc_[k] = cfg_.decay * acc_[k] + (1.0 - cfg_.decay) * clipped.cwiseProduct(clipped);
      p -= cfg_.learning_rate *
           clipped.cwiseQuotient((acc_[k].array() + cfg_.epsilon).sqrt().matrix());
    }
  }

  std::vector<Eigen::VectorXd>& accumulators() { return acc_; }
  const std::vector<Eigen::VectorXd>& accumulators() const { return acc_; }
  const RmsPropConfig& config() const { return cfg_; }

 private:
  RmsPropConfig cfg_;
  std::vector<Eigen::VectorXd> acc_;
};

}  // namespace prhea
