#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "prhea/nn.hpp"
#include "prhea/rng.hpp"

using namespace prhea;

namespace {

constexpr double kLog2Pi = 1.8378770664093454;

void zero_params(Mlp& mlp) {
  for (auto& layer : mlp.layers()) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
}

GaussianPolicy zero_policy(int state_dim, int action_dim) {
  Rng rng(0);
  GaussianPolicy p(state_dim, action_dim, rng, {8, 8});
  zero_params(p.mean_net);
  p.log_std.setZero();
  return p;
}

// 1-2-1 network with weights chosen for a hand-computed forward pass.
Mlp hand_net() {
  Rng rng(0);
  Mlp net({1, 2, 1}, rng);
  net.layers()[0].weight << 0.5, -1.0;
  net.layers()[0].bias << 0.1, 0.2;
  net.layers()[1].weight << 2.0, 3.0;
  net.layers()[1].bias << -0.05;
  return net;
}

}  // namespace

TEST_CASE("policy_forward on the zero network", "[nn]") {
  GaussianPolicy p = zero_policy(3, 2);
  auto [mean, std] = policy_forward(p, Eigen::Vector3d(0.4, -1.0, 2.0));
  CHECK(mean.isZero(0.0));
  CHECK((std - Eigen::Vector2d(1.0, 1.0)).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("policy std is independent of the state", "[nn]") {
  Rng rng(5);
  GaussianPolicy p(4, 2, rng, {16, 16});
  p.log_std << -0.3, 0.7;
  auto [m1, s1] = policy_forward(p, Eigen::Vector4d(1, 2, 3, 4));
  auto [m2, s2] = policy_forward(p, Eigen::Vector4d(-4, 0, 1, 9));
  CHECK(s1 == s2);
  CHECK(m1 != m2);
}

TEST_CASE("hand-built 1-2-1 network matches the hand computation", "[nn]") {
  Mlp net = hand_net();
  // x = 0.3: z = (0.25, -0.1) -> leaky (0.25, -0.02) -> 2*0.25 + 3*(-0.02) - 0.05
  Eigen::VectorXd x(1);
  x << 0.3;
  CHECK(net.forward(x)(0) == Catch::Approx(0.39).margin(1e-12));
}

TEST_CASE("leaky rectifier maps -1 to -0.2 on hidden layers", "[nn]") {
  Rng rng(0);
  Mlp net({1, 1, 1}, rng);
  net.layers()[0].weight << 1.0;
  net.layers()[0].bias << 0.0;
  net.layers()[1].weight << 1.0;
  net.layers()[1].bias << 0.0;
  Eigen::VectorXd x(1);
  x << -1.0;
  CHECK(net.forward(x)(0) == Catch::Approx(-0.2).margin(1e-15));
}

TEST_CASE("value_forward of the zero network is zero", "[nn]") {
  Rng rng(0);
  ValueNet v(3, rng, {8, 8});
  zero_params(v.net);
  CHECK(value_forward(v, Eigen::Vector3d(1.0, -2.0, 0.1)) == 0.0);
}

TEST_CASE("policy_sample degenerates to the mean and is seed-reproducible", "[nn]") {
  Rng rng(11);
  GaussianPolicy p(2, 2, rng, {8});
  p.log_std.setConstant(-300.0);
  Eigen::Vector2d s(0.3, 0.9);
  Rng r1(3);
  auto [mean, std] = policy_forward(p, s);
  CHECK((policy_sample(p, s, r1) - mean).lpNorm<Eigen::Infinity>() < 1e-12);

  p.log_std.setConstant(0.5);
  Rng ra(77), rb(77);
  CHECK(policy_sample(p, s, ra) == policy_sample(p, s, rb));
}

TEST_CASE("policy_sample statistics concentrate around the mean", "[nn]") {
  Rng rng(21);
  GaussianPolicy p(2, 1, rng, {8});
  p.log_std.setConstant(std::log(0.7));
  Eigen::Vector2d s(0.1, -0.4);
  auto [mean, std] = policy_forward(p, s);
  Rng draw(99);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += policy_sample(p, s, draw)(0);
  CHECK(std::abs(sum / n - mean(0)) < 4.0 * std(0) / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("policy_log_prob closed forms", "[nn]") {
  GaussianPolicy p1 = zero_policy(2, 1);
  Eigen::Vector2d s(0.0, 0.0);
  Eigen::VectorXd a(1);
  a << 0.0;  // action = mean, unit std
  CHECK(policy_log_prob(p1, s, a) == Catch::Approx(-0.5 * kLog2Pi).margin(1e-12));

  // two dimensions, action one std from the mean in each
  GaussianPolicy p2 = zero_policy(2, 2);
  Eigen::Vector2d a2(1.0, 1.0);
  CHECK(policy_log_prob(p2, s, a2) == Catch::Approx(-1.0 - kLog2Pi).margin(1e-12));

  Eigen::Vector3d wrong(1.0, 1.0, 1.0);
  CHECK_THROWS_AS(policy_log_prob(p2, s, wrong), std::invalid_argument);
}

TEST_CASE("policy_log_prob is translation invariant", "[nn]") {
  // mean comes entirely from the output bias of a zero-weight network
  GaussianPolicy p = zero_policy(2, 2);
  p.log_std << 0.2, -0.4;
  Eigen::Vector2d s(0.0, 0.0);
  Eigen::Vector2d offset(0.7, -1.2);
  Eigen::Vector2d delta(0.3, 0.5);

  p.mean_net.layers().back().bias = Eigen::Vector2d(0.1, 0.2);
  const double lp1 = policy_log_prob(p, s, Eigen::Vector2d(0.1 + delta(0), 0.2 + delta(1)));
  p.mean_net.layers().back().bias = Eigen::Vector2d(0.1, 0.2) + offset;
  const double lp2 = policy_log_prob(
      p, s, Eigen::Vector2d(0.1 + offset(0) + delta(0), 0.2 + offset(1) + delta(1)));
  CHECK(lp1 == Catch::Approx(lp2).margin(1e-12));
}

TEST_CASE("policy density integrates to one", "[nn]") {
  Rng rng(8);
  GaussianPolicy p(2, 1, rng, {8, 8});
  p.log_std.setConstant(std::log(0.6));
  Eigen::Vector2d s(0.2, -0.7);
  auto [mean, std] = policy_forward(p, s);

  const int n = 4000;
  const double lo = mean(0) - 8.0 * std(0);
  const double hi = mean(0) + 8.0 * std(0);
  const double h = (hi - lo) / n;
  double integral = 0.0;
  Eigen::VectorXd a(1);
  for (int i = 0; i <= n; ++i) {
    a(0) = lo + h * i;
    const double f = std::exp(policy_log_prob(p, s, a));
    integral += (i == 0 || i == n) ? 0.5 * f : f;
  }
  integral *= h;
  CHECK(integral == Catch::Approx(1.0).margin(1e-3));
}

TEST_CASE("joint_loss closed form when value is exact and actions sit at the mean", "[nn]") {
  const int action_dim = 3;
  GaussianPolicy p = zero_policy(2, action_dim);
  Rng rng(0);
  ValueNet v(2, rng, {4});
  zero_params(v.net);
  v.net.layers().back().bias << 2.5;  // V(s) = 2.5 everywhere

  Eigen::MatrixXd states = Eigen::MatrixXd::Random(2, 5);
  Eigen::MatrixXd actions = Eigen::MatrixXd::Zero(action_dim, 5);
  Eigen::VectorXd returns = Eigen::VectorXd::Constant(5, 2.5);

  auto res = joint_loss(p, v, states, actions, returns);
  CHECK(res.value_mse == Catch::Approx(0.0).margin(1e-15));
  CHECK(res.loss == Catch::Approx(action_dim * 0.5 * kLog2Pi).margin(1e-12));
}

TEST_CASE("value gradient of the output bias equals V(s) - R*", "[nn]") {
  Rng rng(17);
  GaussianPolicy p = zero_policy(3, 1);
  ValueNet v(3, rng, {8, 8});
  Eigen::MatrixXd states = Eigen::MatrixXd::Random(3, 1);
  Eigen::MatrixXd actions = Eigen::MatrixXd::Zero(1, 1);
  Eigen::VectorXd returns(1);
  returns << 1.7;

  const double pred = value_forward(v, states.col(0));
  auto res = joint_loss(p, v, states, actions, returns);
  CHECK(res.value_grads.biases.back()(0) == Catch::Approx(pred - 1.7).margin(1e-12));
}

TEST_CASE("joint_loss rejects bad batches", "[nn]") {
  GaussianPolicy p = zero_policy(2, 1);
  Rng rng(0);
  ValueNet v(2, rng, {4});
  Eigen::MatrixXd states(2, 0), actions(1, 0);
  Eigen::VectorXd returns(0);
  CHECK_THROWS_AS(joint_loss(p, v, states, actions, returns), std::invalid_argument);

  Eigen::MatrixXd s1 = Eigen::MatrixXd::Zero(2, 1);
  Eigen::MatrixXd a1 = Eigen::MatrixXd::Zero(1, 1);
  Eigen::VectorXd r1 = Eigen::VectorXd::Zero(1);
  s1(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(joint_loss(p, v, s1, a1, r1), std::invalid_argument);
}

TEST_CASE("joint_loss gradients match central finite differences", "[nn]") {
  Rng rng(123);
  for (int trial = 0; trial < 5; ++trial) {
    const int sd = 2 + trial % 3;
    const int ad = 1 + trial % 2;
    const int b = 1 + trial * 2 % 7;
    GaussianPolicy p(sd, ad, rng, {6, 5});
    ValueNet v(sd, rng, {7});
    for (int i = 0; i < p.log_std.size(); ++i) p.log_std(i) = rng.uniform(-0.5, 0.5);

    Eigen::MatrixXd states(sd, b), actions(ad, b);
    Eigen::VectorXd returns(b);
    for (int j = 0; j < b; ++j) {
      for (int i = 0; i < sd; ++i) states(i, j) = rng.uniform(-2.0, 2.0);
      for (int i = 0; i < ad; ++i) actions(i, j) = rng.uniform(-2.0, 2.0);
      returns(j) = rng.uniform(-2.0, 2.0);
    }

    auto res = joint_loss(p, v, states, actions, returns);
    auto analytic_p = grad_views(res.policy_grads);
    auto analytic_v = grad_views(res.value_grads);

    const double h = 1e-5;
    auto check_views = [&](std::vector<ParamView> params, const std::vector<GradView>& analytic) {
      for (size_t k = 0; k < params.size(); ++k) {
        for (Eigen::Index i = 0; i < params[k].size; i += std::max<Eigen::Index>(1, params[k].size / 7)) {
          double& w = params[k].data[i];
          const double saved = w;
          w = saved + h;
          const double up = joint_loss(p, v, states, actions, returns).loss;
          w = saved - h;
          const double down = joint_loss(p, v, states, actions, returns).loss;
          w = saved;
          const double fd = (up - down) / (2.0 * h);
          const double an = analytic[k].data[i];
          CHECK(std::abs(fd - an) <= 1e-4 * std::max({1e-4, std::abs(fd), std::abs(an)}));
        }
      }
    };
    check_views(p.param_views(), analytic_p);
    check_views(v.param_views(), analytic_v);
  }
}

TEST_CASE("rmsprop single-parameter hand computation", "[nn]") {
  RmsPropConfig cfg;
  cfg.gradient_clip = 1e9;  // hand computation uses the raw gradient
  RmsProp opt(cfg);
  double w = 1.0;
  double g = 1.0;
  opt.step({{&w, 1}}, {{&g, 1}});
  CHECK(opt.accumulators()[0](0) == Catch::Approx(0.01).margin(1e-15));
  CHECK(w - 1.0 == Catch::Approx(-3e-3 * 1.0 / std::sqrt(0.01 + 1e-8)).margin(1e-12));
}

TEST_CASE("rmsprop with zero gradient decays accumulators and keeps parameters", "[nn]") {
  RmsPropConfig cfg;
  RmsProp opt(cfg);
  double w = 2.0;
  double g = 0.3;
  opt.step({{&w, 1}}, {{&g, 1}});
  const double w_after = w;
  const double acc_after = opt.accumulators()[0](0);
  g = 0.0;
  opt.step({{&w, 1}}, {{&g, 1}});
  CHECK(w == w_after);
  CHECK(opt.accumulators()[0](0) == Catch::Approx(0.99 * acc_after).margin(1e-18));
}

TEST_CASE("rmsprop clips the global gradient norm to 0.5", "[nn]") {
  RmsProp opt{RmsPropConfig{}};
  double w[2] = {0.0, 0.0};
  double g[2] = {3.0, 4.0};  // norm 5 -> scaled by 0.1
  opt.step({{&w[0], 1}, {&w[1], 1}}, {{&g[0], 1}, {&g[1], 1}});
  CHECK(opt.accumulators()[0](0) == Catch::Approx(0.01 * 0.09).margin(1e-15));
  CHECK(opt.accumulators()[1](0) == Catch::Approx(0.01 * 0.16).margin(1e-15));

  double bad = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(opt.step({{&w[0], 1}, {&w[1], 1}}, {{&g[0], 1}, {&bad, 1}}),
                  std::invalid_argument);
}

TEST_CASE("a small value step decreases the squared error", "[nn]") {
  Rng rng(55);
  GaussianPolicy p = zero_policy(3, 1);
  ValueNet v(3, rng, {12, 12});
  Eigen::MatrixXd states = Eigen::MatrixXd::Random(3, 4);
  Eigen::MatrixXd actions = Eigen::MatrixXd::Zero(1, 4);
  Eigen::VectorXd returns(4);
  returns << 1.0, -0.5, 2.0, 0.3;

  auto before = joint_loss(p, v, states, actions, returns);
  RmsPropConfig cfg;
  cfg.learning_rate = 1e-5;
  RmsProp opt(cfg);
  opt.step(v.param_views(), grad_views(before.value_grads));
  auto after = joint_loss(p, v, states, actions, returns);
  CHECK(after.value_mse < before.value_mse);
}

TEST_CASE("network initialization is deterministic per seed", "[nn]") {
  Rng r1(42), r2(42);
  GaussianPolicy a(5, 2, r1), b(5, 2, r2);
  for (size_t k = 0; k < a.mean_net.layers().size(); ++k) {
    CHECK(a.mean_net.layers()[k].weight == b.mean_net.layers()[k].weight);
    CHECK(a.mean_net.layers()[k].bias == b.mean_net.layers()[k].bias);
  }
  CHECK(a.log_std == b.log_std);
}
