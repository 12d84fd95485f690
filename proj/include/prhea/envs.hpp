#pragma once

// Desk-scale continuous-control tasks. All three are hand-built ODEs
// integrated with fixed-step semi-implicit Euler so rollouts are cheap,
// deterministic, and exactly snapshottable. Every task parameter lives in the
// constants block of its namespace; acceptance thresholds depend on them.

#include <cmath>
#include <memory>

#include "prhea/env.hpp"

namespace prhea {

namespace pointmass {
// Double integrator steered to a fixed goal. Sanity task with no deception.
inline constexpr double kDt = 0.05;
inline constexpr double kGoalX = 1.0;
inline constexpr double kGoalY = 1.0;
inline constexpr double kAccelLimit = 1.0;
inline constexpr int kMaxEpisodeSteps = 100;
}  // namespace pointmass

/// State (px, py, vx, vy); actions are accelerations. Reward is the per-step
/// decrease of the distance to the goal, so holding still scores zero.
class PointMassEnv final : public Environment {
 public:
  PointMassEnv() {
    spec_.state_dim = 4;
    spec_.action_dim = 2;
    spec_.action_low = Eigen::Vector2d(-pointmass::kAccelLimit, -pointmass::kAccelLimit);
    spec_.action_high = Eigen::Vector2d(pointmass::kAccelLimit, pointmass::kAccelLimit);
    spec_.max_episode_steps = pointmass::kMaxEpisodeSteps;
    reset(0);
  }

  const std::string& id() const override { return id_; }
  const EnvSpec& spec() const override { return spec_; }

  Eigen::VectorXd reset(std::uint64_t) override {
    px_ = py_ = vx_ = vy_ = 0.0;
    step_ = 0;
    terminal_ = false;
    return observation();
  }

  StepResult step(const Eigen::VectorXd& action) override {
    check_not_terminal();
    const Eigen::VectorXd a = clip_action(action);
    const double before = goal_distance();
    vx_ += pointmass::kDt * a(0);
    vy_ += pointmass::kDt * a(1);
    px_ += pointmass::kDt * vx_;
    py_ += pointmass::kDt * vy_;
    ++step_;
    terminal_ = step_ >= spec_.max_episode_steps;
    return {before - goal_distance(), observation(), terminal_};
  }

  Eigen::VectorXd observation() const override {
    return Eigen::Vector4d(px_, py_, vx_, vy_);
  }
  bool terminal() const override { return terminal_; }
  std::int64_t step_count() const override { return step_; }

  Snapshot snapshot() const override {
    return {id_, step_, terminal_, {px_, py_, vx_, vy_}};
  }
  void restore(const Snapshot& snap) override {
    check_snapshot(snap);
    px_ = snap.data[0];
    py_ = snap.data[1];
    vx_ = snap.data[2];
    vy_ = snap.data[3];
    step_ = snap.step;
    terminal_ = snap.terminal;
  }

  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<PointMassEnv>(*this);
  }

  double goal_distance() const {
    return std::hypot(pointmass::kGoalX - px_, pointmass::kGoalY - py_);
  }

 private:
  std::string id_ = "pointmass";
  EnvSpec spec_;
  double px_ = 0.0, py_ = 0.0, vx_ = 0.0, vy_ = 0.0;
  std::int64_t step_ = 0;
  bool terminal_ = false;
};

namespace trapswimmer {
// 1-D swimmer with a single paddle leg. The paddle only bites beyond
// kThrustAngle, while opening it always pushes the body backwards, so any
// cycle that stays below the threshold is a net loss: forward progress
// requires committing to a wide, temporarily punishing opening stroke.
inline constexpr double kDt = 0.05;
inline constexpr double kTorqueLimit = 20.0;
inline constexpr double kLegGain = 0.24;       // torque -> leg acceleration
inline constexpr double kLegDamping = 4.0;     // max leg speed = gain*torque/damping
inline constexpr double kLegMaxAngle = 1.5;    // paddle range [0, max]
inline constexpr double kThrustAngle = 0.6;    // closing bites only beyond this
inline constexpr double kCloseGain = 0.6;      // sub-threshold closing thrust
inline constexpr double kCloseBonusGain = 3.0; // extra thrust beyond threshold
inline constexpr double kOpenCost = 1.0;       // backward push while opening
inline constexpr double kBodyDrag = 1.0;
inline constexpr double kEffortCost = 1e-5;    // quadratic control penalty
inline constexpr int kMaxEpisodeSteps = 300;
}  // namespace trapswimmer

/// State (x, v, phi, omega), observation (v, phi, omega, time_remaining).
/// Reward is v_x - 1e-5 ||u||^2 with the velocity at decision time.
class TrapSwimmerEnv final : public Environment {
 public:
  TrapSwimmerEnv() {
    spec_.state_dim = 4;
    spec_.action_dim = 1;
    spec_.action_low = Eigen::VectorXd::Constant(1, -trapswimmer::kTorqueLimit);
    spec_.action_high = Eigen::VectorXd::Constant(1, trapswimmer::kTorqueLimit);
    spec_.max_episode_steps = trapswimmer::kMaxEpisodeSteps;
    reset(0);
  }

  const std::string& id() const override { return id_; }
  const EnvSpec& spec() const override { return spec_; }

  Eigen::VectorXd reset(std::uint64_t) override {
    x_ = v_ = phi_ = omega_ = 0.0;
    step_ = 0;
    terminal_ = false;
    return observation();
  }

  StepResult step(const Eigen::VectorXd& action) override {
    namespace ts = trapswimmer;
    check_not_terminal();
    const double u = clip_action(action)(0);
    const double reward = v_ - ts::kEffortCost * u * u;

    omega_ += ts::kDt * (ts::kLegGain * u - ts::kLegDamping * omega_);
    phi_ += ts::kDt * omega_;
    if (phi_ <= 0.0) {
      phi_ = 0.0;
      omega_ = 0.0;
    } else if (phi_ >= ts::kLegMaxAngle) {
      phi_ = ts::kLegMaxAngle;
      omega_ = 0.0;
    }

    double thrust;
    if (omega_ >= 0.0) {
      thrust = -ts::kOpenCost * phi_ * omega_;
    } else {
      const double bite = ts::kCloseGain * phi_ +
                          ts::kCloseBonusGain * std::max(0.0, phi_ - ts::kThrustAngle);
      thrust = bite * (-omega_);
    }
    v_ += ts::kDt * (thrust - ts::kBodyDrag * v_);
    x_ += ts::kDt * v_;

    ++step_;
    terminal_ = step_ >= spec_.max_episode_steps;
    return {reward, observation(), terminal_};
  }

  Eigen::VectorXd observation() const override {
    const double t_rem =
        1.0 - static_cast<double>(step_) / spec_.max_episode_steps;
    return Eigen::Vector4d(v_, phi_, omega_, t_rem);
  }
  bool terminal() const override { return terminal_; }
  std::int64_t step_count() const override { return step_; }

  Snapshot snapshot() const override {
    return {id_, step_, terminal_, {x_, v_, phi_, omega_}};
  }
  void restore(const Snapshot& snap) override {
    check_snapshot(snap);
    x_ = snap.data[0];
    v_ = snap.data[1];
    phi_ = snap.data[2];
    omega_ = snap.data[3];
    step_ = snap.step;
    terminal_ = snap.terminal;
  }

  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<TrapSwimmerEnv>(*this);
  }

  double body_x() const { return x_; }

 private:
  std::string id_ = "trapswimmer";
  EnvSpec spec_;
  double x_ = 0.0, v_ = 0.0, phi_ = 0.0, omega_ = 0.0;
  std::int64_t step_ = 0;
  bool terminal_ = false;
};

namespace leanwalker {
// Inverted-pendulum walker analog. Leaning forward raises speed, and with it
// the immediate reward, but the available torque can only rebalance the torso
// below kDoomAngle = asin(kTorqueLimit / kPendulumGain): past that the fall is
// certain yet still half a second away, which is exactly the deceptive window.
inline constexpr double kDt = 0.05;
inline constexpr double kTorqueLimit = 1.0;
inline constexpr double kPendulumGain = 2.5;  // gravity/length torque scale
inline constexpr double kAngularDamping = 0.5;
inline constexpr double kLeanAccel = 3.0;     // forward pull of the lean
inline constexpr double kSpeedDrag = 1.0;
inline constexpr double kDirectAccel = 0.05;  // direct torque -> speed leak
inline constexpr double kFallAngle = 0.8;
inline constexpr double kAliveBonus = 1.0;
inline constexpr double kInitialLean = 0.02;
inline constexpr int kMaxEpisodeSteps = 300;
}  // namespace leanwalker

/// State (x, v, theta, omega), observation (v, theta, omega, cos theta,
/// time_remaining). Reward = forward velocity + alive bonus; terminal when
/// |theta| exceeds kFallAngle.
class LeanWalkerEnv final : public Environment {
 public:
  LeanWalkerEnv() {
    spec_.state_dim = 5;
    spec_.action_dim = 1;
    spec_.action_low = Eigen::VectorXd::Constant(1, -leanwalker::kTorqueLimit);
    spec_.action_high = Eigen::VectorXd::Constant(1, leanwalker::kTorqueLimit);
    spec_.max_episode_steps = leanwalker::kMaxEpisodeSteps;
    reset(0);
  }

  const std::string& id() const override { return id_; }
  const EnvSpec& spec() const override { return spec_; }

  Eigen::VectorXd reset(std::uint64_t) override {
    x_ = v_ = omega_ = 0.0;
    theta_ = leanwalker::kInitialLean;
    step_ = 0;
    terminal_ = false;
    return observation();
  }

  StepResult step(const Eigen::VectorXd& action) override {
    namespace lw = leanwalker;
    check_not_terminal();
    const double u = clip_action(action)(0);

    omega_ += lw::kDt * (lw::kPendulumGain * std::sin(theta_) + u - lw::kAngularDamping * omega_);
    theta_ += lw::kDt * omega_;
    v_ += lw::kDt * (lw::kLeanAccel * std::sin(theta_) - lw::kSpeedDrag * v_ + lw::kDirectAccel * u);
    x_ += lw::kDt * v_;

    ++step_;
    const bool fell = std::abs(theta_) > lw::kFallAngle;
    terminal_ = fell || step_ >= spec_.max_episode_steps;
    return {v_ + lw::kAliveBonus, observation(), terminal_};
  }

  Eigen::VectorXd observation() const override {
    Eigen::VectorXd obs(5);
    obs << v_, theta_, omega_, std::cos(theta_),
        1.0 - static_cast<double>(step_) / spec_.max_episode_steps;
    return obs;
  }
  bool terminal() const override { return terminal_; }
  std::int64_t step_count() const override { return step_; }

  Snapshot snapshot() const override {
    return {id_, step_, terminal_, {x_, v_, theta_, omega_}};
  }
  void restore(const Snapshot& snap) override {
    check_snapshot(snap);
    x_ = snap.data[0];
    v_ = snap.data[1];
    theta_ = snap.data[2];
    omega_ = snap.data[3];
    step_ = snap.step;
    terminal_ = snap.terminal;
  }

  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<LeanWalkerEnv>(*this);
  }

  double body_x() const { return x_; }

 private:
  std::string id_ = "leanwalker";
  EnvSpec spec_;
  double x_ = 0.0, v_ = 0.0, theta_ = 0.0, omega_ = 0.0;
  std::int64_t step_ = 0;
  bool terminal_ = false;
};

inline std::unique_ptr<Environment> make_env(const std::string& id) {
  if (id == "pointmass") return std::make_unique<PointMassEnv>();
  if (id == "trapswimmer") return std::make_unique<TrapSwimmerEnv>();
  if (id == "leanwalker") return std::make_unique<LeanWalkerEnv>();
  throw std::invalid_argument("unknown environment id '" + id + "'");
}

}  // namespace prhea
