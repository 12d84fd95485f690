#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace prhea {

struct EnvSpec {
  int state_dim = 0;
  int action_dim = 0;
  Eigen::VectorXd action_low;
  Eigen::VectorXd action_high;
  int max_episode_steps = 0;
};

/// Environment-specific full state. Restoring a snapshot and replaying the
/// same actions reproduces rewards and observations bit-exactly.
struct Snapshot {
  std::string env_id;
  std::int64_t step = 0;
  bool terminal = false;
  std::vector<double> data;

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

struct StepResult {
  double reward = 0.0;
  Eigen::VectorXd next_state;
  bool terminal = false;
};

/// Deterministic forward model with save/restore, the substrate every
/// planner rollout runs on. Instances are single-owner; clones are fully
/// independent.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const std::string& id() const = 0;
  virtual const EnvSpec& spec() const = 0;

  /// Deterministic (seeded) initial state with the step counter at zero.
  virtual Eigen::VectorXd reset(std::uint64_t seed) = 0;

  /// Advances one step. Actions are clipped to bounds as a final guard.
  /// Stepping a terminal environment is an error.
  virtual StepResult step(const Eigen::VectorXd& action) = 0;

  virtual Eigen::VectorXd observation() const = 0;
  virtual bool terminal() const = 0;
  virtual std::int64_t step_count() const = 0;

  virtual Snapshot snapshot() const = 0;
  virtual void restore(const Snapshot& snap) = 0;

  virtual std::unique_ptr<Environment> clone() const = 0;

 protected:
  void check_snapshot(const Snapshot& snap) const {
    if (snap.env_id != id())
      throw std::invalid_argument("snapshot from environment '" + snap.env_id +
                                  "' cannot restore '" + id() + "'");
  }
  Eigen::VectorXd clip_action(const Eigen::VectorXd& action) const {
    const EnvSpec& sp = spec();
    if (action.size() != sp.action_dim)
      throw std::invalid_argument("action dimension mismatch");
    return action.cwiseMax(sp.action_low).cwiseMin(sp.action_high);
  }
  void check_not_terminal() const {
    if (terminal()) throw std::logic_error("cannot step a terminal environment");
  }
};

/// Creates an environment by string id; see envs.hpp for the registry.
std::unique_ptr<Environment> make_env(const std::string& id);

}  // namespace prhea
