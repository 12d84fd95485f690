#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <thread>
#include <vector>

#include "prhea/cmaes.hpp"
#include "prhea/env.hpp"
#include "prhea/nn.hpp"
#include "prhea/rng.hpp"

namespace prhea {

/// Rolling-horizon planning parameters. The optimizer works on flat vectors
/// of H normalized actions in [-1, 1]^action_dim; genes are clipped to the
/// box and scaled to physical bounds before execution.
struct PlanConfig {
  int horizon = 20;          ///< H
  int generations = 5;       ///< NG
  int population = 0;        ///< NP; 0 selects 4 + floor(3 ln(H * action_dim))
  int elite = 0;             ///< mu; 0 selects NP / 2
  double discount = 0.99;    ///< gamma
  double sigma0 = 0.3;       ///< CMA step size in normalized action units
  bool use_policy_prior = false;
  bool use_value_prior = false;
  int steps_per_cycle = 1;   ///< T, actions executed per plan
  int workers = 1;           ///< parallel fitness evaluations
};

inline void validate_plan_config(const PlanConfig& cfg) {
  if (cfg.horizon <= 0) throw std::invalid_argument("plan: horizon must be positive");
  if (cfg.generations <= 0) throw std::invalid_argument("plan: generations must be positive");
  if (!(cfg.discount > 0.0 && cfg.discount < 1.0))
    throw std::invalid_argument("plan: discount must lie in (0, 1)");
  if (cfg.steps_per_cycle <= 0 || cfg.steps_per_cycle > cfg.horizon)
    throw std::invalid_argument("plan: steps per cycle must satisfy 1 <= T <= H");
}

/// Maps between normalized genes and physical actions.
class ActionCodec {
 public:
  explicit ActionCodec(const EnvSpec& spec)
      : center_((spec.action_high + spec.action_low) / 2.0),
        half_((spec.action_high - spec.action_low) / 2.0) {}

  Eigen::VectorXd clip(const Eigen::VectorXd& gene) const {
    return gene.cwiseMax(-1.0).cwiseMin(1.0);
  }
  Eigen::VectorXd to_physical(const Eigen::VectorXd& normalized) const {
    return center_ + half_.cwiseProduct(normalized);
  }
  Eigen::VectorXd to_normalized(const Eigen::VectorXd& physical) const {
    return (physical - center_).cwiseQuotient(half_);
  }

 private:
  Eigen::VectorXd center_;
  Eigen::VectorXd half_;
};

/// One simulated rollout of a gene vector from a snapshot.
struct Rollout {
  double fitness = 0.0;               ///< R_0
  int length = 0;                     ///< L, steps taken before terminal or H
  bool terminal = false;
  std::vector<double> rewards;        ///< r_0..L-1
  std::vector<double> returns;        ///< R_0..L-1, R_t = r_t + gamma R_{t+1}
  std::vector<Eigen::VectorXd> states;   ///< s_0..L when recorded
  std::vector<Eigen::VectorXd> actions;  ///< clipped normalized actions when recorded
};

/// Rolls the environment forward from `from` through the decoded action
/// sequence. The tail value is 0 on terminal states and whenever the value
/// prior is disabled, V(s_L) otherwise; returns are then accumulated
/// backwards, so fitness equals sum gamma^t r_t + gamma^H V(s_H) when L = H.
inline Rollout evaluate_individual(Environment& scratch, const Snapshot& from,
                                   const Eigen::VectorXd& genes, int horizon, double discount,
                                   const ValueNet* value, bool value_enabled,
                                   bool record = false) {
  const int action_dim = scratch.spec().action_dim;
  if (genes.size() != static_cast<Eigen::Index>(horizon) * action_dim)
    throw std::invalid_argument("evaluate_individual: gene length != H * action_dim");
  const ActionCodec codec(scratch.spec());

  scratch.restore(from);
  Rollout out;
  if (record) out.states.push_back(scratch.observation());
  for (int t = 0; t < horizon && !scratch.terminal(); ++t) {
    const Eigen::VectorXd normalized = codec.clip(genes.segment(t * action_dim, action_dim));
    StepResult sr = scratch.step(codec.to_physical(normalized));
    if (std::isnan(sr.reward)) throw std::runtime_error("evaluate_individual: NaN reward");
    out.rewards.push_back(sr.reward);
    if (record) {
      out.actions.push_back(normalized);
      out.states.push_back(sr.next_state);
    }
    if (sr.terminal) out.terminal = true;
  }
  out.length = static_cast<int>(out.rewards.size());

  double tail = 0.0;
  if (!out.terminal && value_enabled && value != nullptr)
    tail = value_forward(*value, scratch.observation());
  out.returns.resize(out.length);
  double acc = tail;
  for (int t = out.length - 1; t >= 0; --t) {
    acc = out.rewards[t] + discount * acc;
    out.returns[t] = acc;
  }
  out.fitness = out.length > 0 ? out.returns.front() : tail;
  return out;
}

/// First-generation population. With a policy prior each individual is an
/// on-policy sampled rollout; without one genes are i.i.d. uniform in the
/// normalized box. When a previous optimum's tail is given, individual 0
/// starts with it and only the remaining steps are freshly sampled.
inline std::vector<Eigen::VectorXd> init_population(
    Environment& scratch, const Snapshot& from, const GaussianPolicy* policy,
    const std::vector<Eigen::VectorXd>* prev_tail, int population, int horizon, Rng& rng) {
  const int action_dim = scratch.spec().action_dim;
  const ActionCodec codec(scratch.spec());
  std::vector<Eigen::VectorXd> out;
  out.reserve(population);

  for (int k = 0; k < population; ++k) {
    Eigen::VectorXd genes(static_cast<Eigen::Index>(horizon) * action_dim);
    const bool inject_tail = (k == 0 && prev_tail != nullptr && !prev_tail->empty());
    const int tail_len = inject_tail
                             ? std::min<int>(horizon, static_cast<int>(prev_tail->size()))
                             : 0;

    if (policy != nullptr) {
      scratch.restore(from);
      for (int t = 0; t < horizon; ++t) {
        Eigen::VectorXd normalized;
        if (t < tail_len) {
          normalized = (*prev_tail)[t];
        } else {
          normalized = policy_sample(*policy, scratch.observation(), rng);
        }
        genes.segment(t * action_dim, action_dim) = normalized;
        if (!scratch.terminal()) scratch.step(codec.to_physical(codec.clip(normalized)));
      }
    } else {
      for (int t = 0; t < horizon; ++t) {
        for (int i = 0; i < action_dim; ++i) {
          genes(t * action_dim + i) =
              (t < tail_len) ? (*prev_tail)[t](i) : rng.uniform(-1.0, 1.0);
        }
      }
    }
    out.push_back(std::move(genes));
  }
  return out;
}

/// Result of one planning cycle: the best action sequence found, re-rolled
/// from the planning snapshot to record its states and returns-to-go.
struct PlanResult {
  std::vector<Eigen::VectorXd> states;   ///< s*_0..L*, L*+1 entries
  std::vector<Eigen::VectorXd> actions;  ///< a*_0..L*-1, clipped normalized
  std::vector<double> returns;           ///< R*_0..L*-1
  double fitness = 0.0;                  ///< R*_0
  int length = 0;                        ///< L*
  bool terminal = false;
  Eigen::VectorXd genome;
  std::vector<double> best_per_generation;
  long evaluations = 0;
};

inline PlanResult plan(const Environment& env, const PlanConfig& cfg,
                       const GaussianPolicy* policy, const ValueNet* value,
                       const std::vector<Eigen::VectorXd>* prev_tail, Rng& rng) {
  validate_plan_config(cfg);
  const EnvSpec& spec = env.spec();
  const GaussianPolicy* pol = cfg.use_policy_prior ? policy : nullptr;
  const bool value_enabled = cfg.use_value_prior && value != nullptr;
  if (pol != nullptr &&
      (pol->state_dim() != spec.state_dim || pol->action_dim() != spec.action_dim))
    throw std::invalid_argument("plan: policy dimensions do not match the environment");
  if (value_enabled && value->state_dim() != spec.state_dim)
    throw std::invalid_argument("plan: value dimensions do not match the environment");

  const int dim = cfg.horizon * spec.action_dim;
  const int population = cfg.population > 0 ? cfg.population : default_population_size(dim);

  CmaConfig cma_cfg;
  cma_cfg.dimension = dim;
  cma_cfg.population_size = population;
  cma_cfg.elite_count = cfg.elite;
  cma_cfg.initial_step_size = cfg.sigma0;
  cma_cfg.max_generations = cfg.generations;
  CmaState state = cma_init(cma_cfg, Eigen::VectorXd::Zero(dim));

  const Snapshot from = env.snapshot();
  std::unique_ptr<Environment> scratch = env.clone();

  const int workers = std::max(1, std::min(cfg.workers, population));
  std::vector<std::unique_ptr<Environment>> worker_envs;
  for (int w = 1; w < workers; ++w) worker_envs.push_back(env.clone());

  PlanResult best;
  bool have_best = false;

  for (int gen = 0; gen < cfg.generations; ++gen) {
    std::vector<Eigen::VectorXd> pop =
        (gen == 0)
            ? cma_seed_generation(
                  state, init_population(*scratch, from, pol, prev_tail, population, cfg.horizon, rng))
            : cma_sample(state, population, rng);

    std::vector<double> fitness(pop.size());
    auto eval_range = [&](Environment& worker, size_t begin, size_t end) {
      for (size_t i = begin; i < end; ++i)
        fitness[i] = evaluate_individual(worker, from, pop[i], cfg.horizon, cfg.discount, value,
                                         value_enabled)
                         .fitness;
    };
    if (workers == 1) {
      eval_range(*scratch, 0, pop.size());
    } else {
      // deterministic merge: fixed index ranges, results keyed by index
      std::vector<std::thread> threads;
      const size_t chunk = (pop.size() + workers - 1) / workers;
      for (int w = 1; w < workers; ++w) {
        const size_t begin = std::min(pop.size(), w * chunk);
        const size_t end = std::min(pop.size(), (w + 1) * chunk);
        threads.emplace_back(eval_range, std::ref(*worker_envs[w - 1]), begin, end);
      }
      eval_range(*scratch, 0, std::min(pop.size(), chunk));
      for (auto& t : threads) t.join();
    }
    best.evaluations += static_cast<long>(pop.size());

    std::vector<CmaEvaluated> evaluated;
    evaluated.reserve(pop.size());
    for (size_t i = 0; i < pop.size(); ++i) {
      if (!have_best || fitness[i] > best.fitness) {
        best.fitness = fitness[i];
        best.genome = pop[i];
        have_best = true;
      }
      evaluated.push_back({std::move(pop[i]), fitness[i]});
    }
    best.best_per_generation.push_back(best.fitness);
    state = cma_update(state, evaluated);
  }

  Rollout record = evaluate_individual(*scratch, from, best.genome, cfg.horizon, cfg.discount,
                                       value, value_enabled, /*record=*/true);
  best.states = std::move(record.states);
  best.actions = std::move(record.actions);
  best.returns = std::move(record.returns);
  best.length = record.length;
  best.terminal = record.terminal;
  best.fitness = record.fitness;
  return best;
}

/// A full rolling-horizon episode with the real-play protocol: plan, execute
/// the first T actions, shift the remaining tail into the next cycle's first
/// individual, repeat until the environment terminates.
struct EpisodeResult {
  double episode_return = 0.0;  ///< undiscounted sum of real rewards
  int steps = 0;
  std::vector<double> rewards;
  std::vector<Eigen::VectorXd> states;   ///< visited observations, steps + 1
  std::vector<Eigen::VectorXd> actions;  ///< executed physical actions
  long plan_calls = 0;
  long evaluations = 0;
};

inline EpisodeResult run_episode(Environment& env, const PlanConfig& cfg,
                                 const GaussianPolicy* policy, const ValueNet* value, Rng& rng) {
  validate_plan_config(cfg);
  const ActionCodec codec(env.spec());
  EpisodeResult out;
  out.states.push_back(env.observation());
  std::vector<Eigen::VectorXd> tail;

  while (!env.terminal()) {
    PlanResult pr = plan(env, cfg, policy, value, tail.empty() ? nullptr : &tail, rng);
    ++out.plan_calls;
    out.evaluations += pr.evaluations;
    if (pr.length == 0) throw std::runtime_error("run_episode: empty plan");

    const int exec = std::min(cfg.steps_per_cycle, pr.length);
    for (int t = 0; t < exec; ++t) {
      const Eigen::VectorXd physical = codec.to_physical(pr.actions[t]);
      StepResult sr = env.step(physical);
      out.episode_return += sr.reward;
      out.rewards.push_back(sr.reward);
      out.actions.push_back(physical);
      out.states.push_back(sr.next_state);
      ++out.steps;
      if (sr.terminal) break;
    }
    tail.assign(pr.actions.begin() + std::min<size_t>(exec, pr.actions.size()),
                pr.actions.end());
  }
  return out;
}

}  // namespace prhea
