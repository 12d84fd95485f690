#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "prhea/rng.hpp"

namespace prhea {

/// Configuration for one CMA-ES run over flat real vectors.
/// Fitness is always maximized.
struct CmaConfig {
  int dimension = 0;           ///< D, problem dimension
  int population_size = 0;     ///< NP; 0 selects 4 + floor(3 ln D)
  int elite_count = 0;         ///< mu; 0 selects floor(NP / 2)
  double initial_step_size = 0.3;
  int max_generations = 5;
  double eigenvalue_floor = 1e-12;  ///< lower bound on covariance eigenvalues
};

/// Default population size 4 + floor(3 ln D).
inline int default_population_size(int dimension) {
  return 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(dimension))));
}

/// Full state of one CMA-ES run. Updates are pure: operations take a state
/// and return a new one, so independent runs can proceed in parallel.
struct CmaState {
  CmaConfig config;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  double step_size = 0.0;
  Eigen::VectorXd path_sigma;  ///< evolution path for step-size control
  Eigen::VectorXd path_cov;    ///< evolution path for the rank-one update
  Eigen::VectorXd weights;     ///< recombination weights, length mu, sum 1
  long generation = 0;

  // strategy constants derived from (D, mu, weights)
  double mu_eff = 0.0;
  double c_sigma = 0.0;
  double d_sigma = 0.0;
  double c_cov_path = 0.0;  ///< c_c
  double c_rank_one = 0.0;  ///< c_1
  double c_rank_mu = 0.0;   ///< c_mu
  double chi_n = 0.0;       ///< E||N(0, I)||
};

/// One candidate with its measured fitness (to be maximized).
struct CmaEvaluated {
  Eigen::VectorXd genome;
  double fitness = 0.0;
};

/// Initializes a run: identity covariance, sigma = sigma0, zero paths,
/// log-rank recombination weights w_i proportional to ln(mu + 0.5) - ln(i).
inline CmaState cma_init(CmaConfig config, const Eigen::VectorXd& mean) {
  if (config.dimension <= 0) throw std::invalid_argument("cma: dimension must be positive");
  if (config.population_size == 0) config.population_size = default_population_size(config.dimension);
  if (config.population_size <= 0) throw std::invalid_argument("cma: population size must be positive");
  if (config.elite_count == 0) config.elite_count = config.population_size / 2;
  if (config.elite_count < 1 || config.elite_count > config.population_size)
    throw std::invalid_argument("cma: elite count must satisfy 1 <= mu <= NP");
  if (!(config.initial_step_size > 0.0)) throw std::invalid_argument("cma: sigma0 must be positive");
  if (config.max_generations <= 0) throw std::invalid_argument("cma: max generations must be positive");
  if (mean.size() != config.dimension) throw std::invalid_argument("cma: mean length != dimension");

  const int d = config.dimension;
  const int mu = config.elite_count;

  CmaState s;
  s.config = config;
  s.mean = mean;
  s.covariance = Eigen::MatrixXd::Identity(d, d);
  s.step_size = config.initial_step_size;
  s.path_sigma = Eigen::VectorXd::Zero(d);
  s.path_cov = Eigen::VectorXd::Zero(d);

  s.weights.resize(mu);
  for (int i = 0; i < mu; ++i) s.weights(i) = std::log(mu + 0.5) - std::log(i + 1.0);
  s.weights /= s.weights.sum();

  const double n = static_cast<double>(d);
  s.mu_eff = 1.0 / s.weights.squaredNorm();
  s.c_sigma = (s.mu_eff + 2.0) / (n + s.mu_eff + 5.0);
  s.d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((s.mu_eff - 1.0) / (n + 1.0)) - 1.0) + s.c_sigma;
  s.c_cov_path = (4.0 + s.mu_eff / n) / (n + 4.0 + 2.0 * s.mu_eff / n);
  s.c_rank_one = 2.0 / ((n + 1.3) * (n + 1.3) + s.mu_eff);
  s.c_rank_mu = std::min(1.0 - s.c_rank_one,
                         2.0 * (s.mu_eff - 2.0 + 1.0 / s.mu_eff) / ((n + 2.0) * (n + 2.0) + s.mu_eff));
  s.chi_n = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
  return s;
}

namespace detail {

// Eigendecomposition of the covariance with the configured eigenvalue floor.
// B holds eigenvectors as columns, d the floored standard deviations.
inline void cma_decompose(const CmaState& s, Eigen::MatrixXd& basis, Eigen::VectorXd& scale) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.covariance);
  if (eig.info() != Eigen::Success) throw std::runtime_error("cma: eigendecomposition failed");
  basis = eig.eigenvectors();
  scale = eig.eigenvalues().cwiseMax(s.config.eigenvalue_floor).cwiseSqrt();
}

}  // namespace detail

/// Draws `count` vectors i.i.d. from N(mean, sigma^2 C).
inline std::vector<Eigen::VectorXd> cma_sample(const CmaState& state, int count, Rng& rng) {
  if (count <= 0) throw std::invalid_argument("cma: sample count must be positive");
  Eigen::MatrixXd basis;
  Eigen::VectorXd scale;
  detail::cma_decompose(state, basis, scale);

  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  const int d = state.config.dimension;
  Eigen::VectorXd z(d);
  for (int k = 0; k < count; ++k) {
    for (int i = 0; i < d; ++i) z(i) = rng.normal();
    out.push_back(state.mean + state.step_size * (basis * scale.cwiseProduct(z).eval()));
  }
  return out;
}

/// First-generation population injection. The vectors pass through unchanged;
/// the search distribution is untouched and the seeds enter only through the
/// selection step of the following cma_update.
inline std::vector<Eigen::VectorXd> cma_seed_generation(const CmaState& state,
                                                        std::vector<Eigen::VectorXd> individuals) {
  if (state.generation != 0)
    throw std::logic_error("cma: seeded population is only valid at generation 0");
  for (const auto& v : individuals)
    if (v.size() != state.config.dimension)
      throw std::invalid_argument("cma: seeded individual length != dimension");
  return individuals;
}

/// Rank-based update: recombines the top-mu candidates into a new mean,
/// applies the rank-one + rank-mu covariance update and cumulative step-size
/// adaptation, and re-floors the covariance spectrum.
inline CmaState cma_update(const CmaState& state, const std::vector<CmaEvaluated>& evaluated) {
  const int mu = state.config.elite_count;
  const int d = state.config.dimension;
  if (static_cast<int>(evaluated.size()) < mu)
    throw std::invalid_argument("cma: need at least mu evaluated candidates");
  for (const auto& e : evaluated) {
    if (e.genome.size() != d) throw std::invalid_argument("cma: candidate length != dimension");
    if (std::isnan(e.fitness)) throw std::invalid_argument("cma: NaN fitness");
  }

  // Selection is purely rank-based; a stable sort keeps exact ties in input
  // order so lower input index wins.
  std::vector<int> order(evaluated.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return evaluated[a].fitness > evaluated[b].fitness; });

  Eigen::MatrixXd basis;
  Eigen::VectorXd scale;
  detail::cma_decompose(state, basis, scale);

  CmaState next = state;
  const double sigma = state.step_size;

  // --- recombination ---
  Eigen::VectorXd new_mean = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < mu; ++i) new_mean += state.weights(i) * evaluated[order[i]].genome;
  Eigen::VectorXd y_w = (new_mean - state.mean) / sigma;
  next.mean = new_mean;

  // --- step-size path (uses C^{-1/2} in the current basis) ---
  Eigen::VectorXd c_inv_sqrt_yw =
      basis * (basis.transpose() * y_w).cwiseQuotient(scale).eval();
  next.path_sigma = (1.0 - state.c_sigma) * state.path_sigma +
                    std::sqrt(state.c_sigma * (2.0 - state.c_sigma) * state.mu_eff) * c_inv_sqrt_yw;

  const long gen_next = state.generation + 1;
  const double path_norm = next.path_sigma.norm();
  const double expected = std::sqrt(1.0 - std::pow(1.0 - state.c_sigma, 2.0 * gen_next));
  const bool h_sigma =
      path_norm / expected < (1.4 + 2.0 / (d + 1.0)) * state.chi_n;

  // --- covariance path and update ---
  next.path_cov = (1.0 - state.c_cov_path) * state.path_cov;
  if (h_sigma)
    next.path_cov += std::sqrt(state.c_cov_path * (2.0 - state.c_cov_path) * state.mu_eff) * y_w;

  Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < mu; ++i) {
    Eigen::VectorXd y = (evaluated[order[i]].genome - state.mean) / sigma;
    rank_mu.noalias() += state.weights(i) * y * y.transpose();
  }
  const double c1 = state.c_rank_one;
  const double cmu = state.c_rank_mu;
  next.covariance = (1.0 - c1 - cmu) * state.covariance +
                    c1 * (next.path_cov * next.path_cov.transpose() +
                          (h_sigma ? 0.0 : 1.0) * state.c_cov_path * (2.0 - state.c_cov_path) *
                              state.covariance) +
                    cmu * rank_mu;

  // --- step-size adaptation ---
  next.step_size = sigma * std::exp((state.c_sigma / state.d_sigma) * (path_norm / state.chi_n - 1.0));

  // Re-symmetrize and floor the spectrum so short runs cannot collapse the
  // sampling distribution.
  next.covariance = 0.5 * (next.covariance + next.covariance.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(next.covariance);
  if (eig.info() != Eigen::Success) throw std::runtime_error("cma: eigendecomposition failed");
  if (eig.eigenvalues().minCoeff() < state.config.eigenvalue_floor) {
    Eigen::VectorXd floored = eig.eigenvalues().cwiseMax(state.config.eigenvalue_floor);
    next.covariance = eig.eigenvectors() * floored.asDiagonal() * eig.eigenvectors().transpose();
    next.covariance = 0.5 * (next.covariance + next.covariance.transpose()).eval();
  }

  next.generation = gen_next;
  return next;
}

}  // namespace prhea
