#include "mtreg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "mtreg/linalg.hpp"

namespace mtreg {

namespace {

void require_valid(const SyntheticConfig& config) {
  if (config.m < 1 || config.d < 1 || config.n < 1) {
    throw std::invalid_argument("generate_synthetic: m, d, n must be >= 1");
  }
  if (config.k < 1 || config.k > config.d) {
    throw std::invalid_argument("generate_synthetic: k must be in [1, d]");
  }
  if (config.overlap_fraction < 0.0 || config.overlap_fraction > 1.0) {
    throw std::invalid_argument(
        "generate_synthetic: overlap_fraction must be in [0, 1]");
  }
  if (!(config.noise_variance >= 0.0)) {
    throw std::invalid_argument(
        "generate_synthetic: noise_variance must be >= 0");
  }
  if (config.design_correlation < 0.0 || config.design_correlation >= 1.0) {
    throw std::invalid_argument(
        "generate_synthetic: design_correlation must be in [0, 1)");
  }
}

// Draws `count` distinct values from `pool` by partial Fisher-Yates; the
// chosen prefix is removed from the pool.
std::vector<Index> draw_without_replacement(std::vector<Index>& pool,
                                            Index count,
                                            std::mt19937_64& rng) {
  std::vector<Index> chosen;
  chosen.reserve(count);
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const std::size_t at = pick(rng);
    chosen.push_back(pool[at]);
    pool[at] = pool.back();
    pool.pop_back();
  }
  return chosen;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticConfig& config) {
  require_valid(config);
  std::mt19937_64 rng(derive_seed(config.seed, 0));
  std::normal_distribution<double> normal(0.0, 1.0);

  const Index m = config.m;
  const Index d = config.d;
  const Index n = config.n;
  const Index k = config.k;
  const Index core_size = static_cast<Index>(
      std::ceil(config.overlap_fraction * static_cast<double>(k)));

  SyntheticData data;
  data.truth.betas = Matrix::Zero(m, d);
  data.dataset.dimension = d;
  data.dataset.tasks.reserve(m);

  // Shared core of the support, then per-task fill from the leftover
  // features.
  std::vector<Index> all(d);
  std::iota(all.begin(), all.end(), Index{0});
  std::vector<Index> pool = all;
  data.truth.shared_support = draw_without_replacement(pool, core_size, rng);
  std::sort(data.truth.shared_support.begin(),
            data.truth.shared_support.end());

  data.truth.per_task_support.reserve(m);
  for (Index l = 0; l < m; ++l) {
    std::vector<Index> fill_pool = pool;
    std::vector<Index> support = data.truth.shared_support;
    const std::vector<Index> fill =
        draw_without_replacement(fill_pool, k - core_size, rng);
    support.insert(support.end(), fill.begin(), fill.end());
    std::sort(support.begin(), support.end());
    data.truth.per_task_support.push_back(std::move(support));
  }

  for (Index l = 0; l < m; ++l) {
    for (Index j : data.truth.per_task_support[l]) {
      data.truth.betas(l, j) = normal(rng);
    }
  }

  const double rho = config.design_correlation;
  const double base = std::sqrt(1.0 - rho);
  // Closed-form symmetric square root of (1-rho) I + rho 11': scale the
  // all-ones direction separately.
  const double ones_shift =
      (std::sqrt(1.0 - rho + static_cast<double>(d) * rho) - base) /
      static_cast<double>(d);
  const double noise_sd = std::sqrt(config.noise_variance);

  for (Index l = 0; l < m; ++l) {
    Matrix design(n, d);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < d; ++j) design(i, j) = normal(rng);
      if (rho > 0.0) {
        const double row_sum = design.row(i).sum();
        design.row(i) = base * design.row(i).array() + ones_shift * row_sum;
      }
    }
    Vector response = design * data.truth.betas.row(l).transpose();
    for (Index i = 0; i < n; ++i) response[i] += noise_sd * normal(rng);
    data.dataset.tasks.push_back({std::move(design), std::move(response)});
  }
  return data;
}

}  // namespace mtreg
