#pragma once

#include <cmath>
#include <random>

#include "zempc/harness.hpp"

namespace zempc::testing {

inline const ExperimentConfig& default_config() {
  static const ExperimentConfig cfg;
  return cfg;
}

// Reference steady state and scaling; computed once per test binary.
inline const ExperimentSetup& default_setup() {
  static const ExperimentSetup setup = prepare_experiment(default_config());
  return setup;
}

// Physically plausible random column state around the reference.
inline Vector random_state(std::mt19937_64& rng, const Vector& ref) {
  std::uniform_real_distribution<double> factor(0.5, 1.5), temp(300.0, 340.0), tiny(0.0, 1e-3);
  Vector x(ref.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (StateLayout::is_temperature(static_cast<int>(i)))
      x[i] = temp(rng);
    else
      x[i] = ref[i] > 0 ? ref[i] * factor(rng) : tiny(rng);
  }
  return x;
}

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

// Random Hurwitz matrix: shifted so the spectral abscissa is -margin.
inline Matrix random_stable(std::mt19937_64& rng, int n, double margin = 0.5) {
  Matrix A = random_matrix(rng, n, n);
  const double shift = max_real_eigenvalue(A) + margin;
  A -= shift * Matrix::Identity(n, n);
  return A;
}

}  // namespace zempc::testing
