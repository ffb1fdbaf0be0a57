#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "getuda/matrix.hpp"

namespace getuda {

using Rng = std::mt19937_64;

// splitmix64 of (seed, stream): independent deterministic sub-streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + stream * 0x9E3779B97F4A7C15ULL + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng,
                              double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = scale * dist(rng);
  return m;
}

inline std::vector<double> random_unit_vector(std::size_t n, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = dist(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
  } while (norm < 1e-6);
  for (auto& x : v) x /= norm;
  return v;
}

// Random orthogonal matrix via modified Gram-Schmidt on a Gaussian draw.
// Columns that come out nearly dependent are redrawn.
inline Matrix random_orthogonal(std::size_t n, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix q(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    while (true) {
      for (std::size_t i = 0; i < n; ++i) q(i, j) = dist(rng);
      for (std::size_t p = 0; p < j; ++p) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += q(i, p) * q(i, j);
        for (std::size_t i = 0; i < n; ++i) q(i, j) -= dot * q(i, p);
      }
      const double norm = q.col_norm(j);
      if (norm > 1e-6) {
        for (std::size_t i = 0; i < n; ++i) q(i, j) /= norm;
        break;
      }
    }
  }
  return q;
}

}  // namespace getuda
