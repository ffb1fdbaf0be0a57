#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "getuda/errors.hpp"
#include "getuda/matrix.hpp"

namespace getuda {

// Thin SVD M = U diag(sigma) V^T with r = min(rows, cols) columns.
// sigma is sorted descending; U, V have orthonormal columns.
struct SpectralDecomposition {
  Matrix u;
  std::vector<double> sigma;
  Matrix v;
};

namespace detail {

// One-sided Jacobi for a tall-or-square matrix (rows >= cols). Orthogonalizes
// column pairs of a working copy until all pairwise dot products vanish; the
// column norms are then the singular values and the accumulated rotations form V.
inline void jacobi_tall(const Matrix& a, Matrix& u, std::vector<double>& sigma,
                        Matrix& v) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Matrix w = a;
  v = Matrix::identity(n);

  const double tol = 1e-15;
  const double fro2 = w.frobenius_norm() * w.frobenius_norm();
  // Columns whose squared norm falls to rounding-noise level are numerically
  // zero; rotating them further just churns garbage directions.
  const double tiny = fro2 * 1e-30;
  const std::size_t max_sweeps = 100 * n;
  bool converged = false;
  for (std::size_t sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          app += w(i, p) * w(i, p);
          aqq += w(i, q) * w(i, q);
          apq += w(i, p) * w(i, q);
        }
        if (app <= tiny || aqq <= tiny) continue;
        if (std::fabs(apq) <= tol * std::sqrt(app * aqq)) continue;
        converged = false;

        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          w(i, p) = c * wp - s * wq;
          w(i, q) = s * wp + c * wq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
  }
  if (!converged)
    throw NumericalError("svd: Jacobi sweeps did not converge within iteration cap");

  sigma.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = w.col_norm(j);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return sigma[i] > sigma[j]; });

  const double sig_max = sigma.empty() ? 0.0 : sigma[order[0]];
  // Keep this above the pair-skip threshold so every skipped column lands in
  // the orthonormal-completion path instead of being normalized garbage.
  const double drop = std::max(sig_max * m * std::numeric_limits<double>::epsilon(),
                               std::sqrt(fro2) * 1e-14);

  u = Matrix(m, n);
  Matrix v_sorted(n, n);
  std::vector<double> sig_sorted(n);
  std::size_t filled = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    sig_sorted[j] = sigma[src];
    for (std::size_t i = 0; i < n; ++i) v_sorted(i, j) = v(i, src);
    if (sigma[src] > drop && sigma[src] > 0.0) {
      for (std::size_t i = 0; i < m; ++i) u(i, j) = w(i, src) / sigma[src];
      ++filled;
    }
  }

  // Complete U with an orthonormal basis for numerically zero singular values;
  // those directions carry no reconstruction weight but keep U^T U = I. The
  // coordinate vector with the largest residual is always well conditioned
  // (norm at least 1/sqrt(m)).
  for (std::size_t j = filled; j < n; ++j) {
    std::vector<double> best(m, 0.0);
    double best_norm = -1.0;
    for (std::size_t cand = 0; cand < m; ++cand) {
      std::vector<double> e(m, 0.0);
      e[cand] = 1.0;
      for (std::size_t p = 0; p < j; ++p) {
        double dot = 0.0;
        for (std::size_t i = 0; i < m; ++i) dot += u(i, p) * e[i];
        for (std::size_t i = 0; i < m; ++i) e[i] -= dot * u(i, p);
      }
      double norm = 0.0;
      for (double x : e) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > best_norm) {
        best_norm = norm;
        best = std::move(e);
      }
    }
    if (best_norm < 1e-8) throw NumericalError("svd: failed to complete orthonormal basis");
    // One more orthogonalization pass keeps the completed block orthonormal
    // to working precision.
    for (std::size_t p = 0; p < j; ++p) {
      double dot = 0.0;
      for (std::size_t i = 0; i < m; ++i) dot += u(i, p) * best[i];
      for (std::size_t i = 0; i < m; ++i) best[i] -= dot * u(i, p);
    }
    double norm = 0.0;
    for (double x : best) norm += x * x;
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < m; ++i) u(i, j) = best[i] / norm;
  }

  sigma = std::move(sig_sorted);
  v = std::move(v_sorted);

  // Deterministic sign convention: the largest-magnitude entry of every U
  // column is made positive, with V flipped to match.
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t imax = 0;
    for (std::size_t i = 1; i < m; ++i)
      if (std::fabs(u(i, j)) > std::fabs(u(imax, j))) imax = i;
    if (u(imax, j) < 0.0) {
      for (std::size_t i = 0; i < m; ++i) u(i, j) = -u(i, j);
      for (std::size_t i = 0; i < v.rows(); ++i) v(i, j) = -v(i, j);
    }
  }
}

}  // namespace detail

inline SpectralDecomposition svd(const Matrix& m) {
  if (!m.all_finite()) throw std::invalid_argument("svd: non-finite entries");
  SpectralDecomposition out;
  if (m.cols() == 0 || m.rows() == 0) {
    out.u = Matrix(m.rows(), 0);
    out.v = Matrix(m.cols(), 0);
    return out;
  }
  if (m.rows() >= m.cols()) {
    detail::jacobi_tall(m, out.u, out.sigma, out.v);
  } else {
    detail::jacobi_tall(m.transposed(), out.v, out.sigma, out.u);
    // M^T = V' S U'^T  =>  M = U' S V'^T; the roles of the factors swap, and
    // the tall routine fixed signs on the wrong side. Re-apply on U.
    for (std::size_t j = 0; j < out.u.cols(); ++j) {
      std::size_t imax = 0;
      for (std::size_t i = 1; i < out.u.rows(); ++i)
        if (std::fabs(out.u(i, j)) > std::fabs(out.u(imax, j))) imax = i;
      if (out.u(imax, j) < 0.0) {
        for (std::size_t i = 0; i < out.u.rows(); ++i) out.u(i, j) = -out.u(i, j);
        for (std::size_t i = 0; i < out.v.rows(); ++i) out.v(i, j) = -out.v(i, j);
      }
    }
  }
  return out;
}

inline double nuclear_norm(const Matrix& m) {
  const auto dec = svd(m);
  return std::accumulate(dec.sigma.begin(), dec.sigma.end(), 0.0);
}

inline double spectral_norm(const Matrix& m) {
  const auto dec = svd(m);
  return dec.sigma.empty() ? 0.0 : dec.sigma.front();
}

// Count of singular values above rel_tol * sigma_max. Zero matrix has rank 0.
inline std::size_t numerical_rank(const Matrix& m, double rel_tol = 1e-6) {
  if (rel_tol <= 0.0) throw std::invalid_argument("numerical_rank: rel_tol must be > 0");
  const auto dec = svd(m);
  if (dec.sigma.empty()) return 0;
  const double cut = rel_tol * dec.sigma.front();
  std::size_t r = 0;
  while (r < dec.sigma.size() && dec.sigma[r] > cut) ++r;
  return r;
}

// U_r V_r^T over singular triplets with sigma_i > sv_floor: the canonical
// subgradient of the nuclear norm, choosing the zero element for the
// near-null part at rank-deficient points.
inline Matrix nuclear_norm_subgradient(const Matrix& m, double sv_floor = 1e-8) {
  if (sv_floor < 0.0)
    throw std::invalid_argument("nuclear_norm_subgradient: sv_floor must be >= 0");
  const auto dec = svd(m);
  Matrix g(m.rows(), m.cols());
  for (std::size_t t = 0; t < dec.sigma.size(); ++t) {
    if (dec.sigma[t] <= sv_floor) break;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const double ui = dec.u(i, t);
      if (ui == 0.0) continue;
      for (std::size_t j = 0; j < m.cols(); ++j) g(i, j) += ui * dec.v(j, t);
    }
  }
  return g;
}

// Orthonormal basis for the column space: U columns with sigma above
// rel_tol * sigma_max.
inline Matrix orthonormal_basis(const Matrix& m, double rel_tol = 1e-6) {
  if (rel_tol <= 0.0) throw std::invalid_argument("orthonormal_basis: rel_tol must be > 0");
  const auto dec = svd(m);
  const std::size_t r =
      dec.sigma.empty() ? 0 : [&] {
        const double cut = rel_tol * dec.sigma.front();
        std::size_t k = 0;
        while (k < dec.sigma.size() && dec.sigma[k] > cut) ++k;
        return k;
      }();
  if (r == 0) throw std::invalid_argument("orthonormal_basis: empty column space");
  Matrix b(m.rows(), r);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < r; ++j) b(i, j) = dec.u(i, j);
  return b;
}

// Reassemble M with singular values clamped to at most alpha. Clamping (rather
// than rejection sampling) enforces a spectral-norm hypothesis exactly.
inline Matrix clip_spectral_norm(const Matrix& m, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("clip_spectral_norm: alpha must be > 0");
  auto dec = svd(m);
  bool touched = false;
  for (double& s : dec.sigma)
    if (s > alpha) {
      s = alpha;
      touched = true;
    }
  if (!touched) return m;
  Matrix us = dec.u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= dec.sigma[j];
  return us * dec.v.transposed();
}

namespace detail {
inline void require_orthonormal(const Matrix& b, const char* who) {
  for (std::size_t p = 0; p < b.cols(); ++p)
    for (std::size_t q = p; q < b.cols(); ++q) {
      double dot = 0.0;
      for (std::size_t i = 0; i < b.rows(); ++i) dot += b(i, p) * b(i, q);
      const double want = p == q ? 1.0 : 0.0;
      if (std::fabs(dot - want) > 1e-8)
        throw std::invalid_argument(std::string(who) + ": columns not orthonormal");
    }
}
}  // namespace detail

// Principal angles between the subspaces spanned by two orthonormal bases,
// ascending, in [0, pi/2]. Length is min(cols(b1), cols(b2)).
inline std::vector<double> principal_angles(const Matrix& b1, const Matrix& b2) {
  if (b1.rows() != b2.rows())
    throw std::invalid_argument("principal_angles: row counts differ");
  detail::require_orthonormal(b1, "principal_angles");
  detail::require_orthonormal(b2, "principal_angles");
  const auto dec = svd(b1.transposed() * b2);
  std::vector<double> angles(dec.sigma.size());
  for (std::size_t i = 0; i < dec.sigma.size(); ++i)
    angles[i] = std::acos(std::clamp(dec.sigma[i], -1.0, 1.0));
  std::sort(angles.begin(), angles.end());
  return angles;
}

}  // namespace getuda
