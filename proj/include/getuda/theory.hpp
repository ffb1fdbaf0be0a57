#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "getuda/losses.hpp"
#include "getuda/matrix.hpp"
#include "getuda/random.hpp"
#include "getuda/spectral.hpp"

namespace getuda {

struct CheckResult {
  bool pass = false;
  double slack = 0.0;  // margin from the bound; negative means a violation
};

struct BoundCheckReport {
  std::string name;
  long trials = 0;
  long violations = 0;
  double max_slack = 0.0;         // worst violation excess; 0 on a passing report
  double witness_residual = 0.0;  // |value - bound| at the equality witness

  void absorb(const CheckResult& r) {
    ++trials;
    if (!r.pass) {
      ++violations;
      max_slack = std::max(max_slack, -r.slack);
    }
  }
};

inline constexpr double kBoundTol = 1e-8;

// rank([A_1..A_k]) <= sum rank(A_i)
inline CheckResult check_rank_concat_upper(const std::vector<Matrix>& mats,
                                           double rel_tol = 1e-6) {
  if (mats.empty()) throw std::invalid_argument("check_rank_concat_upper: no matrices");
  Matrix concat = mats.front();
  std::size_t sum = numerical_rank(mats.front(), rel_tol);
  for (std::size_t i = 1; i < mats.size(); ++i) {
    concat = hconcat(concat, mats[i]);
    sum += numerical_rank(mats[i], rel_tol);
  }
  const double slack =
      static_cast<double>(sum) - static_cast<double>(numerical_rank(concat, rel_tol));
  return {slack >= 0.0, slack};
}

// max{rank A, rank B} <= rank([A, B])
inline CheckResult check_rank_concat_lower(const Matrix& a, const Matrix& b,
                                           double rel_tol = 1e-6) {
  const double lhs = static_cast<double>(
      std::max(numerical_rank(a, rel_tol), numerical_rank(b, rel_tol)));
  const double rhs = static_cast<double>(numerical_rank(hconcat(a, b), rel_tol));
  return {rhs >= lhs, rhs - lhs};
}

// ||[A, B]||_* <= ||A||_* + ||B||_*
inline CheckResult check_nuclear_concat_upper(const Matrix& a, const Matrix& b) {
  const double slack = nuclear_norm(a) + nuclear_norm(b) - nuclear_norm(hconcat(a, b));
  return {slack >= -kBoundTol, slack};
}

// A = B = alpha * P [I_d, 0] R with seeded random orthogonal P (d x d) and
// R (n x n): spectral norm exactly alpha, nuclear norm exactly alpha * d, and
// identical column spaces -- the coherence bound is attained with equality.
inline std::pair<Matrix, Matrix> make_transferability_witness(std::size_t d, std::size_t n,
                                                              double alpha, Rng& rng) {
  if (n < d) throw std::invalid_argument("make_transferability_witness: need n >= d");
  if (alpha <= 0) throw std::invalid_argument("make_transferability_witness: alpha > 0");
  const Matrix p = random_orthogonal(d, rng);
  const Matrix r = random_orthogonal(n, rng);
  Matrix top(d, n);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < n; ++j) top(i, j) = r(i, j);  // first d rows of R
  const Matrix a = (p * top) * alpha;
  return {a, a};
}

// ||A||_* + ||B||_* - ||[A,B]||_* <= (2 - sqrt(2)) * alpha * d under
// spectral norms <= alpha.
inline CheckResult check_transferability_bound(const Matrix& a, const Matrix& b,
                                               double alpha) {
  if (a.rows() != b.rows())
    throw std::invalid_argument("check_transferability_bound: row counts differ");
  if (spectral_norm(a) > alpha + 1e-9 || spectral_norm(b) > alpha + 1e-9)
    throw std::invalid_argument(
        "check_transferability_bound: spectral norm hypothesis violated");
  const double value = domain_coherence_global(a, b).value;
  const double bound = (2.0 - std::sqrt(2.0)) * alpha * static_cast<double>(a.rows());
  const double slack = bound - value;
  return {slack >= -kBoundTol, slack};
}

// The two regimes of the trade-off bound. SharedSubspace is the
// lambda >= 1 + sqrt(2) case (every class spans the full space and
// orthogonality is lost); OrthogonalClasses is lambda <= 1 + sqrt(2) (each
// class keeps a private block).
enum class TradeoffRegime { SharedSubspace, OrthogonalClasses };

struct TradeoffClusters {
  std::vector<Matrix> source_blocks;  // Z^s_i, one per class
  std::vector<Matrix> target_blocks;  // Z^t_i
};

inline double tradeoff_bound(TradeoffRegime regime, double lambda, double alpha,
                             std::size_t k, std::size_t d) {
  const double s2 = std::sqrt(2.0);
  if (regime == TradeoffRegime::SharedSubspace)
    return (((s2 - 2.0) * lambda + s2) * std::sqrt(static_cast<double>(k)) - s2) * alpha *
           static_cast<double>(d);
  return (s2 - 2.0) * alpha * lambda * static_cast<double>(d);
}

// Equality witnesses for both regimes, rotated off the coordinate axes by a
// seeded orthogonal matrix.
inline TradeoffClusters make_tradeoff_witness(std::size_t k, std::size_t d, double alpha,
                                              TradeoffRegime regime, Rng& rng) {
  if (k < 2) throw std::invalid_argument("make_tradeoff_witness: need k >= 2");
  TradeoffClusters out;
  if (regime == TradeoffRegime::OrthogonalClasses) {
    if (d % k != 0)
      throw std::invalid_argument("make_tradeoff_witness: orthogonal regime needs k | d");
    const std::size_t block = d / k;
    const Matrix rot = random_orthogonal(d, rng);
    for (std::size_t c = 0; c < k; ++c) {
      Matrix z(d, block);
      for (std::size_t j = 0; j < block; ++j)
        for (std::size_t i = 0; i < d; ++i) z(i, j) = alpha * rot(i, c * block + j);
      out.source_blocks.push_back(z);
      out.target_blocks.push_back(z);
    }
  } else {
    // All classes share the full space; every singular value is alpha/sqrt(k).
    const double scale = alpha / std::sqrt(static_cast<double>(k));
    for (std::size_t c = 0; c < k; ++c) {
      const Matrix z = random_orthogonal(d, rng) * scale;
      out.source_blocks.push_back(z);
      out.target_blocks.push_back(z);
    }
  }
  return out;
}

namespace detail {

struct AssembledClusters {
  Matrix z;
  ClassPartition partition;
  Matrix z_source;
  Matrix z_target;
};

inline AssembledClusters assemble_clusters(const TradeoffClusters& clusters) {
  const std::size_t k = clusters.source_blocks.size();
  if (k == 0 || clusters.target_blocks.size() != k)
    throw std::invalid_argument("tradeoff clusters: class count mismatch");
  AssembledClusters out;
  out.partition.num_classes = static_cast<int>(k);
  out.partition.source_cols.resize(k);
  out.partition.target_cols.resize(k);
  int col = 0;
  Matrix z;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < clusters.source_blocks[c].cols(); ++j)
      out.partition.source_cols[c].push_back(col++);
    z = hconcat(z, clusters.source_blocks[c]);
    for (std::size_t j = 0; j < clusters.target_blocks[c].cols(); ++j)
      out.partition.target_cols[c].push_back(col++);
    z = hconcat(z, clusters.target_blocks[c]);
    out.z_source = hconcat(out.z_source, clusters.source_blocks[c]);
    out.z_target = hconcat(out.z_target, clusters.target_blocks[c]);
  }
  out.z = z;
  return out;
}

}  // namespace detail

// Normalized trade-off objective L_CO - lambda * L_DC computed through the
// losses module, checked against the regime's closed-form lower bound.
// Hypotheses ||Z^{s/t}||_sigma <= alpha and ||Z||_sigma <= sqrt(2) alpha are
// verified, not assumed.
inline CheckResult check_tradeoff_bound(const TradeoffClusters& clusters, double lambda,
                                        double alpha, TradeoffRegime regime) {
  if (lambda <= 0) throw std::invalid_argument("check_tradeoff_bound: lambda must be > 0");
  const auto asm_ = detail::assemble_clusters(clusters);
  if (spectral_norm(asm_.z_source) > alpha + 1e-9 ||
      spectral_norm(asm_.z_target) > alpha + 1e-9)
    throw std::invalid_argument("check_tradeoff_bound: domain spectral hypothesis violated");
  if (spectral_norm(asm_.z) > std::sqrt(2.0) * alpha + 1e-9)
    throw std::invalid_argument("check_tradeoff_bound: joint spectral hypothesis violated");

  const double co = class_orthogonality(asm_.z, asm_.partition).value;
  const double dc = domain_coherence_classwise(asm_.z, asm_.partition).value;
  const double value = co - lambda * dc;
  const double bound = tradeoff_bound(regime, lambda, alpha,
                                      clusters.source_blocks.size(), asm_.z.rows());
  const double slack = value - bound;
  return {slack >= -kBoundTol, slack};
}

// --- Monte-Carlo suite -----------------------------------------------------

namespace detail {

inline Matrix random_shaped(Rng& rng, int min_rows = 2, int max_rows = 6, int min_cols = 1,
                            int max_cols = 6) {
  std::uniform_int_distribution<int> rows(min_rows, max_rows);
  std::uniform_int_distribution<int> cols(min_cols, max_cols);
  return gaussian_matrix(rows(rng), cols(rng), rng);
}

// Pair with orthogonal column spaces: disjoint subsets of one orthonormal
// basis, mixed by random coefficients.
inline std::pair<Matrix, Matrix> orthogonal_column_space_pair(Rng& rng) {
  std::uniform_int_distribution<int> dim_dist(4, 8);
  const int d = dim_dist(rng);
  std::uniform_int_distribution<int> split_dist(1, d - 1);
  const int ra = split_dist(rng);
  const int rb = std::min(d - ra, 3);
  const Matrix q = random_orthogonal(d, rng);
  Matrix qa(d, ra), qb(d, rb);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < ra; ++j) qa(i, j) = q(i, j);
    for (int j = 0; j < rb; ++j) qb(i, j) = q(i, ra + j);
  }
  std::uniform_int_distribution<int> cols(1, 5);
  return {qa * gaussian_matrix(ra, cols(rng), rng), qb * gaussian_matrix(rb, cols(rng), rng)};
}

inline TradeoffClusters random_clusters(Rng& rng, std::size_t k, std::size_t d,
                                        double alpha) {
  std::uniform_int_distribution<int> extra(0, 3);
  std::vector<std::size_t> ns(k), nt(k);
  std::size_t total_s = 0, total_t = 0;
  for (std::size_t c = 0; c < k; ++c) {
    ns[c] = d + extra(rng);
    nt[c] = d + extra(rng);
    total_s += ns[c];
    total_t += nt[c];
  }
  const Matrix zs = clip_spectral_norm(gaussian_matrix(d, total_s, rng), alpha);
  const Matrix zt = clip_spectral_norm(gaussian_matrix(d, total_t, rng), alpha);

  TradeoffClusters out;
  std::size_t off_s = 0, off_t = 0;
  for (std::size_t c = 0; c < k; ++c) {
    Matrix bs(d, ns[c]), bt(d, nt[c]);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < ns[c]; ++j) bs(i, j) = zs(i, off_s + j);
      for (std::size_t j = 0; j < nt[c]; ++j) bt(i, j) = zt(i, off_t + j);
    }
    off_s += ns[c];
    off_t += nt[c];
    out.source_blocks.push_back(std::move(bs));
    out.target_blocks.push_back(std::move(bt));
  }
  return out;
}

}  // namespace detail

// Runs every bound check with Monte-Carlo inputs that satisfy each bound's
// hypotheses by construction. `trials` scales the per-bound sample counts
// (rank/nuclear/coherence checks run `trials` each, trade-off checks
// `trials / 2` per lambda).
inline std::vector<BoundCheckReport> run_theory_suite(std::uint64_t seed, long trials) {
  if (trials < 1) throw std::invalid_argument("run_theory_suite: trials must be >= 1");
  std::vector<BoundCheckReport> reports;
  const double s2 = std::sqrt(2.0);

  {
    BoundCheckReport rep;
    rep.name = "rank_concat_upper";
    Rng rng(derive_seed(seed, 11));
    std::uniform_int_distribution<int> count(2, 4);
    for (long t = 0; t < trials; ++t) {
      std::vector<Matrix> mats;
      const int rows = std::uniform_int_distribution<int>(2, 6)(rng);
      const int n = count(rng);
      for (int i = 0; i < n; ++i)
        mats.push_back(detail::random_shaped(rng, rows, rows));
      rep.absorb(check_rank_concat_upper(mats));
    }
    reports.push_back(rep);
  }

  {
    BoundCheckReport rep;
    rep.name = "rank_concat_lower";
    Rng rng(derive_seed(seed, 12));
    for (long t = 0; t < trials; ++t) {
      const int rows = std::uniform_int_distribution<int>(2, 6)(rng);
      rep.absorb(check_rank_concat_lower(detail::random_shaped(rng, rows, rows),
                                         detail::random_shaped(rng, rows, rows)));
    }
    reports.push_back(rep);
  }

  {
    BoundCheckReport rep;
    rep.name = "nuclear_concat_upper";
    Rng rng(derive_seed(seed, 13));
    for (long t = 0; t < trials; ++t) {
      const int rows = std::uniform_int_distribution<int>(2, 6)(rng);
      rep.absorb(check_nuclear_concat_upper(detail::random_shaped(rng, rows, rows),
                                            detail::random_shaped(rng, rows, rows)));
      // Orthogonal column spaces attain equality (the additivity direction).
      const auto [a, b] = detail::orthogonal_column_space_pair(rng);
      const auto eq = check_nuclear_concat_upper(a, b);
      rep.witness_residual = std::max(rep.witness_residual, std::fabs(eq.slack));
      rep.absorb(eq);
    }
    reports.push_back(rep);
  }

  for (double alpha : {0.5, 1.0, 2.0}) {
    for (std::size_t d : {2u, 3u, 5u, 8u}) {
      BoundCheckReport rep;
      rep.name = "transferability_alpha" + std::to_string(alpha).substr(0, 3) + "_d" +
                 std::to_string(d);
      Rng rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(alpha * 10) * 16 + d));
      std::uniform_int_distribution<int> cols(static_cast<int>(d), 2 * static_cast<int>(d) + 4);
      for (long t = 0; t < trials; ++t) {
        const Matrix a = clip_spectral_norm(gaussian_matrix(d, cols(rng), rng), alpha);
        const Matrix b = clip_spectral_norm(gaussian_matrix(d, cols(rng), rng), alpha);
        rep.absorb(check_transferability_bound(a, b, alpha));
      }
      const auto [wa, wb] = make_transferability_witness(d, d + 3, alpha, rng);
      const auto eq = check_transferability_bound(wa, wb, alpha);
      rep.witness_residual = std::fabs(eq.slack);
      rep.absorb(eq);
      reports.push_back(rep);
    }
  }

  {
    const long tradeoff_trials = std::max<long>(1, trials / 2);
    const std::vector<double> lambdas = {0.5, 1.0, 1.0 + s2, 3.0, 5.0};
    for (double lambda : lambdas) {
      for (TradeoffRegime regime :
           {TradeoffRegime::SharedSubspace, TradeoffRegime::OrthogonalClasses}) {
        const bool applies = regime == TradeoffRegime::SharedSubspace
                                 ? lambda >= 1.0 + s2 - 1e-12
                                 : lambda <= 1.0 + s2 + 1e-12;
        if (!applies) continue;
        BoundCheckReport rep;
        rep.name = std::string("tradeoff_") +
                   (regime == TradeoffRegime::SharedSubspace ? "shared" : "orthogonal") +
                   "_lambda" + std::to_string(lambda).substr(0, 4);
        Rng rng(derive_seed(seed, 2000 + static_cast<std::uint64_t>(lambda * 100) +
                                      (regime == TradeoffRegime::SharedSubspace ? 1 : 0)));
        std::uniform_int_distribution<int> kk(2, 4);
        std::uniform_int_distribution<int> dd(2, 6);
        for (long t = 0; t < tradeoff_trials; ++t) {
          const std::size_t k = kk(rng);
          const std::size_t d = dd(rng);
          rep.absorb(
              check_tradeoff_bound(detail::random_clusters(rng, k, d, 1.0), lambda, 1.0, regime));
        }
        // Witness: k | d required for the orthogonal construction.
        const std::size_t wk = 3;
        const std::size_t wd = regime == TradeoffRegime::OrthogonalClasses ? 6 : 5;
        const auto witness = make_tradeoff_witness(wk, wd, 1.0, regime, rng);
        const auto eq = check_tradeoff_bound(witness, lambda, 1.0, regime);
        rep.witness_residual = std::fabs(eq.slack);
        rep.absorb(eq);
        reports.push_back(rep);
      }
    }
  }

  {
    // At lambda = 1 + sqrt(2) the two closed forms coincide.
    BoundCheckReport rep;
    rep.name = "tradeoff_boundary_agreement";
    const double lambda = 1.0 + s2;
    for (std::size_t k : {2u, 3u, 4u, 9u})
      for (std::size_t d : {2u, 3u, 5u, 8u}) {
        const double bi = tradeoff_bound(TradeoffRegime::SharedSubspace, lambda, 1.0, k, d);
        const double bii = tradeoff_bound(TradeoffRegime::OrthogonalClasses, lambda, 1.0, k, d);
        const double diff = std::fabs(bi - bii);
        rep.witness_residual = std::max(rep.witness_residual, diff);
        rep.absorb({diff <= kBoundTol, kBoundTol - diff});
      }
    reports.push_back(rep);
  }

  {
    // Monotonicity of f(x, y) = x + y - sqrt(x^2 + y^2) in each argument.
    BoundCheckReport rep;
    rep.name = "coherence_deficit_monotonicity";
    Rng rng(derive_seed(seed, 3000));
    const double hi = 8.0;  // covers alpha * d for the grids above
    std::uniform_real_distribution<double> point(0.0, hi);
    std::uniform_real_distribution<double> delta(0.0, hi / 2);
    auto f = [](double x, double y) { return x + y - std::hypot(x, y); };
    for (long t = 0; t < trials; ++t) {
      const double x = point(rng), y = point(rng);
      const double slack_x = f(x + delta(rng), y) - f(x, y);
      const double slack_y = f(x, y + delta(rng)) - f(x, y);
      rep.absorb({slack_x >= -1e-12, slack_x});
      rep.absorb({slack_y >= -1e-12, slack_y});
    }
    reports.push_back(rep);
  }

  return reports;
}

}  // namespace getuda
