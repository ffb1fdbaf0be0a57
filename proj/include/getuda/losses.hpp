#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "getuda/errors.hpp"
#include "getuda/matrix.hpp"
#include "getuda/spectral.hpp"

namespace getuda {

// Per-class column indices of a batch feature matrix, split by domain.
// Target lists hold only columns whose pseudo-label was accepted.
struct ClassPartition {
  int num_classes = 0;
  std::vector<std::vector<int>> source_cols;
  std::vector<std::vector<int>> target_cols;

  std::vector<int> class_cols(int c) const {
    std::vector<int> out = source_cols[c];
    out.insert(out.end(), target_cols[c].begin(), target_cols[c].end());
    return out;
  }

  std::vector<int> all_cols() const {
    std::vector<int> out;
    for (int c = 0; c < num_classes; ++c) {
      const auto cc = class_cols(c);
      out.insert(out.end(), cc.begin(), cc.end());
    }
    return out;
  }

  void validate(std::size_t n_cols) const {
    if (num_classes <= 0) throw std::invalid_argument("ClassPartition: no classes");
    if (source_cols.size() != static_cast<std::size_t>(num_classes) ||
        target_cols.size() != static_cast<std::size_t>(num_classes))
      throw std::invalid_argument("ClassPartition: per-class list count mismatch");
    std::vector<char> seen(n_cols, 0);
    for (const auto* lists : {&source_cols, &target_cols})
      for (const auto& l : *lists)
        for (int j : l) {
          if (j < 0 || static_cast<std::size_t>(j) >= n_cols)
            throw std::invalid_argument("ClassPartition: column index out of range");
          if (seen[j])
            throw std::invalid_argument("ClassPartition: column assigned twice");
          seen[j] = 1;
        }
  }

  static ClassPartition from_labels(int num_classes,
                                    const std::vector<int>& source_cols,
                                    const std::vector<int>& source_labels,
                                    const std::vector<int>& target_cols = {},
                                    const std::vector<int>& target_pseudo = {}) {
    if (source_cols.size() != source_labels.size() ||
        target_cols.size() != target_pseudo.size())
      throw std::invalid_argument("ClassPartition: index/label length mismatch");
    ClassPartition p;
    p.num_classes = num_classes;
    p.source_cols.resize(num_classes);
    p.target_cols.resize(num_classes);
    for (std::size_t i = 0; i < source_cols.size(); ++i) {
      const int y = source_labels[i];
      if (y < 0 || y >= num_classes)
        throw std::invalid_argument("ClassPartition: source label out of range");
      p.source_cols[y].push_back(source_cols[i]);
    }
    for (std::size_t i = 0; i < target_cols.size(); ++i) {
      const int y = target_pseudo[i];
      if (y == -1) continue;  // unselected pseudo-label
      if (y < 0 || y >= num_classes)
        throw std::invalid_argument("ClassPartition: pseudo-label out of range");
      p.target_cols[y].push_back(target_cols[i]);
    }
    return p;
  }
};

struct ValueGrad {
  double value = 0.0;
  Matrix grad;
};

struct ValueGradPair {
  double value = 0.0;
  Matrix grad_a;
  Matrix grad_b;
};

// ||Zs||_* + ||Zt||_* - ||[Zs, Zt]||_* with subgradients of every term. The
// concatenation's subgradient splits back to its column blocks. Empty inputs
// follow the degenerate-batch convention: zero value, zero gradients.
inline ValueGradPair domain_coherence_global(const Matrix& zs, const Matrix& zt) {
  ValueGradPair out;
  out.grad_a = Matrix(zs.rows(), zs.cols());
  out.grad_b = Matrix(zt.rows(), zt.cols());
  if (zs.cols() == 0 || zt.cols() == 0) return out;
  if (zs.rows() != zt.rows())
    throw std::invalid_argument("domain_coherence_global: row counts differ");

  const Matrix joint = hconcat(zs, zt);
  out.value = nuclear_norm(zs) + nuclear_norm(zt) - nuclear_norm(joint);

  const Matrix gj = nuclear_norm_subgradient(joint);
  out.grad_a = nuclear_norm_subgradient(zs);
  out.grad_b = nuclear_norm_subgradient(zt);
  for (std::size_t i = 0; i < zs.rows(); ++i) {
    for (std::size_t j = 0; j < zs.cols(); ++j) out.grad_a(i, j) -= gj(i, j);
    for (std::size_t j = 0; j < zt.cols(); ++j) out.grad_b(i, j) -= gj(i, zs.cols() + j);
  }
  return out;
}

// Class-level domain coherence: sum of domain_coherence_global over classes.
// Classes missing either domain contribute zero.
inline ValueGrad domain_coherence_classwise(const Matrix& z, const ClassPartition& part) {
  part.validate(z.cols());
  ValueGrad out;
  out.grad = Matrix(z.rows(), z.cols());
  for (int c = 0; c < part.num_classes; ++c) {
    const auto& sc = part.source_cols[c];
    const auto& tc = part.target_cols[c];
    if (sc.empty() || tc.empty()) continue;
    const auto term = domain_coherence_global(gather_columns(z, sc), gather_columns(z, tc));
    out.value += term.value;
    scatter_add_columns(out.grad, sc, term.grad_a);
    scatter_add_columns(out.grad, tc, term.grad_b);
  }
  return out;
}

// sum_i ||Z_i||_* - ||Z||_* over the columns that belong to some class.
// Non-negative up to rounding; zero exactly when class column spaces are
// mutually orthogonal.
inline ValueGrad class_orthogonality(const Matrix& z, const ClassPartition& part) {
  part.validate(z.cols());
  ValueGrad out;
  out.grad = Matrix(z.rows(), z.cols());
  const auto all = part.all_cols();
  if (all.empty()) return out;

  for (int c = 0; c < part.num_classes; ++c) {
    const auto cc = part.class_cols(c);
    if (cc.empty()) continue;
    const Matrix zc = gather_columns(z, cc);
    out.value += nuclear_norm(zc);
    scatter_add_columns(out.grad, cc, nuclear_norm_subgradient(zc));
  }
  const Matrix zall = gather_columns(z, all);
  out.value -= nuclear_norm(zall);
  scatter_add_columns(out.grad, all, nuclear_norm_subgradient(zall) * -1.0);
  return out;
}

// lambda_co * L_CO - lambda_dc * L_DC, the minimized trade-off objective.
inline ValueGrad geometry_aware(const Matrix& z, const ClassPartition& part,
                                double lambda_dc, double lambda_co) {
  if (lambda_dc <= 0.0 || lambda_co <= 0.0)
    throw ConfigError("geometry_aware: lambda_dc and lambda_co must be > 0");
  const auto co = class_orthogonality(z, part);
  const auto dc = domain_coherence_classwise(z, part);
  ValueGrad out;
  out.value = lambda_co * co.value - lambda_dc * dc.value;
  out.grad = co.grad * lambda_co - dc.grad * lambda_dc;
  return out;
}

namespace detail {
inline void require_probability_columns(const Matrix& probs, const char* who) {
  for (std::size_t j = 0; j < probs.cols(); ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.rows(); ++i) {
      if (probs(i, j) < -1e-12)
        throw std::invalid_argument(std::string(who) + ": negative probability");
      sum += probs(i, j);
    }
    if (std::fabs(sum - 1.0) > 1e-6)
      throw std::invalid_argument(std::string(who) + ": column does not sum to 1");
  }
}
constexpr double kProbFloor = 1e-12;  // clamp before every log
}  // namespace detail

// Summed cross-entropy over source columns; gradient with respect to the
// pre-softmax logits (probs minus one-hot).
inline ValueGrad source_cross_entropy(const Matrix& probs, const std::vector<int>& labels) {
  detail::require_probability_columns(probs, "source_cross_entropy");
  if (labels.size() != probs.cols())
    throw std::invalid_argument("source_cross_entropy: label count mismatch");
  ValueGrad out;
  out.grad = probs;
  for (std::size_t j = 0; j < probs.cols(); ++j) {
    const int y = labels[j];
    if (y < 0 || static_cast<std::size_t>(y) >= probs.rows())
      throw std::invalid_argument("source_cross_entropy: label out of range");
    out.value -= std::log(std::max(probs(y, j), detail::kProbFloor));
    out.grad(y, j) -= 1.0;
  }
  return out;
}

// Summed Shannon entropy of the prediction columns; gradient with respect to
// logits through the softmax.
inline ValueGrad target_entropy(const Matrix& probs) {
  detail::require_probability_columns(probs, "target_entropy");
  ValueGrad out;
  out.grad = Matrix(probs.rows(), probs.cols());
  for (std::size_t j = 0; j < probs.cols(); ++j) {
    double ent = 0.0;           // -sum p log p
    double mean_log = 0.0;      // sum p log p
    for (std::size_t i = 0; i < probs.rows(); ++i) {
      const double p = probs(i, j);
      if (p > 0.0) ent -= p * std::log(std::max(p, detail::kProbFloor));
    }
    mean_log = -ent;
    out.value += ent;
    for (std::size_t i = 0; i < probs.rows(); ++i) {
      const double p = probs(i, j);
      const double logp = std::log(std::max(p, detail::kProbFloor));
      out.grad(i, j) = p * (mean_log - logp);
    }
  }
  return out;
}

struct LossWeights {
  double lambda_t = 1e-3;
  double lambda_dc = 1.0;
  double lambda_co = 1.0;
};

// Column roles within one mixed batch. target_pseudo entries of -1 mark
// samples whose pseudo-label was rejected by the confidence threshold.
struct BatchColumns {
  std::vector<int> source_cols;
  std::vector<int> source_labels;
  std::vector<int> target_cols;
  std::vector<int> target_pseudo;
};

struct LossBreakdown {
  double l_src_ce = 0.0;
  double l_tgt_ent = 0.0;
  double l_dc = 0.0;
  double l_co = 0.0;
  double l_ga = 0.0;
  double total = 0.0;
  Matrix grad_features;  // d x n, gradient of total w.r.t. the feature matrix
  Matrix grad_logits;    // k x n, gradient of total w.r.t. the logits
};

// Overall objective: source cross-entropy, weighted target
// entropy, and the geometry-aware constraint on the classed columns.
// classifier_weight (k x d) closes the feature-side chain of the
// classification terms so grad_features is the full d(total)/dZ.
inline LossBreakdown total_objective(const Matrix& features, const Matrix& probs,
                                     const Matrix& classifier_weight,
                                     const BatchColumns& batch, const LossWeights& w) {
  const std::size_t n = features.cols();
  const int k = static_cast<int>(probs.rows());
  if (probs.cols() != n)
    throw std::invalid_argument("total_objective: probs/features column mismatch");
  if (classifier_weight.rows() != probs.rows() ||
      classifier_weight.cols() != features.rows())
    throw std::invalid_argument("total_objective: classifier weight shape mismatch");
  if (w.lambda_t < 0.0 || w.lambda_dc < 0.0 || w.lambda_co < 0.0)
    throw ConfigError("total_objective: loss weights must be >= 0");

  LossBreakdown out;
  out.grad_logits = Matrix(probs.rows(), n);

  if (!batch.source_cols.empty()) {
    const auto ce = source_cross_entropy(gather_columns(probs, batch.source_cols),
                                         batch.source_labels);
    out.l_src_ce = ce.value;
    scatter_add_columns(out.grad_logits, batch.source_cols, ce.grad);
  }
  if (!batch.target_cols.empty()) {
    const auto ent = target_entropy(gather_columns(probs, batch.target_cols));
    out.l_tgt_ent = ent.value;
    scatter_add_columns(out.grad_logits, batch.target_cols, ent.grad * w.lambda_t);
  }

  const auto part = ClassPartition::from_labels(k, batch.source_cols, batch.source_labels,
                                                batch.target_cols, batch.target_pseudo);
  const auto co = class_orthogonality(features, part);
  const auto dc = domain_coherence_classwise(features, part);
  out.l_co = co.value;
  out.l_dc = dc.value;
  out.l_ga = w.lambda_co * co.value - w.lambda_dc * dc.value;
  out.total = out.l_src_ce + w.lambda_t * out.l_tgt_ent + w.lambda_co * out.l_co -
              w.lambda_dc * out.l_dc;

  out.grad_features = co.grad * w.lambda_co - dc.grad * w.lambda_dc +
                      classifier_weight.transposed() * out.grad_logits;
  return out;
}

}  // namespace getuda
