#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "getuda/data.hpp"
#include "getuda/losses.hpp"
#include "getuda/model.hpp"
#include "getuda/spectral.hpp"

namespace getuda {

struct TrainingConfig {
  int t_warm = 20;
  int t_adapt = 1000;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  double lambda_dc = 10.0;
  double lambda_co = 10.0;
  double lambda_t = 1e-3;
  double tau = 0.8;  // pseudo-label confidence threshold
  std::uint64_t seed = 1;
  bool normalize_features = true;
  std::vector<int> hidden_sizes{64};
  int feature_dim = 3;

  void validate() const {
    if (t_warm < 0 || t_adapt < 0) throw ConfigError("train: epoch counts must be >= 0");
    if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2");
    if (learning_rate <= 0) throw ConfigError("train: learning_rate must be > 0");
    if (weight_decay < 0) throw ConfigError("train: weight_decay must be >= 0");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("train: tau must be in (0, 1]");
    if (lambda_dc < 0 || lambda_co < 0 || lambda_t < 0)
      throw ConfigError("train: loss weights must be >= 0");
    if (feature_dim < 1) throw ConfigError("train: feature_dim must be >= 1");
    for (int h : hidden_sizes)
      if (h < 1) throw ConfigError("train: hidden sizes must be >= 1");
  }
};

struct PseudoLabels {
  std::vector<int> labels;     // argmax class per column
  std::vector<char> selected;  // max probability strictly above tau
  long selected_count() const {
    return std::count(selected.begin(), selected.end(), char(1));
  }
};

// Argmax pseudo-labels with confidence selection. Ties break to the lowest
// class index; selection requires the max probability strictly above tau.
inline PseudoLabels assign_pseudo_labels(const Matrix& probs, double tau) {
  PseudoLabels out;
  out.labels.resize(probs.cols());
  out.selected.resize(probs.cols());
  for (std::size_t j = 0; j < probs.cols(); ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.rows(); ++i)
      if (probs(i, j) > probs(best, j)) best = i;
    out.labels[j] = static_cast<int>(best);
    out.selected[j] = probs(best, j) > tau ? 1 : 0;
  }
  return out;
}

struct EpochRecord {
  int epoch = 0;
  // Batch-size-weighted means of the per-batch loss terms.
  double l_src_ce = 0, l_tgt_ent = 0, l_dc = 0, l_co = 0, l_ga = 0, total = 0;
  // End-of-epoch snapshot over the full target set.
  long pseudo_count = 0;
  double pseudo_acc = std::numeric_limits<double>::quiet_NaN();
  double target_acc = std::numeric_limits<double>::quiet_NaN();
  double interclass_mean_angle_deg = std::numeric_limits<double>::quiet_NaN();
  double crossdomain_mean_angle_deg = std::numeric_limits<double>::quiet_NaN();
};

struct TrainingHistory {
  std::vector<EpochRecord> records;
};

struct GeometryDiagnostics {
  struct PerClass {
    int label = 0;
    long n_source = 0;
    long n_target = 0;
    double nuclear_source = 0, nuclear_target = 0, nuclear_joint = 0;
    std::size_t rank_source = 0, rank_target = 0, rank_joint = 0;
    double cross_domain_mean_angle = std::numeric_limits<double>::quiet_NaN();
    double cross_domain_max_angle = std::numeric_limits<double>::quiet_NaN();
  };
  std::vector<PerClass> classes;
  std::vector<int> skipped_classes;  // classes with no samples at all
  double interclass_mean_angle = std::numeric_limits<double>::quiet_NaN();
  double interclass_min_angle = std::numeric_limits<double>::quiet_NaN();
  double crossdomain_mean_angle = std::numeric_limits<double>::quiet_NaN();
  double global_nuclear_norm = 0;
};

// Singular directions below this share of sigma_max are treated as cluster
// noise when extracting subspace bases for angle diagnostics. Ranks are still
// reported at the numerical_rank default.
inline constexpr double kDiagBasisRelTol = 0.5;

// Subspace diagnostics of a projected feature matrix. Labels must be known
// for every column (truth, or pseudo for target -- caller's choice).
inline GeometryDiagnostics geometry_diagnostics(const Matrix& z,
                                                const std::vector<int>& labels,
                                                const std::vector<Domain>& domains,
                                                int num_classes) {
  if (labels.size() != z.cols() || domains.size() != z.cols())
    throw std::invalid_argument("geometry_diagnostics: label/domain count mismatch");
  GeometryDiagnostics out;
  out.global_nuclear_norm = nuclear_norm(z);

  std::vector<Matrix> joint_bases;
  std::vector<double> cross_means;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<int> src, tgt, all;
    for (std::size_t j = 0; j < z.cols(); ++j) {
      if (labels[j] != c) continue;
      all.push_back(static_cast<int>(j));
      (domains[j] == Domain::Source ? src : tgt).push_back(static_cast<int>(j));
    }
    if (all.empty()) {
      out.skipped_classes.push_back(c);
      continue;
    }
    GeometryDiagnostics::PerClass pc;
    pc.label = c;
    pc.n_source = static_cast<long>(src.size());
    pc.n_target = static_cast<long>(tgt.size());
    const Matrix zall = gather_columns(z, all);
    pc.nuclear_joint = nuclear_norm(zall);
    pc.rank_joint = numerical_rank(zall);
    if (!src.empty()) {
      const Matrix zs = gather_columns(z, src);
      pc.nuclear_source = nuclear_norm(zs);
      pc.rank_source = numerical_rank(zs);
    }
    if (!tgt.empty()) {
      const Matrix zt = gather_columns(z, tgt);
      pc.nuclear_target = nuclear_norm(zt);
      pc.rank_target = numerical_rank(zt);
    }
    if (!src.empty() && !tgt.empty()) {
      const Matrix zs = gather_columns(z, src);
      const Matrix zt = gather_columns(z, tgt);
      if (zs.max_abs() > 0 && zt.max_abs() > 0) {
        const auto angles = principal_angles(orthonormal_basis(zs, kDiagBasisRelTol),
                                             orthonormal_basis(zt, kDiagBasisRelTol));
        if (!angles.empty()) {
          pc.cross_domain_mean_angle =
              std::accumulate(angles.begin(), angles.end(), 0.0) / angles.size();
          pc.cross_domain_max_angle = angles.back();
          cross_means.push_back(pc.cross_domain_mean_angle);
        }
      }
    }
    if (zall.max_abs() > 0)
      joint_bases.push_back(orthonormal_basis(zall, kDiagBasisRelTol));
    out.classes.push_back(std::move(pc));
  }

  if (!cross_means.empty())
    out.crossdomain_mean_angle =
        std::accumulate(cross_means.begin(), cross_means.end(), 0.0) / cross_means.size();

  if (joint_bases.size() >= 2) {
    double sum = 0.0, mn = M_PI;
    long count = 0;
    for (std::size_t a = 0; a < joint_bases.size(); ++a)
      for (std::size_t b = a + 1; b < joint_bases.size(); ++b) {
        const auto angles = principal_angles(joint_bases[a], joint_bases[b]);
        for (double ang : angles) {
          sum += ang;
          mn = std::min(mn, ang);
          ++count;
        }
      }
    if (count > 0) {
      out.interclass_mean_angle = sum / count;
      out.interclass_min_angle = mn;
    }
  }
  return out;
}

struct EvalResult {
  double accuracy = 0;
  std::vector<double> per_class_accuracy;
  std::vector<long> per_class_count;
};

inline EvalResult evaluate(const Model& model, const DomainDataset& ds) {
  ds.validate();
  if (static_cast<std::size_t>(ds.num_classes) != model.classifier.num_classes())
    throw std::invalid_argument("evaluate: class count mismatch between model and data");
  for (int y : ds.labels)
    if (y < 0) throw std::invalid_argument("evaluate: dataset has unlabeled samples");

  const Matrix probs =
      forward_classifier(model.classifier, forward_features(model.projector, ds.x));
  EvalResult r;
  r.per_class_accuracy.assign(ds.num_classes, 0.0);
  r.per_class_count.assign(ds.num_classes, 0);
  long hits = 0;
  for (std::size_t j = 0; j < probs.cols(); ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.rows(); ++i)
      if (probs(i, j) > probs(best, j)) best = i;
    const int y = ds.labels[j];
    ++r.per_class_count[y];
    if (static_cast<int>(best) == y) {
      ++hits;
      r.per_class_accuracy[y] += 1.0;
    }
  }
  for (int c = 0; c < ds.num_classes; ++c)
    if (r.per_class_count[c] > 0) r.per_class_accuracy[c] /= r.per_class_count[c];
  r.accuracy = ds.size() == 0 ? 0.0 : static_cast<double>(hits) / ds.size();
  return r;
}

namespace detail {

// Shuffled cyclic index walk; reshuffles on wrap-around.
class IndexStream {
 public:
  IndexStream(std::size_t n, Rng& rng) : order_(n) {
    std::iota(order_.begin(), order_.end(), 0);
    std::shuffle(order_.begin(), order_.end(), rng);
  }
  int next(Rng& rng) {
    if (pos_ == order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng);
      pos_ = 0;
    }
    return order_[pos_++];
  }

 private:
  std::vector<int> order_;
  std::size_t pos_ = 0;
};

struct LossAccumulator {
  double ce = 0, ent = 0, dc = 0, co = 0, ga = 0, total = 0;
  double weight = 0;
  void add(const LossBreakdown& b, double w) {
    ce += b.l_src_ce;
    ent += b.l_tgt_ent;
    dc += b.l_dc;
    co += b.l_co;
    ga += b.l_ga;
    total += b.total;
    weight += w;
  }
  void fill(EpochRecord& r) const {
    const double w = weight > 0 ? weight : 1.0;
    r.l_src_ce = ce / w;
    r.l_tgt_ent = ent / w;
    r.l_dc = dc / w;
    r.l_co = co / w;
    r.l_ga = ga / w;
    r.total = total / w;
  }
};

}  // namespace detail

// Warming-up stage epoch: one pass over shuffled source batches, each paired
// with a target batch of equal size for the global coherence term. The class
// orthogonality partition uses source ground truth only; target labels are
// never consulted (this function cannot even see them).
inline EpochRecord warm_up_epoch(Model& model, AdamState& adam,
                                 const DomainDataset& source,
                                 const Matrix& target_features,
                                 const TrainingConfig& cfg, Rng& rng) {
  if (source.size() == 0) throw std::invalid_argument("warm_up_epoch: empty source dataset");
  const int k = source.num_classes;

  std::vector<int> perm(source.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  detail::IndexStream tgt_stream(target_features.cols(), rng);

  detail::LossAccumulator acc;
  for (std::size_t start = 0; start < perm.size(); start += cfg.batch_size) {
    const std::size_t bs = std::min<std::size_t>(cfg.batch_size, perm.size() - start);
    std::vector<int> src_idx(perm.begin() + start, perm.begin() + start + bs);
    std::vector<int> tgt_idx;
    if (target_features.cols() > 0)
      for (std::size_t i = 0; i < bs; ++i) tgt_idx.push_back(tgt_stream.next(rng));

    Matrix x = gather_columns(source.x, src_idx);
    if (!tgt_idx.empty()) x = hconcat(x, gather_columns(target_features, tgt_idx));

    ForwardCache cache;
    const Matrix z = forward_features(model.projector, x, &cache);
    const Matrix probs = forward_classifier(model.classifier, z);

    std::vector<int> src_cols(bs), src_labels(bs);
    for (std::size_t i = 0; i < bs; ++i) {
      src_cols[i] = static_cast<int>(i);
      src_labels[i] = source.labels[src_idx[i]];
    }
    std::vector<int> tgt_cols(tgt_idx.size());
    std::iota(tgt_cols.begin(), tgt_cols.end(), static_cast<int>(bs));

    const auto ce = source_cross_entropy(gather_columns(probs, src_cols), src_labels);
    const auto part = ClassPartition::from_labels(k, src_cols, src_labels);
    const auto co = class_orthogonality(z, part);
    const Matrix zs = gather_columns(z, src_cols);
    const Matrix zt = gather_columns(z, tgt_cols);
    const auto dc = domain_coherence_global(zs, zt);

    LossBreakdown b;
    b.l_src_ce = ce.value;
    b.l_dc = dc.value;
    b.l_co = co.value;
    b.l_ga = cfg.lambda_co * co.value - cfg.lambda_dc * dc.value;
    b.total = ce.value + b.l_ga;
    b.grad_logits = Matrix(probs.rows(), probs.cols());
    scatter_add_columns(b.grad_logits, src_cols, ce.grad);
    b.grad_features = co.grad * cfg.lambda_co;
    scatter_add_columns(b.grad_features, src_cols, dc.grad_a * -cfg.lambda_dc);
    scatter_add_columns(b.grad_features, tgt_cols, dc.grad_b * -cfg.lambda_dc);
    b.grad_features += model.classifier.weight.transposed() * b.grad_logits;

    const ModelGrads grads =
        backward(model.projector, model.classifier, cache, b.grad_features, b.grad_logits);
    adam_step(adam, model, grads);
    acc.add(b, static_cast<double>(x.cols()));
  }

  EpochRecord rec;
  acc.fill(rec);
  rec.pseudo_count = 0;
  return rec;
}

// GET learning stage epoch: mixed batches, half source and half target,
// pseudo-labels recomputed from the live classifier inside every batch.
inline EpochRecord get_epoch(Model& model, AdamState& adam, const DomainDataset& source,
                             const DomainDataset& target, const TrainingConfig& cfg,
                             Rng& rng) {
  if (target.size() == 0) throw std::invalid_argument("get_epoch: empty target dataset");
  if (source.size() == 0) throw std::invalid_argument("get_epoch: empty source dataset");
  const std::size_t half = std::max<std::size_t>(1, cfg.batch_size / 2);
  const std::size_t num_batches =
      (std::max(source.size(), target.size()) + half - 1) / half;

  detail::IndexStream src_stream(source.size(), rng);
  detail::IndexStream tgt_stream(target.size(), rng);
  const LossWeights weights{cfg.lambda_t, cfg.lambda_dc, cfg.lambda_co};

  detail::LossAccumulator acc;
  for (std::size_t b = 0; b < num_batches; ++b) {
    std::vector<int> src_idx(half), tgt_idx(half);
    for (std::size_t i = 0; i < half; ++i) src_idx[i] = src_stream.next(rng);
    for (std::size_t i = 0; i < half; ++i) tgt_idx[i] = tgt_stream.next(rng);

    const Matrix x =
        hconcat(gather_columns(source.x, src_idx), gather_columns(target.x, tgt_idx));
    ForwardCache cache;
    const Matrix z = forward_features(model.projector, x, &cache);
    const Matrix probs = forward_classifier(model.classifier, z);

    BatchColumns batch;
    batch.source_cols.resize(half);
    batch.source_labels.resize(half);
    for (std::size_t i = 0; i < half; ++i) {
      batch.source_cols[i] = static_cast<int>(i);
      batch.source_labels[i] = source.labels[src_idx[i]];
    }
    batch.target_cols.resize(half);
    std::iota(batch.target_cols.begin(), batch.target_cols.end(), static_cast<int>(half));
    const auto pl = assign_pseudo_labels(gather_columns(probs, batch.target_cols), cfg.tau);
    batch.target_pseudo.resize(half);
    for (std::size_t i = 0; i < half; ++i)
      batch.target_pseudo[i] = pl.selected[i] ? pl.labels[i] : -1;

    const auto breakdown = total_objective(z, probs, model.classifier.weight, batch, weights);
    const ModelGrads grads = backward(model.projector, model.classifier, cache,
                                      breakdown.grad_features, breakdown.grad_logits);
    adam_step(adam, model, grads);
    acc.add(breakdown, static_cast<double>(x.cols()));
  }

  EpochRecord rec;
  acc.fill(rec);

  // End-of-epoch pseudo-label snapshot over the full target set.
  const Matrix probs_t =
      forward_classifier(model.classifier, forward_features(model.projector, target.x));
  const auto pl = assign_pseudo_labels(probs_t, cfg.tau);
  rec.pseudo_count = pl.selected_count();
  bool has_truth = true;
  for (int y : target.labels)
    if (y < 0) has_truth = false;
  if (has_truth && rec.pseudo_count > 0) {
    long hits = 0;
    for (std::size_t j = 0; j < target.size(); ++j)
      if (pl.selected[j] && pl.labels[j] == target.labels[j]) ++hits;
    rec.pseudo_acc = static_cast<double>(hits) / rec.pseudo_count;
  }
  return rec;
}

namespace detail {

inline void fill_epoch_metrics(EpochRecord& rec, const Model& model,
                               const DomainDataset& source,
                               const DomainDataset& target) {
  bool target_truth = !target.labels.empty();
  for (int y : target.labels)
    if (y < 0) target_truth = false;
  if (target_truth) rec.target_acc = evaluate(model, target).accuracy;

  const Matrix z_src = forward_features(model.projector, source.x);
  const Matrix z_tgt = forward_features(model.projector, target.x);
  const Matrix z = hconcat(z_src, z_tgt);
  std::vector<int> labels = source.labels;
  if (target_truth) {
    labels.insert(labels.end(), target.labels.begin(), target.labels.end());
  } else {
    // No truth available: group target columns by predicted class.
    const auto pl = assign_pseudo_labels(forward_classifier(model.classifier, z_tgt), 1.0);
    labels.insert(labels.end(), pl.labels.begin(), pl.labels.end());
  }
  std::vector<Domain> domains(source.size(), Domain::Source);
  domains.insert(domains.end(), target.size(), Domain::Target);

  const auto diag = geometry_diagnostics(z, labels, domains, source.num_classes);
  constexpr double kRad2Deg = 180.0 / M_PI;
  rec.interclass_mean_angle_deg = diag.interclass_mean_angle * kRad2Deg;
  rec.crossdomain_mean_angle_deg = diag.crossdomain_mean_angle * kRad2Deg;
}

}  // namespace detail

struct TrainResult {
  Model model;
  TrainingHistory history;
};

// Full two-stage training: t_warm warming-up epochs, then t_adapt GET epochs.
inline TrainResult train(const TrainingConfig& cfg, const DomainDataset& source,
                         const DomainDataset& target) {
  cfg.validate();
  source.validate();
  target.validate();
  if (source.dim() != target.dim())
    throw std::invalid_argument("train: feature dimensions differ across domains");
  if (source.num_classes != target.num_classes)
    throw std::invalid_argument("train: class counts differ across domains");

  Rng init_rng(derive_seed(cfg.seed, 100));
  std::vector<int> layer_sizes;
  layer_sizes.push_back(static_cast<int>(source.dim()));
  for (int h : cfg.hidden_sizes) layer_sizes.push_back(h);
  layer_sizes.push_back(cfg.feature_dim);

  TrainResult out;
  out.model = make_model(layer_sizes, source.num_classes, Activation::Tanh,
                         cfg.normalize_features, init_rng);
  AdamState adam = AdamState::init(out.model, cfg.learning_rate, cfg.weight_decay);
  Rng rng(derive_seed(cfg.seed, 101));

  int epoch = 0;
  for (int e = 0; e < cfg.t_warm; ++e) {
    EpochRecord rec = warm_up_epoch(out.model, adam, source, target.x, cfg, rng);
    rec.epoch = ++epoch;
    detail::fill_epoch_metrics(rec, out.model, source, target);
    out.history.records.push_back(rec);
  }
  for (int e = 0; e < cfg.t_adapt; ++e) {
    EpochRecord rec = get_epoch(out.model, adam, source, target, cfg, rng);
    rec.epoch = ++epoch;
    detail::fill_epoch_metrics(rec, out.model, source, target);
    out.history.records.push_back(rec);
  }
  return out;
}

// Fixed column order; one row per epoch.
inline void save_history_csv(const TrainingHistory& h, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path);
  out << "epoch,l_src_ce,l_tgt_ent,l_dc,l_co,total,pseudo_count,pseudo_acc,"
         "target_acc,interclass_mean_angle_deg,crossdomain_mean_angle_deg\n";
  out << std::setprecision(12);
  for (const auto& r : h.records) {
    out << r.epoch << ',' << r.l_src_ce << ',' << r.l_tgt_ent << ',' << r.l_dc << ','
        << r.l_co << ',' << r.total << ',' << r.pseudo_count << ',' << r.pseudo_acc
        << ',' << r.target_acc << ',' << r.interclass_mean_angle_deg << ','
        << r.crossdomain_mean_angle_deg << '\n';
  }
}

}  // namespace getuda
