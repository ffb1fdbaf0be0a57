#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "getuda/errors.hpp"
#include "getuda/matrix.hpp"
#include "getuda/random.hpp"

namespace getuda {

enum class Domain { Source, Target };

inline std::string to_string(Domain d) {
  return d == Domain::Source ? "source" : "target";
}

struct DomainDataset {
  Matrix x;                 // D x n, columns are samples
  std::vector<int> labels;  // in [0, k), or -1 for unlabeled target samples
  Domain domain = Domain::Source;
  int num_classes = 0;

  std::size_t size() const { return x.cols(); }
  std::size_t dim() const { return x.rows(); }

  void validate() const {
    if (num_classes < 2) throw std::invalid_argument("DomainDataset: k must be >= 2");
    if (labels.size() != x.cols())
      throw std::invalid_argument("DomainDataset: label count != sample count");
    for (int y : labels) {
      if (y < -1 || y >= num_classes)
        throw std::invalid_argument("DomainDataset: label out of range");
      if (y == -1 && domain == Domain::Source)
        throw std::invalid_argument("DomainDataset: source sample without label");
    }
  }
};

struct SyntheticConfig {
  int num_classes = 3;
  int input_dim = 10;
  int samples_per_class = 60;  // per domain
  double separation = 1.2;     // distance of each cluster center from origin
  double rotation_angle = M_PI / 6.0;  // total Givens budget applied to target
  double translation = 1.5;    // magnitude of the target translation
  double noise = 0.3;          // isotropic Gaussian scale within clusters
  std::uint64_t seed = 1;

  void validate() const {
    if (num_classes < 2) throw ConfigError("synthetic: k must be >= 2");
    if (input_dim < 2) throw ConfigError("synthetic: input_dim must be >= 2");
    if (num_classes > input_dim)
      throw ConfigError("synthetic: k must be <= input_dim (orthogonal centers)");
    if (samples_per_class < 1) throw ConfigError("synthetic: samples_per_class must be >= 1");
    if (separation < 0 || rotation_angle < 0 || translation < 0 || noise < 0)
      throw ConfigError("synthetic: magnitudes must be >= 0");
  }
};

namespace detail {

// Composition of seeded Givens rotations on random coordinate pairs; the
// angle budget is split into steps of at most pi/8.
inline Matrix rotation_from_budget(int dim, double budget, Rng& rng) {
  Matrix r = Matrix::identity(dim);
  if (budget <= 0.0) return r;
  const int steps = std::max(1, static_cast<int>(std::ceil(budget / (M_PI / 8.0))));
  const double step_angle = budget / steps;
  std::uniform_int_distribution<int> pick(0, dim - 1);
  for (int s = 0; s < steps; ++s) {
    int i = pick(rng);
    int j = pick(rng);
    while (j == i) j = pick(rng);
    if (i > j) std::swap(i, j);
    const double c = std::cos(step_angle), sn = std::sin(step_angle);
    for (std::size_t col = 0; col < r.cols(); ++col) {
      const double ri = r(i, col), rj = r(j, col);
      r(i, col) = c * ri - sn * rj;
      r(j, col) = sn * ri + c * rj;
    }
  }
  return r;
}

}  // namespace detail

// k Gaussian clusters on mutually orthogonal center directions; the target
// domain is the same generative draw pushed through a rigid motion
// (rotation + translation). Target truth labels are kept for evaluation.
inline std::pair<DomainDataset, DomainDataset> generate_synthetic_shift(
    const SyntheticConfig& cfg) {
  cfg.validate();
  const int k = cfg.num_classes, d = cfg.input_dim, npc = cfg.samples_per_class;

  Rng rng_centers(derive_seed(cfg.seed, 0));
  Rng rng_source(derive_seed(cfg.seed, 1));
  Rng rng_target(derive_seed(cfg.seed, 2));
  Rng rng_shift(derive_seed(cfg.seed, 3));

  const Matrix dirs = random_orthogonal(d, rng_centers);  // columns are centers / separation

  auto draw = [&](Rng& rng) {
    DomainDataset ds;
    ds.num_classes = k;
    ds.x = Matrix(d, static_cast<std::size_t>(k) * npc);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::size_t col = 0;
    for (int c = 0; c < k; ++c)
      for (int s = 0; s < npc; ++s, ++col) {
        for (int i = 0; i < d; ++i)
          ds.x(i, col) = cfg.separation * dirs(i, c) + cfg.noise * gauss(rng);
        ds.labels.push_back(c);
      }
    return ds;
  };

  DomainDataset source = draw(rng_source);
  source.domain = Domain::Source;

  DomainDataset target = draw(rng_target);
  target.domain = Domain::Target;
  const Matrix rot = detail::rotation_from_budget(d, cfg.rotation_angle, rng_shift);
  // Translate within the span of the cluster centers so the shift interacts
  // with the class structure instead of vanishing into noise dimensions.
  const auto mix = random_unit_vector(k, rng_shift);
  std::vector<double> shift_dir(d, 0.0);
  for (int i = 0; i < d; ++i)
    for (int c = 0; c < k; ++c) shift_dir[i] += dirs(i, c) * mix[c];
  target.x = rot * target.x;
  for (std::size_t j = 0; j < target.x.cols(); ++j)
    for (int i = 0; i < d; ++i) target.x(i, j) += cfg.translation * shift_dir[i];

  return {std::move(source), std::move(target)};
}

// CSV schema: header `domain,label,f0,...,f{D-1}`; domain is `source` or
// `target` (uniform within a file); label is an integer or -1.
inline void save_dataset_csv(const DomainDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path);
  out << "domain,label";
  for (std::size_t i = 0; i < ds.dim(); ++i) out << ",f" << i;
  out << "\n";
  out << std::setprecision(17);
  for (std::size_t j = 0; j < ds.size(); ++j) {
    out << to_string(ds.domain) << "," << ds.labels[j];
    for (std::size_t i = 0; i < ds.dim(); ++i) out << "," << ds.x(i, j);
    out << "\n";
  }
}

// expected_k = 0 infers the class count from the labels present.
inline DomainDataset load_dataset_csv(const std::string& path, int expected_k = 0) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw ParseError("missing header", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> head;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) head.push_back(tok);
  }
  if (head.size() < 3 || head[0] != "domain" || head[1] != "label")
    throw ParseError("header must start with domain,label,f0,...", 1);
  const std::size_t dim = head.size() - 2;
  for (std::size_t i = 0; i < dim; ++i)
    if (head[i + 2] != "f" + std::to_string(i))
      throw ParseError("unexpected feature column name: " + head[i + 2], 1);

  std::vector<double> values;
  std::vector<int> labels;
  bool domain_set = false;
  Domain domain = Domain::Source;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<std::string> toks;
    while (std::getline(ss, tok, ',')) toks.push_back(tok);
    if (toks.size() != dim + 2) throw ParseError("ragged row", line_no);

    Domain row_domain;
    if (toks[0] == "source")
      row_domain = Domain::Source;
    else if (toks[0] == "target")
      row_domain = Domain::Target;
    else
      throw ParseError("unknown domain tag: " + toks[0], line_no);
    if (!domain_set) {
      domain = row_domain;
      domain_set = true;
    } else if (row_domain != domain) {
      throw ParseError("mixed domain tags within one file", line_no);
    }

    int label;
    try {
      std::size_t used = 0;
      label = std::stoi(toks[1], &used);
      if (used != toks[1].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw ParseError("label is not an integer: " + toks[1], line_no);
    }
    if (label < -1) throw ParseError("label out of range: " + toks[1], line_no);
    if (expected_k > 0 && label >= expected_k)
      throw ParseError("label out of range: " + toks[1], line_no);
    if (label == -1 && domain == Domain::Source)
      throw ParseError("source row without label", line_no);
    labels.push_back(label);

    for (std::size_t i = 0; i < dim; ++i) {
      try {
        std::size_t used = 0;
        const double v = std::stod(toks[2 + i], &used);
        if (used != toks[2 + i].size() || !std::isfinite(v))
          throw std::invalid_argument("");
        values.push_back(v);
      } catch (const std::exception&) {
        throw ParseError("bad feature value: " + toks[2 + i], line_no);
      }
    }
  }

  DomainDataset ds;
  ds.domain = domain;
  ds.labels = std::move(labels);
  const std::size_t n = ds.labels.size();
  ds.x = Matrix(dim, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < dim; ++i) ds.x(i, j) = values[j * dim + i];

  if (expected_k > 0) {
    ds.num_classes = expected_k;
  } else {
    int mx = -1;
    for (int y : ds.labels) mx = std::max(mx, y);
    if (mx < 1)
      throw ParseError("cannot infer class count from labels; pass k explicitly");
    ds.num_classes = mx + 1;
  }
  ds.validate();
  return ds;
}

}  // namespace getuda
