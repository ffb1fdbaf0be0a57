#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "getuda/errors.hpp"
#include "getuda/matrix.hpp"
#include "getuda/random.hpp"

namespace getuda {

enum class Activation { Tanh, Relu };

inline std::string to_string(Activation a) {
  return a == Activation::Tanh ? "tanh" : "relu";
}
inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  throw ConfigError("unknown activation: " + s);
}

// Feature projector G: a small fully connected net R^D -> R^d. The last layer
// is linear; when normalize_features is set every output column is rescaled
// to unit Euclidean length (zero columns stay zero).
struct ProjectorParams {
  std::vector<Matrix> weights;             // layer l: dims[l+1] x dims[l]
  std::vector<std::vector<double>> biases; // layer l: dims[l+1]
  Activation activation = Activation::Tanh;
  bool normalize_features = true;

  std::vector<std::size_t> layer_sizes() const {
    std::vector<std::size_t> dims;
    if (weights.empty()) return dims;
    dims.push_back(weights.front().cols());
    for (const auto& w : weights) dims.push_back(w.rows());
    return dims;
  }
  std::size_t input_dim() const { return weights.front().cols(); }
  std::size_t output_dim() const { return weights.back().rows(); }
};

// Linear softmax classifier C: R^d -> probabilities over k classes.
struct ClassifierParams {
  Matrix weight;             // k x d
  std::vector<double> bias;  // k
  std::size_t num_classes() const { return weight.rows(); }
};

struct Model {
  ProjectorParams projector;
  ClassifierParams classifier;
};

// Glorot-style uniform initialization, deterministic per seed.
inline Model make_model(const std::vector<int>& layer_sizes, int num_classes,
                        Activation activation, bool normalize_features, Rng& rng) {
  if (layer_sizes.size() < 2) throw ConfigError("make_model: need at least two layer sizes");
  for (int d : layer_sizes)
    if (d <= 0) throw ConfigError("make_model: layer sizes must be positive");
  if (num_classes < 2) throw ConfigError("make_model: need at least two classes");

  auto glorot = [&rng](std::size_t fan_out, std::size_t fan_in) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    Matrix w(fan_out, fan_in);
    for (std::size_t i = 0; i < fan_out; ++i)
      for (std::size_t j = 0; j < fan_in; ++j) w(i, j) = dist(rng);
    return w;
  };

  Model m;
  m.projector.activation = activation;
  m.projector.normalize_features = normalize_features;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    m.projector.weights.push_back(glorot(layer_sizes[l + 1], layer_sizes[l]));
    m.projector.biases.emplace_back(layer_sizes[l + 1], 0.0);
  }
  m.classifier.weight = glorot(num_classes, layer_sizes.back());
  m.classifier.bias.assign(num_classes, 0.0);
  return m;
}

struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre_acts;     // per layer, before activation
  std::vector<Matrix> activations;  // per hidden layer, after activation
  Matrix features;                  // Z after optional normalization
  std::vector<double> col_norms;    // pre-normalization column norms
};

namespace detail {
inline double activate(double x, Activation a) {
  return a == Activation::Tanh ? std::tanh(x) : (x > 0.0 ? x : 0.0);
}
inline double activate_grad(double pre, Activation a) {
  if (a == Activation::Tanh) {
    const double t = std::tanh(pre);
    return 1.0 - t * t;
  }
  return pre > 0.0 ? 1.0 : 0.0;
}
}  // namespace detail

inline Matrix forward_features(const ProjectorParams& p, const Matrix& x,
                               ForwardCache* cache = nullptr) {
  if (x.rows() != p.input_dim())
    throw std::invalid_argument("forward_features: input dimension mismatch");
  if (cache) {
    *cache = ForwardCache{};
    cache->input = x;
  }
  Matrix cur = x;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    Matrix pre = p.weights[l] * cur;
    for (std::size_t i = 0; i < pre.rows(); ++i)
      for (std::size_t j = 0; j < pre.cols(); ++j) pre(i, j) += p.biases[l][i];
    if (cache) cache->pre_acts.push_back(pre);
    if (l + 1 < p.weights.size()) {
      for (std::size_t i = 0; i < pre.rows(); ++i)
        for (std::size_t j = 0; j < pre.cols(); ++j)
          pre(i, j) = detail::activate(pre(i, j), p.activation);
      if (cache) cache->activations.push_back(pre);
    }
    cur = std::move(pre);
  }
  std::vector<double> norms(cur.cols(), 0.0);
  if (p.normalize_features) {
    for (std::size_t j = 0; j < cur.cols(); ++j) {
      const double r = cur.col_norm(j);
      norms[j] = r;
      if (r > 0.0)
        for (std::size_t i = 0; i < cur.rows(); ++i) cur(i, j) /= r;
    }
  }
  if (cache) {
    cache->col_norms = std::move(norms);
    cache->features = cur;
  }
  return cur;
}

inline Matrix classifier_logits(const ClassifierParams& c, const Matrix& z) {
  if (z.rows() != c.weight.cols())
    throw std::invalid_argument("classifier_logits: feature dimension mismatch");
  Matrix logits = c.weight * z;
  for (std::size_t i = 0; i < logits.rows(); ++i)
    for (std::size_t j = 0; j < logits.cols(); ++j) logits(i, j) += c.bias[i];
  return logits;
}

// Column-wise softmax, stabilized by max subtraction.
inline Matrix softmax_columns(const Matrix& logits) {
  Matrix p = logits;
  for (std::size_t j = 0; j < p.cols(); ++j) {
    double mx = p(0, j);
    for (std::size_t i = 1; i < p.rows(); ++i) mx = std::max(mx, p(i, j));
    double sum = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i) {
      p(i, j) = std::exp(p(i, j) - mx);
      sum += p(i, j);
    }
    for (std::size_t i = 0; i < p.rows(); ++i) p(i, j) /= sum;
  }
  return p;
}

inline Matrix forward_classifier(const ClassifierParams& c, const Matrix& z) {
  return softmax_columns(classifier_logits(c, z));
}

// Gradients for every weight and bias, shapes mirroring the model.
struct ModelGrads {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  Matrix cls_weight;
  std::vector<double> cls_bias;
};

// Backpropagation through classifier and projector.
// grad_features must already contain the full d(loss)/dZ, including the
// classifier chain W^T grad_logits (total_objective produces exactly that);
// grad_logits is used here only for the classifier's own parameters.
inline ModelGrads backward(const ProjectorParams& p, const ClassifierParams& c,
                           const ForwardCache& cache, const Matrix& grad_features,
                           const Matrix& grad_logits) {
  if (cache.pre_acts.empty())
    throw std::invalid_argument("backward: forward cache is empty");

  ModelGrads g;
  g.cls_weight = grad_logits * cache.features.transposed();
  g.cls_bias.assign(c.bias.size(), 0.0);
  for (std::size_t i = 0; i < grad_logits.rows(); ++i)
    for (std::size_t j = 0; j < grad_logits.cols(); ++j)
      g.cls_bias[i] += grad_logits(i, j);

  // Normalization layer: y = z / ||z||, so dz = (g - y (y.g)) / ||z||.
  Matrix delta = grad_features;
  if (p.normalize_features) {
    for (std::size_t j = 0; j < delta.cols(); ++j) {
      const double r = cache.col_norms[j];
      if (r == 0.0) {
        for (std::size_t i = 0; i < delta.rows(); ++i) delta(i, j) = 0.0;
        continue;
      }
      double dot = 0.0;
      for (std::size_t i = 0; i < delta.rows(); ++i)
        dot += cache.features(i, j) * delta(i, j);
      for (std::size_t i = 0; i < delta.rows(); ++i)
        delta(i, j) = (delta(i, j) - cache.features(i, j) * dot) / r;
    }
  }

  const std::size_t num_layers = p.weights.size();
  g.weights.resize(num_layers);
  g.biases.resize(num_layers);
  for (std::size_t l = num_layers; l-- > 0;) {
    const Matrix& below = l == 0 ? cache.input : cache.activations[l - 1];
    g.weights[l] = delta * below.transposed();
    g.biases[l].assign(p.biases[l].size(), 0.0);
    for (std::size_t i = 0; i < delta.rows(); ++i)
      for (std::size_t j = 0; j < delta.cols(); ++j) g.biases[l][i] += delta(i, j);
    if (l == 0) break;
    Matrix up = p.weights[l].transposed() * delta;
    for (std::size_t i = 0; i < up.rows(); ++i)
      for (std::size_t j = 0; j < up.cols(); ++j)
        up(i, j) *= detail::activate_grad(cache.pre_acts[l - 1](i, j), p.activation);
    delta = std::move(up);
  }
  return g;
}

// ADAM with coupled L2 weight decay (decay added to the gradient before the
// moment updates) and bias correction.
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
  long step = 0;
  ModelGrads m;
  ModelGrads v;

  static AdamState init(const Model& model, double learning_rate,
                        double weight_decay) {
    AdamState s;
    s.learning_rate = learning_rate;
    s.weight_decay = weight_decay;
    auto zeros_like = [](const Model& mm) {
      ModelGrads z;
      for (const auto& w : mm.projector.weights) z.weights.emplace_back(w.rows(), w.cols());
      for (const auto& b : mm.projector.biases) z.biases.emplace_back(b.size(), 0.0);
      z.cls_weight = Matrix(mm.classifier.weight.rows(), mm.classifier.weight.cols());
      z.cls_bias.assign(mm.classifier.bias.size(), 0.0);
      return z;
    };
    s.m = zeros_like(model);
    s.v = zeros_like(model);
    return s;
  }
};

namespace detail {
inline void adam_update(std::vector<double>& param, const std::vector<double>& grad,
                        std::vector<double>& m, std::vector<double>& v,
                        const AdamState& s, double bc1, double bc2) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i] + s.weight_decay * param[i];
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g;
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g * g;
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    param[i] -= s.learning_rate * mhat / (std::sqrt(vhat) + s.epsilon);
  }
}
}  // namespace detail

inline void adam_step(AdamState& state, Model& model, const ModelGrads& grads) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step);
  for (std::size_t l = 0; l < model.projector.weights.size(); ++l) {
    detail::adam_update(model.projector.weights[l].data(), grads.weights[l].data(),
                        state.m.weights[l].data(), state.v.weights[l].data(), state,
                        bc1, bc2);
    detail::adam_update(model.projector.biases[l], grads.biases[l],
                        state.m.biases[l], state.v.biases[l], state, bc1, bc2);
  }
  detail::adam_update(model.classifier.weight.data(), grads.cls_weight.data(),
                      state.m.cls_weight.data(), state.v.cls_weight.data(), state,
                      bc1, bc2);
  detail::adam_update(model.classifier.bias, grads.cls_bias, state.m.cls_bias,
                      state.v.cls_bias, state, bc1, bc2);
}

// Checkpoint format: a single JSON document, field names as written here.
// Parameter arrays are row-major.
inline void save_checkpoint(const Model& model, const std::string& path) {
  nlohmann::json j;
  j["format"] = "getuda-model";
  j["version"] = 1;
  std::vector<std::size_t> dims = model.projector.layer_sizes();
  j["layer_sizes"] = dims;
  j["activation"] = to_string(model.projector.activation);
  j["normalize_features"] = model.projector.normalize_features;
  for (const auto& w : model.projector.weights)
    j["projector"]["weights"].push_back(w.data());
  for (const auto& b : model.projector.biases) j["projector"]["biases"].push_back(b);
  j["classifier"]["num_classes"] = model.classifier.num_classes();
  j["classifier"]["weight"] = model.classifier.weight.data();
  j["classifier"]["bias"] = model.classifier.bias;
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open checkpoint for writing: " + path);
  out << j.dump(2) << "\n";
}

inline Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint is not valid JSON: " + std::string(e.what()));
  }
  try {
    if (j.at("format") != "getuda-model") throw ParseError("not a model checkpoint");
    Model m;
    m.projector.activation = activation_from_string(j.at("activation"));
    m.projector.normalize_features = j.at("normalize_features");
    const std::vector<std::size_t> dims = j.at("layer_sizes");
    const auto& pw = j.at("projector").at("weights");
    const auto& pb = j.at("projector").at("biases");
    if (pw.size() + 1 != dims.size()) throw ParseError("layer_sizes/weights mismatch");
    for (std::size_t l = 0; l < pw.size(); ++l) {
      m.projector.weights.emplace_back(dims[l + 1], dims[l],
                                       pw[l].get<std::vector<double>>());
      m.projector.biases.push_back(pb.at(l).get<std::vector<double>>());
      if (m.projector.biases.back().size() != dims[l + 1])
        throw ParseError("bias length mismatch");
    }
    const std::size_t k = j.at("classifier").at("num_classes");
    m.classifier.weight = Matrix(k, dims.back(),
                                 j.at("classifier").at("weight").get<std::vector<double>>());
    m.classifier.bias = j.at("classifier").at("bias").get<std::vector<double>>();
    if (m.classifier.bias.size() != k) throw ParseError("classifier bias length mismatch");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed checkpoint: " + std::string(e.what()));
  }
}

}  // namespace getuda
