#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ct::nn {

/// Named dense tensor (row-major). Vectors are rows x 1.
struct Parameter {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t index = 0;  // position in the owning ParameterSet
  std::vector<double> value;

  std::size_t size() const { return value.size(); }
};

/// Ordered collection of parameters; order is creation order and fixed by
/// the model configuration.
class ParameterSet {
 public:
  Parameter& add(std::string name, std::size_t rows, std::size_t cols);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  const Parameter* find(const std::string& name) const;
  Parameter* find(const std::string& name);
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Parameter> params_;
};

/// Gradient storage shaped like a ParameterSet.
class Gradients {
 public:
  explicit Gradients(const ParameterSet& params);

  std::vector<double>& operator[](std::size_t i) { return grads_[i]; }
  const std::vector<double>& operator[](std::size_t i) const { return grads_[i]; }
  std::size_t size() const { return grads_.size(); }

  void zero();
  void scale(double s);
  double norm() const;
  void add(const Gradients& other);

 private:
  std::vector<std::vector<double>> grads_;
};

/// Stacked GRU weights: gates ordered [update; reset; candidate].
struct GruWeights {
  const Parameter* w = nullptr;   // 3h x in
  const Parameter* u = nullptr;   // 3h x h
  const Parameter* bw = nullptr;  // 3h
  const Parameter* bu = nullptr;  // 3h
  std::size_t hidden() const { return u->cols; }
  std::size_t input() const { return w->cols; }
};

using Var = std::uint32_t;

/// Reverse-mode tape over vector-valued nodes. With recording off it only
/// evaluates, which is what decoding and scoring use.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}

  Var constant(std::vector<double> v);
  Var embed(const Parameter& table, std::size_t row);
  /// W x (+ b).
  Var affine(const Parameter& w, Var x, const Parameter* b = nullptr);
  Var tanh(Var x);
  Var concat(Var a, Var b);
  Var gru(const GruWeights& g, Var x, Var h);
  /// Dot-product attention: weights = softmax(keys . query), result is the
  /// weighted sum of keys. The weights are written to `weights_out` if given.
  Var attend(std::span<const Var> keys, Var query, std::vector<double>* weights_out = nullptr);
  /// Scalar -log softmax(logits)[gold].
  Var softmax_nll(Var logits, std::size_t gold);
  /// Sum of scalar nodes.
  Var sum(std::span<const Var> scalars);

  const std::vector<double>& value(Var v) const { return nodes_[v].value; }
  double scalar(Var v) const { return nodes_[v].value.front(); }
  std::size_t size() const { return nodes_.size(); }
  bool recording() const { return record_; }

  /// Backpropagates d(root)/d(params) into `grads` (accumulating).
  void backward(Var root, Gradients& grads);

 private:
  struct Node {
    std::vector<double> value;
    std::vector<double> grad;
    std::function<void(Tape&, Node&, Gradients&)> back;
  };

  Var push(std::vector<double> value, std::function<void(Tape&, Node&, Gradients&)> back);
  std::vector<double>& grad_of(Var v);

  bool record_;
  std::vector<Node> nodes_;
};

/// Softmax of a logit vector (numerically stable).
std::vector<double> softmax(std::span<const double> logits);

}  // namespace ct::nn
