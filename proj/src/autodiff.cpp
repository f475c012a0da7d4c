#include "ct/autodiff.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

#include "ct/kernels.hpp"

namespace ct::nn {

Parameter& ParameterSet::add(std::string name, std::size_t rows, std::size_t cols) {
  if (find(name) != nullptr) throw std::logic_error("duplicate parameter " + name);
  Parameter p;
  p.name = std::move(name);
  p.rows = rows;
  p.cols = cols;
  p.index = params_.size();
  p.value.assign(rows * cols, 0.0);
  params_.push_back(std::move(p));
  return params_.back();
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

Gradients::Gradients(const ParameterSet& params) {
  grads_.reserve(params.size());
  for (const auto& p : params) grads_.emplace_back(p.size(), 0.0);
}

void Gradients::zero() {
  for (auto& g : grads_) std::fill(g.begin(), g.end(), 0.0);
}

void Gradients::scale(double s) {
  for (auto& g : grads_) {
    for (auto& x : g) x *= s;
  }
}

double Gradients::norm() const {
  double sq = 0.0;
  for (const auto& g : grads_) {
    for (double x : g) sq += x * x;
  }
  return std::sqrt(sq);
}

void Gradients::add(const Gradients& other) {
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    for (std::size_t j = 0; j < grads_[i].size(); ++j) grads_[i][j] += other.grads_[i][j];
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

Var Tape::push(std::vector<double> value, std::function<void(Tape&, Node&, Gradients&)> back) {
  Node n;
  n.value = std::move(value);
  if (record_) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<Var>(nodes_.size() - 1);
}

std::vector<double>& Tape::grad_of(Var v) {
  auto& n = nodes_[v];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

Var Tape::constant(std::vector<double> v) { return push(std::move(v), nullptr); }

Var Tape::embed(const Parameter& table, std::size_t row) {
  if (row >= table.rows) throw std::out_of_range("embedding row out of range");
  const double* src = table.value.data() + row * table.cols;
  std::vector<double> v(src, src + table.cols);
  const Parameter* t = &table;
  return push(std::move(v), [t, row](Tape&, Node& self, Gradients& g) {
    auto& dst = g[t->index];
    for (std::size_t c = 0; c < t->cols; ++c) dst[row * t->cols + c] += self.grad[c];
  });
}

Var Tape::affine(const Parameter& w, Var x, const Parameter* b) {
  const auto& xv = value(x);
  if (xv.size() != w.cols) throw std::invalid_argument("affine: shape mismatch for " + w.name);
  std::vector<double> y(w.rows);
  kernels::gemv(w.value, w.rows, w.cols, xv, y);
  if (b != nullptr) {
    for (std::size_t r = 0; r < w.rows; ++r) y[r] += b->value[r];
  }
  const Parameter* wp = &w;
  return push(std::move(y), [wp, x, b](Tape& tape, Node& self, Gradients& g) {
    kernels::ger_acc(self.grad, tape.value(x), g[wp->index]);
    if (b != nullptr) {
      auto& gb = g[b->index];
      for (std::size_t r = 0; r < self.grad.size(); ++r) gb[r] += self.grad[r];
    }
    kernels::gemv_t_acc(wp->value, wp->rows, wp->cols, self.grad, tape.grad_of(x));
  });
}

Var Tape::tanh(Var x) {
  std::vector<double> y(value(x));
  for (auto& v : y) v = std::tanh(v);
  return push(std::move(y), [x](Tape& tape, Node& self, Gradients&) {
    auto& gx = tape.grad_of(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * (1.0 - self.value[i] * self.value[i]);
  });
}

Var Tape::concat(Var a, Var b) {
  const auto& av = value(a);
  const auto& bv = value(b);
  std::vector<double> y;
  y.reserve(av.size() + bv.size());
  y.insert(y.end(), av.begin(), av.end());
  y.insert(y.end(), bv.begin(), bv.end());
  const std::size_t na = av.size();
  return push(std::move(y), [a, b, na](Tape& tape, Node& self, Gradients&) {
    auto& ga = tape.grad_of(a);
    for (std::size_t i = 0; i < na; ++i) ga[i] += self.grad[i];
    auto& gb = tape.grad_of(b);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += self.grad[na + i];
  });
}

namespace {
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

Var Tape::gru(const GruWeights& gw, Var x, Var h) {
  const std::size_t hd = gw.hidden();
  const auto& xv = value(x);
  const auto& hv = value(h);
  if (xv.size() != gw.input() || hv.size() != hd) throw std::invalid_argument("gru: shape mismatch");

  std::vector<double> wx(3 * hd), uh(3 * hd);
  kernels::gemv(gw.w->value, 3 * hd, gw.input(), xv, wx);
  kernels::gemv(gw.u->value, 3 * hd, hd, hv, uh);
  for (std::size_t i = 0; i < 3 * hd; ++i) {
    wx[i] += gw.bw->value[i];
    uh[i] += gw.bu->value[i];
  }
  // gates = [z; r; n]
  std::vector<double> gates(3 * hd);
  std::vector<double> out(hd);
  for (std::size_t i = 0; i < hd; ++i) {
    double z = sigmoid(wx[i] + uh[i]);
    double r = sigmoid(wx[hd + i] + uh[hd + i]);
    double n = std::tanh(wx[2 * hd + i] + r * uh[2 * hd + i]);
    gates[i] = z;
    gates[hd + i] = r;
    gates[2 * hd + i] = n;
    out[i] = (1.0 - z) * n + z * hv[i];
  }

  GruWeights w = gw;
  return push(std::move(out), [w, x, h, hd, gates = std::move(gates), uh_n = std::vector<double>(
                                                                         uh.begin() + 2 * static_cast<std::ptrdiff_t>(hd), uh.end())](
                                  Tape& tape, Node& self, Gradients& g) {
    const auto& hv = tape.value(h);
    std::vector<double> g_pre(3 * hd), g_uh(3 * hd);
    auto& gh = tape.grad_of(h);
    for (std::size_t i = 0; i < hd; ++i) {
      double z = gates[i], r = gates[hd + i], n = gates[2 * hd + i];
      double go = self.grad[i];
      double gn = go * (1.0 - z);
      double gz = go * (hv[i] - n);
      gh[i] += go * z;
      double gpre_n = gn * (1.0 - n * n);
      double gr = gpre_n * uh_n[i];
      double gpz = gz * z * (1.0 - z);
      double gpr = gr * r * (1.0 - r);
      g_pre[i] = gpz;
      g_pre[hd + i] = gpr;
      g_pre[2 * hd + i] = gpre_n;
      g_uh[i] = gpz;
      g_uh[hd + i] = gpr;
      g_uh[2 * hd + i] = gpre_n * r;
    }
    kernels::ger_acc(g_pre, tape.value(x), g[w.w->index]);
    kernels::ger_acc(g_uh, hv, g[w.u->index]);
    auto& gbw = g[w.bw->index];
    auto& gbu = g[w.bu->index];
    for (std::size_t i = 0; i < 3 * hd; ++i) {
      gbw[i] += g_pre[i];
      gbu[i] += g_uh[i];
    }
    kernels::gemv_t_acc(w.u->value, 3 * hd, hd, g_uh, gh);
    kernels::gemv_t_acc(w.w->value, 3 * hd, w.input(), g_pre, tape.grad_of(x));
  });
}

Var Tape::attend(std::span<const Var> keys, Var query, std::vector<double>* weights_out) {
  if (keys.empty()) throw std::invalid_argument("attend: no keys");
  const auto& q = value(query);
  const std::size_t d = q.size();
  std::vector<double> scores(keys.size());
  for (std::size_t j = 0; j < keys.size(); ++j) {
    const auto& k = value(keys[j]);
    if (k.size() != d) throw std::invalid_argument("attend: key/query size mismatch");
    scores[j] = kernels::dot(k, q);
  }
  auto alpha = softmax(scores);
  std::vector<double> ctx(d, 0.0);
  for (std::size_t j = 0; j < keys.size(); ++j) {
    const auto& k = value(keys[j]);
    for (std::size_t i = 0; i < d; ++i) ctx[i] += alpha[j] * k[i];
  }
  if (weights_out != nullptr) *weights_out = alpha;
  std::vector<Var> key_ids(keys.begin(), keys.end());
  return push(std::move(ctx), [key_ids = std::move(key_ids), query, alpha = std::move(alpha)](
                                  Tape& tape, Node& self, Gradients&) {
    const std::size_t m = key_ids.size();
    std::vector<double> g_alpha(m);
    double weighted = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      g_alpha[j] = kernels::dot(self.grad, tape.value(key_ids[j]));
      weighted += alpha[j] * g_alpha[j];
    }
    // copied because the query may also be one of the keys
    const std::vector<double> q = tape.value(query);
    auto& gq = tape.grad_of(query);
    for (std::size_t j = 0; j < m; ++j) {
      double gs = alpha[j] * (g_alpha[j] - weighted);
      const auto& k = tape.value(key_ids[j]);
      auto& gk = tape.grad_of(key_ids[j]);
      for (std::size_t i = 0; i < q.size(); ++i) {
        gk[i] += alpha[j] * self.grad[i] + gs * q[i];
        gq[i] += gs * k[i];
      }
    }
  });
}

Var Tape::softmax_nll(Var logits, std::size_t gold) {
  const auto& lv = value(logits);
  if (gold >= lv.size()) throw std::out_of_range("softmax_nll: gold id out of range");
  auto p = softmax(lv);
  double nll = -std::log(std::max(p[gold], 1e-300));
  return push({nll}, [logits, gold, p = std::move(p)](Tape& tape, Node& self, Gradients&) {
    auto& gl = tape.grad_of(logits);
    double s = self.grad[0];
    for (std::size_t i = 0; i < p.size(); ++i) gl[i] += s * (p[i] - (i == gold ? 1.0 : 0.0));
  });
}

Var Tape::sum(std::span<const Var> scalars) {
  double total = 0.0;
  for (auto v : scalars) total += scalar(v);
  std::vector<Var> ids(scalars.begin(), scalars.end());
  return push({total}, [ids = std::move(ids)](Tape& tape, Node& self, Gradients&) {
    for (auto v : ids) tape.grad_of(v)[0] += self.grad[0];
  });
}

void Tape::backward(Var root, Gradients& grads) {
  if (!record_) throw std::logic_error("backward on a non-recording tape");
  assert(nodes_[root].value.size() == 1);
  grad_of(root)[0] = 1.0;
  for (std::size_t i = root + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.grad.empty() || !n.back) continue;
    n.back(*this, n, grads);
  }
}

}  // namespace ct::nn
