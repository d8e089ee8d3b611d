#pragma once

// Minimal reverse-mode differentiation over dense vectors. A Tape records
// operations in execution order; backward() walks them in reverse and
// accumulates into node gradients and, for parameter reads, into the
// Parameter::grad buffers.

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rstparse {

using Vec = std::vector<double>;

// A named dense row-major tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec value;
  Vec grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, std::size_t r, std::size_t c, bool train = true)
      : name(std::move(n)), rows(r), cols(c), value(r * c, 0.0), grad(r * c, 0.0), trainable(train) {}

  std::size_t size() const { return value.size(); }
  double& at(std::size_t r, std::size_t c) { return value[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return value[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {value.data() + r * cols, cols}; }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

struct Var {
  std::size_t id = 0;
};

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// y = W x (+ b), W is rows x cols.
inline void affine_into(const Parameter& w, std::span<const double> x, const Parameter* b, std::span<double> y) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* wr = w.value.data() + r * w.cols;
    double acc = b ? b->value[r] : 0.0;
    for (std::size_t c = 0; c < w.cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

class Tape {
 public:
  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return nodes_.size(); }
  const Vec& value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const {
    const auto& val = nodes_[v.id].value;
    if (val.size() != 1) throw std::logic_error("scalar(): node is not a scalar");
    return val[0];
  }
  std::size_t dim(Var v) const { return nodes_[v.id].value.size(); }
  const Vec& grad(Var v) const { return nodes_[v.id].grad; }

  Var constant(Vec v) { return push(std::move(v), {}); }
  Var zeros(std::size_t n) { return constant(Vec(n, 0.0)); }
  Var scalar_constant(double x) { return constant(Vec{x}); }

  // Row `row` of an embedding table. Frozen tables receive no gradient.
  Var lookup(Parameter& table, std::size_t row) {
    if (row >= table.rows) throw std::out_of_range("lookup: row out of range for " + table.name);
    auto r = table.row(row);
    Vec v(r.begin(), r.end());
    if (!table.trainable) return constant(std::move(v));
    Parameter* t = &table;
    return push(std::move(v), [t, row](Tape& tape, std::size_t self) {
      const auto& g = tape.nodes_[self].grad;
      double* dst = t->grad.data() + row * t->cols;
      for (std::size_t c = 0; c < t->cols; ++c) dst[c] += g[c];
    });
  }

  Var affine(Parameter& w, Var x, Parameter* b = nullptr) {
    if (dim(x) != w.cols)
      throw std::invalid_argument("affine: " + w.name + " expects " + std::to_string(w.cols) +
                                  " inputs, got " + std::to_string(dim(x)));
    Vec y(w.rows);
    affine_into(w, nodes_[x.id].value, b, y);
    Parameter* wp = &w;
    return push(std::move(y), [wp, b, x](Tape& tape, std::size_t self) {
      const auto& g = tape.nodes_[self].grad;
      const auto& xv = tape.nodes_[x.id].value;
      auto& xg = tape.nodes_[x.id].grad;
      for (std::size_t r = 0; r < wp->rows; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        const double* wr = wp->value.data() + r * wp->cols;
        double* wg = wp->grad.data() + r * wp->cols;
        for (std::size_t c = 0; c < wp->cols; ++c) {
          wg[c] += gr * xv[c];
          xg[c] += gr * wr[c];
        }
        if (b) b->grad[r] += gr;
      }
    });
  }

  Var add(Var a, Var b) {
    check_same(a, b, "add");
    Vec y = nodes_[a.id].value;
    const auto& bv = nodes_[b.id].value;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
    return push(std::move(y), [a, b](Tape& t, std::size_t self) {
      t.accumulate(a, t.nodes_[self].grad, 1.0);
      t.accumulate(b, t.nodes_[self].grad, 1.0);
    });
  }

  Var sub(Var a, Var b) {
    check_same(a, b, "sub");
    Vec y = nodes_[a.id].value;
    const auto& bv = nodes_[b.id].value;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
    return push(std::move(y), [a, b](Tape& t, std::size_t self) {
      t.accumulate(a, t.nodes_[self].grad, 1.0);
      t.accumulate(b, t.nodes_[self].grad, -1.0);
    });
  }

  Var mul(Var a, Var b) {
    check_same(a, b, "mul");
    const auto& av = nodes_[a.id].value;
    const auto& bv = nodes_[b.id].value;
    Vec y(av.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
    return push(std::move(y), [a, b](Tape& t, std::size_t self) {
      const auto& g = t.nodes_[self].grad;
      const auto& av = t.nodes_[a.id].value;
      const auto& bv = t.nodes_[b.id].value;
      auto& ag = t.nodes_[a.id].grad;
      auto& bg = t.nodes_[b.id].grad;
      for (std::size_t i = 0; i < g.size(); ++i) {
        ag[i] += g[i] * bv[i];
        bg[i] += g[i] * av[i];
      }
    });
  }

  Var scale(Var a, double s) {
    Vec y = nodes_[a.id].value;
    for (auto& v : y) v *= s;
    return push(std::move(y), [a, s](Tape& t, std::size_t self) { t.accumulate(a, t.nodes_[self].grad, s); });
  }

  Var add_constant(Var a, double c) {
    Vec y = nodes_[a.id].value;
    for (auto& v : y) v += c;
    return push(std::move(y), [a](Tape& t, std::size_t self) { t.accumulate(a, t.nodes_[self].grad, 1.0); });
  }

  // Elementwise product with a constant mask (dropout).
  Var mask(Var a, std::span<const double> m) {
    if (m.size() != dim(a)) throw std::invalid_argument("mask: size mismatch");
    Vec y = nodes_[a.id].value;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= m[i];
    Vec mc(m.begin(), m.end());
    return push(std::move(y), [a, mc = std::move(mc)](Tape& t, std::size_t self) {
      const auto& g = t.nodes_[self].grad;
      auto& ag = t.nodes_[a.id].grad;
      for (std::size_t i = 0; i < g.size(); ++i) ag[i] += g[i] * mc[i];
    });
  }

  Var tanh(Var a) {
    Vec y = nodes_[a.id].value;
    for (auto& v : y) v = std::tanh(v);
    return push(std::move(y), [a](Tape& t, std::size_t self) {
      const auto& g = t.nodes_[self].grad;
      const auto& y = t.nodes_[self].value;
      auto& ag = t.nodes_[a.id].grad;
      for (std::size_t i = 0; i < g.size(); ++i) ag[i] += g[i] * (1.0 - y[i] * y[i]);
    });
  }

  Var sigmoid(Var a) {
    Vec y = nodes_[a.id].value;
    for (auto& v : y) v = rstparse::sigmoid(v);
    return push(std::move(y), [a](Tape& t, std::size_t self) {
      const auto& g = t.nodes_[self].grad;
      const auto& y = t.nodes_[self].value;
      auto& ag = t.nodes_[a.id].grad;
      for (std::size_t i = 0; i < g.size(); ++i) ag[i] += g[i] * y[i] * (1.0 - y[i]);
    });
  }

  // max(0, x). Subgradient 0 at the kink.
  Var relu(Var a) {
    Vec y = nodes_[a.id].value;
    for (auto& v : y) v = v > 0.0 ? v : 0.0;
    return push(std::move(y), [a](Tape& t, std::size_t self) {
      const auto& g = t.nodes_[self].grad;
      const auto& y = t.nodes_[self].value;
      auto& ag = t.nodes_[a.id].grad;
      for (std::size_t i = 0; i < g.size(); ++i)
        if (y[i] > 0.0) ag[i] += g[i];
    });
  }

  Var concat(std::span<const Var> parts) {
    Vec y;
    for (Var p : parts) y.insert(y.end(), nodes_[p.id].value.begin(), nodes_[p.id].value.end());
    std::vector<Var> ps(parts.begin(), parts.end());
    return push(std::move(y), [ps = std::move(ps)](Tape& t, std::size_t self) {
      const auto& g = t.nodes_[self].grad;
      std::size_t off = 0;
      for (Var p : ps) {
        auto& pg = t.nodes_[p.id].grad;
        for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += g[off + i];
        off += pg.size();
      }
    });
  }
  Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }

  Var slice(Var a, std::size_t offset, std::size_t len) {
    const auto& av = nodes_[a.id].value;
    if (offset + len > av.size()) throw std::out_of_range("slice out of range");
    Vec y(av.begin() + static_cast<std::ptrdiff_t>(offset), av.begin() + static_cast<std::ptrdiff_t>(offset + len));
    return push(std::move(y), [a, offset](Tape& t, std::size_t self) {
      const auto& g = t.nodes_[self].grad;
      auto& ag = t.nodes_[a.id].grad;
      for (std::size_t i = 0; i < g.size(); ++i) ag[offset + i] += g[i];
    });
  }

  Var pick(Var a, std::size_t index) { return slice(a, index, 1); }

  // Elementwise sum of equally-sized nodes.
  Var sum(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("sum of nothing");
    Vec y = nodes_[parts[0].id].value;
    for (std::size_t p = 1; p < parts.size(); ++p) {
      check_same(parts[0], parts[p], "sum");
      const auto& pv = nodes_[parts[p].id].value;
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += pv[i];
    }
    std::vector<Var> ps(parts.begin(), parts.end());
    return push(std::move(y), [ps = std::move(ps)](Tape& t, std::size_t self) {
      for (Var p : ps) t.accumulate(p, t.nodes_[self].grad, 1.0);
    });
  }

  // Reverse sweep from a scalar root. Gradients accumulate into parameters;
  // calling zero_grad on them beforehand is the caller's job.
  void backward(Var root) {
    if (dim(root) != 1) throw std::invalid_argument("backward: root must be a scalar");
    for (std::size_t i = 0; i <= root.id; ++i) nodes_[i].grad.assign(nodes_[i].value.size(), 0.0);
    nodes_[root.id].grad[0] = 1.0;
    for (std::size_t i = root.id + 1; i-- > 0;)
      if (nodes_[i].back) nodes_[i].back(*this, i);
  }

 private:
  struct Node {
    Vec value;
    Vec grad;
    std::function<void(Tape&, std::size_t)> back;
  };

  Var push(Vec value, std::function<void(Tape&, std::size_t)> back) {
    nodes_.push_back({std::move(value), {}, std::move(back)});
    return Var{nodes_.size() - 1};
  }

  void check_same(Var a, Var b, const char* op) const {
    if (dim(a) != dim(b))
      throw std::invalid_argument(std::string(op) + ": size mismatch " + std::to_string(dim(a)) + " vs " +
                                  std::to_string(dim(b)));
  }

  void accumulate(Var target, const Vec& g, double s) {
    auto& tg = nodes_[target.id].grad;
    for (std::size_t i = 0; i < g.size(); ++i) tg[i] += s * g[i];
  }

  std::vector<Node> nodes_;
};

}  // namespace rstparse
