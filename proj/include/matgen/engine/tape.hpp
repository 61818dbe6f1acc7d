#ifndef MATGEN_ENGINE_TAPE_HPP
#define MATGEN_ENGINE_TAPE_HPP

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

// Minimal scalar reverse-mode tape. Used as the reference differentiation
// route; the hot training loops use the structured layer-level backward
// passes in net.hpp / rk4.hpp, which are cross-checked against this tape.

namespace matgen::engine {

class Tape {
 public:
  struct Node {
    int a = -1, b = -1;   // parent indices, -1 = none
    double da = 0.0, db = 0.0;
  };

  int add_leaf() {
    nodes_.push_back({});
    return static_cast<int>(nodes_.size()) - 1;
  }
  int add_unary(int a, double da) {
    nodes_.push_back({a, -1, da, 0.0});
    return static_cast<int>(nodes_.size()) - 1;
  }
  int add_binary(int a, int b, double da, double db) {
    nodes_.push_back({a, b, da, db});
    return static_cast<int>(nodes_.size()) - 1;
  }

  // Adjoints of every node given a seed at `output`.
  std::vector<double> reverse(int output) const {
    std::vector<double> adj(nodes_.size(), 0.0);
    adj[output] = 1.0;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      const Node& n = nodes_[i];
      if (adj[i] == 0.0) continue;
      if (n.a >= 0) adj[n.a] += n.da * adj[i];
      if (n.b >= 0) adj[n.b] += n.db * adj[i];
    }
    return adj;
  }

  size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

struct Var {
  Tape* tape = nullptr;
  int idx = -1;
  double val = 0.0;
};

inline Var make_leaf(Tape& t, double v) { return {&t, t.add_leaf(), v}; }

inline void check_finite(double v, const char* op) {
  if (!std::isfinite(v))
    throw std::runtime_error(std::string("non-finite value in autodiff node: ") + op);
}

inline Var operator+(Var a, Var b) {
  double v = a.val + b.val;
  check_finite(v, "add");
  return {a.tape, a.tape->add_binary(a.idx, b.idx, 1.0, 1.0), v};
}
inline Var operator-(Var a, Var b) {
  double v = a.val - b.val;
  check_finite(v, "sub");
  return {a.tape, a.tape->add_binary(a.idx, b.idx, 1.0, -1.0), v};
}
inline Var operator*(Var a, Var b) {
  double v = a.val * b.val;
  check_finite(v, "mul");
  return {a.tape, a.tape->add_binary(a.idx, b.idx, b.val, a.val), v};
}
inline Var operator/(Var a, Var b) {
  double v = a.val / b.val;
  check_finite(v, "div");
  return {a.tape, a.tape->add_binary(a.idx, b.idx, 1.0 / b.val, -v / b.val), v};
}
inline Var operator+(Var a, double c) {
  return {a.tape, a.tape->add_unary(a.idx, 1.0), a.val + c};
}
inline Var operator+(double c, Var a) { return a + c; }
inline Var operator-(Var a, double c) { return a + (-c); }
inline Var operator-(double c, Var a) {
  return {a.tape, a.tape->add_unary(a.idx, -1.0), c - a.val};
}
inline Var operator*(Var a, double c) {
  return {a.tape, a.tape->add_unary(a.idx, c), a.val * c};
}
inline Var operator*(double c, Var a) { return a * c; }
inline Var operator/(Var a, double c) { return a * (1.0 / c); }
inline Var operator-(Var a) { return a * -1.0; }

inline Var tanh(Var a) {
  double v = std::tanh(a.val);
  return {a.tape, a.tape->add_unary(a.idx, 1.0 - v * v), v};
}
inline Var exp(Var a) {
  double v = std::exp(a.val);
  check_finite(v, "exp");
  return {a.tape, a.tape->add_unary(a.idx, v), v};
}
inline Var log(Var a) {
  double v = std::log(a.val);
  check_finite(v, "log");
  return {a.tape, a.tape->add_unary(a.idx, 1.0 / a.val), v};
}
inline Var sqrt(Var a) {
  double v = std::sqrt(a.val);
  check_finite(v, "sqrt");
  return {a.tape, a.tape->add_unary(a.idx, 0.5 / v), v};
}
inline Var softplus(Var a) {
  // log(1 + e^x), stable for large |x|
  double v = a.val > 0.0 ? a.val + std::log1p(std::exp(-a.val)) : std::log1p(std::exp(a.val));
  double d = 1.0 / (1.0 + std::exp(-a.val));
  return {a.tape, a.tape->add_unary(a.idx, d), v};
}
inline Var abs(Var a) {
  return {a.tape, a.tape->add_unary(a.idx, a.val >= 0.0 ? 1.0 : -1.0), std::abs(a.val)};
}
inline Var sigmoid(Var a) {
  double v = 1.0 / (1.0 + std::exp(-a.val));
  return {a.tape, a.tape->add_unary(a.idx, v * (1.0 - v)), v};
}

using ScalarProgram = std::function<Var(std::span<const Var>)>;

// Exact reverse-mode gradient of a scalar program at `params`.
inline Eigen::VectorXd grad(const ScalarProgram& program, const Eigen::VectorXd& params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (Eigen::Index i = 0; i < params.size(); ++i) vars.push_back(make_leaf(tape, params[i]));
  Var out = program(std::span<const Var>(vars));
  if (!std::isfinite(out.val)) throw std::runtime_error("program output is non-finite");
  auto adj = tape.reverse(out.idx);
  Eigen::VectorXd g(params.size());
  for (Eigen::Index i = 0; i < params.size(); ++i) g[i] = adj[vars[i].idx];
  return g;
}

}  // namespace matgen::engine

#endif
