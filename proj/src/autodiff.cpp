#include "gradflow/autodiff.hpp"

#include <cmath>

namespace gradflow::ad {

void Tape::check_owned(Var v) const {
  if (v.tape() != this)
    throw TapeUsageError("Var does not belong to this tape");
  if (v.index() < 0 || static_cast<std::size_t>(v.index()) >= nodes_.size())
    throw TapeUsageError("Var index out of range");
}

Var Tape::push(OpKind kind, double value, int p0, int p1, double w0, double w1,
               std::uint8_t arity) {
  Node n;
  n.value = value;
  n.w0 = w0;
  n.w1 = w1;
  n.p0 = p0;
  n.p1 = p1;
  n.kind = kind;
  n.arity = arity;
  nodes_.push_back(n);
  return Var(this, static_cast<int>(nodes_.size()) - 1, value);
}

Var Tape::constant(double v) { return push(OpKind::Constant, v, -1, -1, 0, 0, 0); }

Var Tape::record(OpKind kind, std::span<const Var> inputs, double value,
                 std::span<const double> partials) {
  if (inputs.size() != partials.size())
    throw TapeUsageError("record: |inputs| != |partials|");
  if (inputs.size() > 2)
    throw TapeUsageError("record: at most two inputs supported");
  for (Var v : inputs) check_owned(v);
  if (kind == OpKind::Sqrt && !inputs.empty() && inputs[0].value() < 0.0)
    throw TapeDomainError("sqrt of negative value", static_cast<int>(nodes_.size()));
  if (kind == OpKind::Div && inputs.size() > 1 && inputs[1].value() == 0.0)
    throw TapeDomainError("division by zero", static_cast<int>(nodes_.size()));
  const int p0 = inputs.size() > 0 ? inputs[0].index() : -1;
  const int p1 = inputs.size() > 1 ? inputs[1].index() : -1;
  const double w0 = partials.size() > 0 ? partials[0] : 0.0;
  const double w1 = partials.size() > 1 ? partials[1] : 0.0;
  return push(kind, value, p0, p1, w0, w1, static_cast<std::uint8_t>(inputs.size()));
}

Var Tape::add(Var a, Var b) {
  check_owned(a);
  check_owned(b);
  return push(OpKind::Add, a.value() + b.value(), a.index(), b.index(), 1, 1, 2);
}

Var Tape::sub(Var a, Var b) {
  check_owned(a);
  check_owned(b);
  return push(OpKind::Sub, a.value() - b.value(), a.index(), b.index(), 1, -1, 2);
}

Var Tape::mul(Var a, Var b) {
  check_owned(a);
  check_owned(b);
  return push(OpKind::Mul, a.value() * b.value(), a.index(), b.index(), b.value(), a.value(), 2);
}

Var Tape::div(Var a, Var b) {
  check_owned(a);
  check_owned(b);
  if (b.value() == 0.0)
    throw TapeDomainError("division by zero", static_cast<int>(nodes_.size()));
  const double inv = 1.0 / b.value();
  return push(OpKind::Div, a.value() * inv, a.index(), b.index(), inv,
              -a.value() * inv * inv, 2);
}

Var Tape::square(Var a) {
  check_owned(a);
  return push(OpKind::Square, a.value() * a.value(), a.index(), -1, 2.0 * a.value(), 0, 1);
}

Var Tape::sqrt(Var a) {
  check_owned(a);
  if (a.value() < 0.0)
    throw TapeDomainError("sqrt of negative value", static_cast<int>(nodes_.size()));
  const double r = std::sqrt(a.value());
  if (r == 0.0)
    throw TapeDomainError("sqrt at zero has no finite derivative",
                          static_cast<int>(nodes_.size()));
  return push(OpKind::Sqrt, r, a.index(), -1, 0.5 / r, 0, 1);
}

Var Tape::leaky_max(Var a, double mu) {
  check_owned(a);
  const double s = a.value();
  // subgradient at s = 0 chosen as mu
  const double slope = s > 0.0 ? 1.0 : mu;
  const double v = s > 0.0 ? s : mu * s;
  return push(OpKind::LeakyMax, v, a.index(), -1, slope, mu, 1);
}

std::vector<double> Tape::backward(Var output) const {
  check_owned(output);
  std::vector<double> adj(nodes_.size(), 0.0);
  adj[static_cast<std::size_t>(output.index())] = 1.0;
  for (int i = output.index(); i >= 0; --i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    const double a = adj[static_cast<std::size_t>(i)];
    if (a == 0.0) continue;
    if (n.arity >= 1) adj[static_cast<std::size_t>(n.p0)] += a * n.w0;
    if (n.arity >= 2) adj[static_cast<std::size_t>(n.p1)] += a * n.w1;
  }
  return adj;
}

bool Tape::replay_matches() const {
  for (const Node& n : nodes_) {
    const double a = n.arity >= 1 ? nodes_[static_cast<std::size_t>(n.p0)].value : 0.0;
    const double b = n.arity >= 2 ? nodes_[static_cast<std::size_t>(n.p1)].value : 0.0;
    double v;
    switch (n.kind) {
      case OpKind::Constant: v = n.value; break;
      case OpKind::Add: v = a + b; break;
      case OpKind::Sub: v = a - b; break;
      case OpKind::Mul: v = a * b; break;
      case OpKind::Div: v = a * (1.0 / b); break;
      case OpKind::Square: v = a * a; break;
      case OpKind::Sqrt: v = std::sqrt(a); break;
      case OpKind::LeakyMax: v = a > 0.0 ? a : n.w1 * a; break;
      default: return false;
    }
    if (v != n.value && !(std::isnan(v) && std::isnan(n.value))) return false;
  }
  return true;
}

std::vector<double> leaf_gradient(const Tape& tape, Var output, std::span<const Var> leaves) {
  const std::vector<double> adj = tape.backward(output);
  std::vector<double> g(leaves.size());
  for (std::size_t i = 0; i < leaves.size(); ++i)
    g[i] = adj[static_cast<std::size_t>(leaves[i].index())];
  return g;
}

}  // namespace gradflow::ad
