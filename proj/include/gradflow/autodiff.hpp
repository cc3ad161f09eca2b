#pragma once
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gradflow::ad {

enum class OpKind : std::uint8_t {
  Constant,
  Add,
  Sub,
  Mul,
  Div,
  Square,
  Sqrt,
  LeakyMax,  // max{0,s} + mu*min{0,s}
};

struct TapeUsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct TapeDomainError : std::domain_error {
  int node_index;
  TapeDomainError(const std::string& msg, int idx)
      : std::domain_error(msg + " (node " + std::to_string(idx) + ")"), node_index(idx) {}
};

class Tape;

class Var {
 public:
  Var() = default;
  double value() const { return value_; }
  int index() const { return index_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* t, int idx, double v) : tape_(t), index_(idx), value_(v) {}
  Tape* tape_ = nullptr;
  int index_ = -1;
  double value_ = 0.0;
};

// Append-only scalar tape. Parents of a node always precede it, so one
// reverse sweep accumulates exact adjoints.
class Tape {
 public:
  struct Node {
    double value;
    double w0, w1;  // local partials; w1 stores mu for LeakyMax
    std::int32_t p0 = -1, p1 = -1;
    OpKind kind = OpKind::Constant;
    std::uint8_t arity = 0;
  };

  Var constant(double v);

  // Generic record as specified: caller supplies the value and the local
  // partials. At most two inputs (every supported op is unary or binary).
  Var record(OpKind kind, std::span<const Var> inputs, double value,
             std::span<const double> partials);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var square(Var a);
  Var sqrt(Var a);
  Var leaky_max(Var a, double mu);  // sigma(s) = max{0,s} + mu*min{0,s}

  Var add_const(Var a, double c) { return add(a, constant(c)); }
  Var mul_const(Var a, double c) { return mul(a, constant(c)); }

  // Adjoints of every node with respect to `output`.
  std::vector<double> backward(Var output) const;

  // Recompute every node value from its parents; true iff the replay is
  // bit-for-bit identical to the stored values.
  bool replay_matches() const;

  std::size_t size() const { return nodes_.size(); }
  const Node& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  void clear() { nodes_.clear(); }

 private:
  void check_owned(Var v) const;
  Var push(OpKind kind, double value, int p0, int p1, double w0, double w1, std::uint8_t arity);
  std::vector<Node> nodes_;
};

inline Var operator+(Var a, Var b) { return a.tape()->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape()->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape()->mul(a, b); }
inline Var operator/(Var a, Var b) { return a.tape()->div(a, b); }

// Gradient of a scalar recorded as a function of leaf constants: returns the
// adjoints at the given leaf indices.
std::vector<double> leaf_gradient(const Tape& tape, Var output, std::span<const Var> leaves);

}  // namespace gradflow::ad
