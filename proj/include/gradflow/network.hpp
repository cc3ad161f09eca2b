#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gradflow/autodiff.hpp"

namespace gradflow {

double leaky_relu(double s, double mu);

// Weights of the five-layer densely connected scalar-output network:
// S1 = W1 x + b1 (linear), Sk = sigma(Wk S{k-1} + bk) for k = 2..4,
// S5 = W5 S4 + b5.
struct NetworkParams {
  int d = 0;       // input dimension
  int m = 0;       // layer width
  double mu = 0.03;  // activation leak
  Eigen::MatrixXd W1;     // m x d
  Eigen::MatrixXd W2, W3, W4;  // m x m
  Eigen::RowVectorXd W5;  // 1 x m
  Eigen::VectorXd b1, b2, b3, b4;  // m
  double b5 = 0.0;

  int param_count() const { return m * d + m + 3 * (m * m + m) + m + 1; }

  // Flat layout (row-major per matrix): W1 b1 W2 b2 W3 b3 W4 b4 W5 b5.
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& flat);
};

// Uniform fan-based init on [-sqrt(6/(fan_in+fan_out)), +...], zero biases.
NetworkParams init_params(int d, int m, double mu, std::uint64_t seed);

double forward(const NetworkParams& p, std::span<const double> x);

// Spatial gradient of the network output at x, by forward-mode tangents.
Eigen::VectorXd input_gradient(const NetworkParams& p, std::span<const double> x);

// Full-precision textual checkpoint; round-trips value-exact.
void save_params(const NetworkParams& p, const std::string& path);
NetworkParams load_params(const std::string& path);
void write_params(const NetworkParams& p, std::ostream& os);
NetworkParams read_params(std::istream& is);

// ---- tape-recorded evaluation -------------------------------------------

// The parameter set lifted onto a tape, one Var per entry (same flat layout).
struct ParamVars {
  int d = 0, m = 0;
  double mu = 0.03;
  ad::Tape* tape = nullptr;
  std::vector<ad::Var> flat;

  static ParamVars leaves(ad::Tape& tape, const NetworkParams& p);     // differentiable
  static ParamVars constants(ad::Tape& tape, const NetworkParams& p);  // frozen

  ad::Var w(int layer, int row, int col) const;  // layer in 1..5
  ad::Var b(int layer, int row) const;           // b5 -> b(5, 0)
  int flat_index_w(int layer, int row, int col) const;
  int flat_index_b(int layer, int row) const;
};

ad::Var forward_on_tape(const ParamVars& p, std::span<const double> x);

// Components of grad_x u(x; theta) recorded on the tape as functions of
// theta (forward-mode tangents; the activation slope enters as a constant,
// its theta-derivative vanishing a.e.).
std::vector<ad::Var> input_gradient_on_tape(const ParamVars& p, std::span<const double> x);

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exact reverse-mode gradient of the scalar built by `loss_builder` with
// respect to every parameter entry.
Eigen::VectorXd grad_wrt_params(
    const std::function<ad::Var(const ParamVars&)>& loss_builder,
    const NetworkParams& params);

}  // namespace gradflow
