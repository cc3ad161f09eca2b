#pragma once
#include <Eigen/Dense>

#include "gradflow/loss.hpp"
#include "gradflow/network.hpp"
#include "gradflow/sampling.hpp"

namespace gradflow {

// Batched network evaluation and hand-derived backpropagation over a fixed
// column-of-samples matrix. This is the training fast path; it computes the
// same gradients as the tape route (the activation slope is piecewise
// constant, so its parameter derivative vanishes a.e.) and is checked
// against it in the test suite.
class BatchNet {
 public:
  BatchNet(int d, int m, int n_cols);

  // X is d x n_cols. with_input_grad additionally computes grad_x u per
  // column via forward-mode tangents.
  void forward(const NetworkParams& p, const Eigen::MatrixXd& X, bool with_input_grad);

  const Eigen::RowVectorXd& values() const { return u_; }
  const Eigen::MatrixXd& input_grads() const { return G_; }  // d x n_cols

  // Gradient of sum_s [ r_s u_s + q_s . grad_x u_s ] with respect to the
  // flattened parameters; Q may be null when no gradient seeds are needed.
  // Requires a preceding forward() with the same parameters.
  Eigen::VectorXd backprop(const NetworkParams& p, const Eigen::MatrixXd& X,
                           const Eigen::RowVectorXd& r, const Eigen::MatrixXd* Q);

  int n_cols() const { return n_; }

  // Preallocated seed buffers for the loss drivers (one adam step runs per
  // epoch; reusing these keeps the hot loop allocation-free).
  Eigen::RowVectorXd& seed_r() { return seed_r_; }
  Eigen::MatrixXd& seed_Q() { return seed_Q_; }

 private:
  int d_, m_, n_;
  Eigen::MatrixXd S1_, S2_, S3_, S4_;  // m x n
  Eigen::MatrixXd D2_, D3_, D4_;       // activation slopes
  Eigen::RowVectorXd u_;               // 1 x n
  Eigen::MatrixXd G_;                  // d x n
  // scratch (m x n unless noted), sized once in the constructor
  Eigen::MatrixXd Tg1_, Tg2_;                    // forward tangents
  Eigen::MatrixXd Sbar_, Zbar_, tmp_;            // reverse sweep
  Eigen::MatrixXd T1q_, T2q_, T3q_, T4q_;        // q-direction tangents
  Eigen::MatrixXd Tbar_, Zetabar_;               // tangent adjoints
  Eigen::RowVectorXd seed_r_;                    // 1 x n
  Eigen::MatrixXd seed_Q_;                       // d x n
  bool has_forward_ = false;
};

// ---- loss values and gradients on a fixed sample cloud -------------------

// Interior points followed by boundary points as one batch.
struct CloudBatch {
  const SampleSet* samples = nullptr;
  Eigen::MatrixXd X;  // d x (N_i + N_b)
  explicit CloudBatch(const SampleSet& s);
  int n_interior() const { return samples->n_interior(); }
  int n_boundary() const { return samples->n_boundary(); }
};

struct ValueAndGrad {
  double value = 0.0;
  Eigen::VectorXd grad;  // flattened parameter gradient
};

// ||u0 - w||^2_{L2(Omega)} against target values at the interior points.
ValueAndGrad supervised_value_grad(BatchNet& net, const NetworkParams& w,
                                   const CloudBatch& batch,
                                   const Eigen::VectorXd& target_interior,
                                   bool want_grad);

// Penalized dual ratio as a function of the dual parameters, for a fixed
// argument on the interior points. Throws DegenerateDualError on a
// near-zero denominator.
ValueAndGrad dual_value_grad(BatchNet& net, const NetworkParams& v,
                             const CloudBatch& batch,
                             const Eigen::VectorXd& arg_interior,
                             const ProblemSpec& spec, bool want_grad);

// Frozen dual-network data entering the primal objective.
struct FrozenDual {
  DualTermMode mode = DualTermMode::FrozenV;
  double p_h = 0.0;            // ConstantScalar value
  Eigen::VectorXd v_interior;  // FrozenV: dual values at interior points
  double den = 0.0;            // FrozenV: frozen dual denominator
};

// Evaluate the frozen data for a dual network on the given batch.
FrozenDual freeze_dual(BatchNet& net, const NetworkParams& v, const CloudBatch& batch,
                       const ProblemSpec& spec);

struct BreakdownAndGrad {
  LossBreakdown breakdown;
  Eigen::VectorXd grad;
};

// Per-step objective and its parameter gradient; u_prev holds the previous
// iterate at interior then boundary points.
BreakdownAndGrad be_value_grad(BatchNet& net, const NetworkParams& w,
                               const CloudBatch& batch, const Eigen::VectorXd& u_prev,
                               const FrozenDual& dual, const ProblemSpec& spec,
                               double t_n, bool want_grad);

// Source values f(t_n, x_i) at the interior points (zeros for f = 0).
Eigen::VectorXd source_values(const ProblemSpec& spec, const SampleSet& samples, double t_n);

}  // namespace gradflow
