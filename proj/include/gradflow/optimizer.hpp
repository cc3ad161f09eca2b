#pragma once
#include <Eigen/Dense>

namespace gradflow {

struct AdamState {
  Eigen::VectorXd m;  // first-moment accumulator
  Eigen::VectorXd v;  // second-moment accumulator
  long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(Eigen::Index n)
      : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

// One Adam update, elementwise with bias correction. Throws NumericalError
// on a non-finite gradient entry; the step is then not applied.
void adam_step(AdamState& state, Eigen::VectorXd& params,
               const Eigen::VectorXd& grads, double alpha);

enum class Phase { InitialFit, DualMax, PrimalMin };

// Learning-rate policies: constant 1e-3 for the initial fit, constant 1e-5
// for the dual ascent, and a k-dependent decaying rate for the primal
// minimization.
double lr_schedule(Phase phase, int k);

}  // namespace gradflow
