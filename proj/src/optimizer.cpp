#include "gradflow/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "gradflow/network.hpp"  // NumericalError

namespace gradflow {

void adam_step(AdamState& state, Eigen::VectorXd& params,
               const Eigen::VectorXd& grads, double alpha) {
  if (params.size() != grads.size() || state.m.size() != params.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  if (alpha <= 0.0) throw std::invalid_argument("adam_step: alpha must be > 0");
  if (!grads.allFinite())
    throw NumericalError("adam_step: non-finite gradient entry");
  state.t += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  params.array() -= alpha * (state.m.array() / c1) /
                    ((state.v.array() / c2).sqrt() + state.eps);
}

double lr_schedule(Phase phase, int k) {
  switch (phase) {
    case Phase::InitialFit: return 1e-3;
    case Phase::DualMax: return 1e-5;
    case Phase::PrimalMin:
      if (k < 1) throw std::invalid_argument("lr_schedule: k must be >= 1");
      if (k <= 5) return 1e-5;
      if (k <= 50) return 1e-6;
      if (k <= 120) return 1e-7;
      if (k <= 140) return 1e-8;
      if (k <= 180) return 1e-9;
      return 1e-10;
  }
  throw std::invalid_argument("lr_schedule: bad phase");
}

}  // namespace gradflow
