#pragma once
#include <span>

#include "gradflow/network.hpp"
#include "gradflow/sampling.hpp"

namespace gradflow {

// u(t, x) = e^{-t} prod_i sin(a_i x_i), the analytic solution of the test
// problems with kappa = 1/sum(a_i^2).
double exact_solution(double t, std::span<const double> x, std::span<const int> a);

double kappa_of(std::span<const int> a);

struct Metrics {
  double mse = 0.0;
  double eps_abs_linf = 0.0;
  double eps_rel_l2 = 0.0;
  bool rel_defined = true;  // false when the exact solution vanishes on the cloud
};

// Errors over all N_s = N_i + N_b sample points at time t_n.
Metrics compute_metrics(const NetworkParams& u_params, double t_n,
                        const SampleSet& samples, std::span<const int> a);

// Pointwise integrand kappa/2 |grad u|^2 + u^2/2 - u^2 at the exact
// solution; the u^2/2 term is the pointwise contribution of the conjugate
// evaluated with the analytic maximizer direction v = u, and the
// Omega-integral of the whole expression is zero.
double be_residual_integrand(double t, std::span<const double> x, std::span<const int> a);

}  // namespace gradflow
