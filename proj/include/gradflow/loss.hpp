#pragma once
#include <Eigen/Dense>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "gradflow/network.hpp"
#include "gradflow/sampling.hpp"

namespace gradflow {

// Source term f(t, x); null means f = 0.
using SourceFn = std::function<double(double, std::span<const double>)>;

struct ProblemSpec {
  int d = 0;
  std::vector<int> a;      // frequency vector of the initial condition
  double kappa = 0.0;      // diffusivity, 1/sum(a_i^2) for the test problems
  double lambda = 100.0;   // boundary penalty
  SourceFn f;              // default zero
  double dt = 1e-4;
  double T = 0.0;
  int n_steps = 0;

  double source(double t, std::span<const double> x) const { return f ? f(t, x) : 0.0; }
  void validate() const;

  // near-zero guard for the penalized dual denominator
  double eps_den(const SampleSet& samples) const {
    return 1e-12 * (1.0 + lambda * samples.area_boundary);
  }
};

struct DegenerateDualError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The four additive terms of the per-step objective; total is formed in the
// fixed order grad + dual + inertia + boundary.
struct LossBreakdown {
  double grad_term = 0.0;      // (kappa dt / 2) ||grad w||^2
  double dual_term = 0.0;      // dt * p_h
  double inertia_term = 0.0;   // (w - u_prev, w)
  double boundary_term = 0.0;  // lambda ||w||^2 on the boundary
  double total = 0.0;
};

enum class DualTermMode {
  FrozenV,         // dual term re-evaluated through w with the dual net frozen
  ConstantScalar,  // dual term is a fixed scalar with zero gradient
};

// How the dual term enters the primal objective.
struct DualContext {
  DualTermMode mode = DualTermMode::FrozenV;
  double p_h = 0.0;                 // ConstantScalar: the fixed value
  const NetworkParams* v = nullptr; // FrozenV: the frozen dual network
};

// f(t_n, x_i) - (w(x_i) - u_prev(x_i)) / dt at the interior points.
std::vector<double> dual_argument_values(std::span<const double> w_interior,
                                         std::span<const double> u_prev_interior,
                                         const SampleSet& samples,
                                         const ProblemSpec& spec, double t_n);

// Value-level core of the penalized dual ratio
//   (1/2kappa) [ (w, v) / (||grad v||^2 + lambda ||v||^2_bnd)^(1/2) ]^2,
// taking precomputed v data so callers may supply analytic test functions.
double dual_ratio_from_values(std::span<const double> w_interior,
                              std::span<const double> v_interior,
                              std::span<const double> v_gradsq_interior,
                              std::span<const double> v_boundary,
                              const SampleSet& samples, const ProblemSpec& spec);

// ---- tape-recorded objectives -------------------------------------------

// Penalized dual ratio with the dual network evaluated on the tape; the
// result is differentiable with respect to v's parameters and with respect
// to w through the argument Vars.
ad::Var dual_ratio_on_tape(std::span<const ad::Var> w_interior, const ParamVars& v,
                           const SampleSet& samples, const ProblemSpec& spec);

struct LossBreakdownVars {
  ad::Var grad_term, dual_term, inertia_term, boundary_term, total;
  LossBreakdown values() const {
    return {grad_term.value(), dual_term.value(), inertia_term.value(),
            boundary_term.value(), total.value()};
  }
};

// Per-step objective assembled on the tape; u_prev_values holds the previous
// iterate at the interior points followed by the boundary points.
LossBreakdownVars be_loss_on_tape(const ParamVars& w,
                                  std::span<const double> u_prev_values,
                                  const DualContext& dual, const SampleSet& samples,
                                  const ProblemSpec& spec, double t_n);

// Quadrature estimate of the squared L2 distance to the target values.
ad::Var supervised_loss_on_tape(const ParamVars& w,
                                std::span<const double> target_interior,
                                const SampleSet& samples);

}  // namespace gradflow
