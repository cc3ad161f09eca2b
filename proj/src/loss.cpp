#include "gradflow/loss.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace gradflow {

void ProblemSpec::validate() const {
  if (d < 1) throw std::invalid_argument("ProblemSpec: d must be >= 1");
  if (kappa <= 0.0) throw std::invalid_argument("ProblemSpec: kappa must be > 0");
  if (lambda <= 0.0) throw std::invalid_argument("ProblemSpec: lambda must be > 0");
  if (dt <= 0.0) throw std::invalid_argument("ProblemSpec: dt must be > 0");
  if (n_steps < 0) throw std::invalid_argument("ProblemSpec: n_steps must be >= 0");
  if (std::abs(n_steps * dt - T) > 1e-12)
    throw std::invalid_argument("ProblemSpec: N * dt != T");
}

std::vector<double> dual_argument_values(std::span<const double> w_interior,
                                         std::span<const double> u_prev_interior,
                                         const SampleSet& samples,
                                         const ProblemSpec& spec, double t_n) {
  if (spec.dt == 0.0) throw std::invalid_argument("dual_argument_values: dt = 0");
  if (w_interior.size() != u_prev_interior.size() ||
      static_cast<int>(w_interior.size()) != samples.n_interior())
    throw std::invalid_argument("dual_argument_values: size mismatch");
  std::vector<double> out(w_interior.size());
  std::vector<double> x(static_cast<std::size_t>(samples.d));
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (int r = 0; r < samples.d; ++r)
      x[static_cast<std::size_t>(r)] = samples.interior(r, static_cast<int>(i));
    out[i] = spec.source(t_n, x) - (w_interior[i] - u_prev_interior[i]) / spec.dt;
  }
  return out;
}

double dual_ratio_from_values(std::span<const double> w_interior,
                              std::span<const double> v_interior,
                              std::span<const double> v_gradsq_interior,
                              std::span<const double> v_boundary,
                              const SampleSet& samples, const ProblemSpec& spec) {
  const int ni = samples.n_interior();
  const int nb = samples.n_boundary();
  if (static_cast<int>(w_interior.size()) != ni ||
      static_cast<int>(v_interior.size()) != ni ||
      static_cast<int>(v_gradsq_interior.size()) != ni ||
      static_cast<int>(v_boundary.size()) != nb)
    throw std::invalid_argument("dual_ratio_from_values: size mismatch");
  double num = 0.0, gsum = 0.0, bsum = 0.0;
  for (int i = 0; i < ni; ++i) {
    num += w_interior[static_cast<std::size_t>(i)] * v_interior[static_cast<std::size_t>(i)];
    gsum += v_gradsq_interior[static_cast<std::size_t>(i)];
  }
  for (int i = 0; i < nb; ++i) bsum += v_boundary[static_cast<std::size_t>(i)] *
                                       v_boundary[static_cast<std::size_t>(i)];
  const double wi = samples.vol_omega / ni;
  const double wb = nb > 0 ? samples.area_boundary / nb : 0.0;
  const double den = wi * gsum + spec.lambda * wb * bsum;
  if (den <= spec.eps_den(samples))
    throw DegenerateDualError("dual denominator below guard: " + std::to_string(den));
  const double r = wi * num;
  return (1.0 / (2.0 * spec.kappa)) * (r * r) / den;
}

ad::Var dual_ratio_on_tape(std::span<const ad::Var> w_interior, const ParamVars& v,
                           const SampleSet& samples, const ProblemSpec& spec) {
  ad::Tape& t = *v.tape;
  const int ni = samples.n_interior();
  const int nb = samples.n_boundary();
  if (static_cast<int>(w_interior.size()) != ni)
    throw std::invalid_argument("dual_ratio_on_tape: |w| != N_i");
  std::vector<double> x(static_cast<std::size_t>(samples.d));
  auto point = [&](const Eigen::MatrixXd& pts, int c) {
    for (int r = 0; r < samples.d; ++r)
      x[static_cast<std::size_t>(r)] = pts(r, c);
  };
  ad::Var num = t.constant(0.0);
  ad::Var gsum = t.constant(0.0);
  for (int i = 0; i < ni; ++i) {
    point(samples.interior, i);
    const ad::Var vi = forward_on_tape(v, x);
    num = num + w_interior[static_cast<std::size_t>(i)] * vi;
    const std::vector<ad::Var> g = input_gradient_on_tape(v, x);
    for (const ad::Var& gj : g) gsum = gsum + t.square(gj);
  }
  ad::Var bsum = t.constant(0.0);
  for (int i = 0; i < nb; ++i) {
    point(samples.boundary, i);
    bsum = bsum + t.square(forward_on_tape(v, x));
  }
  const double wi = samples.vol_omega / ni;
  const double wb = nb > 0 ? samples.area_boundary / nb : 0.0;
  ad::Var den = t.mul_const(gsum, wi) + t.mul_const(bsum, spec.lambda * wb);
  if (den.value() <= spec.eps_den(samples))
    throw DegenerateDualError("dual denominator below guard: " +
                              std::to_string(den.value()));
  ad::Var ratio = t.div(t.mul_const(num, wi), t.sqrt(den));
  return t.mul_const(t.square(ratio), 1.0 / (2.0 * spec.kappa));
}

LossBreakdownVars be_loss_on_tape(const ParamVars& w,
                                  std::span<const double> u_prev_values,
                                  const DualContext& dual, const SampleSet& samples,
                                  const ProblemSpec& spec, double t_n) {
  ad::Tape& t = *w.tape;
  const int ni = samples.n_interior();
  const int nb = samples.n_boundary();
  if (static_cast<int>(u_prev_values.size()) != ni + nb)
    throw std::invalid_argument("be_loss_on_tape: |u_prev| != N_i + N_b");
  std::vector<double> x(static_cast<std::size_t>(samples.d));
  auto point = [&](const Eigen::MatrixXd& pts, int c) {
    for (int r = 0; r < samples.d; ++r)
      x[static_cast<std::size_t>(r)] = pts(r, c);
  };

  std::vector<ad::Var> w_int(static_cast<std::size_t>(ni));
  ad::Var gsum = t.constant(0.0);
  ad::Var inert = t.constant(0.0);
  for (int i = 0; i < ni; ++i) {
    point(samples.interior, i);
    const ad::Var wi_val = forward_on_tape(w, x);
    w_int[static_cast<std::size_t>(i)] = wi_val;
    const std::vector<ad::Var> g = input_gradient_on_tape(w, x);
    for (const ad::Var& gj : g) gsum = gsum + t.square(gj);
    const ad::Var diff = t.add_const(wi_val, -u_prev_values[static_cast<std::size_t>(i)]);
    inert = inert + diff * wi_val;
  }
  ad::Var bsum = t.constant(0.0);
  for (int i = 0; i < nb; ++i) {
    point(samples.boundary, i);
    bsum = bsum + t.square(forward_on_tape(w, x));
  }
  const double qi = samples.vol_omega / ni;
  const double qb = nb > 0 ? samples.area_boundary / nb : 0.0;

  LossBreakdownVars out;
  out.grad_term = t.mul_const(gsum, 0.5 * spec.kappa * spec.dt * qi);
  out.inertia_term = t.mul_const(inert, qi);
  out.boundary_term = t.mul_const(bsum, spec.lambda * qb);

  if (dual.mode == DualTermMode::ConstantScalar) {
    out.dual_term = t.constant(spec.dt * dual.p_h);
  } else {
    if (dual.v == nullptr)
      throw std::invalid_argument("be_loss_on_tape: FrozenV mode needs a dual network");
    // argument f - (w - u_prev)/dt as tape expressions through w
    std::vector<ad::Var> arg(static_cast<std::size_t>(ni));
    for (int i = 0; i < ni; ++i) {
      point(samples.interior, i);
      const double fi = spec.source(t_n, x);
      const ad::Var diff =
          t.add_const(w_int[static_cast<std::size_t>(i)],
                      -u_prev_values[static_cast<std::size_t>(i)]);
      arg[static_cast<std::size_t>(i)] =
          t.add_const(t.mul_const(diff, -1.0 / spec.dt), fi);
    }
    ParamVars v_frozen = ParamVars::constants(t, *dual.v);
    const ad::Var p = dual_ratio_on_tape(arg, v_frozen, samples, spec);
    out.dual_term = t.mul_const(p, spec.dt);
  }

  const std::pair<const ad::Var*, const char*> terms[] = {
      {&out.grad_term, "grad_term"},
      {&out.dual_term, "dual_term"},
      {&out.inertia_term, "inertia_term"},
      {&out.boundary_term, "boundary_term"}};
  for (const auto& [term, name] : terms) {
    if (!std::isfinite(term->value()))
      throw NumericalError(std::string("be_loss: non-finite ") + name);
  }
  out.total = out.grad_term + out.dual_term + out.inertia_term + out.boundary_term;
  return out;
}

ad::Var supervised_loss_on_tape(const ParamVars& w,
                                std::span<const double> target_interior,
                                const SampleSet& samples) {
  ad::Tape& t = *w.tape;
  const int ni = samples.n_interior();
  if (static_cast<int>(target_interior.size()) != ni)
    throw std::invalid_argument("supervised_loss_on_tape: |target| != N_i");
  std::vector<double> x(static_cast<std::size_t>(samples.d));
  ad::Var acc = t.constant(0.0);
  for (int i = 0; i < ni; ++i) {
    for (int r = 0; r < samples.d; ++r)
      x[static_cast<std::size_t>(r)] = samples.interior(r, i);
    const ad::Var wi = forward_on_tape(w, x);
    acc = acc + t.square(t.add_const(wi, -target_interior[static_cast<std::size_t>(i)]));
  }
  return t.mul_const(acc, samples.vol_omega / ni);
}

}  // namespace gradflow
