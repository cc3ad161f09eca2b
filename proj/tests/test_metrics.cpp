#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "gradflow/metrics.hpp"
#include "gradflow/sampling.hpp"

using namespace gradflow;
using std::numbers::pi;

TEST_CASE("exact_solution: formula cases") {
  const std::vector<int> a = {2, 2};
  const double xq[] = {pi / 4.0, pi / 4.0};
  CHECK(exact_solution(0.0, xq, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(exact_solution(0.001, xq, a) == doctest::Approx(std::exp(-0.001)).epsilon(1e-15));
  const double xb[] = {0.0, 1.3};
  CHECK(exact_solution(0.5, xb, a) == doctest::Approx(0.0).epsilon(1e-15));
  const double xb2[] = {1.1, pi};
  CHECK(std::abs(exact_solution(0.5, xb2, a)) < 1e-14);
  // t = 0 is the plain product of sines
  const double xr[] = {0.7, 1.9};
  CHECK(exact_solution(0.0, xr, a) ==
        doctest::Approx(std::sin(2 * 0.7) * std::sin(2 * 1.9)).epsilon(1e-15));
}

TEST_CASE("kappa_of") {
  const std::vector<int> a1 = {2, 2};
  CHECK(kappa_of(a1) == 0.125);
  const std::vector<int> a2 = {2, 2, 3};
  CHECK(kappa_of(a2) == doctest::Approx(1.0 / 17.0).epsilon(1e-15));
  const std::vector<int> a3 = {2, 2, 1, 2, 3};
  CHECK(kappa_of(a3) == doctest::Approx(1.0 / 22.0).epsilon(1e-15));
  const std::vector<int> z = {0, 0};
  CHECK_THROWS(kappa_of(z));
}

TEST_CASE("exact_solution satisfies the heat equation (finite differences)") {
  const std::vector<int> a = {2, 3};
  const double kappa = kappa_of(a);
  const double h = 1e-4;
  const double pts[][2] = {{0.9, 1.7}, {2.2, 0.6}, {1.3, 2.8}};
  for (const auto& p : pts) {
    const double t = 0.2;
    const double x[] = {p[0], p[1]};
    const double ut = (exact_solution(t + h, x, a) - exact_solution(t - h, x, a)) / (2 * h);
    double lap = 0.0;
    for (int i = 0; i < 2; ++i) {
      double xp[] = {p[0], p[1]}, xm[] = {p[0], p[1]};
      xp[i] += h;
      xm[i] -= h;
      lap += (exact_solution(t, xp, a) - 2 * exact_solution(t, x, a) +
              exact_solution(t, xm, a)) /
             (h * h);
    }
    CHECK(std::abs(ut - kappa * lap) < 1e-5);
  }
}

TEST_CASE("compute_metrics: zero network") {
  const std::vector<int> a = {2, 2};
  const SampleSet s = SampleSet::create(2, 500, 100, 3);
  NetworkParams z = init_params(2, 3, 0.03, 1);
  z.unflatten(Eigen::VectorXd::Zero(z.param_count()));
  const Metrics m = compute_metrics(z, 0.0, s, a);
  CHECK(m.rel_defined);
  CHECK(m.eps_rel_l2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.mse >= 0.0);
  CHECK(m.eps_abs_linf >= 0.0);
  CHECK(m.mse <= m.eps_abs_linf * m.eps_abs_linf + 1e-15);

  // hand check of MSE = mean u^2 over all N_s points
  double acc = 0.0, amax = 0.0;
  std::vector<double> x(2);
  for (int i = 0; i < s.n_interior(); ++i) {
    x[0] = s.interior(0, i); x[1] = s.interior(1, i);
    const double u = exact_solution(0.0, x, a);
    acc += u * u;
    amax = std::max(amax, std::abs(u));
  }
  for (int i = 0; i < s.n_boundary(); ++i) {
    x[0] = s.boundary(0, i); x[1] = s.boundary(1, i);
    const double u = exact_solution(0.0, x, a);
    acc += u * u;
    amax = std::max(amax, std::abs(u));
  }
  CHECK(m.mse == doctest::Approx(acc / s.n_total()).epsilon(1e-12));
  CHECK(m.eps_abs_linf == doctest::Approx(amax).epsilon(1e-12));
}

TEST_CASE("compute_metrics: vanishing exact solution flags the relative error") {
  const std::vector<int> a = {1, 1};
  SampleSet s = SampleSet::create(2, 4, 2, 5);
  // place every point where sin(x1) sin(x2) is exactly zero (sin(0) == 0;
  // sin(pi) is only zero up to rounding)
  for (int i = 0; i < s.n_interior(); ++i) {
    s.interior(0, i) = 0.0;
    s.interior(1, i) = 1.0;
  }
  for (int i = 0; i < s.n_boundary(); ++i) {
    s.boundary(0, i) = 0.0;
    s.boundary(1, i) = 2.0;
  }
  NetworkParams z = init_params(2, 3, 0.03, 1);
  z.unflatten(Eigen::VectorXd::Zero(z.param_count()));
  const Metrics m = compute_metrics(z, 0.0, s, a);
  CHECK_FALSE(m.rel_defined);
  CHECK(std::isnan(m.eps_rel_l2));
}

TEST_CASE("be_residual_integrand: MC integral is zero within 3 standard errors") {
  const std::vector<int> a = {2, 2};
  const int n = 100000;
  const SampleSet s = SampleSet::create(2, n, 10, 7);
  for (double t : {0.0, 0.001}) {
    double sum = 0.0, sumsq = 0.0;
    std::vector<double> vals(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const double x[] = {s.interior(0, i), s.interior(1, i)};
      const double v = be_residual_integrand(t, x, a);
      vals[static_cast<std::size_t>(i)] = v;
      sum += v;
      sumsq += v * v;
    }
    const double est = s.mc_mean_interior(vals);
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    const double se = s.vol_omega * std::sqrt(var / n);
    CHECK(std::abs(est) <= 3.0 * se);
  }
}

TEST_CASE("be_residual_integrand: e^{-2t} scaling and nonzero boundary value") {
  const std::vector<int> a = {2, 2};
  const double x[] = {1.1, 2.3};
  const double r0 = be_residual_integrand(0.0, x, a);
  const double r1 = be_residual_integrand(0.3, x, a);
  CHECK(r1 == doctest::Approx(std::exp(-0.6) * r0).epsilon(1e-12));
  // on the boundary u = 0 but the gradient term survives pointwise
  const double xb[] = {0.0, pi / 4.0};
  CHECK(be_residual_integrand(0.0, xb, a) > 0.0);
}
