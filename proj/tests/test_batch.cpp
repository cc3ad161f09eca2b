#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "gradflow/batch.hpp"
#include "gradflow/loss.hpp"
#include "gradflow/metrics.hpp"
#include "gradflow/rng.hpp"

using namespace gradflow;

namespace {

ProblemSpec spec22() {
  ProblemSpec s;
  s.d = 2;
  s.a = {2, 2};
  s.kappa = 0.125;
  s.lambda = 100.0;
  s.dt = 1e-4;
  s.n_steps = 1;
  s.T = 1e-4;
  return s;
}

void check_rel(const Eigen::VectorXd& got, const Eigen::VectorXd& want, double tol) {
  REQUIRE(got.size() == want.size());
  const double scale = std::max(want.cwiseAbs().maxCoeff(), 1e-12);
  CHECK((got - want).cwiseAbs().maxCoeff() / scale < tol);
}

}  // namespace

TEST_CASE("BatchNet forward matches per-sample evaluation") {
  const SampleSet cloud = SampleSet::create(2, 25, 8, 3);
  const NetworkParams p = init_params(2, 5, 0.03, 7);
  CloudBatch batch(cloud);
  BatchNet net(2, 5, batch.X.cols());
  net.forward(p, batch.X, true);
  std::vector<double> x(2);
  for (int i = 0; i < batch.X.cols(); ++i) {
    x[0] = batch.X(0, i);
    x[1] = batch.X(1, i);
    CHECK(net.values()(i) == doctest::Approx(forward(p, x)).epsilon(1e-13));
    const Eigen::VectorXd g = input_gradient(p, x);
    CHECK((net.input_grads().col(i) - g).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("backprop of sum(r u + q . grad u) matches the tape") {
  const SampleSet cloud = SampleSet::create(2, 12, 4, 11);
  const NetworkParams p = init_params(2, 4, 0.03, 13);
  CloudBatch batch(cloud);
  const int n = static_cast<int>(batch.X.cols());
  SplitMix64 rng(99);
  Eigen::RowVectorXd r(n);
  Eigen::MatrixXd Q(2, n);
  for (int i = 0; i < n; ++i) {
    r(i) = rng.uniform() - 0.5;
    Q(0, i) = rng.uniform() - 0.5;
    Q(1, i) = rng.uniform() - 0.5;
  }
  BatchNet net(2, 4, n);
  net.forward(p, batch.X, true);
  const Eigen::VectorXd fast = net.backprop(p, batch.X, r, &Q);

  const Eigen::VectorXd slow = grad_wrt_params(
      [&](const ParamVars& pv) {
        ad::Tape& t = *pv.tape;
        ad::Var acc = t.constant(0.0);
        std::vector<double> x(2);
        for (int i = 0; i < n; ++i) {
          x[0] = batch.X(0, i);
          x[1] = batch.X(1, i);
          ad::Var u = forward_on_tape(pv, x);
          acc = acc + t.mul_const(u, r(i));
          const std::vector<ad::Var> g = input_gradient_on_tape(pv, x);
          acc = acc + t.mul_const(g[0], Q(0, i)) + t.mul_const(g[1], Q(1, i));
        }
        return acc;
      },
      p);
  check_rel(fast, slow, 1e-11);
}

TEST_CASE("supervised_value_grad matches the tape route") {
  const SampleSet cloud = SampleSet::create(2, 30, 6, 17);
  const NetworkParams w = init_params(2, 4, 0.03, 19);
  CloudBatch batch(cloud);
  BatchNet net(2, 4, batch.X.cols());
  Eigen::VectorXd target(cloud.n_interior());
  SplitMix64 rng(5);
  for (int i = 0; i < target.size(); ++i) target[i] = rng.uniform() - 0.5;

  const ValueAndGrad vg = supervised_value_grad(net, w, batch, target, true);

  const std::vector<double> tv(target.data(), target.data() + target.size());
  double slow_value = 0.0;
  const Eigen::VectorXd slow = grad_wrt_params(
      [&](const ParamVars& pv) {
        ad::Var l = supervised_loss_on_tape(pv, tv, cloud);
        slow_value = l.value();
        return l;
      },
      w);
  CHECK(vg.value == doctest::Approx(slow_value).epsilon(1e-12));
  check_rel(vg.grad, slow, 1e-11);
}

TEST_CASE("dual_value_grad matches the tape route and rejects v = 0") {
  const ProblemSpec s = spec22();
  const SampleSet cloud = SampleSet::create(2, 20, 8, 23);
  NetworkParams v = init_params(2, 4, 0.03, 29);
  v.b5 = 0.25;
  CloudBatch batch(cloud);
  BatchNet net(2, 4, batch.X.cols());
  Eigen::VectorXd arg(cloud.n_interior());
  SplitMix64 rng(31);
  for (int i = 0; i < arg.size(); ++i) arg[i] = rng.uniform() - 0.5;

  const ValueAndGrad vg = dual_value_grad(net, v, batch, arg, s, true);

  double slow_value = 0.0;
  const Eigen::VectorXd slow = grad_wrt_params(
      [&](const ParamVars& pv) {
        ad::Tape& t = *pv.tape;
        std::vector<ad::Var> w;
        for (int i = 0; i < arg.size(); ++i) w.push_back(t.constant(arg[i]));
        ad::Var ratio = dual_ratio_on_tape(w, pv, cloud, s);
        slow_value = ratio.value();
        return ratio;
      },
      v);
  CHECK(vg.value == doctest::Approx(slow_value).epsilon(1e-12));
  check_rel(vg.grad, slow, 1e-10);

  NetworkParams z = v;
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(z.param_count());
  z.unflatten(zero);
  CHECK_THROWS_AS(dual_value_grad(net, z, batch, arg, s, false), DegenerateDualError);
}

TEST_CASE("be_value_grad matches the tape route in both dual modes") {
  const ProblemSpec s = spec22();
  const SampleSet cloud = SampleSet::create(2, 18, 6, 37);
  const NetworkParams w = init_params(2, 4, 0.03, 41);
  NetworkParams v = init_params(2, 3, 0.03, 43);
  v.b5 = 0.2;
  CloudBatch batch(cloud);
  BatchNet net_w(2, 4, batch.X.cols());
  BatchNet net_v(2, 3, batch.X.cols());
  Eigen::VectorXd u_prev(cloud.n_total());
  SplitMix64 rng(47);
  for (int i = 0; i < u_prev.size(); ++i) u_prev[i] = 0.2 * (rng.uniform() - 0.5);
  const std::vector<double> up(u_prev.data(), u_prev.data() + u_prev.size());

  SUBCASE("frozen_v") {
    const FrozenDual frozen = freeze_dual(net_v, v, batch, s);
    const BreakdownAndGrad bg =
        be_value_grad(net_w, w, batch, u_prev, frozen, s, s.dt, true);

    DualContext dual;
    dual.mode = DualTermMode::FrozenV;
    dual.v = &v;
    LossBreakdown slow_bd;
    const Eigen::VectorXd slow = grad_wrt_params(
        [&](const ParamVars& pv) {
          LossBreakdownVars lv = be_loss_on_tape(pv, up, dual, cloud, s, s.dt);
          slow_bd = lv.values();
          return lv.total;
        },
        w);
    CHECK(bg.breakdown.total == doctest::Approx(slow_bd.total).epsilon(1e-11));
    CHECK(bg.breakdown.grad_term == doctest::Approx(slow_bd.grad_term).epsilon(1e-11));
    CHECK(bg.breakdown.dual_term == doctest::Approx(slow_bd.dual_term).epsilon(1e-11));
    CHECK(bg.breakdown.inertia_term ==
          doctest::Approx(slow_bd.inertia_term).epsilon(1e-10));
    CHECK(bg.breakdown.boundary_term ==
          doctest::Approx(slow_bd.boundary_term).epsilon(1e-11));
    check_rel(bg.grad, slow, 1e-10);
  }

  SUBCASE("constant_scalar") {
    FrozenDual frozen;
    frozen.mode = DualTermMode::ConstantScalar;
    frozen.p_h = 0.37;
    const BreakdownAndGrad bg =
        be_value_grad(net_w, w, batch, u_prev, frozen, s, s.dt, true);

    DualContext dual;
    dual.mode = DualTermMode::ConstantScalar;
    dual.p_h = 0.37;
    LossBreakdown slow_bd;
    const Eigen::VectorXd slow = grad_wrt_params(
        [&](const ParamVars& pv) {
          LossBreakdownVars lv = be_loss_on_tape(pv, up, dual, cloud, s, s.dt);
          slow_bd = lv.values();
          return lv.total;
        },
        w);
    CHECK(bg.breakdown.total == doctest::Approx(slow_bd.total).epsilon(1e-11));
    CHECK(bg.breakdown.dual_term == doctest::Approx(s.dt * 0.37).epsilon(1e-14));
    check_rel(bg.grad, slow, 1e-10);
  }
}

TEST_CASE("source_values: zero source and a nontrivial source") {
  ProblemSpec s = spec22();
  const SampleSet cloud = SampleSet::create(2, 10, 4, 53);
  CHECK(source_values(s, cloud, 0.5).cwiseAbs().maxCoeff() == 0.0);
  s.f = [](double t, std::span<const double> x) { return t + x[0]; };
  const Eigen::VectorXd sv = source_values(s, cloud, 0.5);
  for (int i = 0; i < 10; ++i)
    CHECK(sv[i] == doctest::Approx(0.5 + cloud.interior(0, i)).epsilon(1e-15));
}
