#include "gradflow/batch.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gradflow {

namespace {

// Row-major copy into the flat layout used by NetworkParams::flatten.
struct FlatWriter {
  Eigen::VectorXd& out;
  int k = 0;
  void mat(const Eigen::MatrixXd& M) {
    for (int i = 0; i < M.rows(); ++i)
      for (int j = 0; j < M.cols(); ++j) out[k++] = M(i, j);
  }
  void vec(const Eigen::VectorXd& v) {
    for (int i = 0; i < v.size(); ++i) out[k++] = v[i];
  }
  void row(const Eigen::RowVectorXd& v) {
    for (int i = 0; i < v.size(); ++i) out[k++] = v[i];
  }
  void scalar(double s) { out[k++] = s; }
};

inline void slopes(const Eigen::MatrixXd& Z, double mu, Eigen::MatrixXd& D) {
  D.array() = (Z.array() > 0.0).cast<double>() * (1.0 - mu) + mu;
}

}  // namespace

BatchNet::BatchNet(int d, int m, int n_cols) : d_(d), m_(m), n_(n_cols) {
  S1_.resize(m, n_cols);
  S2_.resize(m, n_cols);
  S3_.resize(m, n_cols);
  S4_.resize(m, n_cols);
  D2_.resize(m, n_cols);
  D3_.resize(m, n_cols);
  D4_.resize(m, n_cols);
  u_.resize(n_cols);
  G_.resize(d, n_cols);
  Tg1_.resize(m, n_cols);
  Tg2_.resize(m, n_cols);
  Sbar_.resize(m, n_cols);
  Zbar_.resize(m, n_cols);
  tmp_.resize(m, n_cols);
  T1q_.resize(m, n_cols);
  T2q_.resize(m, n_cols);
  T3q_.resize(m, n_cols);
  T4q_.resize(m, n_cols);
  Tbar_.resize(m, n_cols);
  Zetabar_.resize(m, n_cols);
  seed_r_.resize(n_cols);
  seed_Q_.resize(d, n_cols);
}

void BatchNet::forward(const NetworkParams& p, const Eigen::MatrixXd& X,
                       bool with_input_grad) {
  if (p.d != d_ || p.m != m_ || X.rows() != d_ || X.cols() != n_)
    throw std::invalid_argument("BatchNet::forward: shape mismatch");
  S1_.noalias() = p.W1 * X;
  S1_.colwise() += p.b1;

  auto hidden = [&](const Eigen::MatrixXd& W, const Eigen::VectorXd& b,
                    const Eigen::MatrixXd& in, Eigen::MatrixXd& D, Eigen::MatrixXd& S) {
    S.noalias() = W * in;
    S.colwise() += b;
    slopes(S, p.mu, D);
    S.array() *= D.array();  // sigma(z) = slope(z) * z
  };
  hidden(p.W2, p.b2, S1_, D2_, S2_);
  hidden(p.W3, p.b3, S2_, D3_, S3_);
  hidden(p.W4, p.b4, S3_, D4_, S4_);
  u_.noalias() = p.W5 * S4_;
  u_.array() += p.b5;

  if (with_input_grad) {
    for (int j = 0; j < d_; ++j) {
      // the S1 tangent in direction e_j is the constant vector W2 W1 e_j
      const Eigen::VectorXd c2 = p.W2 * p.W1.col(j);
      Tg1_ = D2_.array().colwise() * c2.array();
      Tg2_.noalias() = p.W3 * Tg1_;
      Tg2_.array() *= D3_.array();
      Tg1_.noalias() = p.W4 * Tg2_;
      Tg1_.array() *= D4_.array();
      G_.row(j).noalias() = p.W5 * Tg1_;
    }
  }
  has_forward_ = true;
}

Eigen::VectorXd BatchNet::backprop(const NetworkParams& p, const Eigen::MatrixXd& X,
                                   const Eigen::RowVectorXd& r,
                                   const Eigen::MatrixXd* Q) {
  if (!has_forward_) throw std::logic_error("BatchNet::backprop before forward");
  if (r.size() != n_ || (Q && (Q->rows() != d_ || Q->cols() != n_)))
    throw std::invalid_argument("BatchNet::backprop: seed shape mismatch");

  Eigen::RowVectorXd W5g = r * S4_.transpose();
  double b5g = r.sum();
  Sbar_.noalias() = p.W5.transpose() * r;

  if (Q) {
    // tangent pass in the per-sample seed direction q_s
    T1q_.noalias() = p.W1 * (*Q);
    T2q_.noalias() = p.W2 * T1q_;
    T2q_.array() *= D2_.array();
    T3q_.noalias() = p.W3 * T2q_;
    T3q_.array() *= D3_.array();
    T4q_.noalias() = p.W4 * T3q_;
    T4q_.array() *= D4_.array();
    W5g += T4q_.rowwise().sum().transpose();
    Tbar_ = p.W5.transpose().replicate(1, n_);  // adjoint of T4q
  }

  Eigen::MatrixXd W4g(m_, m_), W3g(m_, m_), W2g(m_, m_), W1g(m_, d_);
  Eigen::VectorXd b4g(m_), b3g(m_), b2g(m_), b1g(m_);

  auto layer_back = [&](const Eigen::MatrixXd& W, const Eigen::MatrixXd& D,
                        const Eigen::MatrixXd& Sprev, const Eigen::MatrixXd* Tprev,
                        Eigen::MatrixXd& Wg, Eigen::VectorXd& bg) {
    Zbar_ = D.array() * Sbar_.array();
    Wg.noalias() = Zbar_ * Sprev.transpose();
    bg = Zbar_.rowwise().sum();
    tmp_.noalias() = W.transpose() * Zbar_;
    if (Q) {
      Zetabar_ = D.array() * Tbar_.array();
      Wg.noalias() += Zetabar_ * Tprev->transpose();
      Tbar_.noalias() = W.transpose() * Zetabar_;
    }
    Sbar_.swap(tmp_);
  };
  layer_back(p.W4, D4_, S3_, Q ? &T3q_ : nullptr, W4g, b4g);
  layer_back(p.W3, D3_, S2_, Q ? &T2q_ : nullptr, W3g, b3g);
  layer_back(p.W2, D2_, S1_, Q ? &T1q_ : nullptr, W2g, b2g);

  // first layer is linear: S1 = W1 X + b1, T1q = W1 Q
  W1g.noalias() = Sbar_ * X.transpose();
  b1g = Sbar_.rowwise().sum();
  if (Q) W1g.noalias() += Tbar_ * Q->transpose();

  Eigen::VectorXd flat(p.param_count());
  FlatWriter fw{flat};
  fw.mat(W1g); fw.vec(b1g);
  fw.mat(W2g); fw.vec(b2g);
  fw.mat(W3g); fw.vec(b3g);
  fw.mat(W4g); fw.vec(b4g);
  fw.row(W5g); fw.scalar(b5g);
  return flat;
}

CloudBatch::CloudBatch(const SampleSet& s) : samples(&s) {
  X.resize(s.d, s.n_total());
  X.leftCols(s.n_interior()) = s.interior;
  X.rightCols(s.n_boundary()) = s.boundary;
}

Eigen::VectorXd source_values(const ProblemSpec& spec, const SampleSet& samples,
                              double t_n) {
  const int ni = samples.n_interior();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(ni);
  if (!spec.f) return out;
  std::vector<double> x(static_cast<std::size_t>(samples.d));
  for (int i = 0; i < ni; ++i) {
    for (int r = 0; r < samples.d; ++r)
      x[static_cast<std::size_t>(r)] = samples.interior(r, i);
    out[i] = spec.f(t_n, x);
  }
  return out;
}

ValueAndGrad supervised_value_grad(BatchNet& net, const NetworkParams& w,
                                   const CloudBatch& batch,
                                   const Eigen::VectorXd& target_interior,
                                   bool want_grad) {
  const int ni = batch.n_interior();
  if (target_interior.size() != ni)
    throw std::invalid_argument("supervised_value_grad: |target| != N_i");
  net.forward(w, batch.X, false);
  const double qi = batch.samples->vol_omega / ni;
  const Eigen::RowVectorXd diff =
      net.values().head(ni) - target_interior.transpose();
  ValueAndGrad out;
  out.value = qi * diff.squaredNorm();
  if (want_grad) {
    Eigen::RowVectorXd& r = net.seed_r();
    r.setZero();
    r.head(ni) = 2.0 * qi * diff;
    out.grad = net.backprop(w, batch.X, r, nullptr);
  }
  return out;
}

ValueAndGrad dual_value_grad(BatchNet& net, const NetworkParams& v,
                             const CloudBatch& batch,
                             const Eigen::VectorXd& arg_interior,
                             const ProblemSpec& spec, bool want_grad) {
  const int ni = batch.n_interior();
  const int nb = batch.n_boundary();
  if (arg_interior.size() != ni)
    throw std::invalid_argument("dual_value_grad: |arg| != N_i");
  net.forward(v, batch.X, true);
  const double qi = batch.samples->vol_omega / ni;
  const double qb = nb > 0 ? batch.samples->area_boundary / nb : 0.0;

  const double num = qi * net.values().head(ni).dot(arg_interior.transpose());
  const double gsum = qi * net.input_grads().leftCols(ni).squaredNorm();
  const double bsum = spec.lambda * qb * net.values().tail(nb).squaredNorm();
  const double den = gsum + bsum;
  if (den <= spec.eps_den(*batch.samples))
    throw DegenerateDualError("dual denominator below guard: " + std::to_string(den));

  ValueAndGrad out;
  out.value = num * num / (2.0 * spec.kappa * den);
  if (want_grad) {
    const double dnum = num / (spec.kappa * den);
    const double dden = -num * num / (2.0 * spec.kappa * den * den);
    Eigen::RowVectorXd& r = net.seed_r();
    r.head(ni) = dnum * qi * arg_interior.transpose();
    r.tail(nb) = (2.0 * dden * spec.lambda * qb) * net.values().tail(nb);
    Eigen::MatrixXd& Q = net.seed_Q();
    Q.leftCols(ni) = (2.0 * dden * qi) * net.input_grads().leftCols(ni);
    Q.rightCols(nb).setZero();
    out.grad = net.backprop(v, batch.X, r, &Q);
  }
  return out;
}

FrozenDual freeze_dual(BatchNet& net, const NetworkParams& v, const CloudBatch& batch,
                       const ProblemSpec& spec) {
  const int ni = batch.n_interior();
  const int nb = batch.n_boundary();
  net.forward(v, batch.X, true);
  const double qi = batch.samples->vol_omega / ni;
  const double qb = nb > 0 ? batch.samples->area_boundary / nb : 0.0;
  FrozenDual out;
  out.mode = DualTermMode::FrozenV;
  out.v_interior = net.values().head(ni).transpose();
  out.den = qi * net.input_grads().leftCols(ni).squaredNorm() +
            spec.lambda * qb * net.values().tail(nb).squaredNorm();
  if (out.den <= spec.eps_den(*batch.samples))
    throw DegenerateDualError("dual denominator below guard: " +
                              std::to_string(out.den));
  return out;
}

BreakdownAndGrad be_value_grad(BatchNet& net, const NetworkParams& w,
                               const CloudBatch& batch, const Eigen::VectorXd& u_prev,
                               const FrozenDual& dual, const ProblemSpec& spec,
                               double t_n, bool want_grad) {
  const int ni = batch.n_interior();
  const int nb = batch.n_boundary();
  if (u_prev.size() != ni + nb)
    throw std::invalid_argument("be_value_grad: |u_prev| != N_i + N_b");
  net.forward(w, batch.X, true);
  const double qi = batch.samples->vol_omega / ni;
  const double qb = nb > 0 ? batch.samples->area_boundary / nb : 0.0;

  const Eigen::RowVectorXd w_int = net.values().head(ni);
  const Eigen::RowVectorXd w_bnd = net.values().tail(nb);
  const Eigen::RowVectorXd uprev_int = u_prev.head(ni).transpose();

  BreakdownAndGrad out;
  LossBreakdown& bd = out.breakdown;
  bd.grad_term = 0.5 * spec.kappa * spec.dt * qi *
                 net.input_grads().leftCols(ni).squaredNorm();
  bd.inertia_term = qi * (w_int - uprev_int).dot(w_int);
  bd.boundary_term = spec.lambda * qb * w_bnd.squaredNorm();

  double num = 0.0;
  Eigen::RowVectorXd arg;
  if (dual.mode == DualTermMode::ConstantScalar) {
    bd.dual_term = spec.dt * dual.p_h;
  } else {
    arg = -(w_int - uprev_int) / spec.dt;
    if (spec.f) arg += source_values(spec, *batch.samples, t_n).transpose();
    num = qi * arg.dot(dual.v_interior.transpose());
    bd.dual_term = spec.dt * num * num / (2.0 * spec.kappa * dual.den);
  }

  const std::pair<double, const char*> terms[] = {{bd.grad_term, "grad_term"},
                                                  {bd.dual_term, "dual_term"},
                                                  {bd.inertia_term, "inertia_term"},
                                                  {bd.boundary_term, "boundary_term"}};
  for (const auto& [val, name] : terms) {
    if (!std::isfinite(val))
      throw NumericalError(std::string("be_loss: non-finite ") + name);
  }
  bd.total = bd.grad_term + bd.dual_term + bd.inertia_term + bd.boundary_term;

  if (want_grad) {
    Eigen::RowVectorXd& r = net.seed_r();
    r.head(ni) = qi * (2.0 * w_int - uprev_int);
    r.tail(nb) = (2.0 * spec.lambda * qb) * w_bnd;
    if (dual.mode == DualTermMode::FrozenV) {
      // the dual term couples through the numerator; v is frozen
      const double c = -qi * num / (spec.kappa * dual.den);
      r.head(ni) += c * dual.v_interior.transpose();
    }
    Eigen::MatrixXd& Q = net.seed_Q();
    Q.leftCols(ni) = (spec.kappa * spec.dt * qi) * net.input_grads().leftCols(ni);
    Q.rightCols(nb).setZero();
    out.grad = net.backprop(w, batch.X, r, &Q);
  }
  return out;
}

}  // namespace gradflow
