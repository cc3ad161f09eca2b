#include "gradflow/network.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gradflow/rng.hpp"

namespace gradflow {

double leaky_relu(double s, double mu) { return s > 0.0 ? s : mu * s; }

Eigen::VectorXd NetworkParams::flatten() const {
  Eigen::VectorXd out(param_count());
  int k = 0;
  auto put_mat = [&](const Eigen::MatrixXd& M) {
    for (int i = 0; i < M.rows(); ++i)
      for (int j = 0; j < M.cols(); ++j) out[k++] = M(i, j);
  };
  auto put_vec = [&](const Eigen::VectorXd& v) {
    for (int i = 0; i < v.size(); ++i) out[k++] = v[i];
  };
  put_mat(W1); put_vec(b1);
  put_mat(W2); put_vec(b2);
  put_mat(W3); put_vec(b3);
  put_mat(W4); put_vec(b4);
  for (int j = 0; j < m; ++j) out[k++] = W5[j];
  out[k++] = b5;
  return out;
}

void NetworkParams::unflatten(const Eigen::VectorXd& flat) {
  if (flat.size() != param_count())
    throw std::invalid_argument("unflatten: size mismatch");
  int k = 0;
  auto get_mat = [&](Eigen::MatrixXd& M) {
    for (int i = 0; i < M.rows(); ++i)
      for (int j = 0; j < M.cols(); ++j) M(i, j) = flat[k++];
  };
  auto get_vec = [&](Eigen::VectorXd& v) {
    for (int i = 0; i < v.size(); ++i) v[i] = flat[k++];
  };
  get_mat(W1); get_vec(b1);
  get_mat(W2); get_vec(b2);
  get_mat(W3); get_vec(b3);
  get_mat(W4); get_vec(b4);
  for (int j = 0; j < m; ++j) W5[j] = flat[k++];
  b5 = flat[k++];
}

NetworkParams init_params(int d, int m, double mu, std::uint64_t seed) {
  if (d < 1 || m < 1)
    throw std::invalid_argument("init_params: d and m must be >= 1");
  if (mu < 0.0)
    throw std::invalid_argument("init_params: mu must be >= 0");
  NetworkParams p;
  p.d = d;
  p.m = m;
  p.mu = mu;
  SplitMix64 rng(SplitMix64::derive(seed, 0x6e657477ull));
  auto fill = [&](Eigen::Ref<Eigen::MatrixXd> M, int fan_in, int fan_out) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (int i = 0; i < M.rows(); ++i)
      for (int j = 0; j < M.cols(); ++j)
        M(i, j) = bound * (2.0 * rng.uniform() - 1.0);
  };
  p.W1.resize(m, d); fill(p.W1, d, m);
  p.W2.resize(m, m); fill(p.W2, m, m);
  p.W3.resize(m, m); fill(p.W3, m, m);
  p.W4.resize(m, m); fill(p.W4, m, m);
  Eigen::MatrixXd w5(1, m);
  fill(w5, m, 1);
  p.W5 = w5.row(0);
  p.b1 = Eigen::VectorXd::Zero(m);
  p.b2 = Eigen::VectorXd::Zero(m);
  p.b3 = Eigen::VectorXd::Zero(m);
  p.b4 = Eigen::VectorXd::Zero(m);
  p.b5 = 0.0;
  return p;
}

double forward(const NetworkParams& p, std::span<const double> x) {
  if (static_cast<int>(x.size()) != p.d)
    throw std::invalid_argument("forward: input dimension mismatch");
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), p.d);
  Eigen::VectorXd s = p.W1 * xv + p.b1;
  auto act = [&](Eigen::VectorXd& z) {
    for (int i = 0; i < z.size(); ++i) z[i] = leaky_relu(z[i], p.mu);
  };
  Eigen::VectorXd z = p.W2 * s + p.b2; act(z); s = z;
  z = p.W3 * s + p.b3; act(z); s = z;
  z = p.W4 * s + p.b4; act(z); s = z;
  return p.W5.dot(s) + p.b5;
}

Eigen::VectorXd input_gradient(const NetworkParams& p, std::span<const double> x) {
  if (static_cast<int>(x.size()) != p.d)
    throw std::invalid_argument("input_gradient: input dimension mismatch");
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), p.d);
  auto slope = [&](const Eigen::VectorXd& z) {
    Eigen::VectorXd s(z.size());
    for (int i = 0; i < z.size(); ++i) s[i] = z[i] > 0.0 ? 1.0 : p.mu;
    return s;
  };
  Eigen::VectorXd s1 = p.W1 * xv + p.b1;
  Eigen::VectorXd z2 = p.W2 * s1 + p.b2;
  Eigen::VectorXd d2 = slope(z2);
  Eigen::VectorXd s2 = d2.cwiseProduct(z2);
  Eigen::VectorXd z3 = p.W3 * s2 + p.b3;
  Eigen::VectorXd d3 = slope(z3);
  Eigen::VectorXd s3 = d3.cwiseProduct(z3);
  Eigen::VectorXd z4 = p.W4 * s3 + p.b4;
  Eigen::VectorXd d4 = slope(z4);

  Eigen::VectorXd g(p.d);
  for (int j = 0; j < p.d; ++j) {
    Eigen::VectorXd t = d2.cwiseProduct(p.W2 * p.W1.col(j));
    t = d3.cwiseProduct(p.W3 * t);
    t = d4.cwiseProduct(p.W4 * t);
    g[j] = p.W5.dot(t);
  }
  return g;
}

void write_params(const NetworkParams& p, std::ostream& os) {
  os << "gradflow-params v1\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%d %d %.17g\n", p.d, p.m, p.mu);
  os << buf;
  const Eigen::VectorXd flat = p.flatten();
  for (int i = 0; i < flat.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g\n", flat[i]);
    os << buf;
  }
}

NetworkParams read_params(std::istream& is) {
  std::string header;
  std::getline(is, header);
  if (header != "gradflow-params v1")
    throw std::runtime_error("bad checkpoint header: " + header);
  int d, m;
  double mu;
  is >> d >> m >> mu;
  if (!is) throw std::runtime_error("bad checkpoint shape line");
  NetworkParams p = init_params(d, m, mu, 0);
  Eigen::VectorXd flat(p.param_count());
  for (int i = 0; i < flat.size(); ++i) {
    if (!(is >> flat[i])) throw std::runtime_error("truncated checkpoint");
  }
  p.unflatten(flat);
  return p;
}

void save_params(const NetworkParams& p, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  write_params(p, f);
}

NetworkParams load_params(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  return read_params(f);
}

// ---- tape-recorded evaluation -------------------------------------------

int ParamVars::flat_index_w(int layer, int row, int col) const {
  const int mm = m * m + m;
  switch (layer) {
    case 1: return row * d + col;
    case 2: return m * d + m + row * m + col;
    case 3: return m * d + m + mm + row * m + col;
    case 4: return m * d + m + 2 * mm + row * m + col;
    case 5: return m * d + m + 3 * mm + col;
    default: throw std::invalid_argument("layer out of range");
  }
}

int ParamVars::flat_index_b(int layer, int row) const {
  const int mm = m * m + m;
  switch (layer) {
    case 1: return m * d + row;
    case 2: return m * d + m + m * m + row;
    case 3: return m * d + m + mm + m * m + row;
    case 4: return m * d + m + 2 * mm + m * m + row;
    case 5: return m * d + m + 3 * mm + m;
    default: throw std::invalid_argument("layer out of range");
  }
}

ad::Var ParamVars::w(int layer, int row, int col) const {
  return flat[static_cast<std::size_t>(flat_index_w(layer, row, col))];
}

ad::Var ParamVars::b(int layer, int row) const {
  return flat[static_cast<std::size_t>(flat_index_b(layer, row))];
}

ParamVars ParamVars::leaves(ad::Tape& tape, const NetworkParams& p) {
  ParamVars pv;
  pv.d = p.d;
  pv.m = p.m;
  pv.mu = p.mu;
  pv.tape = &tape;
  const Eigen::VectorXd flat = p.flatten();
  pv.flat.reserve(static_cast<std::size_t>(flat.size()));
  for (int i = 0; i < flat.size(); ++i) pv.flat.push_back(tape.constant(flat[i]));
  return pv;
}

ParamVars ParamVars::constants(ad::Tape& tape, const NetworkParams& p) {
  return leaves(tape, p);  // same representation; "constants" by not seeding
}

namespace {

// Hidden state of a tape forward pass, reused by the tangent recording.
struct TapeStates {
  std::vector<ad::Var> s1, s2, s3, s4;   // post-activation
  std::vector<double> d2, d3, d4;        // activation slopes (a.e. constants)
};

TapeStates forward_states(const ParamVars& p, std::span<const double> x) {
  if (static_cast<int>(x.size()) != p.d)
    throw std::invalid_argument("forward_on_tape: input dimension mismatch");
  ad::Tape& t = *p.tape;
  const int m = p.m;
  TapeStates st;
  st.s1.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    ad::Var acc = p.b(1, i);
    for (int j = 0; j < p.d; ++j)
      acc = acc + p.w(1, i, j) * t.constant(x[static_cast<std::size_t>(j)]);
    st.s1[static_cast<std::size_t>(i)] = acc;
  }
  auto layer = [&](int L, const std::vector<ad::Var>& in, std::vector<ad::Var>& out,
                   std::vector<double>& slopes) {
    out.resize(static_cast<std::size_t>(m));
    slopes.resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
      ad::Var acc = p.b(L, i);
      for (int j = 0; j < m; ++j) acc = acc + p.w(L, i, j) * in[static_cast<std::size_t>(j)];
      slopes[static_cast<std::size_t>(i)] = acc.value() > 0.0 ? 1.0 : p.mu;
      out[static_cast<std::size_t>(i)] = t.leaky_max(acc, p.mu);
    }
  };
  layer(2, st.s1, st.s2, st.d2);
  layer(3, st.s2, st.s3, st.d3);
  layer(4, st.s3, st.s4, st.d4);
  return st;
}

ad::Var output_of(const ParamVars& p, const TapeStates& st) {
  ad::Var acc = p.b(5, 0);
  for (int j = 0; j < p.m; ++j) acc = acc + p.w(5, 0, j) * st.s4[static_cast<std::size_t>(j)];
  return acc;
}

}  // namespace

ad::Var forward_on_tape(const ParamVars& p, std::span<const double> x) {
  return output_of(p, forward_states(p, x));
}

std::vector<ad::Var> input_gradient_on_tape(const ParamVars& p, std::span<const double> x) {
  ad::Tape& t = *p.tape;
  const int m = p.m;
  const TapeStates st = forward_states(p, x);
  std::vector<ad::Var> g(static_cast<std::size_t>(p.d));
  std::vector<ad::Var> tang(static_cast<std::size_t>(m)), next(static_cast<std::size_t>(m));
  for (int dir = 0; dir < p.d; ++dir) {
    // tangent of S1 in direction e_dir is the W1 column itself
    for (int i = 0; i < m; ++i) tang[static_cast<std::size_t>(i)] = p.w(1, i, dir);
    auto tangent_layer = [&](int L, const std::vector<double>& slopes) {
      for (int i = 0; i < m; ++i) {
        ad::Var acc = t.constant(0.0);
        for (int j = 0; j < m; ++j)
          acc = acc + p.w(L, i, j) * tang[static_cast<std::size_t>(j)];
        next[static_cast<std::size_t>(i)] =
            t.mul(acc, t.constant(slopes[static_cast<std::size_t>(i)]));
      }
      tang.swap(next);
    };
    tangent_layer(2, st.d2);
    tangent_layer(3, st.d3);
    tangent_layer(4, st.d4);
    ad::Var acc = t.constant(0.0);
    for (int j = 0; j < m; ++j) acc = acc + p.w(5, 0, j) * tang[static_cast<std::size_t>(j)];
    g[static_cast<std::size_t>(dir)] = acc;
  }
  return g;
}

Eigen::VectorXd grad_wrt_params(
    const std::function<ad::Var(const ParamVars&)>& loss_builder,
    const NetworkParams& params) {
  ad::Tape tape;
  ParamVars pv = ParamVars::leaves(tape, params);
  ad::Var loss = loss_builder(pv);
  if (!std::isfinite(loss.value()))
    throw NumericalError("grad_wrt_params: non-finite loss value " +
                         std::to_string(loss.value()));
  const std::vector<double> g = ad::leaf_gradient(tape, loss, pv.flat);
  return Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
}

}  // namespace gradflow
