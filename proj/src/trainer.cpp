#include "gradflow/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "gradflow/rng.hpp"

namespace gradflow {

namespace {

constexpr std::uint64_t kPrimalStream = 0x7072696dull;
constexpr std::uint64_t kDualStream = 0x6475616cull;
constexpr std::uint64_t kResampleStream = 0x72657361ull;

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

Eigen::VectorXd exact_at_interior(const SampleSet& samples, std::span<const int> a,
                                  double t) {
  Eigen::VectorXd out(samples.n_interior());
  std::vector<double> x(static_cast<std::size_t>(samples.d));
  for (int i = 0; i < samples.n_interior(); ++i) {
    for (int r = 0; r < samples.d; ++r)
      x[static_cast<std::size_t>(r)] = samples.interior(r, i);
    out[i] = exact_solution(t, x, a);
  }
  return out;
}

Eigen::VectorXd eval_on_batch(BatchNet& net, const NetworkParams& p,
                              const CloudBatch& batch) {
  net.forward(p, batch.X, false);
  return net.values().transpose();
}

void csv_value(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

}  // namespace

TerminationCriterion iteration_cap(int k_max) {
  return [k_max](int k, const std::vector<double>&) { return k > k_max; };
}

TerminationCriterion plateau_criterion(int k_max, int window, double tol) {
  return [k_max, window, tol](int k, const std::vector<double>& phi) {
    if (k > k_max) return true;
    const std::size_t w = static_cast<std::size_t>(window);
    if (phi.size() < w + 1) return false;
    const double old = phi[phi.size() - 1 - w];
    const double rel = std::abs(phi.back() - old) / std::max(std::abs(old), 1e-300);
    return rel < tol;
  };
}

void TrainerConfig::validate() const {
  spec.validate();
  if (m_u < 1 || m_v < 1) throw std::invalid_argument("TrainerConfig: widths must be >= 1");
  if (n_interior < 1) throw std::invalid_argument("TrainerConfig: n_interior must be >= 1");
  if (n_boundary < 1) throw std::invalid_argument("TrainerConfig: n_boundary must be >= 1");
  if (epochs_init < 0 || epochs_dual < 0 || epochs_primal < 0)
    throw std::invalid_argument("TrainerConfig: epoch counts must be >= 0");
  if (k_max < 0) throw std::invalid_argument("TrainerConfig: k_max must be >= 0");
}

void TrainingLog::write_csv(std::ostream& os) const {
  os << "n,k,phi_total,grad_term,dual_term,inertia_term,boundary_term,p_h,alpha,elapsed_s\n";
  for (const TrainingRecord& r : records) {
    os << r.n << "," << r.k << ",";
    csv_value(os, r.phi.total); os << ",";
    csv_value(os, r.phi.grad_term); os << ",";
    csv_value(os, r.phi.dual_term); os << ",";
    csv_value(os, r.phi.inertia_term); os << ",";
    csv_value(os, r.phi.boundary_term); os << ",";
    csv_value(os, r.p_h); os << ",";
    csv_value(os, r.alpha); os << ",";
    csv_value(os, r.elapsed_s); os << "\n";
  }
}

void TrainingLog::write_metrics_csv(std::ostream& os) const {
  os << "n,t_n,phi_n_final,mse,eps_abs_linf,eps_rel_l2\n";
  for (const StepMetrics& s : step_metrics) {
    os << s.n << ",";
    csv_value(os, s.t_n); os << ",";
    csv_value(os, s.phi_final); os << ",";
    csv_value(os, s.metrics.mse); os << ",";
    csv_value(os, s.metrics.eps_abs_linf); os << ",";
    csv_value(os, s.metrics.eps_rel_l2); os << "\n";
  }
}

NetworkParams fit_initial(const TrainerConfig& config, const SampleSet& samples,
                          TrainingLog* log) {
  config.validate();
  NetworkParams w = init_params(config.spec.d, config.m_u, config.mu_u,
                                SplitMix64::derive(config.seed, kPrimalStream));
  Eigen::VectorXd theta = w.flatten();
  AdamState adam(theta.size());
  const double alpha = lr_schedule(Phase::InitialFit, 1);

  SampleSet cloud = samples;
  CloudBatch batch(cloud);
  BatchNet net(cloud.d, config.m_u, cloud.n_total());
  Eigen::VectorXd target = exact_at_interior(cloud, config.spec.a, 0.0);

  std::uint64_t resample_counter = 0;
  double last_loss = 0.0;
  for (long e = 0; e < config.epochs_init; ++e) {
    if (config.resample_per_epoch) {
      cloud = SampleSet::create(cloud.d, cloud.n_interior(), cloud.n_boundary(),
                                SplitMix64::derive(config.seed,
                                                   kResampleStream + resample_counter++));
      batch = CloudBatch(cloud);
      target = exact_at_interior(cloud, config.spec.a, 0.0);
    }
    try {
      const ValueAndGrad vg = supervised_value_grad(net, w, batch, target, true);
      last_loss = vg.value;
      adam_step(adam, theta, vg.grad, alpha);
      w.unflatten(theta);
    } catch (const NumericalError& err) {
      throw NumericalError("fit_initial epoch " + std::to_string(e) + ": " + err.what());
    }
  }
  last_loss = supervised_value_grad(net, w, batch, target, false).value;
  if (log) log->final_supervised_loss = last_loss;
  return w;
}

double dual_max_step(NetworkParams& v_params, BatchNet& net, const CloudBatch& batch,
                     const Eigen::VectorXd& arg_interior, const ProblemSpec& spec,
                     long epochs, AdamState* persistent_state) {
  Eigen::VectorXd eta = v_params.flatten();
  AdamState local(eta.size());
  AdamState& adam = persistent_state ? *persistent_state : local;
  const double alpha = lr_schedule(Phase::DualMax, 1);
  for (long e = 0; e < epochs; ++e) {
    const ValueAndGrad vg = dual_value_grad(net, v_params, batch, arg_interior, spec, true);
    adam_step(adam, eta, -vg.grad, alpha);  // ascent
    v_params.unflatten(eta);
  }
  // re-evaluate at the returned weights so the reported value is not stale
  return dual_value_grad(net, v_params, batch, arg_interior, spec, false).value;
}

void primal_min_step(NetworkParams& w_params, BatchNet& net, const CloudBatch& batch,
                     const Eigen::VectorXd& u_prev, const FrozenDual& dual,
                     const ProblemSpec& spec, double t_n, int k, long epochs,
                     AdamState* persistent_state) {
  Eigen::VectorXd theta = w_params.flatten();
  AdamState local(theta.size());
  AdamState& adam = persistent_state ? *persistent_state : local;
  const double alpha = lr_schedule(Phase::PrimalMin, k);
  for (long e = 0; e < epochs; ++e) {
    const BreakdownAndGrad bg =
        be_value_grad(net, w_params, batch, u_prev, dual, spec, t_n, true);
    adam_step(adam, theta, bg.grad, alpha);
    w_params.unflatten(theta);
  }
}

std::vector<NetworkParams> solve(const TrainerConfig& config, const SampleSet& samples,
                                 TrainingLog& log) {
  config.validate();
  const ProblemSpec& spec = config.spec;
  const TerminationCriterion terminate =
      config.termination ? config.termination : iteration_cap(config.k_max);

  std::vector<NetworkParams> u_list;
  u_list.reserve(static_cast<std::size_t>(spec.n_steps) + 1);
  u_list.push_back(fit_initial(config, samples, &log));

  auto checkpoint = [&](int n) {
    if (config.checkpoint_dir.empty()) return;
    save_params(u_list[static_cast<std::size_t>(n)],
                config.checkpoint_dir + "/u_step_" + std::to_string(n) + ".params");
  };
  auto record_metrics = [&](int n, double phi_final) {
    StepMetrics sm;
    sm.n = n;
    sm.t_n = n * spec.dt;
    sm.phi_final = phi_final;
    sm.metrics = compute_metrics(u_list[static_cast<std::size_t>(n)], sm.t_n,
                                 samples, spec.a);
    log.step_metrics.push_back(sm);
  };
  record_metrics(0, std::numeric_limits<double>::quiet_NaN());
  checkpoint(0);

  NetworkParams v = init_params(spec.d, config.m_v, config.mu_v,
                                SplitMix64::derive(config.seed, kDualStream));
  SampleSet cloud = samples;
  CloudBatch batch(cloud);
  BatchNet net_u(spec.d, config.m_u, cloud.n_total());
  BatchNet net_v(spec.d, config.m_v, cloud.n_total());

  std::optional<AdamState> dual_adam, primal_adam;
  const Eigen::Index n_eta = v.flatten().size();
  const Eigen::Index n_theta = u_list[0].flatten().size();
  if (config.persist_adam_state) {
    dual_adam.emplace(n_eta);
    primal_adam.emplace(n_theta);
  }

  std::uint64_t resample_counter = 1u << 20;  // separate stream range from fit_initial
  Eigen::VectorXd u_prev = eval_on_batch(net_u, u_list[0], batch);

  for (int n = 1; n <= spec.n_steps; ++n) {
    const double t_n = n * spec.dt;
    NetworkParams w = u_list[static_cast<std::size_t>(n - 1)];  // warm start
    std::vector<double> phi_history;
    double phi_final = std::numeric_limits<double>::quiet_NaN();
    for (int k = 1;; ++k) {
      if (terminate(k, phi_history)) break;
      const double t0 = now_s();
      try {
        if (config.resample_per_epoch) {
          cloud = SampleSet::create(cloud.d, cloud.n_interior(), cloud.n_boundary(),
                                    SplitMix64::derive(config.seed,
                                                       kResampleStream +
                                                           resample_counter++));
          batch = CloudBatch(cloud);
          u_prev = eval_on_batch(net_u, u_list[static_cast<std::size_t>(n - 1)], batch);
        }
        // line-6 argument built from the current primal iterate
        const Eigen::VectorXd w_int =
            eval_on_batch(net_u, w, batch).head(cloud.n_interior());
        Eigen::VectorXd arg =
            -(w_int - u_prev.head(cloud.n_interior())) / spec.dt;
        if (spec.f) arg += source_values(spec, cloud, t_n);

        const double p_h = dual_max_step(v, net_v, batch, arg, spec,
                                         config.epochs_dual,
                                         dual_adam ? &*dual_adam : nullptr);
        FrozenDual frozen;
        if (config.dual_term_mode == DualTermMode::ConstantScalar) {
          frozen.mode = DualTermMode::ConstantScalar;
          frozen.p_h = p_h;
        } else {
          frozen = freeze_dual(net_v, v, batch, spec);
        }
        primal_min_step(w, net_u, batch, u_prev, frozen, spec, t_n, k,
                        config.epochs_primal,
                        primal_adam ? &*primal_adam : nullptr);

        const LossBreakdown bd =
            be_value_grad(net_u, w, batch, u_prev, frozen, spec, t_n, false).breakdown;
        TrainingRecord rec;
        rec.n = n;
        rec.k = k;
        rec.phi = bd;
        rec.p_h = p_h;
        rec.alpha = lr_schedule(Phase::PrimalMin, k);
        rec.elapsed_s = now_s() - t0;
        log.records.push_back(rec);
        phi_history.push_back(bd.total);
        phi_final = bd.total;
      } catch (const TrainerError&) {
        throw;
      } catch (const std::exception& err) {
        throw TrainerError(n, k, err.what());
      }
    }
    u_list.push_back(w);
    u_prev = eval_on_batch(net_u, w, batch);
    record_metrics(n, phi_final);
    checkpoint(n);
  }
  return u_list;
}

}  // namespace gradflow
