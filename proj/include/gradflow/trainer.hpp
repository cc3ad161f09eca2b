#pragma once
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gradflow/batch.hpp"
#include "gradflow/loss.hpp"
#include "gradflow/metrics.hpp"
#include "gradflow/network.hpp"
#include "gradflow/optimizer.hpp"

namespace gradflow {

// Stop the k-loop before executing iteration k? Default: k > k_max.
using TerminationCriterion =
    std::function<bool(int k, const std::vector<double>& phi_history)>;

TerminationCriterion iteration_cap(int k_max);
// Optional plateau rule: also stop when the relative change of the objective
// over `window` iterations drops below `tol`. Off by default.
TerminationCriterion plateau_criterion(int k_max, int window, double tol);

struct TrainerConfig {
  ProblemSpec spec;
  int m_u = 60;
  int m_v = 30;
  double mu_u = 0.03;
  double mu_v = 0.03;
  int n_interior = 0;
  int n_boundary = 0;
  long epochs_init = 5000;
  long epochs_dual = 500;
  long epochs_primal = 50;
  int k_max = 200;
  std::uint64_t seed = 1;
  DualTermMode dual_term_mode = DualTermMode::FrozenV;
  bool deterministic = true;
  bool resample_per_epoch = false;
  bool persist_adam_state = false;
  std::string checkpoint_dir;  // empty: no checkpoint files
  TerminationCriterion termination;  // null: iteration cap at k_max

  void validate() const;
};

struct TrainingRecord {
  int n = 0;
  int k = 0;
  LossBreakdown phi;
  double p_h = 0.0;
  double alpha = 0.0;
  double elapsed_s = 0.0;
};

struct StepMetrics {
  int n = 0;
  double t_n = 0.0;
  double phi_final = 0.0;  // NaN for n = 0
  Metrics metrics;
};

struct TrainingLog {
  std::vector<TrainingRecord> records;
  std::vector<StepMetrics> step_metrics;
  double final_supervised_loss = 0.0;

  void write_csv(std::ostream& os) const;
  void write_metrics_csv(std::ostream& os) const;
};

struct TrainerError : std::runtime_error {
  int n, k;
  TrainerError(int n_, int k_, const std::string& msg)
      : std::runtime_error("step n=" + std::to_string(n_) + " k=" +
                           std::to_string(k_) + ": " + msg),
        n(n_), k(k_) {}
};

// Supervised fit of the initial condition.
NetworkParams fit_initial(const TrainerConfig& config, const SampleSet& samples,
                          TrainingLog* log = nullptr);

// Adam ascent of the penalized dual ratio; returns the attained value,
// evaluated at the returned weights.
double dual_max_step(NetworkParams& v_params, BatchNet& net, const CloudBatch& batch,
                     const Eigen::VectorXd& arg_interior, const ProblemSpec& spec,
                     long epochs, AdamState* persistent_state = nullptr);

// Adam descent of the per-step objective at the k-dependent learning rate.
void primal_min_step(NetworkParams& w_params, BatchNet& net, const CloudBatch& batch,
                     const Eigen::VectorXd& u_prev, const FrozenDual& dual,
                     const ProblemSpec& spec, double t_n, int k, long epochs,
                     AdamState* persistent_state = nullptr);

// The full time-stepping loop; returns u^0 .. u^N. The caller-owned log is
// filled as training proceeds, so partial progress survives a throw.
std::vector<NetworkParams> solve(const TrainerConfig& config, const SampleSet& samples,
                                 TrainingLog& log);

}  // namespace gradflow
