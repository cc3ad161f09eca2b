#pragma once
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gradflow/trainer.hpp"

namespace gradflow {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A single weight or bias coordinate of a network: layer 1..5; biases have
// col < 0 (b5 is layer 5, row 0).
struct ParamCoord {
  int layer = 0;
  int row = 0;
  int col = -1;
  bool is_bias() const { return col < 0; }
  std::string to_string() const;
  static ParamCoord parse(const std::string& text);  // "L,i,j" or "L,i"
};

struct SweepRequest {
  char net = 'u';  // 'u' primal, 'v' dual
  ParamCoord coord;
  double lo = -1.0, hi = 1.0;
  int grid = 101;
};

// Fully resolved experiment configuration (flat key = value format).
struct RunConfig {
  TrainerConfig trainer;
  int n_steps = 10;
  std::string out_dir = "out";
  std::string experiment = "run";
  int metric_cadence = 1;
  std::optional<SweepRequest> sweep;

  void validate() const;
};

// Parse a key = value map with defaults resolved from the dimension.
RunConfig resolve_config(const std::map<std::string, std::string>& kv);
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_stream(std::istream& is);

// Every resolved value, echoed in parseable key = value form.
void write_resolved(const RunConfig& cfg, std::ostream& os);

// Run the solver per config: writes config.resolved, training_log.csv,
// metrics.csv and per-step checkpoints into out_dir. Returns the process
// exit status; on failure partial outputs are flushed.
int run_solve(const RunConfig& cfg);

// One-dimensional loss landscape: vary a single parameter coordinate of a
// trained checkpoint with everything else frozen.
struct SweepContext {
  const SampleSet* samples = nullptr;
  const ProblemSpec* spec = nullptr;
  Eigen::VectorXd u_prev;  // interior then boundary values (primal sweeps)
  double p_h = 0.0;        // frozen dual scalar (primal sweeps)
  Eigen::VectorXd dual_arg_interior;  // dual sweeps
  double t_n = 0.0;
};

// Returns (coordinate value, objective value) pairs; the objective is the
// per-step functional for the primal net and the negated dual ratio for the
// dual net.
std::vector<std::pair<double, double>> landscape_sweep(const NetworkParams& checkpoint,
                                                       const SweepRequest& req,
                                                       const SweepContext& ctx);

}  // namespace gradflow
