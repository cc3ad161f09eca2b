#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "gradflow/config.hpp"

namespace {

using namespace gradflow;

int cmd_solve(const std::string& config_path) {
  const RunConfig cfg = parse_config_file(config_path);
  return run_solve(cfg);
}

int cmd_metrics(const std::string& checkpoint, double t_n,
                const std::string& config_path) {
  const RunConfig cfg = parse_config_file(config_path);
  const NetworkParams p = load_params(checkpoint);
  const SampleSet samples = SampleSet::create(
      cfg.trainer.spec.d, cfg.trainer.n_interior, cfg.trainer.n_boundary,
      cfg.trainer.seed);
  const Metrics m = compute_metrics(p, t_n, samples, cfg.trainer.spec.a);
  std::printf("t_n,mse,eps_abs_linf,eps_rel_l2\n");
  std::printf("%.17g,%.17g,%.17g,%.17g\n", t_n, m.mse, m.eps_abs_linf, m.eps_rel_l2);
  return 0;
}

int cmd_sweep(const std::string& checkpoint, const std::string& config_path,
              const SweepRequest& req, const std::string& prev_path, double p_h,
              const std::string& w_path, double t_n, std::string out_path) {
  const RunConfig cfg = parse_config_file(config_path);
  const SampleSet samples = SampleSet::create(
      cfg.trainer.spec.d, cfg.trainer.n_interior, cfg.trainer.n_boundary,
      cfg.trainer.seed);
  const NetworkParams p = load_params(checkpoint);
  CloudBatch batch(samples);

  SweepContext ctx;
  ctx.samples = &samples;
  ctx.spec = &cfg.trainer.spec;
  ctx.t_n = t_n;
  if (req.net == 'u') {
    if (prev_path.empty())
      throw ConfigError("primal sweep needs --prev (previous step checkpoint)");
    const NetworkParams prev = load_params(prev_path);
    BatchNet net(samples.d, prev.m, batch.X.cols());
    net.forward(prev, batch.X, false);
    ctx.u_prev = net.values().transpose();
    ctx.p_h = p_h;
  } else {
    if (prev_path.empty() || w_path.empty())
      throw ConfigError("dual sweep needs --prev and --w checkpoints");
    const NetworkParams prev = load_params(prev_path);
    const NetworkParams w = load_params(w_path);
    BatchNet net_prev(samples.d, prev.m, batch.X.cols());
    net_prev.forward(prev, batch.X, false);
    BatchNet net_w(samples.d, w.m, batch.X.cols());
    net_w.forward(w, batch.X, false);
    const int ni = samples.n_interior();
    Eigen::VectorXd w_int = net_w.values().head(ni).transpose();
    Eigen::VectorXd prev_int = net_prev.values().head(ni).transpose();
    std::vector<double> arg = dual_argument_values(
        std::span<const double>(w_int.data(), static_cast<std::size_t>(ni)),
        std::span<const double>(prev_int.data(), static_cast<std::size_t>(ni)),
        samples, cfg.trainer.spec, t_n);
    ctx.dual_arg_interior =
        Eigen::Map<const Eigen::VectorXd>(arg.data(), static_cast<Eigen::Index>(ni));
  }

  const auto rows = landscape_sweep(p, req, ctx);
  if (out_path.empty()) out_path = "sweep_" + req.coord.to_string() + ".csv";
  for (auto& ch : out_path)
    if (ch == ',') ch = '_';
  std::ofstream f(out_path);
  f << "param_value,loss_value\n";
  char buf[96];
  for (const auto& [x, y] : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", x, y);
    f << buf;
  }
  std::cout << "wrote " << rows.size() << " rows to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradient-flow PDE solver with adversarial primal-dual training"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, prev_path, w_path, out_path;
  double t_n = 0.0, p_h = 0.0;

  auto* solve_cmd = app.add_subcommand("solve", "run the full solver from a config file");
  solve_cmd->add_option("config", config_path, "config file (key = value)")->required();

  auto* metrics_cmd =
      app.add_subcommand("metrics", "error metrics of a checkpoint at time t_n");
  metrics_cmd->add_option("checkpoint", checkpoint)->required();
  metrics_cmd->add_option("t_n", t_n)->required();
  metrics_cmd->add_option("--config", config_path, "config for samples and problem data")
      ->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "one-dimensional loss landscape");
  std::string net_s = "u", coord_s, range_s = "-1:1";
  int grid = 101;
  sweep_cmd->add_option("checkpoint", checkpoint)->required();
  sweep_cmd->add_option("--net", net_s, "u (primal) or v (dual)");
  sweep_cmd->add_option("--coord", coord_s, "L,i,j for a weight or L,i for a bias")
      ->required();
  sweep_cmd->add_option("--range", range_s, "lo:hi");
  sweep_cmd->add_option("--grid", grid, "number of grid points");
  sweep_cmd->add_option("--config", config_path)->required();
  sweep_cmd->add_option("--prev", prev_path, "checkpoint of the previous time step");
  sweep_cmd->add_option("--p-h", p_h, "frozen dual scalar (primal sweeps)");
  sweep_cmd->add_option("--w", w_path, "primal checkpoint building the dual argument");
  sweep_cmd->add_option("--t", t_n, "time t_n");
  sweep_cmd->add_option("--out", out_path, "output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(solve_cmd)) return cmd_solve(config_path);
    if (app.got_subcommand(metrics_cmd)) return cmd_metrics(checkpoint, t_n, config_path);
    if (app.got_subcommand(sweep_cmd)) {
      SweepRequest req;
      if (net_s.size() != 1 || (net_s[0] != 'u' && net_s[0] != 'v'))
        throw ConfigError("--net must be u or v");
      req.net = net_s[0];
      req.coord = ParamCoord::parse(coord_s);
      const auto colon = range_s.find(':');
      if (colon == std::string::npos) throw ConfigError("--range must be lo:hi");
      req.lo = std::stod(range_s.substr(0, colon));
      req.hi = std::stod(range_s.substr(colon + 1));
      req.grid = grid;
      return cmd_sweep(checkpoint, config_path, req, prev_path, p_h, w_path, t_n,
                       out_path);
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
