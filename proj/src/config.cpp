#include "gradflow/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace gradflow {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

long parse_long(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw ConfigError("bad integer for key '" + key + "': " + v);
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw ConfigError("bad number for key '" + key + "': " + v);
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("bad boolean for key '" + key + "': " + v);
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    out.push_back(static_cast<int>(parse_long(key, trim(tok))));
  }
  if (out.empty()) throw ConfigError("empty list for key '" + key + "'");
  return out;
}

std::vector<int> default_frequencies(int d) {
  switch (d) {
    case 2: return {2, 2};
    case 3: return {2, 2, 3};
    case 5: return {2, 2, 1, 2, 3};
    case 7: return {2, 2, 1, 3, 2, 2, 3};
    default: return std::vector<int>(static_cast<std::size_t>(d), 2);
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string ParamCoord::to_string() const {
  if (is_bias()) return std::to_string(layer) + "," + std::to_string(row);
  return std::to_string(layer) + "," + std::to_string(row) + "," + std::to_string(col);
}

ParamCoord ParamCoord::parse(const std::string& text) {
  const std::vector<int> parts = parse_int_list("coord", text);
  ParamCoord c;
  if (parts.size() == 2) {
    c.layer = parts[0];
    c.row = parts[1];
    c.col = -1;
  } else if (parts.size() == 3) {
    c.layer = parts[0];
    c.row = parts[1];
    c.col = parts[2];
  } else {
    throw ConfigError("coordinate must be 'layer,row,col' or 'layer,row': " + text);
  }
  if (c.layer < 1 || c.layer > 5) throw ConfigError("coordinate layer out of range 1..5");
  return c;
}

void RunConfig::validate() const {
  trainer.validate();
  if (metric_cadence < 1) throw ConfigError("metric_cadence must be >= 1");
  if (sweep) {
    if (sweep->grid < 2) throw ConfigError("sweep_grid must be >= 2");
    if (!(sweep->lo < sweep->hi)) throw ConfigError("sweep range must have lo < hi");
    if (sweep->net != 'u' && sweep->net != 'v') throw ConfigError("sweep_net must be u or v");
  }
}

RunConfig resolve_config(const std::map<std::string, std::string>& kv) {
  static const char* known[] = {
      "d", "a", "kappa", "lambda", "dt", "n_steps", "m_u", "m_v", "mu_u", "mu_v",
      "n_interior", "n_boundary", "seed", "epochs_init", "epochs_dual",
      "epochs_primal", "k_max", "dual_term_mode", "deterministic",
      "resample_per_epoch", "persist_adam_state", "out_dir", "experiment",
      "metric_cadence", "rng", "sweep_net", "sweep_coord", "sweep_lo", "sweep_hi",
      "sweep_grid"};
  for (const auto& [key, value] : kv) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown key '" + key + "'");
  }
  auto get = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };

  RunConfig cfg;
  int d = 2;
  if (const auto* v = get("d")) d = static_cast<int>(parse_long("d", *v));
  if (d < 1) throw ConfigError("d must be >= 1");

  ProblemSpec& spec = cfg.trainer.spec;
  spec.d = d;
  spec.a = default_frequencies(d);
  if (const auto* v = get("a")) spec.a = parse_int_list("a", *v);
  if (static_cast<int>(spec.a.size()) != d)
    throw ConfigError("length of 'a' must equal d");
  spec.kappa = kappa_of(spec.a);
  if (const auto* v = get("kappa")) spec.kappa = parse_double("kappa", *v);
  spec.lambda = 100.0;
  if (const auto* v = get("lambda")) spec.lambda = parse_double("lambda", *v);
  spec.dt = 1e-4;
  if (const auto* v = get("dt")) spec.dt = parse_double("dt", *v);
  if (spec.dt <= 0.0) throw ConfigError("dt must be > 0");
  cfg.n_steps = 10;
  if (const auto* v = get("n_steps"))
    cfg.n_steps = static_cast<int>(parse_long("n_steps", *v));
  if (cfg.n_steps < 0) throw ConfigError("n_steps must be >= 0");
  spec.n_steps = cfg.n_steps;
  spec.T = cfg.n_steps * spec.dt;

  TrainerConfig& t = cfg.trainer;
  t.m_u = 60;
  t.m_v = 30;
  if (const auto* v = get("m_u")) t.m_u = static_cast<int>(parse_long("m_u", *v));
  if (const auto* v = get("m_v")) t.m_v = static_cast<int>(parse_long("m_v", *v));
  t.mu_u = 0.03;
  t.mu_v = 0.03;
  if (const auto* v = get("mu_u")) t.mu_u = parse_double("mu_u", *v);
  if (const auto* v = get("mu_v")) t.mu_v = parse_double("mu_v", *v);
  t.n_interior = (d <= 2) ? 10000 : 100000;
  t.n_boundary = 200 * d;
  if (const auto* v = get("n_interior"))
    t.n_interior = static_cast<int>(parse_long("n_interior", *v));
  if (const auto* v = get("n_boundary"))
    t.n_boundary = static_cast<int>(parse_long("n_boundary", *v));
  t.seed = 1;
  if (const auto* v = get("seed"))
    t.seed = static_cast<std::uint64_t>(parse_long("seed", *v));
  t.epochs_init = (d <= 3) ? 5000 : 50000;
  t.epochs_dual = 500;
  t.epochs_primal = 50;
  if (const auto* v = get("epochs_init")) t.epochs_init = parse_long("epochs_init", *v);
  if (const auto* v = get("epochs_dual")) t.epochs_dual = parse_long("epochs_dual", *v);
  if (const auto* v = get("epochs_primal"))
    t.epochs_primal = parse_long("epochs_primal", *v);
  t.k_max = 200;
  if (const auto* v = get("k_max")) t.k_max = static_cast<int>(parse_long("k_max", *v));
  if (const auto* v = get("dual_term_mode")) {
    if (*v == "frozen_v") t.dual_term_mode = DualTermMode::FrozenV;
    else if (*v == "constant_scalar") t.dual_term_mode = DualTermMode::ConstantScalar;
    else throw ConfigError("dual_term_mode must be frozen_v or constant_scalar");
  }
  if (const auto* v = get("deterministic")) t.deterministic = parse_bool("deterministic", *v);
  if (const auto* v = get("resample_per_epoch"))
    t.resample_per_epoch = parse_bool("resample_per_epoch", *v);
  if (const auto* v = get("persist_adam_state"))
    t.persist_adam_state = parse_bool("persist_adam_state", *v);
  if (const auto* v = get("rng")) {
    if (*v != "splitmix64") throw ConfigError("rng must be splitmix64");
  }
  if (const auto* v = get("out_dir")) cfg.out_dir = *v;
  if (const auto* v = get("experiment")) cfg.experiment = *v;
  if (const auto* v = get("metric_cadence"))
    cfg.metric_cadence = static_cast<int>(parse_long("metric_cadence", *v));

  if (get("sweep_coord")) {
    SweepRequest req;
    req.coord = ParamCoord::parse(*get("sweep_coord"));
    if (const auto* v = get("sweep_net")) {
      if (v->size() != 1 || (v->front() != 'u' && v->front() != 'v'))
        throw ConfigError("sweep_net must be u or v");
      req.net = v->front();
    }
    if (const auto* v = get("sweep_lo")) req.lo = parse_double("sweep_lo", *v);
    if (const auto* v = get("sweep_hi")) req.hi = parse_double("sweep_hi", *v);
    if (const auto* v = get("sweep_grid"))
      req.grid = static_cast<int>(parse_long("sweep_grid", *v));
    cfg.sweep = req;
  }
  cfg.validate();
  return cfg;
}

RunConfig parse_config_stream(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    kv[key] = value;
  }
  return resolve_config(kv);
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  return parse_config_stream(f);
}

void write_resolved(const RunConfig& cfg, std::ostream& os) {
  const TrainerConfig& t = cfg.trainer;
  const ProblemSpec& s = t.spec;
  os << "d = " << s.d << "\n";
  os << "a = ";
  for (std::size_t i = 0; i < s.a.size(); ++i) os << (i ? "," : "") << s.a[i];
  os << "\n";
  os << "kappa = " << fmt(s.kappa) << "\n";
  os << "lambda = " << fmt(s.lambda) << "\n";
  os << "dt = " << fmt(s.dt) << "\n";
  os << "n_steps = " << cfg.n_steps << "\n";
  os << "m_u = " << t.m_u << "\n";
  os << "m_v = " << t.m_v << "\n";
  os << "mu_u = " << fmt(t.mu_u) << "\n";
  os << "mu_v = " << fmt(t.mu_v) << "\n";
  os << "n_interior = " << t.n_interior << "\n";
  os << "n_boundary = " << t.n_boundary << "\n";
  os << "seed = " << t.seed << "\n";
  os << "epochs_init = " << t.epochs_init << "\n";
  os << "epochs_dual = " << t.epochs_dual << "\n";
  os << "epochs_primal = " << t.epochs_primal << "\n";
  os << "k_max = " << t.k_max << "\n";
  os << "dual_term_mode = "
     << (t.dual_term_mode == DualTermMode::FrozenV ? "frozen_v" : "constant_scalar")
     << "\n";
  os << "deterministic = " << (t.deterministic ? "true" : "false") << "\n";
  os << "resample_per_epoch = " << (t.resample_per_epoch ? "true" : "false") << "\n";
  os << "persist_adam_state = " << (t.persist_adam_state ? "true" : "false") << "\n";
  os << "rng = splitmix64\n";
  os << "out_dir = " << cfg.out_dir << "\n";
  os << "experiment = " << cfg.experiment << "\n";
  os << "metric_cadence = " << cfg.metric_cadence << "\n";
  if (cfg.sweep) {
    os << "sweep_net = " << cfg.sweep->net << "\n";
    os << "sweep_coord = " << cfg.sweep->coord.to_string() << "\n";
    os << "sweep_lo = " << fmt(cfg.sweep->lo) << "\n";
    os << "sweep_hi = " << fmt(cfg.sweep->hi) << "\n";
    os << "sweep_grid = " << cfg.sweep->grid << "\n";
  }
}

int run_solve(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  {
    std::ofstream f(cfg.out_dir + "/config.resolved");
    write_resolved(cfg, f);
  }
  TrainerConfig tcfg = cfg.trainer;
  tcfg.checkpoint_dir = cfg.out_dir;
  const SampleSet samples = SampleSet::create(tcfg.spec.d, tcfg.n_interior,
                                              tcfg.n_boundary, tcfg.seed);
  TrainingLog log;
  int status = 0;
  try {
    solve(tcfg, samples, log);
  } catch (const std::exception& err) {
    std::cerr << "solve failed: " << err.what() << "\n";
    status = 1;
  }
  {
    std::ofstream f(cfg.out_dir + "/training_log.csv");
    log.write_csv(f);
  }
  {
    TrainingLog thinned = log;
    if (cfg.metric_cadence > 1) {
      thinned.step_metrics.clear();
      for (const StepMetrics& sm : log.step_metrics) {
        if (sm.n == 0 || sm.n % cfg.metric_cadence == 0 ||
            sm.n == cfg.n_steps)
          thinned.step_metrics.push_back(sm);
      }
    }
    std::ofstream f(cfg.out_dir + "/metrics.csv");
    thinned.write_metrics_csv(f);
  }
  return status;
}

std::vector<std::pair<double, double>> landscape_sweep(const NetworkParams& checkpoint,
                                                       const SweepRequest& req,
                                                       const SweepContext& ctx) {
  if (!ctx.samples || !ctx.spec)
    throw std::invalid_argument("landscape_sweep: missing context");
  ParamVars layout;
  layout.d = checkpoint.d;
  layout.m = checkpoint.m;
  const ParamCoord& c = req.coord;
  // bounds check against the checkpoint's shapes
  const int m = checkpoint.m, d = checkpoint.d;
  const int rows = (c.layer == 5) ? 1 : m;
  const int cols = (c.layer == 1) ? d : ((c.layer == 5) ? m : m);
  if (c.row < 0 || c.row >= rows)
    throw std::invalid_argument("landscape_sweep: row out of range");
  if (!c.is_bias() && (c.col < 0 || c.col >= cols))
    throw std::invalid_argument("landscape_sweep: col out of range");
  if (c.is_bias() && c.layer == 5 && c.row != 0)
    throw std::invalid_argument("landscape_sweep: b5 is scalar");
  const int idx = c.is_bias() ? layout.flat_index_b(c.layer, c.row)
                              : layout.flat_index_w(c.layer, c.row, c.col);

  NetworkParams p = checkpoint;
  Eigen::VectorXd flat = p.flatten();
  CloudBatch batch(*ctx.samples);
  BatchNet net(p.d, p.m, batch.X.cols());
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(req.grid));
  for (int g = 0; g < req.grid; ++g) {
    const double val = req.lo + (req.hi - req.lo) * g / (req.grid - 1);
    flat[idx] = val;
    p.unflatten(flat);
    double obj;
    if (req.net == 'u') {
      FrozenDual dual;
      dual.mode = DualTermMode::ConstantScalar;
      dual.p_h = ctx.p_h;
      obj = be_value_grad(net, p, batch, ctx.u_prev, dual, *ctx.spec, ctx.t_n, false)
                .breakdown.total;
    } else {
      obj = -dual_value_grad(net, p, batch, ctx.dual_arg_interior, *ctx.spec, false)
                 .value;
    }
    out.emplace_back(val, obj);
  }
  return out;
}

}  // namespace gradflow
