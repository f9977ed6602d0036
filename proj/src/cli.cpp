#include "pmhmc/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace pmhmc {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::size_t> n;
  std::optional<double> h;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> iterations;
  std::optional<std::string> out;
  std::optional<std::string> chain;
  bool dump_weights = false;
  bool dump_trajectory = false;
};

std::ofstream open_output(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  return f;
}

std::string join(const std::vector<std::size_t>& v) {
  std::ostringstream s;
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? ", " : "") << v[i];
  return s.str();
}

fs::path out_dir(const Config& cfg) {
  fs::path dir = cfg.get_string("out_dir", ".");
  fs::create_directories(dir);
  return dir;
}

std::uint64_t seed_of(const Config& cfg) { return cfg.get_size("seed", 1); }

void apply_overrides(Config& cfg, const Options& o, bool n_is_list) {
  if (o.seed) cfg.set("seed", std::to_string(*o.seed));
  if (!o.n.empty()) {
    if (n_is_list) {
      cfg.set("convergence.n", join(o.n));
    } else {
      if (o.n.size() != 1) throw ConfigError("--n may be given only once for this subcommand");
      cfg.set("sampler.n", std::to_string(o.n.front()));
    }
  }
  if (o.h) {
    std::ostringstream s;
    s << std::setprecision(17) << *o.h;
    cfg.set("sampler.h", s.str());
  }
  if (o.steps) cfg.set("sampler.steps", std::to_string(*o.steps));
  if (o.iterations) cfg.set("sampler.iterations", std::to_string(*o.iterations));
  if (o.out) cfg.set("out_dir", *o.out);
  if (o.chain) cfg.set("diagnose.chain", *o.chain);
}

fs::path resolve_relative(const std::string& path, const Config& cfg) {
  fs::path p(path);
  if (p.is_relative() && cfg.has("config_dir")) p = fs::path(cfg.get_string("config_dir")) / p;
  return p;
}

Vector initial_theta(const Config& cfg, const ModelSpec& spec, std::size_t dim) {
  if (auto init = cfg.get_optional_list("sampler.init")) {
    if (init->size() != dim)
      throw ConfigError("sampler.init has " + std::to_string(init->size()) + " entries, the model has " +
                        std::to_string(dim) + " parameters");
    return Eigen::Map<const Vector>(init->data(), static_cast<Eigen::Index>(dim));
  }
  return default_initial_theta(spec, cfg.get_size("data.seed", seed_of(cfg)));
}

int run_generate(const Config& cfg, std::ostream& out) {
  const ModelSpec spec = model_spec_from_config(cfg);
  const Dataset data = generate_synthetic_data(spec, cfg.get_size("data.seed", seed_of(cfg)));
  const fs::path path = out_dir(cfg) / "data.csv";
  auto f = open_output(path);
  write_dataset_csv(f, data);
  out << "wrote " << data.size() << " " << to_string(spec.kind) << " observations to " << path.string() << '\n';
  return exit_ok;
}

void dump_weights(const LatentVariableModel& model, const Vector& theta, const SamplerConfig& sc, const fs::path& dir,
                  std::ostream& out) {
  Rng rng(sc.seed, 0xd0);
  const std::size_t N = sc.kind == SamplerKind::joint_hmc ? 1 : sc.N;
  const PseudoMarginalState s = initial_pm_state(model, theta, N, rng);
  const fs::path path = dir / "weights.csv";
  auto f = open_output(path);
  write_weight_matrix_csv(f, weight_matrix(model, s.theta, s.u));
  out << "wrote weight matrix at the initial state to " << path.string() << '\n';
}

void dump_trajectory(const LatentVariableModel& model, const Vector& theta, const SamplerConfig& sc,
                     const fs::path& dir, std::ostream& out) {
  Rng rng(sc.seed, 0xd1);
  const std::size_t N = sc.kind == SamplerKind::joint_hmc ? 1 : sc.N;
  const PseudoMarginalState s = initial_pm_state(model, theta, N, rng);
  ExtendedState x{s.theta, Vector(theta.size()), s.u, AuxiliaryBlock(s.u.shape())};
  for (Eigen::Index i = 0; i < x.rho.size(); ++i) x.rho[i] = rng.normal();
  for (Eigen::Index i = 0; i < x.p.flat().size(); ++i) x.p.flat()[i] = rng.normal();
  std::vector<double> times{0.0};
  std::vector<ExtendedState> states{x};
  std::vector<double> hs{hamiltonian_from_log_phat(model, x, s.log_phat).total};
  const TrajectoryResult r = strang_trajectory(model, x, sc.integrator, [&](std::size_t step, const ExtendedState& st) {
    times.push_back(static_cast<double>(step) * sc.integrator.h);
    states.push_back(st);
    hs.push_back(extended_hamiltonian(model, st).total);
  });
  const fs::path path = dir / "trajectory.csv";
  auto f = open_output(path);
  write_trajectory_csv(f, times, states, hs);
  out << "wrote one Strang trajectory (" << states.size() - 1 << " steps" << (r.aborted ? ", aborted" : "")
      << ") to " << path.string() << '\n';
}

int run_sample(const Config& cfg, const Options& o, std::ostream& out) {
  const ModelSpec spec = model_spec_from_config(cfg);
  SamplerConfig sc = sampler_config_from(cfg);
  const std::size_t chains = cfg.get_size("sampler.chains", 1);
  if (chains < 1) throw ConfigError("sampler.chains must be at least 1");
  const auto model = make_model(spec, load_or_generate_data(cfg, spec));
  const Vector theta0 = initial_theta(cfg, spec, model->dim_theta());
  const fs::path dir = out_dir(cfg);
  const auto names = parameter_names(spec);

  if (o.dump_weights) dump_weights(*model, theta0, sc, dir, out);
  if (o.dump_trajectory) dump_trajectory(*model, theta0, sc, dir, out);

  std::vector<Chain> results;
  if (chains == 1)
    results.push_back(run_chain(*model, sc, theta0, sc.progress_every ? &out : nullptr));
  else
    results = run_chains(*model, sc, theta0, chains);

  for (std::size_t c = 0; c < results.size(); ++c) {
    const std::string suffix = chains == 1 ? "" : "_" + std::to_string(c);
    const fs::path chain_path = dir / ("chain" + suffix + ".csv");
    auto f = open_output(chain_path);
    write_chain_csv(f, results[c]);
    auto s = open_output(dir / ("summary" + suffix + ".txt"));
    write_summary(s, results[c], names);
    write_summary(out, results[c], names);
    out << "seconds/iteration  " << std::scientific << std::setprecision(3)
        << results[c].seconds / static_cast<double>(std::max<std::size_t>(results[c].records.size(), 1))
        << std::defaultfloat << '\n';
    out << "wrote " << chain_path.string() << '\n';
  }
  return exit_ok;
}

int run_convergence(const Config& cfg, const Options& o, std::ostream& out) {
  const FlowExperimentConfig fc = flow_config_from(cfg);
  const fs::path dir = out_dir(cfg);
  const auto samples = flow_error_experiment(fc, [&](const FlowErrorSample& s) {
    out << "N=" << s.N << " seed=" << s.seed << " sup_error=" << std::setprecision(6) << s.sup_error
        << (s.aborted ? " (aborted)" : "") << '\n';
  });
  {
    auto f = open_output(dir / "flow_errors.csv");
    write_flow_errors_csv(f, samples);
  }
  const SlopeFit fit = fit_slope(samples);
  {
    auto f = open_output(dir / "slope.txt");
    write_slope_summary(f, fit);
  }
  write_slope_summary(out, fit);
  if (o.dump_trajectory) {
    const GaussianHierarchicalModel model = flow_experiment_model(fc);
    for (std::size_t N : fc.Ns) {
      const fs::path path = dir / ("fan_N" + std::to_string(N) + ".csv");
      auto f = open_output(path);
      write_fan_csv(f, flow_trajectory(model, N, fc.first_seed, fc));
    }
    out << "wrote trajectory fans for seed " << fc.first_seed << '\n';
  }
  return exit_ok;
}

int run_diagnose(const Config& cfg, std::ostream& out) {
  const fs::path dir = out_dir(cfg);
  const fs::path chain_path =
      cfg.has("diagnose.chain") ? fs::path(cfg.get_string("diagnose.chain")) : dir / "chain.csv";
  std::ifstream in(chain_path);
  if (!in) throw std::runtime_error("cannot read chain '" + chain_path.string() + "'");
  const std::size_t burn_in = cfg.get_size("sampler.burn_in", 0);
  const Chain chain = read_chain_csv(in, burn_in);
  const std::size_t max_lag = cfg.get_size("diagnose.max_lag", 100);

  std::vector<std::string> names;
  std::optional<ModelSpec> spec;
  if (cfg.has("model.name")) {
    spec = model_spec_from_config(cfg);
    names = parameter_names(*spec);
  }
  const AcfReport rep = acf_report(chain, max_lag);
  {
    auto f = open_output(dir / "acf.csv");
    write_acf_csv(f, rep);
  }

  std::ostringstream report;
  report << std::setprecision(6);
  std::size_t kept = 0;
  for (const auto& r : chain.records) kept += r.burn_in ? 0 : 1;
  report << "samples            " << kept << " after burn-in of " << burn_in << '\n';
  report << "acceptance rate    " << chain.acceptance_rate() << '\n';
  report << "ESS is a rough guide only; it is unreliable on multimodal or slowly mixing chains.\n";
  report << std::left << std::setw(14) << "parameter" << std::right << std::setw(14) << "mean" << std::setw(14) << "sd"
         << std::setw(14) << "ess" << std::setw(14) << "acf[1]" << '\n';
  for (std::size_t j = 0; j < chain.dim(); ++j) {
    const auto tr = chain.trace(j);
    double mean = 0.0, var = 0.0;
    for (double v : tr) mean += v;
    mean /= static_cast<double>(std::max<std::size_t>(tr.size(), 1));
    for (double v : tr) var += (v - mean) * (v - mean);
    var /= static_cast<double>(std::max<std::size_t>(tr.size(), 2) - 1);
    const auto& a = rep.acf[j];
    report << std::left << std::setw(14) << (j < names.size() ? names[j] : "theta_" + std::to_string(j))
           << std::right << std::setw(14) << mean << std::setw(14) << std::sqrt(var) << std::setw(14) << rep.ess[j]
           << std::setw(14) << (a.undefined ? std::string("undefined") : std::to_string(a.acf.size() > 1 ? a.acf[1] : 1.0))
           << '\n';
  }

  if (spec && spec->kind == ModelKind::gaussian) {
    const auto model = make_model(*spec, load_or_generate_data(cfg, *spec));
    const NormalSummary post = static_cast<const GaussianHierarchicalModel&>(*model).posterior();
    report << "analytic posterior mean " << post.mean << " sd " << post.sd << '\n';
    try {
      const KsResult ks = ks_against_analytic(chain.trace(0), post);
      report << "KS statistic " << ks.statistic << " p-value " << ks.p_value << " (thin " << ks.thin << ", "
             << ks.samples_used << " samples)\n";
    } catch (const DiagnosticError& e) {
      report << "KS test skipped: " << e.what() << '\n';
    }
  }
  const auto regions = mode_regions_from(cfg);
  if (!regions.empty()) {
    const ModeOccupancy occ = mode_occupancy(chain, regions);
    for (std::size_t r = 0; r < occ.names.size(); ++r)
      report << "mode " << occ.names[r] << " occupancy " << occ.fractions[r] << '\n';
  }
  auto f = open_output(dir / "diagnostics.txt");
  f << report.str();
  out << report.str();
  return exit_ok;
}

}  // namespace

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "model.name", "model.T", "model.sigma0_sq", "model.sigma1_sq", "model.sigma2_sq", "model.theta", "model.mu",
      "model.sigma", "model.lambda", "model.n_i", "model.p_cov", "model.beta", "model.mu1", "model.mu2",
      "model.lambda1", "model.lambda2", "model.w1", "model.prior_variance", "model.proposal_sd", "seed", "out_dir",
      "data_file", "data.seed", "sampler.kind", "sampler.n", "sampler.h", "sampler.steps", "sampler.iterations",
      "sampler.burn_in", "sampler.jitter", "sampler.tune_h", "sampler.target_accept", "sampler.scales",
      "sampler.tune_scales", "sampler.tuning_iterations", "sampler.slice_per_datum", "sampler.theta_sweeps",
      "sampler.init", "sampler.progress_every", "sampler.chains", "convergence.n", "convergence.seeds",
      "convergence.first_seed", "convergence.t_end", "convergence.dt", "convergence.grid_points",
      "convergence.threads", "diagnose.chain", "diagnose.max_lag", "diagnose.lambda_threshold"};
  return keys;
}

void check_config_keys(const Config& cfg) {
  for (const auto& [key, value] : cfg.entries()) {
    if (key.rfind("diagnose.region.", 0) == 0) continue;
    if (!known_config_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
}

SamplerConfig sampler_config_from(const Config& cfg) {
  SamplerConfig s;
  s.kind = parse_sampler_kind(cfg.get_string("sampler.kind", "pm_hmc"));
  s.N = cfg.get_size("sampler.n", s.N);
  s.integrator.h = cfg.get_double("sampler.h", s.integrator.h);
  s.integrator.L = cfg.get_size("sampler.steps", s.integrator.L);
  s.iterations = cfg.get_size("sampler.iterations", s.iterations);
  s.burn_in = cfg.get_size("sampler.burn_in", s.burn_in);
  s.jitter = cfg.get_bool("sampler.jitter", s.jitter);
  s.tune_step_size = cfg.get_bool("sampler.tune_h", s.tune_step_size);
  s.target_acceptance = cfg.get_double("sampler.target_accept", s.target_acceptance);
  if (auto sc = cfg.get_optional_list("sampler.scales")) s.proposal_scales = *sc;
  s.tune_scales = cfg.get_bool("sampler.tune_scales", s.tune_scales);
  s.tuning_iterations = cfg.get_size("sampler.tuning_iterations", s.tuning_iterations);
  s.slice_per_datum = cfg.get_bool("sampler.slice_per_datum", s.slice_per_datum);
  s.theta_sweeps = cfg.get_size("sampler.theta_sweeps", s.theta_sweeps);
  s.progress_every = cfg.get_size("sampler.progress_every", s.progress_every);
  s.seed = seed_of(cfg);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

FlowExperimentConfig flow_config_from(const Config& cfg) {
  FlowExperimentConfig f;
  if (auto ns = cfg.get_optional_list("convergence.n")) {
    f.Ns.clear();
    for (double v : *ns) {
      if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("convergence.n entries must be positive integers");
      f.Ns.push_back(static_cast<std::size_t>(v));
    }
  }
  f.seeds_per_N = cfg.get_size("convergence.seeds", f.seeds_per_N);
  f.first_seed = cfg.get_size("convergence.first_seed", seed_of(cfg));
  f.t_end = cfg.get_double("convergence.t_end", f.t_end);
  f.dt_fine = cfg.get_double("convergence.dt", f.dt_fine);
  f.grid_points = cfg.get_size("convergence.grid_points", f.grid_points);
  f.threads = cfg.get_size("convergence.threads", f.threads);
  if (cfg.has("model.name") && parse_model_kind(cfg.get_string("model.name")) != ModelKind::gaussian)
    throw ConfigError("the convergence experiment needs model.name = gaussian");
  f.T = cfg.get_size("model.T", f.T);
  f.params.sigma0_sq = cfg.get_double("model.sigma0_sq", f.params.sigma0_sq);
  f.params.sigma1_sq = cfg.get_double("model.sigma1_sq", f.params.sigma1_sq);
  f.params.sigma2_sq = cfg.get_double("model.sigma2_sq", f.params.sigma2_sq);
  f.data_seed = cfg.get_size("data.seed", f.data_seed);
  try {
    f.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return f;
}

std::vector<ModeRegion> mode_regions_from(const Config& cfg) {
  std::vector<ModeRegion> regions;
  if (cfg.has("diagnose.lambda_threshold")) regions = lambda_threshold_regions(cfg.get_double("diagnose.lambda_threshold"));
  for (const auto& [key, value] : cfg.entries()) {
    if (key.rfind("diagnose.region.", 0) != 0) continue;
    ModeRegion r;
    r.name = key.substr(std::string("diagnose.region.").size());
    std::stringstream all(value);
    std::string part;
    while (std::getline(all, part, ';')) {
      Config one;
      one.set("plane", part);
      const auto abc = one.get_list("plane");
      if (abc.size() != 3) throw ConfigError("config key '" + key + "': each half-plane needs three numbers a, b, c");
      r.planes.push_back({abc[0], abc[1], abc[2]});
    }
    if (r.planes.empty()) throw ConfigError("config key '" + key + "': no half-planes given");
    regions.push_back(std::move(r));
  }
  return regions;
}

Dataset load_or_generate_data(const Config& cfg, const ModelSpec& spec) {
  if (cfg.has("data_file")) {
    const fs::path path = resolve_relative(cfg.get_string("data_file"), cfg);
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open data file '" + path.string() + "'");
    Dataset d = read_dataset_csv(in, spec.kind);
    if (spec.kind == ModelKind::glmm && d.glmm.covariate_dim() != spec.covariate_dim)
      throw ConfigError("data file has " + std::to_string(d.glmm.covariate_dim()) + " covariates, model.p_cov is " +
                        std::to_string(spec.covariate_dim));
    return d;
  }
  return generate_synthetic_data(spec, cfg.get_size("data.seed", seed_of(cfg)));
}

std::vector<std::string> parameter_names(const ModelSpec& spec) {
  switch (spec.kind) {
    case ModelKind::gaussian: return {"theta"};
    case ModelKind::diffraction: return {"mu", "log_sigma", "log_lambda"};
    case ModelKind::glmm: {
      std::vector<std::string> n;
      for (std::size_t c = 0; c < spec.covariate_dim; ++c) n.push_back("beta_" + std::to_string(c));
      for (const char* s : {"mu1", "mu2", "log_lambda1", "log_lambda2", "logit_w1"}) n.emplace_back(s);
      return n;
    }
  }
  return {};
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pseudo-marginal HMC sampler and experiment driver", "pmhmc"};
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);
  Options o;
  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("config", o.config_path, "key = value configuration file")->required();
    sub->add_option("--seed", o.seed, "override seed");
    sub->add_option("--out", o.out, "override out_dir");
  };
  auto* gen = app.add_subcommand("generate", "write a synthetic dataset CSV");
  add_common(gen);
  auto* sample = app.add_subcommand("sample", "run a chain and write chain CSV and summary");
  add_common(sample);
  sample->add_option("--n", o.n, "importance samples per datum");
  sample->add_option("--h", o.h, "integrator step size");
  sample->add_option("--steps", o.steps, "integrator steps per trajectory");
  sample->add_option("--iterations", o.iterations, "total iterations including burn-in");
  sample->add_flag("--dump-weights", o.dump_weights, "write the weight matrix at the initial state");
  sample->add_flag("--dump-trajectory", o.dump_trajectory, "write one Strang trajectory from the initial state");
  auto* conv = app.add_subcommand("convergence", "run the flow-convergence experiment");
  add_common(conv);
  conv->add_option("--n", o.n, "importance sample size (repeatable)");
  conv->add_flag("--dump-trajectory", o.dump_trajectory, "write one trajectory fan per N");
  auto* diag = app.add_subcommand("diagnose", "ACF, ESS, KS and mode reports for a chain CSV");
  add_common(diag);
  diag->add_option("--chain", o.chain, "chain CSV (default: out_dir/chain.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    Config cfg = Config::load(o.config_path);
    check_config_keys(cfg);
    cfg.set("config_dir", fs::path(o.config_path).parent_path().string());
    const bool conv_mode = app.got_subcommand(conv);
    apply_overrides(cfg, o, conv_mode);
    if (app.got_subcommand(gen)) return run_generate(cfg, out);
    if (app.got_subcommand(sample)) return run_sample(cfg, o, out);
    if (conv_mode) return run_convergence(cfg, o, out);
    return run_diagnose(cfg, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const DiagnosticError& e) {
    err << "error: " << e.what() << '\n';
    return exit_runtime;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << '\n';
    return exit_config;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_runtime;
  }
}

int cli_main(int argc, const char* const* argv) { return cli_main(argc, argv, std::cout, std::cerr); }

}  // namespace pmhmc
