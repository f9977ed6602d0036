#include "pmhmc/convergence.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "pmhmc/datasets.hpp"
#include "pmhmc/rng.hpp"

namespace pmhmc {

namespace {
constexpr std::uint64_t kMarginalStream = 0xf10;
constexpr std::uint64_t kAuxStreamBase = 0xa0000;

const GaussianHierarchicalModel& as_gaussian(const LatentVariableModel& model) {
  const auto* g = dynamic_cast<const GaussianHierarchicalModel*>(&model);
  if (!g) throw std::invalid_argument("exact marginal flow is only available for the gaussian model, not '" + model.name() + "'");
  return *g;
}
}  // namespace

MarginalPhase exact_marginal_flow(const LatentVariableModel& model, MarginalPhase start, double t) {
  const NormalSummary post = as_gaussian(model).posterior();
  const double m = post.mean;
  const double s = post.sd;
  const double c = std::cos(t / s);
  const double sn = std::sin(t / s);
  return {m + (start.theta - m) * c + s * start.rho * sn, -(start.theta - m) / s * sn + start.rho * c};
}

void FlowExperimentConfig::validate() const {
  if (Ns.empty()) throw std::invalid_argument("convergence: N list is empty");
  for (std::size_t n : Ns)
    if (n < 1) throw std::invalid_argument("convergence: every N must be at least 1");
  if (seeds_per_N < 1) throw std::invalid_argument("convergence: seeds_per_N must be at least 1");
  if (!(t_end > 0.0)) throw std::invalid_argument("convergence: t_end must be positive");
  if (!(dt_fine > 0.0)) throw std::invalid_argument("convergence: dt_fine must be positive");
  if (grid_points < 2) throw std::invalid_argument("convergence: grid needs at least two points");
  if (T < 1) throw std::invalid_argument("convergence: T must be at least 1");
}

GaussianHierarchicalModel flow_experiment_model(const FlowExperimentConfig& cfg) {
  ModelSpec spec;
  spec.kind = ModelKind::gaussian;
  spec.T = cfg.T;
  spec.gaussian = cfg.params;
  Dataset data = generate_synthetic_data(spec, cfg.data_seed);
  return GaussianHierarchicalModel(cfg.params, std::move(data.y));
}

FlowFan flow_trajectory(const GaussianHierarchicalModel& model, std::size_t N, std::uint64_t seed,
                        const FlowExperimentConfig& cfg) {
  const NormalSummary post = model.posterior();
  Rng marginal(seed, kMarginalStream);
  const MarginalPhase start{post.mean + post.sd * marginal.normal(), marginal.normal()};

  Rng aux(seed, kAuxStreamBase + N);
  const AuxShape shape{model.data_count(), N, 1};
  ExtendedState s0;
  s0.theta = Vector::Constant(1, start.theta);
  s0.rho = Vector::Constant(1, start.rho);
  s0.u = AuxiliaryBlock::standard_normal(shape, aux);
  s0.p = AuxiliaryBlock::standard_normal(shape, aux);

  const DenseTrajectory traj = reference_ode_solve(model, s0, cfg.t_end, cfg.dt_fine, cfg.grid_points);
  FlowFan fan;
  fan.N = N;
  fan.seed = seed;
  fan.times = traj.times;
  fan.theta_hat.reserve(traj.times.size());
  fan.theta_exact.reserve(traj.times.size());
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    fan.theta_hat.push_back(traj.theta[i][0]);
    fan.theta_exact.push_back(exact_marginal_flow(model, start, traj.times[i]).theta);
  }
  if (traj.aborted) fan.theta_hat.push_back(std::numeric_limits<double>::quiet_NaN());
  return fan;
}

double sup_error(const FlowFan& fan) {
  if (fan.theta_hat.size() != fan.theta_exact.size()) return std::numeric_limits<double>::quiet_NaN();
  double e = 0.0;
  for (std::size_t i = 0; i < fan.theta_hat.size(); ++i) {
    const double d = std::abs(fan.theta_hat[i] - fan.theta_exact[i]);
    if (!std::isfinite(d)) return std::numeric_limits<double>::quiet_NaN();
    e = std::max(e, d);
  }
  return e;
}

std::vector<FlowErrorSample> flow_error_experiment(const FlowExperimentConfig& cfg,
                                                   const std::function<void(const FlowErrorSample&)>& on_sample) {
  cfg.validate();
  const GaussianHierarchicalModel model = flow_experiment_model(cfg);
  std::vector<FlowErrorSample> out;
  for (std::size_t n : cfg.Ns)
    for (std::size_t s = 0; s < cfg.seeds_per_N; ++s) out.push_back({n, cfg.first_seed + s, 0.0, false});

  std::atomic<std::size_t> next{0};
  std::mutex report;
  auto worker = [&] {
    for (std::size_t i = next++; i < out.size(); i = next++) {
      FlowErrorSample& cell = out[i];
      cell.sup_error = sup_error(flow_trajectory(model, cell.N, cell.seed, cfg));
      cell.aborted = !std::isfinite(cell.sup_error);
      if (on_sample) {
        std::lock_guard<std::mutex> lock(report);
        on_sample(cell);
      }
    }
  };
  std::size_t threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, out.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return out;
}

SlopeFit fit_slope(const std::vector<FlowErrorSample>& samples) {
  SlopeFit fit;
  fit.samples = samples;
  std::vector<double> xs, ys;
  for (const auto& s : samples) {
    if (s.aborted || !(s.sup_error > 0.0)) continue;
    xs.push_back(std::log2(static_cast<double>(s.N)));
    ys.push_back(std::log2(s.sup_error));
    if (std::find(fit.Ns.begin(), fit.Ns.end(), s.N) == fit.Ns.end()) fit.Ns.push_back(s.N);
  }
  if (fit.Ns.size() < 2) throw std::invalid_argument("fit_slope: need at least two distinct N values");
  std::sort(fit.Ns.begin(), fit.Ns.end());

  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;

  for (std::size_t N : fit.Ns) {
    std::vector<double> e;
    for (const auto& s : samples)
      if (s.N == N && !s.aborted && s.sup_error > 0.0) e.push_back(s.sup_error);
    std::sort(e.begin(), e.end());
    const std::size_t h = e.size() / 2;
    fit.median_error.push_back(e.size() % 2 ? e[h] : 0.5 * (e[h - 1] + e[h]));
  }
  return fit;
}

void write_flow_errors_csv(std::ostream& out, const std::vector<FlowErrorSample>& samples) {
  out << std::setprecision(17) << "N,seed,sup_error\n";
  for (const auto& s : samples)
    out << s.N << ',' << s.seed << ',' << (s.aborted ? std::numeric_limits<double>::quiet_NaN() : s.sup_error) << '\n';
}

void write_fan_csv(std::ostream& out, const FlowFan& fan) {
  out << std::setprecision(17) << "t,theta_hat,theta_exact\n";
  const std::size_t n = std::min({fan.times.size(), fan.theta_hat.size(), fan.theta_exact.size()});
  for (std::size_t i = 0; i < n; ++i) out << fan.times[i] << ',' << fan.theta_hat[i] << ',' << fan.theta_exact[i] << '\n';
}

void write_slope_summary(std::ostream& out, const SlopeFit& fit) {
  std::size_t used = 0, aborted = 0;
  for (const auto& s : fit.samples) (s.aborted ? aborted : used)++;
  out << "slope      " << std::setprecision(6) << fit.slope << '\n';
  out << "intercept  " << fit.intercept << '\n';
  out << "samples    " << used << " (" << aborted << " aborted)\n";
  out << "N          median sup_error\n";
  for (std::size_t i = 0; i < fit.Ns.size(); ++i)
    out << std::left << std::setw(11) << fit.Ns[i] << std::right << fit.median_error[i] << '\n';
}

}  // namespace pmhmc
