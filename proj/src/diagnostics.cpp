#include "pmhmc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

namespace pmhmc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Centered {
  std::vector<double> d;
  double c0 = 0.0;  ///< lag-0 autocovariance
};

Centered center(const std::vector<double>& x) {
  Centered c;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  c.d.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) c.d[i] = x[i] - mean;
  for (double v : c.d) c.c0 += v * v;
  c.c0 /= static_cast<double>(x.size());
  return c;
}

double autocovariance(const std::vector<double>& d, std::size_t lag) {
  double s = 0.0;
  for (std::size_t i = 0; i + lag < d.size(); ++i) s += d[i] * d[i + lag];
  return s / static_cast<double>(d.size());
}

bool is_constant(const Centered& c, const std::vector<double>& x) {
  const double scale = std::max(1.0, std::abs(x.front()));
  return !(c.c0 > 1e-28 * scale * scale);
}

}  // namespace

Autocorrelation autocorrelation(const std::vector<double>& x, std::size_t max_lag) {
  if (x.size() <= max_lag) throw DiagnosticError("autocorrelation: chain must be longer than the maximum lag");
  Autocorrelation r;
  const Centered c = center(x);
  if (is_constant(c, x)) {
    r.undefined = true;
    return r;
  }
  r.acf.resize(max_lag + 1);
  r.acf[0] = 1.0;
  for (std::size_t k = 1; k <= max_lag; ++k) r.acf[k] = autocovariance(c.d, k) / c.c0;
  return r;
}

double ess(const std::vector<double>& x) {
  if (x.size() < 100) throw DiagnosticError("ess: chain too short (fewer than 100 samples)");
  const Centered c = center(x);
  if (is_constant(c, x)) throw DiagnosticError("ess: constant chain");
  const std::size_t n = x.size();
  double tau = -1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    double gamma = (autocovariance(c.d, 2 * m) + autocovariance(c.d, 2 * m + 1)) / c.c0;
    if (!(gamma > 0.0)) break;
    gamma = std::min(gamma, prev);  // initial monotone sequence
    prev = gamma;
    tau += 2.0 * gamma;
  }
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(n)));
  return static_cast<double>(n) / tau;
}

TraceSummary summarize_trace(const std::vector<double>& x) {
  TraceSummary s;
  if (x.empty()) throw DiagnosticError("summarize_trace: empty chain");
  s.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double v = 0.0;
  for (double e : x) v += (e - s.mean) * (e - s.mean);
  s.sd = x.size() > 1 ? std::sqrt(v / static_cast<double>(x.size() - 1)) : 0.0;
  s.ess = ess(x);
  s.mcse = s.sd / std::sqrt(s.ess);
  return s;
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.0) {
    // P(K <= l) = sqrt(2 pi)/l sum_k exp(-(2k-1)^2 pi^2 / (8 l^2))
    const double pi = 3.14159265358979323846;
    double cdf = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double a = (2.0 * k - 1.0) * pi / lambda;
      cdf += std::exp(-a * a / 8.0);
    }
    cdf *= std::sqrt(2.0 * pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_normal(std::vector<double> x, double mean, double sd) {
  if (x.empty()) throw DiagnosticError("ks_normal: no samples");
  if (!(sd > 0.0)) throw DiagnosticError("ks_normal: reference sd must be positive");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = 0.5 * std::erfc(-(x[i] - mean) / (sd * std::sqrt(2.0)));
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  KsResult r;
  r.statistic = d;
  r.samples_used = x.size();
  const double sn = std::sqrt(n);
  // Stephens' finite-sample correction to the asymptotic distribution.
  r.p_value = kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
  return r;
}

KsResult ks_against_analytic(const std::vector<double>& chain, const NormalSummary& posterior) {
  const double e = ess(chain);
  if (e < 50.0) throw DiagnosticError("ks_against_analytic: fewer than 50 effective samples");
  const auto thin = static_cast<std::size_t>(std::max(1.0, std::ceil(static_cast<double>(chain.size()) / e)));
  std::vector<double> kept;
  for (std::size_t i = 0; i < chain.size(); i += thin) kept.push_back(chain[i]);
  KsResult r = ks_normal(std::move(kept), posterior.mean, posterior.sd);
  r.thin = thin;
  return r;
}

bool ModeRegion::contains(double sigma, double lambda) const {
  return std::all_of(planes.begin(), planes.end(), [&](const HalfPlane& h) { return h.contains(sigma, lambda); });
}

std::vector<ModeRegion> lambda_threshold_regions(double threshold) {
  // lambda > t is written as -lambda <= -t; the boundary itself goes to "low".
  const double above = std::nextafter(-threshold, -std::numeric_limits<double>::infinity());
  return {{"low", {{0.0, 1.0, threshold}}}, {"high", {{0.0, -1.0, above}}}};
}

ModeOccupancy mode_occupancy(const std::vector<double>& sigma, const std::vector<double>& lambda,
                             const std::vector<ModeRegion>& regions) {
  if (regions.empty()) throw DiagnosticError("mode_occupancy: no regions given");
  if (sigma.empty()) throw DiagnosticError("mode_occupancy: empty chain");
  if (sigma.size() != lambda.size()) throw DiagnosticError("mode_occupancy: sigma and lambda lengths differ");
  ModeOccupancy m;
  for (const auto& r : regions) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < sigma.size(); ++i) hits += r.contains(sigma[i], lambda[i]) ? 1 : 0;
    m.names.push_back(r.name);
    m.fractions.push_back(static_cast<double>(hits) / static_cast<double>(sigma.size()));
  }
  return m;
}

ModeOccupancy mode_occupancy(const Chain& chain, const std::vector<ModeRegion>& regions) {
  if (chain.dim() != 0 && chain.dim() < 3) throw DiagnosticError("mode_occupancy: chain does not have (mu, log sigma, log lambda) columns");
  std::vector<double> sigma, lambda;
  for (const auto& r : chain.records) {
    if (r.burn_in) continue;
    sigma.push_back(std::exp(r.theta[1]));
    lambda.push_back(std::exp(r.theta[2]));
  }
  return mode_occupancy(sigma, lambda, regions);
}

AcfReport acf_report(const Chain& chain, std::size_t max_lag) {
  AcfReport rep;
  for (std::size_t j = 0; j < chain.dim(); ++j) {
    const auto tr = chain.trace(j);
    rep.acf.push_back(autocorrelation(tr, std::min(max_lag, tr.empty() ? 0 : tr.size() - 1)));
    double e = kNaN;
    if (!rep.acf.back().undefined && tr.size() >= 100) e = ess(tr);
    rep.ess.push_back(e);
  }
  return rep;
}

void write_acf_csv(std::ostream& out, const AcfReport& report) {
  std::size_t lags = 0;
  for (const auto& a : report.acf) lags = std::max(lags, a.acf.size());
  out << std::setprecision(17) << "lag";
  for (std::size_t j = 0; j < report.acf.size(); ++j) out << ",theta_" << j;
  out << '\n';
  for (std::size_t k = 0; k < lags; ++k) {
    out << k;
    for (const auto& a : report.acf) out << ',' << (k < a.acf.size() ? a.acf[k] : kNaN);
    out << '\n';
  }
}

}  // namespace pmhmc
