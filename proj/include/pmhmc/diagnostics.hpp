#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmhmc/models.hpp"
#include "pmhmc/samplers.hpp"

namespace pmhmc {

/// A diagnostic that cannot be computed on the given chain.
class DiagnosticError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Autocorrelation {
  std::vector<double> acf;  ///< lags 0..max_lag; empty when undefined
  bool undefined = false;   ///< constant chain
};

/// Biased estimator normalised by the lag-0 autocovariance. Requires
/// x.size() > max_lag.
Autocorrelation autocorrelation(const std::vector<double>& x, std::size_t max_lag);

/// Effective sample size with Geyer's initial positive sequence truncation.
/// Throws DiagnosticError for chains shorter than 100 or constant chains.
/// ESS is a noisy quantity on multimodal or slowly mixing chains; treat it as
/// a rough guide there.
double ess(const std::vector<double>& x);

struct TraceSummary {
  double mean = 0.0;
  double sd = 0.0;
  double ess = 0.0;
  double mcse = 0.0;  ///< sd / sqrt(ess)
};
TraceSummary summarize_trace(const std::vector<double>& x);

/// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_survival(double lambda);

struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
  std::size_t samples_used = 0;
  std::size_t thin = 1;
};

/// Two-sided one-sample KS test against N(mean, sd^2), no thinning.
KsResult ks_normal(std::vector<double> x, double mean, double sd);

/// Thins the chain to roughly its estimated ESS, then ks_normal. Throws
/// DiagnosticError with fewer than 50 effective samples.
KsResult ks_against_analytic(const std::vector<double>& chain, const NormalSummary& posterior);

/// Half-plane a*sigma + b*lambda <= c.
struct HalfPlane {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  bool contains(double sigma, double lambda) const { return a * sigma + b * lambda <= c; }
};

/// Intersection of half-planes in (sigma, lambda).
struct ModeRegion {
  std::string name;
  std::vector<HalfPlane> planes;
  bool contains(double sigma, double lambda) const;
};

/// Two regions split at lambda = threshold: "low" (lambda <= t) and "high" (lambda > t).
std::vector<ModeRegion> lambda_threshold_regions(double threshold);

struct ModeOccupancy {
  std::vector<std::string> names;
  std::vector<double> fractions;
};

/// Fraction of post-burn-in samples in each region, with sigma = exp(theta_1)
/// and lambda = exp(theta_2) (diffraction parameterisation).
ModeOccupancy mode_occupancy(const Chain& chain, const std::vector<ModeRegion>& regions);
ModeOccupancy mode_occupancy(const std::vector<double>& sigma, const std::vector<double>& lambda,
                             const std::vector<ModeRegion>& regions);

/// Per-parameter ACF and ESS for the post-burn-in part of a chain.
struct AcfReport {
  std::vector<Autocorrelation> acf;
  std::vector<double> ess;  ///< nan where undefined
};
AcfReport acf_report(const Chain& chain, std::size_t max_lag);

/// Columns lag, theta_0, ... (nan for undefined parameters).
void write_acf_csv(std::ostream& out, const AcfReport& report);

}  // namespace pmhmc
