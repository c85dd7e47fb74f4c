#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "genq/error.hpp"

namespace genq {

/// One modeled data point: a count outcome plus named covariate values.
/// Fitters add the intercept themselves; interaction terms are written
/// "a:b" and computed as products of the named columns.
struct CountObservation {
  int outcome = 0;
  std::map<std::string, double> covariates;
};

struct RegressionResult {
  std::vector<std::string> terms;  ///< "(Intercept)" first, then the requested terms
  std::vector<double> coefficients;
  std::vector<double> standard_errors;
  std::vector<double> z;  ///< coefficient / standard error, exactly
  std::vector<double> p;  ///< two-sided normal tail, in (0, 1]
  double log_likelihood = 0.0;
  double aic = 0.0;    ///< -2*log_likelihood + 2*(terms + 1); the +1 counts theta
  double theta = std::numeric_limits<double>::infinity();  ///< variance = mu + mu^2/theta
  bool converged = false;
  int iterations = 0;
  bool underdispersed = false;  ///< theta hit its cap: Poisson-equivalent fit
};

struct RankDeficientDesign : Error {
  RankDeficientDesign() : Error("design matrix is rank deficient") {}
};

struct NonConvergence : Error {
  explicit NonConvergence(int iterations)
      : Error("fit did not converge within " + std::to_string(iterations) + " iterations") {}
};

struct EmptySample : Error {
  EmptySample() : Error("empty sample") {}
};

struct UnknownTerm : Error {
  explicit UnknownTerm(const std::string& name) : Error("unknown model term: " + name) {}
};

/// Convergence knobs; the defaults are the pinned reference values.
struct FitOptions {
  double tol = 1e-8;   ///< coefficient-step (Poisson) / likelihood-change (NB) threshold
  int max_iter = 100;  ///< outer round cap for the negative binomial fit
};

/// Log-link Poisson fit by iteratively reweighted least squares. Converges
/// when no coefficient moves more than tol between rounds (at most 50).
/// theta is reported as +infinity.
RegressionResult fit_poisson(const std::vector<CountObservation>& data,
                             const std::vector<std::string>& terms,
                             const FitOptions& options = {});

/// Log-link negative binomial fit (variance mu + mu^2/theta): coefficient
/// IRLS rounds alternate with Newton steps on the dispersion's profile
/// likelihood, both under step-halving so the likelihood never decreases.
/// Starts from the Poisson fit and a method-of-moments dispersion; converges
/// when the likelihood moves less than tol (at most max_iter outer rounds).
/// theta is capped at 1e6; reaching the cap flags the fit as underdispersed
/// and the result is Poisson-equivalent.
RegressionResult fit_negbin(const std::vector<CountObservation>& data,
                            const std::vector<std::string>& terms,
                            const FitOptions& options = {});

/// The exact likelihood fit_negbin maximizes, exposed so independent
/// maximizers can cross-check a fit. beta is ordered like RegressionResult
/// terms: intercept first.
double negbin_log_likelihood(const std::vector<CountObservation>& data,
                             const std::vector<std::string>& terms,
                             const std::vector<double>& beta, double theta);

enum class Sides { two_sided, less, greater };

struct RankSumResult {
  double w = 0.0;  ///< rank sum of x minus n1(n1+1)/2, midranks for ties
  double p = 1.0;
  enum class Method { exact, normal_approx } method = Method::exact;
};

/// Wilcoxon rank-sum test. Exact enumeration of rank splits when
/// n1 + n2 <= 20 and there are no ties; otherwise a normal approximation
/// with tie-corrected variance and 0.5 continuity correction.
RankSumResult wilcoxon_rank_sum(const std::vector<double>& x, const std::vector<double>& y,
                                Sides sides = Sides::two_sided);

}  // namespace genq
