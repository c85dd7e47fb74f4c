#include "genq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

namespace genq {

namespace {

constexpr int kPoissonMaxIter = 50;
constexpr double kThetaCap = 1e6;
constexpr double kThetaFloor = 1e-3;
constexpr double kEtaClamp = 30.0;  // keeps exp(eta) finite through IRLS

struct Design {
  Eigen::MatrixXd X;  // intercept column first
  Eigen::VectorXd y;
  std::vector<std::string> names;
};

std::vector<std::string> split_interaction(const std::string& term) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    auto colon = term.find(':', start);
    if (colon == std::string::npos) {
      parts.push_back(term.substr(start));
      return parts;
    }
    parts.push_back(term.substr(start, colon - start));
    start = colon + 1;
  }
}

Design build_design(const std::vector<CountObservation>& data,
                    const std::vector<std::string>& terms) {
  if (data.empty()) throw EmptySample();
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto p = static_cast<Eigen::Index>(terms.size()) + 1;

  Design design;
  design.X.resize(n, p);
  design.y.resize(n);
  design.names.push_back("(Intercept)");
  for (Eigen::Index i = 0; i < n; ++i) {
    design.X(i, 0) = 1.0;
    design.y(i) = data[i].outcome;
  }

  for (std::size_t j = 0; j < terms.size(); ++j) {
    design.names.push_back(terms[j]);
    const auto factors = split_interaction(terms[j]);
    for (Eigen::Index i = 0; i < n; ++i) {
      double value = 1.0;
      for (const auto& factor : factors) {
        auto it = data[i].covariates.find(factor);
        if (it == data[i].covariates.end()) throw UnknownTerm(factor);
        value *= it->second;
      }
      design.X(i, j + 1) = value;
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.X);
  if (qr.rank() < p) throw RankDeficientDesign();
  return design;
}

Eigen::VectorXd mean_of(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = X * beta;
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    eta(i) = std::exp(std::clamp(eta(i), -kEtaClamp, kEtaClamp));
  return eta;
}

Eigen::VectorXd solve_weighted(const Eigen::MatrixXd& X, const Eigen::VectorXd& w,
                               const Eigen::VectorXd& z) {
  Eigen::MatrixXd a = X.transpose() * w.asDiagonal() * X;
  Eigen::VectorXd b = X.transpose() * (w.array() * z.array()).matrix();
  return a.ldlt().solve(b);
}

double poisson_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    ll += y(i) * std::log(mu(i)) - mu(i) - std::lgamma(y(i) + 1.0);
  return ll;
}

// Outcomes are non-negative integers, so the gamma/digamma/trigamma
// differences the dispersion updates need reduce to short exact sums:
//   lgamma(y+t) - lgamma(t)   = sum_{j<y} log(t+j)
//   digamma(y+t) - digamma(t) = sum_{j<y} 1/(t+j)
//   trigamma(y+t)-trigamma(t) = sum_{j<y} -1/(t+j)^2
double lgamma_ratio(double y, double theta) {
  double sum = 0.0;
  for (int j = 0; j < static_cast<int>(y); ++j) sum += std::log(theta + j);
  return sum;
}

double digamma_diff(double y, double theta) {
  double sum = 0.0;
  for (int j = 0; j < static_cast<int>(y); ++j) sum += 1.0 / (theta + j);
  return sum;
}

double trigamma_diff(double y, double theta) {
  double sum = 0.0;
  for (int j = 0; j < static_cast<int>(y); ++j) sum -= 1.0 / ((theta + j) * (theta + j));
  return sum;
}

double nb_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double theta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    ll += lgamma_ratio(y(i), theta) - std::lgamma(y(i) + 1.0) +
          theta * std::log1p(-mu(i) / (theta + mu(i)));
    if (y(i) > 0) ll += y(i) * (std::log(mu(i)) - std::log(theta + mu(i)));
  }
  return ll;
}

// Poisson IRLS core; when the round limit is hit, either throws or returns
// the last iterate (the negative binomial fit starts from that).
Eigen::VectorXd poisson_irls(const Design& d, double tol, bool throw_on_limit,
                             int* iterations) {
  Eigen::VectorXd eta(d.y.size());
  for (Eigen::Index i = 0; i < d.y.size(); ++i) eta(i) = std::log(d.y(i) + 0.5);

  Eigen::VectorXd beta;
  for (int round = 1; round <= kPoissonMaxIter; ++round) {
    Eigen::VectorXd mu = eta.array().exp();
    Eigen::VectorXd z = eta + ((d.y - mu).array() / mu.array()).matrix();
    Eigen::VectorXd next = solve_weighted(d.X, mu, z);
    Eigen::VectorXd next_eta = d.X * next;
    for (Eigen::Index i = 0; i < next_eta.size(); ++i)
      next_eta(i) = std::clamp(next_eta(i), -kEtaClamp, kEtaClamp);
    bool settled = beta.size() > 0 && (next - beta).cwiseAbs().maxCoeff() < tol;
    beta = std::move(next);
    eta = std::move(next_eta);
    if (settled) {
      if (iterations) *iterations = round;
      return beta;
    }
  }
  if (throw_on_limit) throw NonConvergence(kPoissonMaxIter);
  if (iterations) *iterations = kPoissonMaxIter;
  return beta;
}

// z = beta/se and the two-sided normal tail, clamped into (0, 1].
void attach_wald(RegressionResult& result) {
  result.z.clear();
  result.p.clear();
  for (std::size_t i = 0; i < result.coefficients.size(); ++i) {
    double z = result.coefficients[i] / result.standard_errors[i];
    double p = std::erfc(std::abs(z) / std::sqrt(2.0));
    result.z.push_back(z);
    result.p.push_back(std::clamp(p, std::numeric_limits<double>::min(), 1.0));
  }
}

std::vector<double> covariance_diagonal(const Eigen::MatrixXd& X, const Eigen::VectorXd& w) {
  Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
  Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
  std::vector<double> diag;
  for (Eigen::Index j = 0; j < X.cols(); ++j) diag.push_back(std::sqrt(cov(j, j)));
  return diag;
}

}  // namespace

RegressionResult fit_poisson(const std::vector<CountObservation>& data,
                             const std::vector<std::string>& terms,
                             const FitOptions& options) {
  Design design = build_design(data, terms);

  RegressionResult result;
  result.terms = design.names;
  int rounds = 0;
  Eigen::VectorXd beta = poisson_irls(design, options.tol, /*throw_on_limit=*/true, &rounds);
  Eigen::VectorXd mu = mean_of(design.X, beta);

  result.coefficients.assign(beta.data(), beta.data() + beta.size());
  result.standard_errors = covariance_diagonal(design.X, mu);
  result.log_likelihood = poisson_loglik(design.y, mu);
  result.aic = -2.0 * result.log_likelihood + 2.0 * (result.coefficients.size() + 1.0);
  result.theta = std::numeric_limits<double>::infinity();
  result.converged = true;
  result.iterations = rounds;
  attach_wald(result);
  return result;
}

double negbin_log_likelihood(const std::vector<CountObservation>& data,
                             const std::vector<std::string>& terms,
                             const std::vector<double>& beta, double theta) {
  Design design = build_design(data, terms);
  if (beta.size() != static_cast<std::size_t>(design.X.cols()))
    throw Error("coefficient count does not match the model terms");
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(beta.data(), beta.size());
  return nb_loglik(design.y, mean_of(design.X, b), theta);
}

RegressionResult fit_negbin(const std::vector<CountObservation>& data,
                            const std::vector<std::string>& terms,
                            const FitOptions& options) {
  Design design = build_design(data, terms);
  const Eigen::VectorXd& y = design.y;

  Eigen::VectorXd beta = poisson_irls(design, options.tol, /*throw_on_limit=*/false, nullptr);
  Eigen::VectorXd mu = mean_of(design.X, beta);

  // method-of-moments start; non-positive denominator means the data are no
  // more dispersed than Poisson, so start at the cap
  double mom_num = mu.squaredNorm();
  double mom_den = ((y - mu).array().square() - mu.array()).sum();
  double theta = mom_den > 0.0 ? std::clamp(mom_num / mom_den, kThetaFloor, kThetaCap)
                               : kThetaCap;

  double ll = nb_loglik(y, mu, theta);
  bool converged = false;
  int rounds = 0;

  for (int outer = 1; outer <= options.max_iter; ++outer) {
    double ll_before = ll;

    // (a) one IRLS step on the coefficients, halved until the likelihood
    // does not decrease
    {
      Eigen::VectorXd eta = mu.array().log();
      Eigen::VectorXd w = (mu.array() / (1.0 + mu.array() / theta)).matrix();
      Eigen::VectorXd z = eta + ((y - mu).array() / mu.array()).matrix();
      Eigen::VectorXd delta = solve_weighted(design.X, w, z) - beta;
      double step = 1.0;
      for (int halving = 0; halving < 30; ++halving) {
        Eigen::VectorXd candidate = beta + step * delta;
        Eigen::VectorXd mu_candidate = mean_of(design.X, candidate);
        double ll_candidate = nb_loglik(y, mu_candidate, theta);
        if (ll_candidate >= ll - 1e-12) {
          beta = std::move(candidate);
          mu = std::move(mu_candidate);
          ll = ll_candidate;
          break;
        }
        step /= 2.0;
      }
    }

    // (b) one Newton step on the dispersion's profile likelihood, halved the
    // same way and capped
    {
      double score = 0.0;
      double hessian = 0.0;
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        double denom = theta + mu(i);
        score += digamma_diff(y(i), theta) + std::log(theta / denom) + 1.0 -
                 (y(i) + theta) / denom;
        hessian += trigamma_diff(y(i), theta) + 1.0 / theta - 2.0 / denom +
                   (y(i) + theta) / (denom * denom);
      }
      double newton = hessian < 0.0 ? -score / hessian
                                    : (score > 0.0 ? theta : -theta / 2.0);
      double step = 1.0;
      for (int halving = 0; halving < 30; ++halving) {
        double candidate = std::min(theta + step * newton, kThetaCap);
        if (candidate < kThetaFloor) {
          step /= 2.0;
          continue;
        }
        double ll_candidate = nb_loglik(y, mu, candidate);
        if (ll_candidate >= ll - 1e-12) {
          theta = candidate;
          ll = ll_candidate;
          break;
        }
        step /= 2.0;
      }
    }

    rounds = outer;
    if (std::abs(ll - ll_before) < options.tol) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NonConvergence(options.max_iter);

  RegressionResult result;
  result.terms = design.names;
  result.coefficients.assign(beta.data(), beta.data() + beta.size());

  // observed information for the coefficient block
  Eigen::VectorXd w_info(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double denom = theta + mu(i);
    w_info(i) = (y(i) + theta) * theta * mu(i) / (denom * denom);
  }
  result.standard_errors = covariance_diagonal(design.X, w_info);
  result.log_likelihood = ll;
  result.aic = -2.0 * ll + 2.0 * (result.coefficients.size() + 1.0);
  result.theta = theta;
  result.converged = true;
  result.iterations = rounds;
  result.underdispersed = theta >= kThetaCap;
  attach_wald(result);
  return result;
}

namespace {

double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

RankSumResult wilcoxon_rank_sum(const std::vector<double>& x, const std::vector<double>& y,
                                Sides sides) {
  if (x.empty() || y.empty()) throw EmptySample();
  const std::size_t n1 = x.size();
  const std::size_t n2 = y.size();
  const std::size_t n = n1 + n2;

  std::vector<std::pair<double, bool>> pooled;  // (value, belongs to x)
  pooled.reserve(n);
  for (double v : x) pooled.emplace_back(v, true);
  for (double v : y) pooled.emplace_back(v, false);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // midranks, collecting tie-group sizes for the variance correction
  std::vector<double> ranks(n);
  std::vector<std::size_t> tie_groups;
  double rank_sum_x = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (pooled[k].second) rank_sum_x += midrank;
    tie_groups.push_back(j - i);
    i = j;
  }
  bool has_ties = tie_groups.size() < n;

  RankSumResult result;
  result.w = rank_sum_x - static_cast<double>(n1) * (n1 + 1) / 2.0;

  if (n <= 20 && !has_ties) {
    result.method = RankSumResult::Method::exact;
    // distribution of the rank sum over all C(n, n1) splits
    const std::size_t max_sum = n * (n + 1) / 2;
    std::vector<std::vector<double>> ways(n1 + 1, std::vector<double>(max_sum + 1, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t r = 1; r <= n; ++r)
      for (std::size_t k = std::min(n1, r); k >= 1; --k)
        for (std::size_t s = max_sum; s >= r; --s)
          ways[k][s] += ways[k - 1][s - r];

    const double offset = static_cast<double>(n1) * (n1 + 1) / 2.0;
    double total = 0.0;
    double at_most = 0.0;
    double at_least = 0.0;
    for (std::size_t s = 0; s <= max_sum; ++s) {
      double count = ways[n1][s];
      if (count == 0.0) continue;
      total += count;
      double w = static_cast<double>(s) - offset;
      if (w <= result.w + 1e-9) at_most += count;
      if (w >= result.w - 1e-9) at_least += count;
    }
    double p_le = at_most / total;
    double p_ge = at_least / total;
    switch (sides) {
      case Sides::two_sided: result.p = std::min(1.0, 2.0 * std::min(p_le, p_ge)); break;
      case Sides::less: result.p = p_le; break;
      case Sides::greater: result.p = p_ge; break;
    }
    return result;
  }

  result.method = RankSumResult::Method::normal_approx;
  double mean = static_cast<double>(n1) * n2 / 2.0;
  double tie_term = 0.0;
  for (std::size_t t : tie_groups)
    tie_term += static_cast<double>(t) * t * t - static_cast<double>(t);
  double variance = (static_cast<double>(n1) * n2 / 12.0) *
                    ((n + 1.0) - tie_term / (static_cast<double>(n) * (n - 1.0)));
  if (variance <= 0.0) {  // every pooled value identical
    result.p = 1.0;
    return result;
  }
  double sd = std::sqrt(variance);
  switch (sides) {
    case Sides::two_sided: {
      double numerator = std::max(std::abs(result.w - mean) - 0.5, 0.0);
      result.p = std::min(1.0, 2.0 * normal_upper_tail(numerator / sd));
      break;
    }
    case Sides::greater:
      result.p = normal_upper_tail((result.w - mean - 0.5) / sd);
      break;
    case Sides::less:
      result.p = 1.0 - normal_upper_tail((result.w - mean + 0.5) / sd);
      break;
  }
  result.p = std::clamp(result.p, std::numeric_limits<double>::min(), 1.0);
  return result;
}

}  // namespace genq
