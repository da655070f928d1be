#include "spiked/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "spiked/ensembles.hpp"
#include "spiked/errors.hpp"

namespace spiked {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kMinIntervals = std::size_t{1} << 14;
constexpr std::size_t kMaxIntervals = std::size_t{1} << 22;
constexpr double kRelTol = 1e-6;
constexpr double kAbsTol = 1e-12;

double lse2(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

std::size_t next_pow2(double x) {
  std::size_t p = 1;
  while (static_cast<double>(p) < x) p <<= 1;
  return p;
}

// (n - 2) log cos(theta): the first-coordinate density in theta = asin(t),
// without c_n. Zero for n = 2 including the endpoints.
double log_cos_weight(double theta, int n) {
  if (n == 2) return 0.0;
  const double c = std::cos(theta);
  return c > 0.0 ? (n - 2) * std::log(c) : kNegInf;
}

struct LogIntegral {
  double log_value;
  double error;  // |log change| between the last two levels
  std::size_t intervals;
};

// Nested trapezoid rule on [a, b] with node doubling, accumulated in log
// space. With `extrapolate` the levels are combined by Romberg extrapolation
// (for integrands that are not smooth-periodic at the ends).
template <class LogF>
LogIntegral log_quadrature(LogF&& logf, double a, double b, std::size_t min_intervals,
                           bool extrapolate) {
  std::size_t m = min_intervals;
  double h = (b - a) / static_cast<double>(m);
  double log_sum = lse2(logf(a) + std::log(0.5), logf(b) + std::log(0.5));
  for (std::size_t i = 1; i < m; ++i) log_sum = lse2(log_sum, logf(a + static_cast<double>(i) * h));

  double ref = std::log(h) + log_sum;
  if (ref == kNegInf) return {kNegInf, 0.0, m};
  std::vector<double> prev_row{1.0};  // trapezoid values scaled by exp(-ref)
  double prev_estimate = ref;
  for (int level = 1;; ++level) {
    // Add the midpoints of the current intervals.
    double log_new = kNegInf;
    for (std::size_t i = 0; i < m; ++i)
      log_new = lse2(log_new, logf(a + (static_cast<double>(i) + 0.5) * h));
    log_sum = lse2(log_sum, log_new);
    m *= 2;
    h *= 0.5;
    const double log_trap = std::log(h) + log_sum;

    std::vector<double> row{std::exp(log_trap - ref)};
    double factor = 4.0;
    for (std::size_t i = 1; i <= prev_row.size(); ++i, factor *= 4.0)
      row.push_back(row[i - 1] + (row[i - 1] - prev_row[i - 1]) / (factor - 1.0));
    double estimate = log_trap;
    if (extrapolate && row.back() > 0.0) estimate = ref + std::log(row.back());

    const double error = std::fabs(estimate - prev_estimate);
    if (error <= kAbsTol + kRelTol * std::fabs(estimate) || m >= kMaxIntervals)
      return {estimate, error, m};
    prev_estimate = estimate;
    prev_row = std::move(row);
  }
}

double checked_log_moment(double log_value, double error, const char* who) {
  if (!std::isfinite(log_value) || std::isnan(error))
    throw NumericalFailure(std::string(who) + ": integral overflowed or lost all precision");
  return std::max(0.0, log_value);
}

std::optional<double> tv_bound(double log_second_moment) {
  if (!std::isfinite(log_second_moment)) return std::nullopt;
  const double excess = std::expm1(log_second_moment);
  const double bound = 0.5 * std::sqrt(std::max(0.0, excess));
  if (!(bound < 1.0)) return std::nullopt;
  return bound;
}

// Tensor-product quadrature of exp[a prod t_c] over k in {2, 3} independent
// first-coordinate laws, on `intervals` theta-intervals per axis. Nodes whose
// separable upper bound a|t|^k/k + log w cannot move the result by more than
// a relative 1e-15 are dropped.
double asym_product_quadrature(int k, double a, int n, std::size_t intervals) {
  const double h = M_PI / static_cast<double>(intervals);
  const std::size_t count = intervals + 1;
  std::vector<double> s(count), lw(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double theta = -M_PI_2 + static_cast<double>(i) * h;
    s[i] = std::sin(theta);
    lw[i] = log_cos_weight(theta, n) + ((i == 0 || i == intervals) ? std::log(0.5) : 0.0);
  }
  // Normalize the per-axis weights to sum to one.
  const double log_norm = log_sum_exp(lw);
  for (double& w : lw) w -= log_norm;

  std::vector<double> psi(count);
  double lower = kNegInf;
  for (std::size_t i = 0; i < count; ++i) {
    psi[i] = a * std::pow(std::fabs(s[i]), k) / k + lw[i];
    lower = std::max(lower, a * std::pow(s[i], k) + k * lw[i]);
  }
  const double log_psi_total = log_sum_exp(psi);
  std::vector<std::size_t> by_psi(count);
  std::iota(by_psi.begin(), by_psi.end(), 0);
  std::sort(by_psi.begin(), by_psi.end(), [&](std::size_t l, std::size_t r) { return psi[l] < psi[r]; });
  const double budget = lower + std::log(1e-15) - std::log(static_cast<double>(k)) -
                        (k - 1) * log_psi_total;
  double pruned = kNegInf;
  std::vector<char> keep(count, 1);
  for (std::size_t idx : by_psi) {
    const double next = lse2(pruned, psi[idx]);
    if (next > budget) break;
    pruned = next;
    keep[idx] = 0;
  }
  std::vector<double> ks, kw;
  for (std::size_t i = 0; i < count; ++i)
    if (keep[i] && lw[i] != kNegInf) {
      ks.push_back(s[i]);
      kw.push_back(lw[i]);
    }
  const std::size_t m = ks.size();

  if (k == 2) {
    double mx = kNegInf;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) mx = std::max(mx, a * ks[i] * ks[j] + kw[i] + kw[j]);
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double b = a * ks[i];
      const double base = kw[i] - mx;
      for (std::size_t j = 0; j < m; ++j) sum += std::exp(b * ks[j] + kw[j] + base);
    }
    return mx + std::log(sum);
  }

  double mx = kNegInf;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double b = a * ks[i] * ks[j];
      const double base = kw[i] + kw[j];
      for (std::size_t l = 0; l < m; ++l) mx = std::max(mx, b * ks[l] + kw[l] + base);
    }
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double b = a * ks[i] * ks[j];
      const double base = kw[i] + kw[j] - mx;
      for (std::size_t l = 0; l < m; ++l) sum += std::exp(b * ks[l] + kw[l] + base);
    }
  return mx + std::log(sum);
}

}  // namespace

std::string to_string(SpikeModel model) { return model == SpikeModel::sym ? "sym" : "asym"; }

double log_sum_exp(std::span<const double> values) {
  double mx = kNegInf;
  for (double v : values) mx = std::max(mx, v);
  if (mx == kNegInf) return kNegInf;
  if (mx == std::numeric_limits<double>::infinity()) return mx;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - mx);
  return mx + std::log(sum);
}

double first_coord_log_normalizer(int n) {
  if (n < 2) throw ContractViolation("first-coordinate law needs n >= 2");
  return std::lgamma(0.5 * n) - 0.5 * std::log(M_PI) - std::lgamma(0.5 * (n - 1));
}

double first_coord_log_density(double t, int n) {
  if (n < 2) throw ContractViolation("first_coord_log_density: n must be >= 2");
  if (!(std::fabs(t) < 1.0)) return kNegInf;
  return first_coord_log_normalizer(n) + 0.5 * (n - 3) * std::log1p(-t * t);
}

double first_coord_tail_logprob(double a, int n) {
  if (n < 2) throw ContractViolation("first_coord_tail_logprob: n must be >= 2");
  if (!(a >= 0.0)) throw ContractViolation("first_coord_tail_logprob: a must be >= 0");
  if (a >= 1.0) return kNegInf;
  const double lo = std::asin(a);
  const std::size_t intervals = std::max(kMinIntervals, next_pow2(8.0 * n));
  const LogIntegral r = log_quadrature([n](double th) { return log_cos_weight(th, n); }, lo,
                                       M_PI_2, intervals, true);
  return first_coord_log_normalizer(n) + r.log_value;
}

SecondMomentResult second_moment_sym(int k, double beta, int n) {
  if (k < 2) throw ContractViolation("second_moment_sym: k must be >= 2");
  if (n < 2) throw ContractViolation("second_moment_sym: n must be >= 2");
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw ContractViolation("second_moment_sym: beta must be finite and >= 0");
  SecondMomentResult r;
  r.k = k;
  r.n = n;
  r.strength = beta;
  r.model = SpikeModel::sym;
  r.method = "quadrature";
  const std::size_t intervals = std::max(kMinIntervals, next_pow2(4.0 * M_PI * std::sqrt(n)));
  if (beta == 0.0) {
    r.log_second_moment = 0.0;
    r.quadrature_error = 0.0;
    r.implied_tv_upper = 0.0;
    r.evaluations = 0;
    return r;
  }
  const double tilt = 0.5 * n * beta * beta;
  // Normalizing by the quadrature of the density itself, on the same nodes,
  // cancels most of the discretization error.
  const LogIntegral num = log_quadrature(
      [=](double th) { return tilt * std::pow(std::sin(th), k) + log_cos_weight(th, n); },
      -M_PI_2, M_PI_2, intervals, false);
  const LogIntegral den = log_quadrature([=](double th) { return log_cos_weight(th, n); },
                                         -M_PI_2, M_PI_2, intervals, false);
  // E_0 Lambda^2 >= 1; only rounding can push the difference below zero.
  r.quadrature_error = num.error + den.error;
  r.log_second_moment =
      checked_log_moment(num.log_value - den.log_value, r.quadrature_error, "second_moment_sym");
  r.implied_tv_upper = tv_bound(r.log_second_moment);
  r.evaluations = std::max(num.intervals, den.intervals) + 1;
  return r;
}

SecondMomentResult second_moment_asym(int k, double lambda, int n, std::uint64_t mc_seed,
                                      std::size_t mc_samples) {
  if (k < 2) throw ContractViolation("second_moment_asym: k must be >= 2");
  if (n < 2) throw ContractViolation("second_moment_asym: n must be >= 2");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw ContractViolation("second_moment_asym: lambda must be finite and >= 0");
  SecondMomentResult r;
  r.k = k;
  r.n = n;
  r.strength = lambda;
  r.model = SpikeModel::asym;
  r.method = k <= 3 ? "quadrature" : "monte_carlo";
  if (lambda == 0.0) {
    r.log_second_moment = 0.0;
    r.quadrature_error = 0.0;
    r.implied_tv_upper = 0.0;
    r.evaluations = 0;
    return r;
  }
  const double a = static_cast<double>(n) * lambda * lambda;

  if (k <= 3) {
    std::size_t intervals = std::max<std::size_t>(64, next_pow2(2.0 * M_PI * std::sqrt(n)));
    const std::size_t max_intervals = k == 2 ? (std::size_t{1} << 14) : (std::size_t{1} << 11);
    const double ref = asym_product_quadrature(k, a, n, intervals);
    std::vector<double> prev_row{1.0};
    double prev = ref;
    double error = 0.0;
    double value = prev;
    while (intervals < max_intervals) {
      intervals *= 2;
      const double log_trap = asym_product_quadrature(k, a, n, intervals);
      std::vector<double> row{std::exp(log_trap - ref)};
      double factor = 4.0;
      for (std::size_t i = 1; i <= prev_row.size(); ++i, factor *= 4.0)
        row.push_back(row[i - 1] + (row[i - 1] - prev_row[i - 1]) / (factor - 1.0));
      value = row.back() > 0.0 ? ref + std::log(row.back()) : log_trap;
      error = std::fabs(value - prev);
      if (error <= kAbsTol + kRelTol * std::fabs(value)) break;
      prev = value;
      prev_row = std::move(row);
    }
    r.log_second_moment = checked_log_moment(value, error, "second_moment_asym");
    r.quadrature_error = error;
    r.evaluations = intervals + 1;
  } else {
    if (mc_samples < 2) throw ContractViolation("second_moment_asym: need >= 2 MC samples");
    Rng rng(mc_seed);
    std::vector<double> logw(mc_samples);
    const double half_rest = 0.5 * (n - 1);
    for (double& lw : logw) {
      double prod = 1.0;
      for (int c = 0; c < k; ++c) {
        const double g = rng.normal();
        const double chi2 = 2.0 * rng.gamma(half_rest);
        prod *= g / std::sqrt(g * g + chi2);
      }
      lw = a * prod;
    }
    const double lse = log_sum_exp(logw);
    const double m = static_cast<double>(mc_samples);
    const double mx = *std::max_element(logw.begin(), logw.end());
    double s1 = 0.0, s2 = 0.0;
    for (double lw : logw) {
      const double w = std::exp(lw - mx);
      s1 += w;
      s2 += w * w;
    }
    const double mean = s1 / m;
    const double var = std::max(0.0, s2 / m - mean * mean) * m / (m - 1.0);
    r.quadrature_error = std::sqrt(var / m) / mean;
    r.log_second_moment =
        checked_log_moment(lse - std::log(m), r.quadrature_error, "second_moment_asym");
    r.evaluations = mc_samples;
  }
  r.implied_tv_upper = tv_bound(r.log_second_moment);
  return r;
}

nlohmann::json to_json(const SecondMomentResult& r) {
  nlohmann::json j = {{"model", to_string(r.model)},
                      {"k", r.k},
                      {"n", r.n},
                      {"strength", r.strength},
                      {"log_second_moment", r.log_second_moment},
                      {"quadrature_error", r.quadrature_error},
                      {"method", r.method},
                      {"evaluations", r.evaluations}};
  if (r.implied_tv_upper) j["implied_tv_upper"] = *r.implied_tv_upper;
  else j["implied_tv_upper"] = "vacuous";
  return j;
}

namespace {

LikelihoodRatioEstimate summarize_log_terms(const std::vector<double>& terms) {
  const double m = static_cast<double>(terms.size());
  const double lse = log_sum_exp(terms);
  const double log_est = lse - std::log(m);
  const double mx = *std::max_element(terms.begin(), terms.end());
  double s1 = 0.0, s2 = 0.0;
  for (double t : terms) {
    const double w = std::exp(t - mx);
    s1 += w;
    s2 += w * w;
  }
  // Variance of the scaled weights, then back to the linear scale.
  const double mean = s1 / m;
  double se = 0.0;
  if (terms.size() > 1) {
    const double var = std::max(0.0, (s2 / m - mean * mean) * m / (m - 1.0));
    se = std::sqrt(var / m) * std::exp(mx);
  }
  const bool dominated = terms.size() > 1 && 1.0 / s1 > 0.99;
  return {log_est, std::exp(log_est), se, dominated};
}

}  // namespace

LikelihoodRatioEstimate likelihood_ratio_mc(const DenseTensor& x, double beta, int m, Rng& rng) {
  if (m < 1) throw ContractViolation("likelihood_ratio_mc: m must be >= 1");
  const double n = x.dim();
  std::vector<double> terms(m);
  for (double& t : terms) {
    const UnitVector v = sample_sphere(x.dim(), rng);
    t = -n * beta * beta / 4.0 + (n * beta / 2.0) * multilinear_form(x, v.coords());
  }
  return summarize_log_terms(terms);
}

LikelihoodRatioEstimate likelihood_ratio_mc_asym(const DenseTensor& x, double lambda, int m,
                                                 Rng& rng) {
  if (m < 1) throw ContractViolation("likelihood_ratio_mc_asym: m must be >= 1");
  const double n = x.dim();
  std::vector<double> terms(m);
  std::vector<UnitVector> factors;
  for (double& t : terms) {
    factors.clear();
    for (int c = 0; c < x.order(); ++c) factors.push_back(sample_sphere(x.dim(), rng));
    t = -n * lambda * lambda / 2.0 + n * lambda * multilinear_form(x, factors);
  }
  return summarize_log_terms(terms);
}

int spectral_test_eig(double largest_eigenvalue, double delta) {
  if (!(delta > 0.0)) throw ContractViolation("spectral_test_eig: delta must be > 0");
  return largest_eigenvalue >= 2.0 + delta ? 1 : 0;
}

int spectral_test_eig(const Spectrum& spectrum, double delta) {
  if (spectrum.eigenvalues.empty()) throw ContractViolation("spectral_test_eig: empty spectrum");
  return spectral_test_eig(spectrum.largest(), delta);
}

double trace(const DenseTensor& x) {
  if (x.order() != 2) throw ContractViolation("trace: input must be an order-2 tensor");
  double s = 0.0;
  for (int i = 0; i < x.dim(); ++i) s += x(i, i);
  return s;
}

int trace_test(const DenseTensor& x, double threshold) { return trace(x) >= threshold ? 1 : 0; }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / M_SQRT2); }

// 1 - 2 Phi(-x) = erf(x / sqrt 2), and x / sqrt 2 = beta / 4.
double trace_tv(double beta) { return std::erf(std::fabs(beta) / 4.0); }

}  // namespace spiked
