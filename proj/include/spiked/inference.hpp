#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "spiked/rng.hpp"
#include "spiked/spectra.hpp"
#include "spiked/tensor.hpp"

namespace spiked {

enum class SpikeModel { sym, asym };

std::string to_string(SpikeModel model);

struct SecondMomentResult {
  int k = 0;
  int n = 0;
  double strength = 0.0;  // beta (sym) or lambda (asym)
  SpikeModel model = SpikeModel::sym;
  double log_second_moment = 0.0;  // log E_0[Lambda^2]
  // Quadrature: |difference| between the last two node-doubling levels.
  // Monte Carlo (asym, k >= 4): standard error of the log estimate.
  double quadrature_error = 0.0;
  // (1/2) sqrt(E_0 Lambda^2 - 1) when that is below 1; empty means the bound is
  // vacuous.
  std::optional<double> implied_tv_upper;
  std::string method;       // "quadrature" or "monte_carlo"
  std::size_t evaluations;  // nodes per axis, or MC samples
};

// log of the density c_n (1 - t^2)^((n-3)/2) of <v, e_1> for v uniform on
// S^{n-1}; -infinity (IEEE) for |t| >= 1.
double first_coord_log_density(double t, int n);
// log c_n = lgamma(n/2) - log(pi)/2 - lgamma((n-1)/2).
double first_coord_log_normalizer(int n);

// log P(<v, e_1> >= a), 0 <= a < 1, by log-space Romberg quadrature in
// theta = asin(t); -infinity (IEEE) for a >= 1.
double first_coord_tail_logprob(double a, int n);

// log integral of exp[(n beta^2 / 2) t^k] against the first-coordinate law.
SecondMomentResult second_moment_sym(int k, double beta, int n);

// log integral of exp[n lambda^2 prod t_i] against k independent
// first-coordinate laws. Tensor-product quadrature for k in {2, 3}; plain
// Monte Carlo from the product law (with `mc_samples` draws seeded by
// `mc_seed`) for k >= 4.
SecondMomentResult second_moment_asym(int k, double lambda, int n, std::uint64_t mc_seed = 0,
                                      std::size_t mc_samples = 1'000'000);

nlohmann::json to_json(const SecondMomentResult& r);

struct LikelihoodRatioEstimate {
  double log_estimate;  // log of the Monte Carlo mean
  double estimate;      // exp(log_estimate); may be +inf
  double std_error;     // standard error of `estimate`
  bool dominated;       // one draw carries > 99% of the total weight
};

// Mean over m uniform v of exp[-n beta^2 / 4 + (n beta / 2) <X, v^{(x)k}>],
// accumulated in log space.
LikelihoodRatioEstimate likelihood_ratio_mc(const DenseTensor& x, double beta, int m, Rng& rng);

// Asymmetric analogue: mean of exp[-n lambda^2 / 2 + n lambda <X, v_1 (x) ... (x) v_k>].
LikelihoodRatioEstimate likelihood_ratio_mc_asym(const DenseTensor& x, double lambda, int m,
                                                 Rng& rng);

// 1 iff lambda_1 >= 2 + delta.
int spectral_test_eig(double largest_eigenvalue, double delta);
int spectral_test_eig(const Spectrum& spectrum, double delta);

double trace(const DenseTensor& x);
// 1 iff trace(X) >= threshold.
int trace_test(const DenseTensor& x, double threshold);
// Total variation between N(0, 2) and N(beta, 2): 1 - 2 Phi(-beta / (2 sqrt 2)).
double trace_tv(double beta);

double normal_cdf(double x);

// log sum exp over the range; -infinity for an empty range.
double log_sum_exp(std::span<const double> values);

}  // namespace spiked
