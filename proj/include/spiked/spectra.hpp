#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spiked/tensor.hpp"

namespace spiked {

// Eigenvalues of a symmetric matrix, sorted descending.
struct Spectrum {
  std::vector<double> eigenvalues;
  // Row i holds the unit eigenvector for eigenvalues[i]; empty unless
  // requested.
  std::vector<std::vector<double>> eigenvectors;
  // max_i ||X v_i - lambda_i v_i||_2, or 0 without eigenvectors.
  double residual = 0.0;

  double largest() const { return eigenvalues.front(); }
};

// Householder reduction to tridiagonal form followed by implicitly shifted QL.
// Input must be an order-2 tensor symmetric to within 1e-10 (relative to its
// largest entry). Throws ContractViolation otherwise, and NumericalFailure
// (carrying the partially reduced diagonal) when QL does not converge.
Spectrum eigvals_sym(const DenseTensor& x, bool want_vectors = false);
Spectrum eigvals_sym(const SymmetricTensor& x, bool want_vectors = false);

// Eigenvalues of the symmetric tridiagonal matrix with the given diagonal and
// off-diagonal (size n-1), sorted descending.
std::vector<double> tridiagonal_eigenvalues(std::vector<double> diag, std::vector<double> off);

struct LargestEigStats {
  std::size_t count;
  double mean;
  double std_dev;  // sample standard deviation, 0 for a single spectrum
  double min;
  double max;
  std::vector<std::pair<double, double>> quantiles;  // (level, value)
};

inline constexpr double kDefaultQuantileLevels[] = {0.05, 0.25, 0.5, 0.75, 0.95};

LargestEigStats largest_eig_stats(std::span<const Spectrum> batch);
LargestEigStats summarize_top_eigenvalues(std::span<const double> top);

// Linearly interpolated sample quantile (R type 7). `sorted` must be sorted.
double sample_quantile(std::span<const double> sorted, double level);

// Two-sample Kolmogorov-Smirnov statistic sup_x |F_A(x) - F_B(x)|.
double ks_distance(std::span<const double> a, std::span<const double> b);

// One-sample KS statistic against a continuous CDF.
template <class Cdf>
double ks_distance_to_cdf(std::vector<double> sample, Cdf cdf);

// Semicircle density (1/2pi) sqrt(4 - x^2) on [-2, 2].
double semicircle_ref(double x);
double semicircle_cdf(double x);

nlohmann::json to_json(const LargestEigStats& stats);
// One row per spectrum: lambda_1, ..., lambda_n.
std::string spectra_csv(std::span<const Spectrum> batch);

template <class Cdf>
double ks_distance_to_cdf(std::vector<double> sample, Cdf cdf) {
  std::sort(sample.begin(), sample.end());
  const double m = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, std::fabs(f - static_cast<double>(i) / m),
                  std::fabs(static_cast<double>(i + 1) / m - f)});
  }
  return d;
}

}  // namespace spiked
