#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "spiked/extended_real.hpp"
#include "spiked/rng.hpp"

namespace spiked {

// How |q| == 1 is treated by the variational objectives. |q| > 1 is always a
// DomainError.
enum class BoundaryPolicy { domain_error, neg_inf };

// Arguments with |q| < 1 are clipped to 1 - kLogClip before taking
// log(1 - q^2).
inline constexpr double kLogClip = 1e-12;

struct ThresholdResult {
  int k;
  double value;             // beta_k or lambda_k
  double q_star;            // minimizer in (0, 1)
  double objective_at_min;  // sqrt(-log(1 - q*^2) / q*^k) (times sqrt(k/2) for lambda)
  double tolerance;         // final bracket width in q
  bool unimodal_grid;       // false if the grid pre-scan found several local minima
};

struct RateFunctionPoint {
  double q;
  ExtendedReal value;
};

struct StationaryPoint {
  double q;  // common coordinate q_1 = ... = q_k
  double g_value;
};

// beta^2 q^k / 2 + log(1 - q^2) / 2.
ExtendedReal f_beta(double q, double beta, int k,
                    BoundaryPolicy policy = BoundaryPolicy::domain_error);

// lambda^2 prod q_i + (1/2) sum log(1 - q_i^2).
ExtendedReal g_lambda(std::span<const double> q, double lambda,
                      BoundaryPolicy policy = BoundaryPolicy::domain_error);

// inf over q in (0,1) of sqrt(-log(1 - q^2) / q^k): 10^4-point grid scan
// followed by golden-section refinement to a bracket of width <= 1e-10.
ThresholdResult beta_star(int k);

// sqrt(k/2) * beta_star(k).
ThresholdResult lambda_star(int k);

// sqrt(log(k/2)); k > 2.
double beta_star_asymptotic(int k);

// Nonzero solutions q in (0,1) of lambda^2 q^(k-1) = q / (1 - q^2), i.e. the
// stationary points of G_lambda on the diagonal q_1 = ... = q_k, with
// G_lambda(q, ..., q). Tangential (double) roots are included.
std::vector<StationaryPoint> g_lambda_critical(double lambda, int k);

// (1/2) log(1 - q^2); -inf at |q| = 1.
RateFunctionPoint sphere_rate(double q);

struct AscentResult {
  std::vector<double> q;
  double value;
  double gradient_norm;
  int iterations;
};

// Gradient ascent on G_lambda with Armijo backtracking, staying inside
// (-1,1)^k. Stops when the gradient norm drops below `gradient_tol`.
AscentResult ascend_g_lambda(std::vector<double> start, double lambda, int max_iters = 100000,
                             double gradient_tol = 1e-12);

nlohmann::json threshold_json(int k);

}  // namespace spiked
