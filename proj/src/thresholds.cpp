#include "spiked/thresholds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "spiked/errors.hpp"

namespace spiked {
namespace {

constexpr int kGridPoints = 10'000;
constexpr double kBracketWidth = 1e-10;
constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kInvPhi = 0.6180339887498949;  // (sqrt 5 - 1) / 2

// log(1 - q^2) for |q| < 1 with the clip applied.
double log1m_sq(double q) {
  const double a = std::min(std::fabs(q), 1.0 - kLogClip);
  return std::log1p(-a * a);
}

// True at |q| == 1 under the neg_inf policy; throws outside the domain.
bool at_boundary(double q, BoundaryPolicy policy, const char* who) {
  const double a = std::fabs(q);
  if (std::isnan(q) || a > 1.0) throw DomainError(std::string(who) + ": |q| must be <= 1");
  if (a == 1.0) {
    if (policy == BoundaryPolicy::domain_error)
      throw DomainError(std::string(who) + ": |q| = 1 is outside the open domain");
    return true;
  }
  return false;
}

struct Minimum {
  double x;
  double f;
  double width;
};

// Golden-section minimization of f on [lo, hi]; f is only evaluated strictly
// inside the interval.
template <class F>
Minimum golden_section_min(F&& f, double lo, double hi, double tol) {
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  while (hi - lo > tol) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = f(x2);
    }
  }
  const double x = 0.5 * (lo + hi);
  return {x, f(x), hi - lo};
}

// log of the beta_k objective, 0.5 * (log(-log(1 - q^2)) - k log q).
double log_beta_objective(double q, int k) {
  return 0.5 * (std::log(-log1m_sq(q)) - k * std::log(q));
}

template <class F>
double bisect_root(F&& f, double lo, double hi) {
  double flo = f(lo);
  for (int i = 0; i < 200 && hi - lo > 1e-16; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

ExtendedReal f_beta(double q, double beta, int k, BoundaryPolicy policy) {
  if (k < 1) throw DomainError("f_beta: k must be >= 1");
  if (at_boundary(q, policy, "f_beta")) return ExtendedReal::neg_inf();
  return 0.5 * beta * beta * std::pow(q, k) + 0.5 * log1m_sq(q);
}

ExtendedReal g_lambda(std::span<const double> q, double lambda, BoundaryPolicy policy) {
  if (q.empty()) throw DomainError("g_lambda: need at least one coordinate");
  bool boundary = false;
  for (double qi : q) boundary = at_boundary(qi, policy, "g_lambda") || boundary;
  if (boundary) return ExtendedReal::neg_inf();
  double prod = 1.0;
  double logs = 0.0;
  for (double qi : q) {
    prod *= qi;
    logs += log1m_sq(qi);
  }
  return lambda * lambda * prod + 0.5 * logs;
}

ThresholdResult beta_star(int k) {
  if (k < 2) throw DomainError("beta_star: k must be >= 2");
  std::vector<double> grid(kGridPoints);
  std::vector<double> values(kGridPoints);
  for (int i = 0; i < kGridPoints; ++i) {
    grid[i] = static_cast<double>(i + 1) / (kGridPoints + 1);
    values[i] = log_beta_objective(grid[i], k);
  }
  const auto best = static_cast<int>(std::min_element(values.begin(), values.end()) - values.begin());

  int local_minima = 0;
  for (int i = 0; i < kGridPoints; ++i) {
    const bool left_ok = i == 0 || values[i] < values[i - 1];
    const bool right_ok = i == kGridPoints - 1 || values[i] <= values[i + 1];
    if (left_ok && right_ok) ++local_minima;
  }

  const double lo = best == 0 ? 0.0 : grid[best - 1];
  const double hi = best == kGridPoints - 1 ? 1.0 - kLogClip : grid[best + 1];
  const Minimum m =
      golden_section_min([k](double q) { return log_beta_objective(q, k); }, lo, hi, kBracketWidth);
  const double value = std::exp(m.f);
  return {k, value, m.x, value, m.width, local_minima == 1};
}

ThresholdResult lambda_star(int k) {
  ThresholdResult r = beta_star(k);
  const double scale = std::sqrt(k / 2.0);
  r.value *= scale;
  r.objective_at_min *= scale;
  return r;
}

double beta_star_asymptotic(int k) {
  if (k <= 2) throw DomainError("beta_star_asymptotic: k must be > 2");
  return std::sqrt(std::log(k / 2.0));
}

std::vector<StationaryPoint> g_lambda_critical(double lambda, int k) {
  if (!(lambda > 0.0)) throw DomainError("g_lambda_critical: lambda must be > 0");
  if (k < 2) throw DomainError("g_lambda_critical: k must be >= 2");
  const double l2 = lambda * lambda;
  // Stationarity divided by q: lambda^2 q^(k-2) (1 - q^2) - 1 = 0.
  auto phi = [l2, k](double q) { return l2 * std::pow(q, k - 2) * (1.0 - q * q) - 1.0; };

  std::vector<double> grid(kGridPoints + 2);
  std::vector<double> values(kGridPoints + 2);
  for (int i = 0; i < kGridPoints + 2; ++i) {
    grid[i] = std::clamp(static_cast<double>(i) / (kGridPoints + 1), 1e-300, 1.0 - kLogClip);
    values[i] = phi(grid[i]);
  }

  std::vector<double> roots;
  for (int i = 0; i + 1 < kGridPoints + 2; ++i) {
    if (values[i] == 0.0) roots.push_back(grid[i]);
    else if ((values[i] < 0.0) != (values[i + 1] < 0.0) && values[i + 1] != 0.0)
      roots.push_back(bisect_root(phi, grid[i], grid[i + 1]));
  }
  // Roots closer together than the grid spacing hide around an interior
  // maximum of phi.
  for (int i = 1; i + 1 < kGridPoints + 2; ++i) {
    if (!(values[i] >= values[i - 1] && values[i] >= values[i + 1])) continue;
    if (values[i - 1] >= 0.0 || values[i + 1] >= 0.0) continue;
    const Minimum m = golden_section_min([&](double q) { return -phi(q); }, grid[i - 1],
                                         grid[i + 1], 1e-14);
    const double peak = -m.f;
    if (std::fabs(peak) <= 1e-9) {
      roots.push_back(m.x);
    } else if (peak > 0.0) {
      roots.push_back(bisect_root(phi, grid[i - 1], m.x));
      roots.push_back(bisect_root(phi, m.x, grid[i + 1]));
    }
  }
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [](double a, double b) { return std::fabs(a - b) < 1e-9; }),
              roots.end());

  std::vector<StationaryPoint> out;
  for (double q : roots) {
    if (!(q > 0.0 && q < 1.0)) continue;
    const double g = l2 * std::pow(q, k) + 0.5 * k * log1m_sq(q);
    out.push_back({q, g});
  }
  return out;
}

RateFunctionPoint sphere_rate(double q) {
  if (at_boundary(q, BoundaryPolicy::neg_inf, "sphere_rate"))
    return {q, ExtendedReal::neg_inf()};
  return {q, 0.5 * log1m_sq(q)};
}

AscentResult ascend_g_lambda(std::vector<double> q, double lambda, int max_iters,
                             double gradient_tol) {
  const int k = static_cast<int>(q.size());
  if (k < 1) throw DomainError("ascend_g_lambda: need at least one coordinate");
  for (double qi : q)
    if (!(std::fabs(qi) < 1.0)) throw DomainError("ascend_g_lambda: start must lie in (-1,1)^k");
  const double l2 = lambda * lambda;
  auto value = [&](const std::vector<double>& x) { return g_lambda(x, lambda).value(); };
  auto gradient = [&](const std::vector<double>& x) {
    std::vector<double> g(k);
    for (int i = 0; i < k; ++i) {
      double others = 1.0;
      for (int j = 0; j < k; ++j)
        if (j != i) others *= x[j];
      g[i] = l2 * others - x[i] / (1.0 - x[i] * x[i]);
    }
    return g;
  };

  auto norm = [](const std::vector<double>& g) {
    double s = 0.0;
    for (double gi : g) s += gi * gi;
    return std::sqrt(s);
  };

  double current = value(q);
  std::vector<double> g = gradient(q);
  double gnorm = norm(g);
  double step = 0.5;
  int it = 0;
  for (; it < max_iters && gnorm >= gradient_tol; ++it) {
    step = std::min(1.0, 2.0 * step);
    std::vector<double> next(k);
    std::vector<double> next_g;
    for (;;) {
      bool inside = true;
      for (int i = 0; i < k; ++i) {
        next[i] = q[i] + step * g[i];
        if (!(std::fabs(next[i]) < 1.0 - kLogClip)) inside = false;
      }
      if (inside) {
        const double v = value(next);
        if (v >= current + 1e-4 * step * gnorm * gnorm) {
          current = v;
          next_g = gradient(next);
          break;
        }
        // Close to a maximum the Armijo gain drops below the resolution of
        // G; accept steps that keep G within rounding and shrink the gradient.
        if (v >= current - 4.0 * kEps * std::max(1.0, std::fabs(current))) {
          next_g = gradient(next);
          if (norm(next_g) < gnorm) {
            current = std::max(current, v);
            break;
          }
        }
      }
      step *= 0.5;
      if (step < 1e-300) return {q, current, gnorm, it};
    }
    q = next;
    g = next_g;
    gnorm = norm(g);
  }
  return {q, current, gnorm, it};
}

nlohmann::json threshold_json(int k) {
  const ThresholdResult b = beta_star(k);
  const ThresholdResult l = lambda_star(k);
  return {{"k", k},
          {"beta_star", b.value},
          {"lambda_star", l.value},
          {"q_star", b.q_star},
          {"tolerance", b.tolerance},
          {"unimodal_grid", b.unimodal_grid}};
}

}  // namespace spiked
