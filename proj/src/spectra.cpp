#include "spiked/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "spiked/errors.hpp"

namespace spiked {
namespace {

constexpr int kMaxQlSweepsPerEigenvalue = 60;

struct Reflector {
  std::vector<double> v;  // zero below the active range
  double tau = 0.0;
};

double dot_unrolled(const double* a, const double* b, int len) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int j = 0;
  for (; j + 4 <= len; j += 4) {
    s0 += a[j] * b[j];
    s1 += a[j + 1] * b[j + 1];
    s2 += a[j + 2] * b[j + 2];
    s3 += a[j + 3] * b[j + 3];
  }
  for (; j < len; ++j) s0 += a[j] * b[j];
  return (s0 + s1) + (s2 + s3);
}

// Reduces the symmetric matrix held in the lower triangle of `a` (row-major,
// n x n) to tridiagonal form. Step k's two-sided update is deferred and fused
// with the symmetric product of step k+1, so the trailing block is streamed
// once per step.
void tridiagonalize(std::vector<double>& a, int n, std::vector<double>& diag,
                    std::vector<double>& off, std::vector<Reflector>* reflectors) {
  diag.assign(n, 0.0);
  off.assign(n > 1 ? n - 1 : 0, 0.0);
  if (n == 1) {
    diag[0] = a[0];
    return;
  }
  std::vector<double> v(n, 0.0), p(n, 0.0);
  std::vector<double> vp(n, 0.0), wp(n, 0.0);  // pending update
  bool pending = false;
  auto row = [&a, n](int i) { return a.data() + static_cast<std::size_t>(i) * n; };

  for (int k = 0; k + 2 < n; ++k) {
    if (pending)
      for (int i = k; i < n; ++i) row(i)[k] -= vp[i] * wp[k] + wp[i] * vp[k];
    diag[k] = row(k)[k];

    const double x0 = row(k + 1)[k];
    double sigma = 0.0;
    for (int i = k + 2; i < n; ++i) sigma += row(i)[k] * row(i)[k];
    double tau = 0.0;
    std::fill(v.begin(), v.end(), 0.0);
    if (sigma == 0.0) {
      off[k] = x0;
    } else {
      const double norm = std::sqrt(x0 * x0 + sigma);
      const double alpha = x0 <= 0.0 ? norm : -norm;
      v[k + 1] = x0 - alpha;
      for (int i = k + 2; i < n; ++i) v[i] = row(i)[k];
      tau = 2.0 / (v[k + 1] * v[k + 1] + sigma);
      off[k] = alpha;
    }
    if (reflectors) reflectors->push_back({v, tau});

    // Apply the pending update to the trailing block and accumulate p = B v.
    std::fill(p.begin(), p.end(), 0.0);
    for (int i = k + 1; i < n; ++i) {
      double* ai = row(i);
      const double vi = v[i];
      if (pending) {
        const double vpi = vp[i];
        const double wpi = wp[i];
        for (int j = k + 1; j <= i; ++j) ai[j] -= vpi * wp[j] + wpi * vp[j];
      }
      if (tau != 0.0) {
        for (int j = k + 1; j < i; ++j) p[j] += ai[j] * vi;
        p[i] += dot_unrolled(ai + k + 1, v.data() + k + 1, i - k - 1) + ai[i] * vi;
      }
    }

    if (tau == 0.0) {
      pending = false;
      continue;
    }
    double pv = 0.0;
    for (int i = k + 1; i < n; ++i) {
      p[i] *= tau;
      pv += p[i] * v[i];
    }
    const double half = 0.5 * tau * pv;
    for (int i = 0; i < n; ++i) {
      vp[i] = v[i];
      wp[i] = i > k ? p[i] - half * v[i] : 0.0;
    }
    pending = true;
  }

  const int last = n - 2;
  if (pending)
    for (int i = last; i < n; ++i)
      for (int j = last; j <= i; ++j) row(i)[j] -= vp[i] * wp[j] + wp[i] * vp[j];
  diag[last] = row(last)[last];
  off[last] = row(last + 1)[last];
  diag[last + 1] = row(last + 1)[last + 1];
}

// Implicit QL on (diag, off). When `zt` is non-null its rows are rotated
// alongside, so that on exit row i is the eigenvector for diag[i].
void tridiagonal_ql(std::vector<double>& diag, std::vector<double>& off,
                    std::vector<double>* zt) {
  const int n = static_cast<int>(diag.size());
  std::vector<double> e(n, 0.0);
  std::copy(off.begin(), off.end(), e.begin());
  const double eps = std::numeric_limits<double>::epsilon();

  for (int l = 0; l < n; ++l) {
    int sweeps = 0;
    int m;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::fabs(diag[m]) + std::fabs(diag[m + 1]);
        if (std::fabs(e[m]) <= eps * dd) break;
      }
      if (m == l) break;
      if (++sweeps > kMaxQlSweepsPerEigenvalue)
        throw NumericalFailure("tridiagonal QL did not converge", diag);

      double g = (diag[l + 1] - diag[l]) / (2.0 * e[l]);
      double r = std::hypot(g, 1.0);
      g = diag[m] - diag[l] + e[l] / (g + std::copysign(r, g));
      double s = 1.0, c = 1.0, p = 0.0;
      int i = m - 1;
      bool deflated = false;
      for (; i >= l; --i) {
        const double f = s * e[i];
        const double b = c * e[i];
        r = std::hypot(f, g);
        e[i + 1] = r;
        if (r == 0.0) {
          diag[i + 1] -= p;
          e[m] = 0.0;
          deflated = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = diag[i + 1] - p;
        r = (diag[i] - g) * s + 2.0 * c * b;
        p = s * r;
        diag[i + 1] = g + p;
        g = c * r - b;
        if (zt) {
          double* zi = zt->data() + static_cast<std::size_t>(i) * n;
          double* zi1 = zi + n;
          for (int q = 0; q < n; ++q) {
            const double t = zi1[q];
            zi1[q] = s * zi[q] + c * t;
            zi[q] = c * zi[q] - s * t;
          }
        }
      }
      if (deflated) continue;
      diag[l] -= p;
      e[l] = g;
      e[m] = 0.0;
    } while (m != l);
  }
}

void check_symmetric_matrix(const DenseTensor& x) {
  if (x.order() != 2) throw ContractViolation("eigvals_sym: input must be an order-2 tensor");
  const int n = x.dim();
  double scale = 0.0;
  for (double v : x.entries()) scale = std::max(scale, std::fabs(v));
  const double tol = 1e-10 * std::max(1.0, scale);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j)
      if (std::fabs(x(i, j) - x(j, i)) > tol)
        throw ContractViolation("eigvals_sym: matrix is not symmetric");
}

}  // namespace

std::vector<double> tridiagonal_eigenvalues(std::vector<double> diag, std::vector<double> off) {
  if (diag.empty() || off.size() + 1 != diag.size())
    throw ContractViolation("tridiagonal_eigenvalues: need n diagonal and n-1 off-diagonal entries");
  tridiagonal_ql(diag, off, nullptr);
  std::sort(diag.begin(), diag.end(), std::greater<>());
  return diag;
}

Spectrum eigvals_sym(const DenseTensor& x, bool want_vectors) {
  check_symmetric_matrix(x);
  const int n = x.dim();
  std::vector<double> a(x.entries().begin(), x.entries().end());
  std::vector<double> diag, off;
  std::vector<Reflector> reflectors;
  tridiagonalize(a, n, diag, off, want_vectors ? &reflectors : nullptr);

  Spectrum out;
  if (!want_vectors) {
    tridiagonal_ql(diag, off, nullptr);
    std::sort(diag.begin(), diag.end(), std::greater<>());
    out.eigenvalues = std::move(diag);
    return out;
  }

  // zt = H_{n-3} ... H_0, built by right-multiplying the identity.
  std::vector<double> zt(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) zt[static_cast<std::size_t>(i) * n + i] = 1.0;
  for (auto it = reflectors.rbegin(); it != reflectors.rend(); ++it) {
    if (it->tau == 0.0) continue;
    for (int r = 0; r < n; ++r) {
      double* zr = zt.data() + static_cast<std::size_t>(r) * n;
      const double s = it->tau * dot_unrolled(zr, it->v.data(), n);
      if (s == 0.0) continue;
      for (int j = 0; j < n; ++j) zr[j] -= s * it->v[j];
    }
  }
  tridiagonal_ql(diag, off, &zt);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int l, int r) { return diag[l] > diag[r]; });
  out.eigenvalues.reserve(n);
  out.eigenvectors.reserve(n);
  for (int idx : order) {
    out.eigenvalues.push_back(diag[idx]);
    const double* z = zt.data() + static_cast<std::size_t>(idx) * n;
    out.eigenvectors.emplace_back(z, z + n);
  }
  double residual = 0.0;
  std::vector<double> xv(n);
  for (int i = 0; i < n; ++i) {
    const auto& vec = out.eigenvectors[i];
    double r2 = 0.0;
    for (int r = 0; r < n; ++r) {
      const double* xr = x.entries().data() + static_cast<std::size_t>(r) * n;
      const double d = dot_unrolled(xr, vec.data(), n) - out.eigenvalues[i] * vec[r];
      r2 += d * d;
    }
    residual = std::max(residual, std::sqrt(r2));
  }
  out.residual = residual;
  return out;
}

Spectrum eigvals_sym(const SymmetricTensor& x, bool want_vectors) {
  return eigvals_sym(x.dense(), want_vectors);
}

double sample_quantile(std::span<const double> sorted, double level) {
  if (sorted.empty()) throw ContractViolation("sample_quantile: empty sample");
  const double h = level * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

LargestEigStats summarize_top_eigenvalues(std::span<const double> top) {
  if (top.empty()) throw ContractViolation("largest_eig_stats: empty batch");
  LargestEigStats s;
  s.count = top.size();
  const double m = static_cast<double>(top.size());
  s.mean = std::accumulate(top.begin(), top.end(), 0.0) / m;
  double ss = 0.0;
  for (double x : top) ss += (x - s.mean) * (x - s.mean);
  s.std_dev = top.size() > 1 ? std::sqrt(ss / (m - 1.0)) : 0.0;
  std::vector<double> sorted(top.begin(), top.end());
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  for (double level : kDefaultQuantileLevels)
    s.quantiles.emplace_back(level, sample_quantile(sorted, level));
  return s;
}

LargestEigStats largest_eig_stats(std::span<const Spectrum> batch) {
  std::vector<double> top;
  top.reserve(batch.size());
  for (const auto& s : batch) {
    if (s.eigenvalues.empty()) throw ContractViolation("largest_eig_stats: empty spectrum");
    top.push_back(s.largest());
  }
  return summarize_top_eigenvalues(top);
}

double ks_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ContractViolation("ks_distance: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() || j < sb.size()) {
    double x;
    if (j == sb.size() || (i < sa.size() && sa[i] <= sb[j])) x = sa[i];
    else x = sb[j];
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double semicircle_ref(double x) {
  if (x <= -2.0 || x >= 2.0) return 0.0;
  return std::sqrt(4.0 - x * x) / (2.0 * M_PI);
}

double semicircle_cdf(double x) {
  if (x <= -2.0) return 0.0;
  if (x >= 2.0) return 1.0;
  return 0.5 + x * std::sqrt(4.0 - x * x) / (4.0 * M_PI) + std::asin(x / 2.0) / M_PI;
}

nlohmann::json to_json(const LargestEigStats& stats) {
  nlohmann::json q = nlohmann::json::object();
  for (const auto& [level, value] : stats.quantiles) {
    std::ostringstream key;
    key << level;
    q[key.str()] = value;
  }
  return {{"count", stats.count}, {"mean", stats.mean}, {"std", stats.std_dev},
          {"min", stats.min},     {"max", stats.max},   {"quantiles", q}};
}

std::string spectra_csv(std::span<const Spectrum> batch) {
  std::ostringstream out;
  out.precision(17);
  const std::size_t n = batch.empty() ? 0 : batch.front().eigenvalues.size();
  for (std::size_t i = 0; i < n; ++i) out << (i ? "," : "") << "lambda_" << (i + 1);
  out << "\n";
  for (const auto& s : batch) {
    for (std::size_t i = 0; i < s.eigenvalues.size(); ++i)
      out << (i ? "," : "") << s.eigenvalues[i];
    out << "\n";
  }
  return out.str();
}

}  // namespace spiked
