#include "spiked/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "spiked/errors.hpp"

namespace spiked {
namespace {

constexpr std::size_t kExhaustiveSymmetryLimit = 1'000'000;

std::vector<double> gaussian_direction(int dim, Rng& rng) {
  std::vector<double> g(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& x : g) {
      x = rng.normal();
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : g) x *= inv;
  return g;
}

// Flips the sign so the first nonzero coordinate is positive.
void normalize_sign(std::vector<double>& v) {
  for (double x : v) {
    if (x == 0.0) continue;
    if (x < 0.0)
      for (double& y : v) y = -y;
    return;
  }
}

bool normalize_in_place(std::vector<double>& v) {
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  if (!(norm2 > 0.0) || !std::isfinite(norm2)) return false;
  const double norm = std::sqrt(norm2);
  for (double& x : v) x /= norm;
  return true;
}

// Contracts position `mode` of a tensor of shape dim^order with u.
std::vector<double> contract_mode(std::span<const double> t, int order, int dim, int mode,
                                  std::span<const double> u) {
  std::size_t outer = 1;
  for (int m = 0; m < mode; ++m) outer *= dim;
  std::size_t inner_len = 1;
  for (int m = mode + 1; m < order; ++m) inner_len *= dim;
  std::vector<double> out(outer * inner_len, 0.0);
  for (std::size_t p = 0; p < outer; ++p) {
    const double* block = t.data() + p * dim * inner_len;
    double* dst = out.data() + p * inner_len;
    for (int j = 0; j < dim; ++j) {
      const double w = u[j];
      const double* row = block + j * inner_len;
      for (std::size_t q = 0; q < inner_len; ++q) dst[q] += w * row[q];
    }
  }
  return out;
}

void check_same_shape(const DenseTensor& a, const DenseTensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ContractViolation(std::string(op) + ": shape mismatch (order " +
                            std::to_string(a.order()) + ", dim " + std::to_string(a.dim()) +
                            " vs order " + std::to_string(b.order()) + ", dim " +
                            std::to_string(b.dim()) + ")");
}

}  // namespace

std::size_t tensor_entry_count(int order, int dim, std::size_t budget) {
  if (order < 1) throw ContractViolation("tensor order must be >= 1");
  if (dim < 1) throw ContractViolation("tensor dimension must be >= 1");
  std::size_t count = 1;
  for (int i = 0; i < order; ++i) {
    if (count > budget / static_cast<std::size_t>(dim))
      throw SizingError("tensor of order " + std::to_string(order) + " over " +
                        std::to_string(dim) + " dimensions exceeds the entry budget of " +
                        std::to_string(budget));
    count *= static_cast<std::size_t>(dim);
  }
  return count;
}

DenseTensor::DenseTensor(int order, int dim, std::size_t budget)
    : order_(order), dim_(dim), entries_(tensor_entry_count(order, dim, budget), 0.0) {}

DenseTensor::DenseTensor(int order, int dim, std::vector<double> entries, std::size_t budget)
    : order_(order), dim_(dim), entries_(std::move(entries)) {
  if (entries_.size() != tensor_entry_count(order, dim, budget))
    throw ContractViolation("tensor entry count " + std::to_string(entries_.size()) +
                            " does not equal dim^order");
}

std::size_t DenseTensor::offset(std::span<const int> index) const {
  if (static_cast<int>(index.size()) != order_)
    throw ContractViolation("index arity does not match tensor order");
  std::size_t off = 0;
  for (int i : index) {
    if (i < 0 || i >= dim_) throw ContractViolation("tensor index out of range");
    off = off * dim_ + static_cast<std::size_t>(i);
  }
  return off;
}

double DenseTensor::at(std::initializer_list<int> index) const {
  return entries_[offset(std::span<const int>(index.begin(), index.size()))];
}

double& DenseTensor::at(std::initializer_list<int> index) {
  return entries_[offset(std::span<const int>(index.begin(), index.size()))];
}

DenseTensor& DenseTensor::operator+=(const DenseTensor& other) {
  check_same_shape(*this, other, "tensor addition");
  for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i] += other.entries_[i];
  return *this;
}

DenseTensor& DenseTensor::operator*=(double scale) noexcept {
  for (double& x : entries_) x *= scale;
  return *this;
}

double symmetry_defect(const DenseTensor& tensor) {
  const int k = tensor.order();
  const int n = tensor.dim();
  if (k == 1) return 0.0;
  const auto entries = tensor.entries();
  std::vector<int> index(k);
  double defect = 0.0;
  // Adjacent transpositions generate the symmetric group, so checking them is
  // enough.
  auto check = [&](std::size_t off) {
    std::size_t rem = off;
    for (int p = k - 1; p >= 0; --p) {
      index[p] = static_cast<int>(rem % n);
      rem /= n;
    }
    for (int p = 0; p + 1 < k; ++p) {
      std::swap(index[p], index[p + 1]);
      std::size_t swapped = 0;
      for (int i : index) swapped = swapped * n + i;
      std::swap(index[p], index[p + 1]);
      defect = std::max(defect, std::fabs(entries[off] - entries[swapped]));
    }
  };
  if (entries.size() <= kExhaustiveSymmetryLimit) {
    for (std::size_t off = 0; off < entries.size(); ++off) check(off);
  } else {
    Rng rng(0x5eed5eedULL);
    for (std::size_t s = 0; s < kExhaustiveSymmetryLimit; ++s)
      check(rng.uniform_index(entries.size()));
  }
  return defect;
}

SymmetricTensor SymmetricTensor::from_dense(DenseTensor tensor, double tolerance) {
  double scale = 0.0;
  for (double x : tensor.entries()) scale = std::max(scale, std::fabs(x));
  const double defect = symmetry_defect(tensor);
  if (defect > tolerance * std::max(1.0, scale))
    throw ContractViolation("tensor is not symmetric (defect " + std::to_string(defect) + ")");
  return SymmetricTensor(std::move(tensor));
}

UnitVector UnitVector::from(std::vector<double> coords) {
  if (coords.empty()) throw ContractViolation("unit vector must have dimension >= 1");
  double norm2 = 0.0;
  for (double x : coords) norm2 += x * x;
  if (!(std::fabs(std::sqrt(norm2) - 1.0) <= 1e-12))
    throw ContractViolation("vector is not of unit norm");
  return UnitVector(std::move(coords));
}

UnitVector UnitVector::normalized(std::vector<double> coords) {
  if (coords.empty()) throw ContractViolation("unit vector must have dimension >= 1");
  if (!normalize_in_place(coords)) throw ContractViolation("cannot normalize a zero vector");
  return UnitVector(std::move(coords));
}

UnitVector UnitVector::basis(int dim, int axis) {
  if (dim < 1 || axis < 0 || axis >= dim) throw ContractViolation("basis axis out of range");
  std::vector<double> e(dim, 0.0);
  e[axis] = 1.0;
  return UnitVector(std::move(e));
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractViolation("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

SymmetricTensor outer_power(const UnitVector& v, int order, std::size_t budget) {
  if (order < 1) throw ContractViolation("outer_power: order must be >= 1");
  std::vector<UnitVector> factors(order, v);
  return SymmetricTensor::assume_symmetric(outer_product(factors, budget));
}

DenseTensor outer_product(std::span<const UnitVector> factors, std::size_t budget) {
  if (factors.empty()) throw ContractViolation("outer_product: no factors");
  const int n = factors.front().dim();
  for (const auto& f : factors)
    if (f.dim() != n) throw ContractViolation("outer_product: factor dimensions differ");
  const int k = static_cast<int>(factors.size());
  DenseTensor out(k, n, budget);
  auto data = out.entries();
  // Build one factor at a time: after step m the first n^(m+1) entries hold
  // the order-(m+1) product.
  const auto first = factors[0].coords();
  std::copy(first.begin(), first.end(), data.begin());
  std::size_t len = n;
  for (int m = 1; m < k; ++m) {
    const auto f = factors[m].coords();
    for (std::size_t p = len; p-- > 0;) {
      const double head = data[p];
      double* dst = data.data() + p * n;
      for (int j = 0; j < n; ++j) dst[j] = head * f[j];
    }
    len *= n;
  }
  return out;
}

double inner(const DenseTensor& x, const DenseTensor& y) {
  check_same_shape(x, y, "inner");
  return dot(x.entries(), y.entries());
}

double frobenius(const DenseTensor& x) { return std::sqrt(inner(x, x)); }

SymmetricTensor symmetrize(const DenseTensor& g) {
  const int k = g.order();
  const int n = g.dim();
  if (k > 10) throw ContractViolation("symmetrize: order must be <= 10");
  DenseTensor out(k, n, std::vector<double>(g.size()), std::numeric_limits<std::size_t>::max());
  const auto src = g.entries();
  auto dst = out.entries();

  // Visit each multiset of indices once, in its sorted representative, and
  // average over its distinct arrangements. Every distinct arrangement occurs
  // equally often among the k! permutations, so this equals the k! average.
  std::vector<int> sorted(k, 0);
  std::vector<int> perm(k);
  std::vector<std::size_t> offsets;
  auto flat = [n](const std::vector<int>& idx) {
    std::size_t off = 0;
    for (int i : idx) off = off * n + i;
    return off;
  };
  for (;;) {
    offsets.clear();
    perm = sorted;
    double sum = 0.0;
    bool constant = true;
    do {
      const std::size_t off = flat(perm);
      offsets.push_back(off);
      sum += src[off];
      constant = constant && src[off] == src[offsets.front()];
    } while (std::next_permutation(perm.begin(), perm.end()));
    // Already-symmetric orbits are copied so that symmetrization is exactly
    // idempotent.
    const double mean = constant ? src[offsets.front()] : sum / static_cast<double>(offsets.size());
    for (std::size_t off : offsets) dst[off] = mean;

    // Next non-decreasing tuple.
    int p = k - 1;
    while (p >= 0 && sorted[p] == n - 1) --p;
    if (p < 0) break;
    const int v = sorted[p] + 1;
    for (int q = p; q < k; ++q) sorted[q] = v;
  }
  return SymmetricTensor::assume_symmetric(std::move(out));
}

std::vector<double> contract_all_but_first(const DenseTensor& x, std::span<const double> u) {
  if (static_cast<int>(u.size()) != x.dim())
    throw ContractViolation("contraction: vector length does not match tensor dimension");
  const int n = x.dim();
  const int k = x.order();
  if (k == 1) return {x.entries().begin(), x.entries().end()};
  // Contract the last position repeatedly.
  std::vector<double> cur = contract_mode(x.entries(), k, n, k - 1, u);
  for (int order = k - 1; order > 1; --order) cur = contract_mode(cur, order, n, order - 1, u);
  return cur;
}

std::vector<double> contract_all_but(const DenseTensor& x, std::span<const UnitVector> factors,
                                     int mode) {
  const int k = x.order();
  const int n = x.dim();
  if (static_cast<int>(factors.size()) != k)
    throw ContractViolation("contraction: need one factor per tensor position");
  if (mode < 0 || mode >= k) throw ContractViolation("contraction: mode out of range");
  for (const auto& f : factors)
    if (f.dim() != n)
      throw ContractViolation("contraction: factor length does not match tensor dimension");
  std::vector<double> cur(x.entries().begin(), x.entries().end());
  int order = k;
  // Highest positions first so lower position numbers stay valid.
  for (int m = k - 1; m >= 0; --m) {
    if (m == mode) continue;
    cur = contract_mode(cur, order, n, m, factors[m].coords());
    --order;
  }
  return cur;
}

double multilinear_form(const DenseTensor& x, std::span<const double> u) {
  const auto y = contract_all_but_first(x, u);
  return dot(y, u);
}

double multilinear_form(const DenseTensor& x, std::span<const UnitVector> factors) {
  const auto y = contract_all_but(x, factors, 0);
  return dot(y, factors[0].coords());
}

OperatorNormEstimate operator_norm_lb(const SymmetricTensor& x, int restarts, int iters,
                                      Rng& rng) {
  if (restarts < 1 || iters < 1)
    throw ContractViolation("operator_norm_lb: restarts and iters must be >= 1");
  const int n = x.dim();
  const int k = x.order();
  const std::uint64_t base = rng.next_u64();

  double best = -1.0;
  std::vector<double> best_u;
  for (int r = 0; r < restarts; ++r) {
    Rng stream(sub_seed(base, static_cast<std::uint64_t>(r)));
    std::vector<double> u = gaussian_direction(n, stream);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < iters; ++it) {
      std::vector<double> y = contract_all_but_first(x.dense(), u);
      const double value = std::fabs(dot(y, u));
      if (value > best) {
        best = value;
        best_u = u;
      }
      if (std::fabs(value - prev) < 1e-12 * std::max(1.0, value)) break;
      prev = value;
      if (k == 1) break;
      if (!normalize_in_place(y)) break;
      u = std::move(y);
    }
    // Score the final iterate too.
    const double value = std::fabs(multilinear_form(x.dense(), u));
    if (value > best) {
      best = value;
      best_u = u;
    }
  }
  if (best <= 0.0) return {0.0, UnitVector::basis(n, 0)};
  normalize_sign(best_u);
  return {best, UnitVector::normalized(std::move(best_u))};
}

AsymOperatorNormEstimate operator_norm_lb_asym(const DenseTensor& x, int restarts, int iters,
                                               Rng& rng) {
  if (restarts < 1 || iters < 1)
    throw ContractViolation("operator_norm_lb_asym: restarts and iters must be >= 1");
  const int n = x.dim();
  const int k = x.order();
  const std::uint64_t base = rng.next_u64();

  double best = -1.0;
  std::vector<UnitVector> best_factors;
  for (int r = 0; r < restarts; ++r) {
    Rng stream(sub_seed(base, static_cast<std::uint64_t>(r)));
    std::vector<UnitVector> factors;
    for (int m = 0; m < k; ++m)
      factors.push_back(UnitVector::normalized(gaussian_direction(n, stream)));
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < iters; ++it) {
      bool degenerate = false;
      for (int m = 0; m < k && !degenerate; ++m) {
        std::vector<double> y = contract_all_but(x, factors, m);
        if (!normalize_in_place(y)) degenerate = true;
        else factors[m] = UnitVector::normalized(std::move(y));
      }
      const double value = std::fabs(multilinear_form(x, factors));
      if (value > best) {
        best = value;
        best_factors = factors;
      }
      if (degenerate || std::fabs(value - prev) < 1e-12 * std::max(1.0, value)) break;
      prev = value;
    }
  }
  if (best <= 0.0) return {0.0, std::vector<UnitVector>(k, UnitVector::basis(n, 0))};
  return {best, std::move(best_factors)};
}

void write_binary(const DenseTensor& x, std::ostream& out) {
  auto put_u32 = [&out](std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                           static_cast<char>((v >> 16) & 0xff),
                           static_cast<char>((v >> 24) & 0xff)};
    out.write(bytes, 4);
  };
  out.write("SPKT", 4);
  put_u32(static_cast<std::uint32_t>(x.order()));
  put_u32(static_cast<std::uint32_t>(x.dim()));
  put_u32(0);
  for (double v : x.entries()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    out.write(bytes, 8);
  }
  if (!out) throw Error("failed writing tensor");
}

DenseTensor read_binary(std::istream& in, std::size_t budget) {
  char header[16];
  if (!in.read(header, 16)) throw ContractViolation("tensor file: truncated header");
  if (std::memcmp(header, "SPKT", 4) != 0) throw ContractViolation("tensor file: bad magic");
  auto get_u32 = [&header](int at) {
    std::uint32_t v = 0;
    for (int b = 3; b >= 0; --b) v = (v << 8) | static_cast<unsigned char>(header[at + b]);
    return v;
  };
  const std::uint32_t k = get_u32(4);
  const std::uint32_t n = get_u32(8);
  if (k > static_cast<std::uint32_t>(std::numeric_limits<int>::max()) ||
      n > static_cast<std::uint32_t>(std::numeric_limits<int>::max()))
    throw ContractViolation("tensor file: shape out of range");
  DenseTensor x(static_cast<int>(k), static_cast<int>(n), budget);
  for (double& v : x.entries()) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8))
      throw ContractViolation("tensor file: truncated entries");
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | bytes[b];
    v = std::bit_cast<double>(bits);
  }
  return x;
}

nlohmann::json to_json(const DenseTensor& x) {
  if (x.size() > kJsonEntryLimit)
    throw SizingError("tensor too large for JSON export (" + std::to_string(x.size()) +
                      " entries, limit " + std::to_string(kJsonEntryLimit) + ")");
  return {{"order", x.order()},
          {"dim", x.dim()},
          {"entries", std::vector<double>(x.entries().begin(), x.entries().end())}};
}

DenseTensor tensor_from_json(const nlohmann::json& j) {
  try {
    return DenseTensor(j.at("order").get<int>(), j.at("dim").get<int>(),
                       j.at("entries").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation(std::string("tensor JSON: ") + e.what());
  }
}

}  // namespace spiked
