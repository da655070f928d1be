#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <vector>

#include <json.hpp>

#include "spiked/rng.hpp"

namespace spiked {

inline constexpr std::size_t kDefaultEntryBudget = 100'000'000;

// Number of entries of an order-`order` tensor over `dim` dimensions.
// Throws SizingError when dim^order exceeds `budget`, ContractViolation when
// order or dim is not positive.
std::size_t tensor_entry_count(int order, int dim, std::size_t budget = kDefaultEntryBudget);

// Dense order-k tensor over R^n, stored flat in row-major order (last index
// fastest).
class DenseTensor {
 public:
  DenseTensor(int order, int dim, std::size_t budget = kDefaultEntryBudget);
  DenseTensor(int order, int dim, std::vector<double> entries,
              std::size_t budget = kDefaultEntryBudget);

  int order() const noexcept { return order_; }
  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }

  std::span<const double> entries() const noexcept { return entries_; }
  std::span<double> entries() noexcept { return entries_; }

  std::size_t offset(std::span<const int> index) const;
  double at(std::initializer_list<int> index) const;
  double& at(std::initializer_list<int> index);

  // Matrix access for order-2 tensors; unchecked.
  double operator()(int i, int j) const noexcept {
    return entries_[static_cast<std::size_t>(i) * dim_ + j];
  }
  double& operator()(int i, int j) noexcept {
    return entries_[static_cast<std::size_t>(i) * dim_ + j];
  }

  bool same_shape(const DenseTensor& other) const noexcept {
    return order_ == other.order_ && dim_ == other.dim_;
  }

  DenseTensor& operator+=(const DenseTensor& other);
  DenseTensor& operator*=(double scale) noexcept;

 private:
  int order_;
  int dim_;
  std::vector<double> entries_;
};

// A DenseTensor known to be invariant under every permutation of its index
// positions.
class SymmetricTensor {
 public:
  // Verifies symmetry to within `tolerance` (absolute, scaled by the largest
  // entry magnitude). Exhaustive when n^k <= 10^6, otherwise on 10^6 sampled
  // index tuples. Throws ContractViolation on failure.
  static SymmetricTensor from_dense(DenseTensor tensor, double tolerance = 1e-12);

  // Trusts the caller; used by operations that produce symmetric output by
  // construction.
  static SymmetricTensor assume_symmetric(DenseTensor tensor) {
    return SymmetricTensor(std::move(tensor));
  }

  const DenseTensor& dense() const noexcept { return tensor_; }
  int order() const noexcept { return tensor_.order(); }
  int dim() const noexcept { return tensor_.dim(); }
  std::span<const double> entries() const noexcept { return tensor_.entries(); }
  double operator()(int i, int j) const noexcept { return tensor_(i, j); }

  DenseTensor release() && { return std::move(tensor_); }

 private:
  explicit SymmetricTensor(DenseTensor tensor) : tensor_(std::move(tensor)) {}

  DenseTensor tensor_;
};

// Largest |X - X^pi| over checked index tuples and transpositions.
double symmetry_defect(const DenseTensor& tensor);

// Point on the unit sphere S^{n-1}.
class UnitVector {
 public:
  // Requires | ||v|| - 1 | <= 1e-12.
  static UnitVector from(std::vector<double> coords);
  // Normalizes; throws ContractViolation on a zero vector.
  static UnitVector normalized(std::vector<double> coords);
  static UnitVector basis(int dim, int axis);

  int dim() const noexcept { return static_cast<int>(coords_.size()); }
  std::span<const double> coords() const noexcept { return coords_; }
  double operator[](int i) const noexcept { return coords_[i]; }

 private:
  explicit UnitVector(std::vector<double> coords) : coords_(std::move(coords)) {}

  std::vector<double> coords_;
};

double dot(std::span<const double> a, std::span<const double> b);

SymmetricTensor outer_power(const UnitVector& v, int order,
                            std::size_t budget = kDefaultEntryBudget);
// v_1 (x) v_2 (x) ... (x) v_k; all factors must share a dimension.
DenseTensor outer_product(std::span<const UnitVector> factors,
                          std::size_t budget = kDefaultEntryBudget);

double inner(const DenseTensor& x, const DenseTensor& y);
double frobenius(const DenseTensor& x);

// Average of G^pi over all k! permutations of index positions (k <= 10).
SymmetricTensor symmetrize(const DenseTensor& g);

// <X, u (x) ... (x) u>.
double multilinear_form(const DenseTensor& x, std::span<const double> u);
// <X, u_1 (x) ... (x) u_k>.
double multilinear_form(const DenseTensor& x, std::span<const UnitVector> factors);

// X contracted with u along every index position except the first:
// y_i = sum X_{i, j_2..j_k} u_{j_2} ... u_{j_k}.
std::vector<double> contract_all_but_first(const DenseTensor& x, std::span<const double> u);

// X contracted with factor j along every position j != mode.
std::vector<double> contract_all_but(const DenseTensor& x, std::span<const UnitVector> factors,
                                     int mode);

struct OperatorNormEstimate {
  double value;
  UnitVector witness;
};

struct AsymOperatorNormEstimate {
  double value;
  std::vector<UnitVector> witnesses;
};

// Lower bound on ||X||_op = max_u |<X, u^{(x)k}>| from symmetric power
// iteration with `restarts` uniform starts. Exact on rank-one input.
OperatorNormEstimate operator_norm_lb(const SymmetricTensor& x, int restarts, int iters, Rng& rng);

// Lower bound on max |<X, u_1 (x) ... (x) u_k>| by alternating power
// iteration over the k factors.
AsymOperatorNormEstimate operator_norm_lb_asym(const DenseTensor& x, int restarts, int iters,
                                               Rng& rng);

// Binary layout: "SPKT", u32 order, u32 dim, u32 reserved (0), then dim^order
// little-endian IEEE-754 doubles.
void write_binary(const DenseTensor& x, std::ostream& out);
DenseTensor read_binary(std::istream& in, std::size_t budget = kDefaultEntryBudget);

inline constexpr std::size_t kJsonEntryLimit = 10'000;
// {"order": k, "dim": n, "entries": [...]}; only for n^k <= 10^4.
nlohmann::json to_json(const DenseTensor& x);
DenseTensor tensor_from_json(const nlohmann::json& j);

}  // namespace spiked
