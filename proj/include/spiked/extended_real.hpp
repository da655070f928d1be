#pragma once

#include <compare>
#include <limits>
#include <ostream>

namespace spiked {

// A real number or -infinity. -infinity is a tag, never a floating-point
// value, and orders below every finite value.
class ExtendedReal {
 public:
  constexpr ExtendedReal(double finite) : value_(finite), neg_inf_(false) {}  // NOLINT

  static constexpr ExtendedReal neg_inf() { return ExtendedReal(); }

  constexpr bool is_neg_inf() const noexcept { return neg_inf_; }
  constexpr bool is_finite() const noexcept { return !neg_inf_; }

  // Finite value; meaningless (0) for -infinity.
  constexpr double value() const noexcept { return neg_inf_ ? 0.0 : value_; }

  // IEEE representation, -inf for the tag. For output only.
  constexpr double to_double() const noexcept {
    return neg_inf_ ? -std::numeric_limits<double>::infinity() : value_;
  }

  friend constexpr std::partial_ordering operator<=>(const ExtendedReal& a,
                                                     const ExtendedReal& b) noexcept {
    if (a.neg_inf_ || b.neg_inf_) {
      if (a.neg_inf_ && b.neg_inf_) return std::partial_ordering::equivalent;
      return a.neg_inf_ ? std::partial_ordering::less : std::partial_ordering::greater;
    }
    return a.value_ <=> b.value_;
  }
  friend constexpr bool operator==(const ExtendedReal& a, const ExtendedReal& b) noexcept {
    return (a <=> b) == 0;
  }

  friend std::ostream& operator<<(std::ostream& os, const ExtendedReal& x) {
    return x.neg_inf_ ? os << "-inf" : os << x.value_;
  }

 private:
  constexpr ExtendedReal() : value_(0.0), neg_inf_(true) {}

  double value_;
  bool neg_inf_;
};

}  // namespace spiked
