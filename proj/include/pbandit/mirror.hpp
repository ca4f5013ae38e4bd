#pragma once

// Regularizers on the probability simplex: gradients, the simplex-constrained
// conjugate gradient, Bregman divergences and the (C1, C2) regularity
// constants.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pbandit/error.hpp"

namespace pbandit {

enum class RegularizerKind { NegativeEntropy, TsallisHalf };

inline std::string_view to_string(RegularizerKind k) {
  return k == RegularizerKind::NegativeEntropy ? "entropy" : "tsallis";
}

inline RegularizerKind parse_regularizer(std::string_view s) {
  if (s == "entropy" || s == "negative-entropy") return RegularizerKind::NegativeEntropy;
  if (s == "tsallis" || s == "tsallis-half") return RegularizerKind::TsallisHalf;
  throw ConfigError("unknown regularizer '" + std::string(s) + "'");
}

// Probability vector. Entries are nonnegative and sum to one within 1e-12.
class SimplexPoint {
 public:
  static constexpr double kSumTolerance = 1e-12;

  SimplexPoint() = default;

  explicit SimplexPoint(std::vector<double> p) : p_(std::move(p)) {
    if (p_.empty()) throw DomainError("SimplexPoint: empty vector");
    double s = 0.0;
    for (double v : p_) {
      if (!(v >= 0.0)) throw DomainError("SimplexPoint: negative or NaN entry");
      s += v;
    }
    if (std::abs(s - 1.0) > kSumTolerance * static_cast<double>(p_.size())) {
      throw DomainError("SimplexPoint: entries sum to " + std::to_string(s));
    }
  }

  static SimplexPoint uniform(std::size_t arms) { return SimplexPoint(std::vector<double>(arms, 1.0 / arms)); }

  static SimplexPoint vertex(std::size_t arms, std::size_t i) {
    std::vector<double> p(arms, 0.0);
    p.at(i) = 1.0;
    return SimplexPoint(std::move(p));
  }

  // Mixture a*x + (1-a)*y.
  static SimplexPoint mix(double a, const SimplexPoint& x, const SimplexPoint& y) {
    std::vector<double> p(x.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = a * x[i] + (1.0 - a) * y[i];
    return SimplexPoint(std::move(p));
  }

  std::size_t size() const { return p_.size(); }
  double operator[](std::size_t i) const { return p_[i]; }
  std::span<const double> values() const { return p_; }
  double min() const { return *std::min_element(p_.begin(), p_.end()); }

  // Inverse-CDF sampling with a uniform u in [0,1). Zero-mass arms are never
  // returned.
  std::size_t sample(double u) const {
    double cum = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < p_.size(); ++i) {
      if (p_[i] <= 0.0) continue;
      cum += p_[i];
      last_positive = i;
      if (u < cum) return i;
    }
    return last_positive;
  }

  friend bool operator==(const SimplexPoint&, const SimplexPoint&) = default;

 private:
  std::vector<double> p_;
};

struct RegularityConstants {
  double c1 = 0.0;  // diameter: D(y, x0) <= c1
  double c2 = 0.0;  // local-norm stability
};

class Regularizer {
 public:
  // Coordinates below this are outside the gradient's domain.
  static constexpr double kInteriorFloor = 1e-300;

  Regularizer(RegularizerKind kind, std::size_t arms, double delta) : kind_(kind), arms_(arms), delta_(delta) {
    if (arms_ < 2) throw ConfigError("regularizer needs at least 2 arms");
    if (!(delta_ > 0.0 && delta_ <= 1.0 / static_cast<double>(arms_))) {
      throw ConfigError("comparator margin delta must lie in (0, 1/A]");
    }
  }

  RegularizerKind kind() const { return kind_; }
  std::size_t arms() const { return arms_; }
  double delta() const { return delta_; }

  RegularityConstants constants() const {
    const double a = static_cast<double>(arms_);
    if (kind_ == RegularizerKind::NegativeEntropy) return {std::log(a), 1.0 / delta_};
    return {2.0 * (std::sqrt(a) - 1.0), 2.0 / delta_};
  }

  SimplexPoint base_point() const { return SimplexPoint::uniform(arms_); }

 private:
  RegularizerKind kind_;
  std::size_t arms_;
  double delta_;
};

// Psi(x): sum x log x, or -2 sum sqrt(x).
inline double psi(const Regularizer& reg, const SimplexPoint& x) {
  double s = 0.0;
  if (reg.kind() == RegularizerKind::NegativeEntropy) {
    for (double v : x.values())
      if (v > 0.0) s += v * std::log(v);
    return s;
  }
  for (double v : x.values()) s -= 2.0 * std::sqrt(v);
  return s;
}

inline std::vector<double> grad_psi(const Regularizer& reg, const SimplexPoint& x) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    if (!(v >= Regularizer::kInteriorFloor)) {
      throw DomainError("grad_psi: coordinate " + std::to_string(i) + " is not interior");
    }
    g[i] = reg.kind() == RegularizerKind::NegativeEntropy ? 1.0 + std::log(v) : -1.0 / std::sqrt(v);
  }
  return g;
}

// A simplex point together with a representative of its gradient that is
// computed in closed form from the dual, so it stays finite even when the
// primal coordinates underflow.
struct MirrorPoint {
  SimplexPoint primal;
  std::vector<double> dual;
};

namespace detail {

inline MirrorPoint entropy_conjugate(std::span<const double> theta) {
  const double mx = *std::max_element(theta.begin(), theta.end());
  double z = 0.0;
  for (double v : theta) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  std::vector<double> p(theta.size()), dual(theta.size());
  double s = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    p[i] = std::exp(theta[i] - mx) / z;
    s += p[i];
    dual[i] = 1.0 + (theta[i] - lse);
  }
  for (auto& v : p) v /= s;
  return {SimplexPoint(std::move(p)), std::move(dual)};
}

// x_i = 1/(lambda - theta_i)^2 with sum x_i = 1. After shifting so that
// max theta = 0, lambda lies in [1, sqrt(A)]: at lambda = 1 the largest term
// alone is 1, at lambda = sqrt(A) every term is at most 1/A.
inline MirrorPoint tsallis_conjugate(std::span<const double> theta) {
  constexpr int kMaxIterations = 200;
  constexpr double kTolerance = 1e-12;
  const double mx = *std::max_element(theta.begin(), theta.end());
  const std::size_t n = theta.size();
  std::vector<double> shifted(n);
  for (std::size_t i = 0; i < n; ++i) shifted[i] = theta[i] - mx;

  auto excess = [&](double lambda) {
    double s = 0.0;
    for (double v : shifted) {
      const double gap = lambda - v;
      s += 1.0 / (gap * gap);
    }
    return s - 1.0;
  };

  double lo = 1.0, hi = std::sqrt(static_cast<double>(n));
  double lambda = lo;
  bool converged = false;
  if (std::abs(excess(lo)) <= kTolerance) {
    converged = true;
  } else if (std::abs(excess(hi)) <= kTolerance) {
    lambda = hi;
    converged = true;
  }
  for (int it = 0; it < kMaxIterations && !converged; ++it) {
    lambda = 0.5 * (lo + hi);
    const double f = excess(lambda);
    if (std::abs(f) <= kTolerance || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
      converged = std::abs(f) <= 1e-10;
      break;
    }
    (f > 0.0 ? lo : hi) = lambda;
  }
  if (!converged) throw NumericalError("tsallis conjugate: bisection did not converge");

  std::vector<double> p(n), dual(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double gap = lambda - shifted[i];
    p[i] = 1.0 / (gap * gap);
    s += p[i];
    dual[i] = -gap;
  }
  for (auto& v : p) v /= s;
  return {SimplexPoint(std::move(p)), std::move(dual)};
}

}  // namespace detail

inline MirrorPoint conjugate_point(const Regularizer& reg, std::span<const double> theta) {
  if (theta.size() != reg.arms()) throw DomainError("conjugate: dimension mismatch");
  for (double v : theta)
    if (!std::isfinite(v)) throw DomainError("conjugate: non-finite dual vector");
  return reg.kind() == RegularizerKind::NegativeEntropy ? detail::entropy_conjugate(theta)
                                                        : detail::tsallis_conjugate(theta);
}

// argmax_{x in simplex} <theta, x> - Psi(x).
inline SimplexPoint grad_psi_star_constrained(const Regularizer& reg, std::span<const double> theta) {
  return conjugate_point(reg, theta).primal;
}

inline double bregman(const Regularizer& reg, const SimplexPoint& x, const SimplexPoint& y) {
  if (x.size() != y.size()) throw DomainError("bregman: dimension mismatch");
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] >= Regularizer::kInteriorFloor)) throw DomainError("bregman: y is not interior");
  }
  double d = 0.0;
  if (reg.kind() == RegularizerKind::NegativeEntropy) {
    // KL(x || y) plus the (zero on the simplex) mass correction.
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] > 0.0) d += x[i] * std::log(x[i] / y[i]);
      d += y[i] - x[i];
    }
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double diff = std::sqrt(x[i]) - std::sqrt(y[i]);
      d += diff * diff / std::sqrt(y[i]);
    }
  }
  return std::max(d, 0.0);
}

}  // namespace pbandit
