#pragma once

// Vector geometry on R^3: normalization, angles, rotate-toward and
// weighted aggregation.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "fishmpc/error.hpp"

namespace fishmpc {

/// Norms at or below this are treated as the zero vector.
inline constexpr double kZeroNorm = 1e-12;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3() = default;
  constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Vec3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }

  friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend constexpr Vec3 operator/(const Vec3& a, double s) { return {a.x / s, a.y / s, a.z / s}; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;

  [[nodiscard]] bool is_finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
  [[nodiscard]] std::array<double, 3> to_array() const { return {x, y, z}; }
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

constexpr double squared_norm(const Vec3& a) { return dot(a, a); }

inline double norm(const Vec3& a) { return std::hypot(a.x, a.y, a.z); }

inline bool is_zero(const Vec3& a) { return norm(a) <= kZeroNorm; }

/// A vector of Euclidean norm one. Only obtainable through normalization,
/// so the invariant holds for every instance.
class UnitVec3 {
 public:
  /// Normalizes `v`; throws ZeroVector when `v` is zero.
  static UnitVec3 from(const Vec3& v) {
    const double n = norm(v);
    if (!(n > kZeroNorm)) throw ZeroVector("normalize");
    return UnitVec3(v / n);
  }

  [[nodiscard]] const Vec3& vec() const { return v_; }
  operator const Vec3&() const { return v_; }  // NOLINT(google-explicit-constructor)
  [[nodiscard]] double x() const { return v_.x; }
  [[nodiscard]] double y() const { return v_.y; }
  [[nodiscard]] double z() const { return v_.z; }

  friend bool operator==(const UnitVec3&, const UnitVec3&) = default;

 private:
  explicit UnitVec3(const Vec3& v) : v_(v) {}
  Vec3 v_{1.0, 0.0, 0.0};
};

/// phi(x) = x / |x|.
inline UnitVec3 normalize(const Vec3& v) { return UnitVec3::from(v); }

/// Angle in [0, pi]; zero when either argument is the zero vector.
inline double angle_between(const Vec3& a, const Vec3& b) {
  if (is_zero(a) || is_zero(b)) return 0.0;
  // atan2 keeps full relative precision near 0 and pi, where acos of a
  // clamped cosine loses about half the digits.
  return std::atan2(norm(cross(a, b)), dot(a, b));
}

namespace detail {

// Unit vector orthogonal to `v`, used when the rotation plane is undefined:
// tilt toward the canonical axis along which |v| has its smallest component.
inline Vec3 fallback_tangent(const Vec3& v) {
  const std::array<double, 3> mag{std::abs(v.x), std::abs(v.y), std::abs(v.z)};
  const auto k = static_cast<std::size_t>(std::min_element(mag.begin(), mag.end()) - mag.begin());
  Vec3 e;
  (k == 0 ? e.x : k == 1 ? e.y : e.z) = 1.0;
  const Vec3 t = e - dot(e, v) * v;
  return t / norm(t);
}

}  // namespace detail

/// R_{x,theta}: rotates `v` by `theta` in the plane spanned by `v` and `x`,
/// turning toward `x`. The rotation does not stop at the direction of `x`.
/// The identity when `x` is zero.
inline UnitVec3 rotate_toward(const UnitVec3& v, const Vec3& x, double theta) {
  if (theta < 0.0) throw InvalidArgument("rotate_toward: negative angle");
  if (is_zero(x)) return v;
  const double turn = std::fmod(theta, 2.0 * std::numbers::pi);
  if (turn == 0.0) return v;

  const Vec3& u = v.vec();
  const Vec3 perp = x - dot(x, u) * u;
  const double perp_norm = norm(perp);
  // Parallel or antiparallel: the rotation plane is not determined by x.
  const Vec3 tangent =
      perp_norm > kZeroNorm * std::max(1.0, norm(x)) ? perp / perp_norm : detail::fallback_tangent(u);
  return normalize(std::cos(turn) * u + std::sin(turn) * tangent);
}

/// Nonnegative weights summing to one.
class WeightVector {
 public:
  static constexpr double kSumTolerance = 1e-12;

  explicit WeightVector(std::vector<double> w) : w_(std::move(w)) {
    if (w_.empty()) throw InvalidArgument("weight vector is empty");
    double sum = 0.0;
    for (double a : w_) {
      if (!(a >= 0.0) || !std::isfinite(a)) throw InvalidArgument("weights must be nonnegative");
      sum += a;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) throw InvalidArgument("weights must sum to one");
  }

  static WeightVector uniform(std::size_t n) {
    return WeightVector(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  [[nodiscard]] std::size_t size() const { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  [[nodiscard]] std::span<const double> values() const { return w_; }

 private:
  std::vector<double> w_;
};

/// <v>_alpha = sum_i alpha_i v_i.
inline Vec3 weighted_sum(std::span<const Vec3> vectors, const WeightVector& alpha) {
  if (vectors.size() != alpha.size()) throw DimensionMismatch(alpha.size(), vectors.size());
  Vec3 s;
  for (std::size_t i = 0; i < vectors.size(); ++i) s += alpha[i] * vectors[i];
  return s;
}

inline Vec3 weighted_sum(std::span<const UnitVec3> vectors, const WeightVector& alpha) {
  if (vectors.size() != alpha.size()) throw DimensionMismatch(alpha.size(), vectors.size());
  Vec3 s;
  for (std::size_t i = 0; i < vectors.size(); ++i) s += alpha[i] * vectors[i].vec();
  return s;
}

/// Second-order remainder of the normalization map:
/// phi(x+y) - (phi(x) + y/|x| - (y.x)/|x|^3 x). Bounded by 2|y|^2/|x|^2.
inline Vec3 delta_phi(const Vec3& x, const Vec3& y) {
  const double nx = norm(x);
  if (!(nx > kZeroNorm)) throw ZeroVector("delta_phi: x");
  const Vec3 sum = x + y;
  if (is_zero(sum)) throw ZeroVector("delta_phi: x + y");
  const Vec3 linear = x / nx + y / nx - (dot(y, x) / (nx * nx * nx)) * x;
  return normalize(sum).vec() - linear;
}

}  // namespace fishmpc
