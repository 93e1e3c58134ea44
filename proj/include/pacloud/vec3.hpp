#pragma once

#include <cmath>

namespace pacloud {

template <typename T> struct Vec3T {
  T x{}, y{}, z{};

  constexpr Vec3T() = default;
  constexpr Vec3T(T x_, T y_, T z_) : x(x_), y(y_), z(z_) {}
  template <typename U>
  constexpr explicit Vec3T(const Vec3T<U> &o)
      : x(static_cast<T>(o.x)), y(static_cast<T>(o.y)), z(static_cast<T>(o.z)) {}

  constexpr T &operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr const T &operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  constexpr Vec3T operator+(const Vec3T &o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3T operator-(const Vec3T &o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3T operator-() const { return {-x, -y, -z}; }
  constexpr Vec3T operator*(T s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3T operator/(T s) const { return {x / s, y / s, z / s}; }
  constexpr Vec3T &operator+=(const Vec3T &o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3T &operator-=(const Vec3T &o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Vec3T &operator*=(T s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }
  constexpr bool operator==(const Vec3T &) const = default;
};

template <typename T> constexpr Vec3T<T> operator*(T s, const Vec3T<T> &v) { return v * s; }

template <typename T> constexpr T dot(const Vec3T<T> &a, const Vec3T<T> &b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <typename T> constexpr Vec3T<T> cross(const Vec3T<T> &a, const Vec3T<T> &b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <typename T> T norm(const Vec3T<T> &a) { return std::sqrt(dot(a, a)); }

template <typename T> Vec3T<T> normalized(const Vec3T<T> &a) { return a / norm(a); }

template <typename T> bool is_finite(const Vec3T<T> &a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

using Vec3 = Vec3T<double>;
using Vec3f = Vec3T<float>;

} // namespace pacloud
