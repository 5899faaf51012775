#pragma once

#include <array>
#include <cmath>

namespace refracta {

/// Forward-mode dual number with N tangent components. Every operation applies
/// the exact derivative rule, so kernels templated on the scalar type yield
/// analytic gradients when instantiated with Dual.
template <int N>
struct Dual {
    double v = 0.0;
    std::array<double, N> d{};

    Dual() = default;
    Dual(double value) : v(value) {}  // NOLINT: implicit promotion of constants

    static Dual variable(double value, int slot) {
        Dual r(value);
        r.d[slot] = 1.0;
        return r;
    }

    Dual& operator+=(const Dual& o) {
        v += o.v;
        for (int i = 0; i < N; ++i) d[i] += o.d[i];
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        for (int i = 0; i < N; ++i) d[i] -= o.d[i];
        return *this;
    }
    Dual& operator*=(const Dual& o) { return *this = *this * o; }
    Dual& operator/=(const Dual& o) { return *this = *this / o; }

    friend Dual operator+(Dual a, const Dual& b) { return a += b; }
    friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
    friend Dual operator-(const Dual& a) {
        Dual r;
        r.v = -a.v;
        for (int i = 0; i < N; ++i) r.d[i] = -a.d[i];
        return r;
    }
    friend Dual operator*(const Dual& a, const Dual& b) {
        Dual r;
        r.v = a.v * b.v;
        for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
        return r;
    }
    friend Dual operator/(const Dual& a, const Dual& b) {
        Dual r;
        r.v = a.v / b.v;
        const double inv = 1.0 / b.v;
        for (int i = 0; i < N; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) * inv;
        return r;
    }

    friend bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
    friend bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
    friend bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
    friend bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }
};

template <int N>
Dual<N> chain(const Dual<N>& a, double value, double deriv) {
    Dual<N> r(value);
    for (int i = 0; i < N; ++i) r.d[i] = deriv * a.d[i];
    return r;
}

template <int N>
Dual<N> sqrt(const Dual<N>& a) {
    const double s = std::sqrt(a.v);
    return chain(a, s, s > 0.0 ? 0.5 / s : 0.0);
}
template <int N>
Dual<N> abs(const Dual<N>& a) {
    return a.v < 0.0 ? -a : a;
}
template <int N>
Dual<N> acos(const Dual<N>& a) {
    const double r = 1.0 - a.v * a.v;
    return chain(a, std::acos(a.v), r > 0.0 ? -1.0 / std::sqrt(r) : 0.0);
}
template <int N>
Dual<N> atan2(const Dual<N>& y, const Dual<N>& x) {
    Dual<N> r(std::atan2(y.v, x.v));
    const double den = x.v * x.v + y.v * y.v;
    if (den > 0.0)
        for (int i = 0; i < N; ++i) r.d[i] = (x.v * y.d[i] - y.v * x.d[i]) / den;
    return r;
}
template <int N>
Dual<N> floor(const Dual<N>& a) {
    return Dual<N>(std::floor(a.v));
}

inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual<N>& x) {
    return x.v;
}

/// Minimal 3-vector over an arbitrary scalar, used by differentiable kernels.
template <class T>
struct V3 {
    T x{}, y{}, z{};

    V3() = default;
    V3(T a, T b, T c) : x(a), y(b), z(c) {}

    friend V3 operator+(const V3& a, const V3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend V3 operator-(const V3& a, const V3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend V3 operator-(const V3& a) { return {-a.x, -a.y, -a.z}; }
    friend V3 operator*(const T& s, const V3& a) { return {s * a.x, s * a.y, s * a.z}; }
    friend V3 operator*(const V3& a, const T& s) { return {s * a.x, s * a.y, s * a.z}; }
};

template <class T>
T dot(const V3<T>& a, const V3<T>& b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

}  // namespace refracta
