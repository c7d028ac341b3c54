#pragma once

#include <array>
#include <cmath>

namespace plasthin {

struct Vec3 {
    std::array<double, 3> v{0.0, 0.0, 0.0};

    Vec3() = default;
    Vec3(double a, double b, double c) : v{a, b, c} {}

    double& operator[](int i) { return v[i]; }
    double operator[](int i) const { return v[i]; }

    Vec3& operator+=(const Vec3& o) { for (int i = 0; i < 3; ++i) v[i] += o.v[i]; return *this; }
    Vec3& operator-=(const Vec3& o) { for (int i = 0; i < 3; ++i) v[i] -= o.v[i]; return *this; }
    Vec3& operator*=(double s) { for (double& x : v) x *= s; return *this; }
};

inline Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
inline Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
inline Vec3 operator*(double s, Vec3 a) { return a *= s; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

/// Symmetric 3x3 tensor stored as (11, 22, 33, 12, 13, 23), plain components.
struct Sym3 {
    std::array<double, 6> v{0.0, 0.0, 0.0, 0.0, 0.0, 0.0};

    enum : int { XX = 0, YY = 1, ZZ = 2, XY = 3, XZ = 4, YZ = 5 };

    Sym3() = default;
    Sym3(double a11, double a22, double a33, double a12, double a13, double a23)
        : v{a11, a22, a33, a12, a13, a23} {}

    static Sym3 identity() { return {1.0, 1.0, 1.0, 0.0, 0.0, 0.0}; }
    static Sym3 diag(double a, double b, double c) { return {a, b, c, 0.0, 0.0, 0.0}; }

    double& operator[](int i) { return v[i]; }
    double operator[](int i) const { return v[i]; }

    /// Entry (i, j) with 0-based indices, either order.
    double operator()(int i, int j) const {
        if (i == j) return v[i];
        const int s = i + j;  // 1 -> 12, 2 -> 13, 3 -> 23
        return v[2 + s];
    }

    Sym3& operator+=(const Sym3& o) { for (int i = 0; i < 6; ++i) v[i] += o.v[i]; return *this; }
    Sym3& operator-=(const Sym3& o) { for (int i = 0; i < 6; ++i) v[i] -= o.v[i]; return *this; }
    Sym3& operator*=(double s) { for (double& x : v) x *= s; return *this; }
};

inline Sym3 operator+(Sym3 a, const Sym3& b) { return a += b; }
inline Sym3 operator-(Sym3 a, const Sym3& b) { return a -= b; }
inline Sym3 operator-(Sym3 a) { return a *= -1.0; }
inline Sym3 operator*(double s, Sym3 a) { return a *= s; }
inline Sym3 operator*(Sym3 a, double s) { return a *= s; }

inline double trace(const Sym3& a) { return a[0] + a[1] + a[2]; }

/// Frobenius product A:B (off-diagonal entries count twice).
inline double ddot(const Sym3& a, const Sym3& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + 2.0 * (a[3] * b[3] + a[4] * b[4] + a[5] * b[5]);
}
inline double norm(const Sym3& a) { return std::sqrt(ddot(a, a)); }

/// Symmetric 2x2 tensor stored as (11, 22, 12).
struct Sym2 {
    std::array<double, 3> v{0.0, 0.0, 0.0};

    Sym2() = default;
    Sym2(double a11, double a22, double a12) : v{a11, a22, a12} {}

    double& operator[](int i) { return v[i]; }
    double operator[](int i) const { return v[i]; }

    Sym2& operator+=(const Sym2& o) { for (int i = 0; i < 3; ++i) v[i] += o.v[i]; return *this; }
    Sym2& operator-=(const Sym2& o) { for (int i = 0; i < 3; ++i) v[i] -= o.v[i]; return *this; }
    Sym2& operator*=(double s) { for (double& x : v) x *= s; return *this; }
};

inline Sym2 operator+(Sym2 a, const Sym2& b) { return a += b; }
inline Sym2 operator-(Sym2 a, const Sym2& b) { return a -= b; }
inline Sym2 operator*(double s, Sym2 a) { return a *= s; }
inline double ddot(const Sym2& a, const Sym2& b) { return a[0] * b[0] + a[1] * b[1] + 2.0 * a[2] * b[2]; }
inline double norm(const Sym2& a) { return std::sqrt(ddot(a, a)); }

/// In-plane 2x2 block of a Sym3.
inline Sym2 minor2(const Sym3& a) { return {a[0], a[1], a[3]}; }
/// Embeds a Sym2 as a Sym3 with zero i3 entries.
inline Sym3 embed(const Sym2& a) { return {a[0], a[1], 0.0, a[2], 0.0, 0.0}; }

} // namespace plasthin
