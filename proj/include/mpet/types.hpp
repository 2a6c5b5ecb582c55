#pragma once

#include <array>
#include <cmath>
#include <functional>

namespace mpet {

using Vec2 = std::array<double, 2>;

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a[0], s * a[1]}; }
inline double dot(Vec2 a, Vec2 b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }

// Row-major 2x2 matrix, just enough for affine cell maps and gradients.
struct Mat2 {
    double m[2][2];

    static Mat2 from_columns(Vec2 c0, Vec2 c1) {
        return Mat2{{{c0[0], c1[0]}, {c0[1], c1[1]}}};
    }
    double det() const { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }
    Mat2 inverse() const {
        const double d = det();
        return Mat2{{{m[1][1] / d, -m[0][1] / d}, {-m[1][0] / d, m[0][0] / d}}};
    }
    Mat2 transpose() const { return Mat2{{{m[0][0], m[1][0]}, {m[0][1], m[1][1]}}}; }
    Vec2 operator*(Vec2 v) const {
        return {m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]};
    }
};

// Space and space-time fields used for manufactured solutions, loads and
// boundary data.
using ScalarField = std::function<double(Vec2)>;
using VectorField = std::function<Vec2(Vec2)>;
using MatrixField = std::function<Mat2(Vec2)>;
using TimeScalarField = std::function<double(Vec2, double)>;
using TimeVectorField = std::function<Vec2(Vec2, double)>;
using TimeMatrixField = std::function<Mat2(Vec2, double)>;

}  // namespace mpet
