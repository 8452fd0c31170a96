#pragma once

#include <array>
#include <cmath>

namespace ebsde {

/// Small dense vector for state dimensions 1 and 2.
struct Vec {
    std::array<double, 2> c{0.0, 0.0};
    int d = 1;

    static Vec zero(int dim) { return Vec{{0.0, 0.0}, dim}; }
    static Vec scalar(double x) { return Vec{{x, 0.0}, 1}; }

    double& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }
};

inline Vec operator+(Vec a, const Vec& b) {
    for (int i = 0; i < a.d; ++i) a[i] += b[i];
    return a;
}

inline Vec operator-(Vec a, const Vec& b) {
    for (int i = 0; i < a.d; ++i) a[i] -= b[i];
    return a;
}

inline Vec operator*(double s, Vec a) {
    for (int i = 0; i < a.d; ++i) a[i] *= s;
    return a;
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (int i = 0; i < a.d; ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

/// Row-major square matrix of size d<=2, used for the factor volatility.
struct Mat2 {
    std::array<double, 4> m{1.0, 0.0, 0.0, 1.0};
    int d = 1;

    double operator()(int i, int j) const { return m[static_cast<std::size_t>(i * 2 + j)]; }
    double& operator()(int i, int j) { return m[static_cast<std::size_t>(i * 2 + j)]; }

    static Mat2 identity(int dim) {
        Mat2 k;
        k.d = dim;
        return k;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) s += (*this)(i, j) * (*this)(i, j);
        return std::sqrt(s);
    }
};

inline Vec mat_vec(const Mat2& k, const Vec& x) {
    Vec r = Vec::zero(x.d);
    for (int i = 0; i < x.d; ++i)
        for (int j = 0; j < x.d; ++j) r[i] += k(i, j) * x[j];
    return r;
}

inline Vec mat_t_vec(const Mat2& k, const Vec& x) {
    Vec r = Vec::zero(x.d);
    for (int i = 0; i < x.d; ++i)
        for (int j = 0; j < x.d; ++j) r[i] += k(j, i) * x[j];
    return r;
}

}  // namespace ebsde
