#pragma once
// Independent reference computations for the tests: brute force, finite differences, closed
// forms. Nothing here calls the routine it is used to check.

#include "covlift/errors.hpp"
#include "covlift/simplicial.hpp"

#include <optional>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

using covlift::Mat;
using covlift::Vec;

inline constexpr double pi = std::numbers::pi;

/// Kind of the covlift::Error thrown by f, or nullopt when nothing is thrown.
template <class F>
std::optional<covlift::ErrorKind> error_kind(F&& f) {
    try {
        f();
    } catch (const covlift::Error& e) {
        return e.kind();
    }
    return std::nullopt;
}

inline Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

inline Vec v3(double a, double b, double c) {
    Vec v(3);
    v << a, b, c;
    return v;
}

inline Vec on_circle(double t) { return v2(std::cos(t), std::sin(t)); }

/// sqrt of the mean matched squared cost, minimized over all n! matchings.
inline double w2_bruteforce(const std::vector<Vec>& A, const std::vector<Vec>& B) {
    std::vector<int> perm(A.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < A.size(); ++i) c += (A[i] - B[static_cast<std::size_t>(perm[i])]).squaredNorm();
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::sqrt(best / static_cast<double>(A.size()));
}

inline double hausdorff_bruteforce(const std::vector<Vec>& A, const std::vector<Vec>& B) {
    auto directed = [](const std::vector<Vec>& P, const std::vector<Vec>& Q) {
        double worst = 0.0;
        for (const auto& p : P) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : Q) best = std::min(best, (p - q).norm());
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(directed(A, B), directed(B, A));
}

/// Central differences, one column per input coordinate.
inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h = 1e-5) {
    const Vec f0 = f(x);
    Mat J(f0.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        Vec a = x, b = x;
        a(j) += h;
        b(j) -= h;
        J.col(j) = (f(a) - f(b)) / (2.0 * h);
    }
    return J;
}

inline double rel_err(const Mat& A, const Mat& B) { return (A - B).norm() / std::max(1.0, B.norm()); }

/// Signed area (2-D) or unsigned area (any dim) of a triangle.
inline double triangle_area(const Vec& a, const Vec& b, const Vec& c) {
    const Vec u = b - a, w = c - a;
    const double uu = u.squaredNorm(), ww = w.squaredNorm(), uw = u.dot(w);
    return 0.5 * std::sqrt(std::max(0.0, uu * ww - uw * uw));
}

} // namespace oracle
