#pragma once

#include "covlift/epnet.hpp"
#include "covlift/simplicial.hpp"

#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace covlift {

enum class ManifoldKind { Circle, Torus, Mesh };

/// Compact manifold with nearest-point projection inside its reach.
class ManifoldDescriptor {
public:
    static ManifoldDescriptor circle(double radius = 1.0);
    /// Torus in R^3 about the z axis with core radius R and tube radius r.
    static ManifoldDescriptor torus(double R, double r);
    static ManifoldDescriptor mesh(SimplicialComplex K, double reach);

    ManifoldKind kind() const { return kind_; }
    double reach() const { return reach_; }
    int dim() const;
    int ambient_dim() const;

    /// OutsideReach unless dist(y, M) < reach.
    Vec nearest_point(const Vec& y) const;
    /// Orthonormal columns spanning the tangent space at (the projection of) x.
    Mat tangent_basis(const Vec& x) const;
    /// Derivative of nearest_point at y; analytic for circle and torus, central differences
    /// (step 1e-5) for meshes.
    Mat nearest_point_jacobian(const Vec& y) const;
    /// Mesh only: distance from the projection of y to the boundary of its carrier simplex.
    double distance_to_cell_boundary(const Vec& y) const;

    Vec sample(std::mt19937_64& rng) const;

private:
    ManifoldKind kind_ = ManifoldKind::Circle;
    double R_ = 1.0, r_ = 0.0, reach_ = 1.0;
    std::shared_ptr<const SimplicialComplex> mesh_;
};

/// Closest point of a realized simplex to y.
Vec closest_point_on_simplex(std::span<const Vec> corners, const Vec& y);

struct Evaluator {
    std::function<Vec(const Vec&)> f;
    std::function<Mat(const Vec&)> jacobian;
};

struct BistableReport {
    double eps_hat = 0.0;
    double grad_max = 0.0;
    double inv_grad_max = std::numeric_limits<double>::quiet_NaN();
    double M_bound = std::numeric_limits<double>::infinity();
    bool inverse_evaluable = false;
    bool eps_within_reach = false;
    bool grad_bounded = false;
    bool inv_bounded = false;
    int sample_count = 0;
    int near_edge_samples = 0; // mesh targets only

    bool passes() const { return eps_within_reach && inverse_evaluable && grad_bounded && inv_bounded; }
};

/// Sup error, tangent gradient norm and inverse projected-gradient norm over samples of M1.
BistableReport bistable_report(const Evaluator& f, const std::function<Vec(const Vec&)>& g, const std::vector<Vec>& samples,
                               const ManifoldDescriptor& M1, const ManifoldDescriptor& M2,
                               double M_bound = std::numeric_limits<double>::infinity());

std::string to_json(const BistableReport& report);

struct NonsmoothValue {
    double f = 0.0;
    double f_eps = 0.0;
    double df_eps = 0.0;
};

/// f = x for x <= 0, 2x otherwise; f_eps replaces it on [-eps, eps] by a quadratic.
NonsmoothValue nonsmooth_example(double eps, double x);

double hausdorff(const std::vector<Vec>& A, const std::vector<Vec>& B);

struct GeoViolation {
    std::size_t pair = 0;
    double euclid = 0.0;
    double geodesic = 0.0;
    std::string bound; // "lower" or "upper"
};

struct GeoCheck {
    std::size_t admissible = 0;
    std::vector<GeoViolation> violations;
};

/// For pairs with estimated geodesic <= pi * r0: (2/pi) d <= |x - y| <= d, each with `slack`
/// relative tolerance.
GeoCheck check_geo_euclid(const SimplicialComplex& K, const std::vector<std::pair<Vec, Vec>>& pairs, double r0,
                          double slack = 0.02, int steiner_per_edge = 3);

/// Minimum-cost perfect matching on an n x n cost matrix (row -> column assignment).
std::vector<int> solve_assignment(const Mat& cost);

/// Exact W2 between equal-size empirical measures via the assignment problem (n <= 1024).
double wasserstein2_exact(const std::vector<Vec>& A, const std::vector<Vec>& B);

using Sampler = std::function<Vec(std::mt19937_64&)>;

/// W2 between f(x_i), x_i from M1_sampler, and target_sampler draws; both streams are seeded
/// with `seed`.
double pushforward_check(const std::function<Vec(const Vec&)>& f, const Sampler& M1_sampler, const Sampler& target_sampler,
                         int n, std::uint64_t seed);
double pushforward_check(const EPNetwork& net, const Sampler& M1_sampler, const Sampler& target_sampler, int n,
                         std::uint64_t seed);

} // namespace covlift
