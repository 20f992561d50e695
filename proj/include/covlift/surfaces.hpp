#pragma once

#include "covlift/covering.hpp"
#include "covlift/simplicial.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace covlift {

/// z -> z^d on the unit circle, as angle multiplication.
struct CircleCover {
    int d = 1;

    double map_angle(double theta) const { return d * theta; }
    Vec map(const Vec& x) const;
    /// The d preimages of y (normalized onto the circle), in increasing angle from atan2(y).
    std::vector<Vec> fiber(const Vec& y) const;
};

CircleCover circle_cover(int d);

/// Regular N-gon on the circle of the given radius, vertex i at angle 2 pi i / N.
SimplicialComplex circle_mesh(int segments, double radius = 1.0);

/// d*N-gon over N-gon, vertex i -> i mod N. Realizes z^d at the vertices.
CoveringMapSpec circle_cover_mesh(int d, int segments);

/// Standard torus in R^3 about the z axis, (R + r cos v) (cos u, sin u), r sin v.
SimplicialComplex torus_mesh(double R, double r, int n_u, int n_v);

/// Smooth lift of z -> z^d used as a training target, laid out (z^d, stack, bump block) in R^5.
/// The 8 equispaced base points pull back to the 8d points X; the stack interpolates fiber labels
/// between consecutive points of X with a quintic smoothstep, and the bump block is
/// (1 - sum of bumps around X) * (1/2 + x/4).
struct CircleLift {
    int d = 1;
    int n_base = 8;
    double eps = 0.0;
    std::vector<int> label; // per point of X, in 1..d

    explicit CircleLift(int d, int n_base = 8);
    int dim() const { return 5; }
    double spacing() const;
    Vec point(double theta) const;
    Vec eval(double theta) const;
    Vec eval(const Vec& x) const;
    /// Base points y_b = (cos(2 pi b / n_base), sin(2 pi b / n_base)).
    std::vector<Vec> base_points() const;
};

/// Quintic smoothstep 6t^5 - 15t^4 + 10t^3 clamped to [0,1], and its derivative.
double smoothstep5(double t);
double smoothstep5_deriv(double t);

/// Profiles phi, psi on [-2(k-1)pi, 2(k-1)pi] for the curve gamma.
class PhiPsiProfile {
public:
    explicit PhiPsiProfile(int k);

    int k() const { return k_; }
    double half_length() const;
    double phi(double r) const;
    double dphi(double r) const;
    double psi(double r) const;
    double dpsi(double r) const;

private:
    void check(double r) const;
    int k_;
};

PhiPsiProfile build_phi_psi(int k);

/// (cos r, sin r, 0, phi(r), psi(r)).
Vec gamma(const PhiPsiProfile& profile, double r);

enum class Projection { P2, P3, P4, Q3, Q4, R2 };

Projection parse_projection(const std::string& name);
int projection_domain(Projection which);
Vec project(const Vec& x, Projection which);
std::vector<Vec> project(std::span<const Vec> points, Projection which);

/// Tube of radius rho around gamma (k = 2) sampled on an n_r x n_theta grid, together with its
/// 2-to-1 image under P3. n_r must be even so sheet mates land on grid points.
CoveringMapSpec tube_surface(const PhiPsiProfile& profile, double rho, int n_r, int n_theta);

struct FiberHistogram {
    std::vector<int> counts;          // per base point
    std::map<int, int> histogram;     // count -> number of base points
    int modal = 0;
};

FiberHistogram verify_fiber_count(std::span<const Vec> cover_points, std::span<const Vec> base_points,
                                  Projection projection, double tol);

/// Parameter pair (r, s), r < s, with P4(gamma(r)) = P4(gamma(s)). A positive extent means the
/// curves coincide on a whole interval of that length rather than crossing at a point.
struct CurveCollision {
    double r = 0.0;
    double s = 0.0;
    double extent = 0.0;
};

/// Scans every shift s = r + 2 pi m for zeros of phi(r) - phi(s); crossings are refined by
/// bisection, flat stretches are reported as intervals. The endpoint identification is excluded.
std::vector<CurveCollision> p4_self_intersections(const PhiPsiProfile& profile, int samples_per_period = 4096);

/// Minimum distance between gamma(r_i), gamma(r_j) over a uniform grid of distinct parameters,
/// skipping grid neighbours closer than `skip` in parameter and the endpoint identification.
double gamma_min_separation(const PhiPsiProfile& profile, int samples, double skip);

} // namespace covlift
