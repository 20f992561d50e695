#include "covlift/surfaces.hpp"

#include "covlift/errors.hpp"
#include "covlift/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace covlift {

namespace {
constexpr double pi = std::numbers::pi;

Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}
} // namespace

Vec CircleCover::map(const Vec& x) const {
    const double th = std::atan2(x(1), x(0));
    return vec2(std::cos(map_angle(th)), std::sin(map_angle(th)));
}

std::vector<Vec> CircleCover::fiber(const Vec& y) const {
    const double base = std::atan2(y(1), y(0));
    std::vector<Vec> out;
    for (int m = 0; m < d; ++m) {
        const double th = (base + 2.0 * pi * m) / d;
        out.push_back(vec2(std::cos(th), std::sin(th)));
    }
    return out;
}

CircleCover circle_cover(int d) {
    if (d < 1) throw Error(ErrorKind::BadDegree, "degree must be at least 1");
    return CircleCover{d};
}

SimplicialComplex circle_mesh(int segments, double radius) {
    if (segments < 3) throw Error(ErrorKind::InvalidArgument, "circle mesh needs at least 3 segments");
    std::vector<Vec> V;
    std::vector<Simplex> S;
    for (int i = 0; i < segments; ++i) {
        const double a = 2.0 * pi * i / segments;
        V.push_back(vec2(radius * std::cos(a), radius * std::sin(a)));
        S.push_back({i, (i + 1) % segments});
    }
    return build_complex(std::move(V), std::move(S));
}

CoveringMapSpec circle_cover_mesh(int d, int segments) {
    if (d < 1) throw Error(ErrorKind::BadDegree, "degree must be at least 1");
    auto source = circle_mesh(d * segments);
    auto target = circle_mesh(segments);
    std::vector<int> vm(static_cast<std::size_t>(d * segments));
    for (int i = 0; i < d * segments; ++i) vm[static_cast<std::size_t>(i)] = i % segments;
    return CoveringMapSpec::make(std::move(source), std::move(target), std::move(vm));
}

SimplicialComplex torus_mesh(double R, double r, int n_u, int n_v) {
    if (!(r > 0.0 && R > r)) throw Error(ErrorKind::InvalidArgument, "torus needs R > r > 0");
    if (n_u < 3 || n_v < 3) throw Error(ErrorKind::InvalidArgument, "torus grid too coarse");
    std::vector<Vec> V;
    for (int i = 0; i < n_u; ++i) {
        for (int j = 0; j < n_v; ++j) {
            const double u = 2.0 * pi * i / n_u, v = 2.0 * pi * j / n_v;
            Vec p(3);
            p << (R + r * std::cos(v)) * std::cos(u), (R + r * std::cos(v)) * std::sin(u), r * std::sin(v);
            V.push_back(p);
        }
    }
    auto id = [&](int i, int j) { return ((i + n_u) % n_u) * n_v + (j + n_v) % n_v; };
    std::vector<Simplex> S;
    for (int i = 0; i < n_u; ++i) {
        for (int j = 0; j < n_v; ++j) {
            S.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            S.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    return build_complex(std::move(V), std::move(S));
}

double smoothstep5(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0);
}

double smoothstep5_deriv(double t) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    return 30.0 * t * t * (t - 1.0) * (t - 1.0);
}

CircleLift::CircleLift(int d_, int n_base_) : d(d_), n_base(n_base_) {
    if (d < 1) throw Error(ErrorKind::BadDegree, "degree must be at least 1");
    if (n_base < 1) throw Error(ErrorKind::InvalidArgument, "need at least one base point");
    const int n = d * n_base;
    eps = 0.45 * 2.0 * std::sin(pi / n);
    // Rank within each fiber by cos(theta + c); the offset breaks the symmetric ties.
    const double c = pi / (2.0 * n);
    label.assign(static_cast<std::size_t>(n), 0);
    for (int b = 0; b < n_base; ++b) {
        std::vector<int> fib;
        for (int m = b; m < n; m += n_base) fib.push_back(m);
        std::sort(fib.begin(), fib.end(), [&](int a, int e) {
            return std::cos(2.0 * pi * a / n + c) < std::cos(2.0 * pi * e / n + c);
        });
        for (std::size_t rank = 0; rank < fib.size(); ++rank) label[static_cast<std::size_t>(fib[rank])] = static_cast<int>(rank) + 1;
    }
}

double CircleLift::spacing() const { return 2.0 * pi / (d * n_base); }

Vec CircleLift::point(double theta) const { return vec2(std::cos(theta), std::sin(theta)); }

Vec CircleLift::eval(double theta) const {
    const int n = d * n_base;
    const double step = spacing();
    double t = std::fmod(theta, 2.0 * pi);
    if (t < 0.0) t += 2.0 * pi;
    int m = static_cast<int>(std::floor(t / step));
    m = std::clamp(m, 0, n - 1);
    const double frac = (t - m * step) / step;
    const double la = label[static_cast<std::size_t>(m)];
    const double lb = label[static_cast<std::size_t>((m + 1) % n)];

    const Vec x = point(theta);
    double bumps = 0.0;
    for (int q = 0; q < n; ++q) {
        const double a = q * step;
        const double rr = std::hypot(x(0) - std::cos(a), x(1) - std::sin(a));
        bumps += bump_profile(rr, eps);
    }
    Vec h(5);
    h(0) = std::cos(d * theta);
    h(1) = std::sin(d * theta);
    h(2) = la + (lb - la) * smoothstep5(frac);
    h(3) = (1.0 - bumps) * (0.5 + 0.25 * x(0));
    h(4) = (1.0 - bumps) * (0.5 + 0.25 * x(1));
    return h;
}

Vec CircleLift::eval(const Vec& x) const { return eval(std::atan2(x(1), x(0))); }

std::vector<Vec> CircleLift::base_points() const {
    std::vector<Vec> out;
    for (int b = 0; b < n_base; ++b) out.push_back(point(2.0 * pi * b / n_base));
    return out;
}

PhiPsiProfile::PhiPsiProfile(int k) : k_(k) {
    if (k < 2) throw Error(ErrorKind::BadDegree, "curve needs k >= 2");
}

double PhiPsiProfile::half_length() const { return 2.0 * (k_ - 1) * pi; }

void PhiPsiProfile::check(double r) const {
    if (!(std::abs(r) <= half_length() + 1e-12)) throw Error(ErrorKind::OutOfDomain, "parameter outside the curve domain");
}

// On r >= 0: plateau 1 up to pi/2, then ramp j centred at c = (2j-1)pi dips from j to j - 1/2
// over [c - pi/2, c] and climbs to j + 1 over [c, c + pi/2].
double PhiPsiProfile::phi(double r) const {
    check(r);
    const double a = std::abs(r);
    if (a <= pi / 2) return 1.0;
    for (int j = 1; j <= k_ - 1; ++j) {
        const double c = (2 * j - 1) * pi;
        if (a <= c) {
            if (a < c - pi / 2) return j; // plateau
            return j - 0.5 * smoothstep5((a - (c - pi / 2)) / (pi / 2));
        }
        if (a <= c + pi / 2) return j - 0.5 + 1.5 * smoothstep5((a - c) / (pi / 2));
    }
    return k_;
}

double PhiPsiProfile::dphi(double r) const {
    check(r);
    const double a = std::abs(r);
    const double sign = r < 0.0 ? -1.0 : 1.0;
    for (int j = 1; j <= k_ - 1; ++j) {
        const double c = (2 * j - 1) * pi;
        if (a >= c - pi / 2 && a <= c) return sign * -0.5 * smoothstep5_deriv((a - (c - pi / 2)) / (pi / 2)) / (pi / 2);
        if (a > c && a <= c + pi / 2) return sign * 1.5 * smoothstep5_deriv((a - c) / (pi / 2)) / (pi / 2);
    }
    return 0.0;
}

double PhiPsiProfile::psi(double r) const {
    check(r);
    double total = 0.0;
    for (int j = 1; j <= k_ - 1; ++j) total += bump_profile(std::abs(r + (2 * j - 1) * pi), 1.0);
    return total;
}

double PhiPsiProfile::dpsi(double r) const {
    check(r);
    double total = 0.0;
    for (int j = 1; j <= k_ - 1; ++j) {
        const double t = r + (2 * j - 1) * pi;
        if (std::abs(t) >= 1.0) continue;
        const double q = 1.0 - t * t;
        total += bump_profile(std::abs(t), 1.0) * (-2.0 * t / (q * q));
    }
    return total;
}

PhiPsiProfile build_phi_psi(int k) { return PhiPsiProfile(k); }

Vec gamma(const PhiPsiProfile& profile, double r) {
    Vec out(5);
    out << std::cos(r), std::sin(r), 0.0, profile.phi(r), profile.psi(r);
    return out;
}

Projection parse_projection(const std::string& name) {
    if (name == "P2") return Projection::P2;
    if (name == "P3") return Projection::P3;
    if (name == "P4") return Projection::P4;
    if (name == "Q3") return Projection::Q3;
    if (name == "Q4") return Projection::Q4;
    if (name == "R2") return Projection::R2;
    throw Error(ErrorKind::InvalidArgument, "unknown projection " + name);
}

int projection_domain(Projection which) { return which == Projection::R2 ? 4 : 5; }

Vec project(const Vec& x, Projection which) {
    if (x.size() != projection_domain(which)) throw Error(ErrorKind::DimMismatch, "projection applied to wrong dimension");
    // Coordinates named (x, y, s, z, t) on R^5 and (x, y, z, t) on R^4.
    std::vector<int> keep;
    switch (which) {
    case Projection::P2: keep = {0, 1}; break;
    case Projection::P3: keep = {0, 1, 2}; break;
    case Projection::P4: keep = {0, 1, 2, 3}; break;
    case Projection::Q3: keep = {0, 1, 3}; break;
    case Projection::Q4: keep = {0, 1, 3, 4}; break;
    case Projection::R2: keep = {0, 1}; break;
    }
    Vec out(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) out(static_cast<Eigen::Index>(i)) = x(keep[i]);
    return out;
}

std::vector<Vec> project(std::span<const Vec> points, Projection which) {
    std::vector<Vec> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(project(p, which));
    return out;
}

CoveringMapSpec tube_surface(const PhiPsiProfile& profile, double rho, int n_r, int n_theta) {
    if (profile.k() != 2) throw Error(ErrorKind::InvalidArgument, "tube is built for the 2-sheet curve only");
    if (!(rho > 0.0 && rho < 1.0)) throw Error(ErrorKind::InvalidArgument, "tube radius must lie in (0,1)");
    if (n_r < 8 || n_theta < 8 || n_r % 2 != 0) throw Error(ErrorKind::InvalidArgument, "grid needs n_r even, both >= 8");

    const double L = profile.half_length();
    auto id = [&](int i, int t) { return ((i + n_r) % n_r) * n_theta + (t + n_theta) % n_theta; };
    std::vector<Vec> V;
    for (int i = 0; i < n_r; ++i) {
        const double r = -L + 2.0 * L * i / n_r;
        const double ph = profile.phi(r), ps = profile.psi(r);
        for (int t = 0; t < n_theta; ++t) {
            const double th = 2.0 * pi * t / n_theta;
            Vec p(5);
            p << (1.0 + rho * std::cos(th)) * std::cos(r), (1.0 + rho * std::cos(th)) * std::sin(r), rho * std::sin(th), ph, ps;
            V.push_back(p);
        }
    }
    std::vector<Simplex> S;
    for (int i = 0; i < n_r; ++i) {
        for (int t = 0; t < n_theta; ++t) {
            S.push_back({id(i, t), id(i + 1, t), id(i + 1, t + 1)});
            S.push_back({id(i, t), id(i + 1, t + 1), id(i, t + 1)});
        }
    }

    // Merge sheets by P3 proximity; only the designated mate may fall inside the tolerance.
    const int half = n_r / 2;
    const double tol = rho / 10.0;
    std::vector<Vec> P(V.size());
    for (std::size_t u = 0; u < V.size(); ++u) P[u] = project(V[u], Projection::P3);
    std::vector<int> bad(V.size(), -1);
    parallel_for(V.size(), [&](std::size_t u) {
        const int iu = static_cast<int>(u) / n_theta, tu = static_cast<int>(u) % n_theta;
        const auto mate = static_cast<std::size_t>(id(iu + half, tu));
        for (std::size_t w = 0; w < V.size(); ++w) {
            if (w == u) continue;
            const double dist = (P[u] - P[w]).norm();
            if (w == mate ? dist > tol : dist <= tol) {
                bad[u] = static_cast<int>(w);
                return;
            }
        }
    });
    for (std::size_t u = 0; u < bad.size(); ++u) {
        if (bad[u] >= 0)
            throw Error(ErrorKind::MergeAmbiguity, "sheet merge ambiguous between vertices " + std::to_string(u) + " and " + std::to_string(bad[u]));
    }

    std::vector<Vec> TV;
    for (int i = 0; i < half; ++i)
        for (int t = 0; t < n_theta; ++t) TV.push_back(P[static_cast<std::size_t>(id(i, t))]);
    std::vector<int> vm(V.size());
    for (std::size_t u = 0; u < V.size(); ++u) vm[u] = (static_cast<int>(u) / n_theta % half) * n_theta + static_cast<int>(u) % n_theta;
    std::vector<Simplex> TS;
    for (const auto& s : S) TS.push_back({vm[static_cast<std::size_t>(s[0])], vm[static_cast<std::size_t>(s[1])], vm[static_cast<std::size_t>(s[2])]});

    return CoveringMapSpec::make(build_complex(std::move(V), std::move(S)), build_complex(std::move(TV), std::move(TS)), std::move(vm));
}

FiberHistogram verify_fiber_count(std::span<const Vec> cover_points, std::span<const Vec> base_points, Projection projection, double tol) {
    if (cover_points.empty() || base_points.empty()) throw Error(ErrorKind::EmptySet, "fiber count needs samples");
    const auto proj = project(cover_points, projection);
    FiberHistogram out;
    out.counts.assign(base_points.size(), 0);
    parallel_for(base_points.size(), [&](std::size_t b) {
        int c = 0;
        for (const auto& p : proj) c += (p - base_points[b]).norm() <= tol ? 1 : 0;
        out.counts[b] = c;
    });
    for (int c : out.counts) ++out.histogram[c];
    out.modal = std::max_element(out.histogram.begin(), out.histogram.end(),
                                 [](auto a, auto b) { return a.second < b.second; })->first;
    return out;
}

std::vector<CurveCollision> p4_self_intersections(const PhiPsiProfile& profile, int samples_per_period) {
    // x, y agree only when s - r is a multiple of 2 pi, and the s coordinate is always 0.
    const double L = profile.half_length();
    const double h = 2.0 * pi / samples_per_period;
    std::vector<CurveCollision> out;
    const int shifts = 2 * (profile.k() - 1);
    for (int m = 1; m < shifts; ++m) {
        const double off = 2.0 * pi * m;
        const double lo = -L, hi = L - off;
        const int n = static_cast<int>(std::llround((hi - lo) / h));
        auto gap = [&](double r) { return profile.phi(r) - profile.phi(std::min(r + off, L)); };
        std::vector<double> g(static_cast<std::size_t>(n + 1));
        for (int i = 0; i <= n; ++i) g[static_cast<std::size_t>(i)] = gap(lo + (hi - lo) * i / n);

        int i = 0;
        while (i <= n) {
            const double ri = lo + (hi - lo) * i / n;
            if (g[static_cast<std::size_t>(i)] == 0.0) {
                int j = i;
                while (j + 1 <= n && g[static_cast<std::size_t>(j + 1)] == 0.0) ++j;
                const double rj = lo + (hi - lo) * j / n;
                out.push_back({0.5 * (ri + rj), 0.5 * (ri + rj) + off, rj - ri});
                i = j + 1;
                continue;
            }
            if (i < n && g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(i + 1)] < 0.0) {
                double a = ri, b = lo + (hi - lo) * (i + 1) / n, ga = g[static_cast<std::size_t>(i)];
                for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
                    const double mid = 0.5 * (a + b);
                    const double gm = gap(mid);
                    if (gm == 0.0) a = b = mid;
                    else if ((gm < 0.0) == (ga < 0.0)) a = mid, ga = gm;
                    else b = mid;
                }
                const double root = 0.5 * (a + b);
                out.push_back({root, root + off, 0.0});
            }
            ++i;
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.r < b.r; });
    return out;
}

double gamma_min_separation(const PhiPsiProfile& profile, int samples, double skip) {
    const double L = profile.half_length();
    std::vector<Vec> pts(static_cast<std::size_t>(samples));
    std::vector<double> rs(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i) {
        rs[static_cast<std::size_t>(i)] = -L + 2.0 * L * i / samples; // right endpoint is the identified copy
        pts[static_cast<std::size_t>(i)] = gamma(profile, rs[static_cast<std::size_t>(i)]);
    }
    std::vector<double> best(pts.size(), std::numeric_limits<double>::infinity());
    parallel_for(pts.size(), [&](std::size_t i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const double dr = rs[j] - rs[i];
            if (dr < skip || dr > 2.0 * L - skip) continue;
            best[i] = std::min(best[i], (pts[i] - pts[j]).norm());
        }
    });
    return *std::min_element(best.begin(), best.end());
}

} // namespace covlift
