#include "oracles.hpp"

#include "covlift/covering.hpp"
#include "covlift/surfaces.hpp"

#include <doctest.h>

#include <map>

using namespace covlift;
using oracle::pi;
using oracle::v2;

namespace {

// parameter grid on [-L, L) whose spacing divides 2 pi, so all sheets hit the same base angles
std::vector<double> aligned_grid(double L, int per_turn) {
    std::vector<double> r;
    const double h = 2.0 * pi / per_turn;
    const int n = static_cast<int>(std::lround(2.0 * L / h));
    for (int i = 0; i < n; ++i) r.push_back(-L + i * h);
    return r;
}

} // namespace

TEST_CASE("circle covers") {
    SUBCASE("d = 1 is the identity") {
        const auto c = circle_cover(1);
        const Vec x = oracle::on_circle(0.7);
        CHECK((c.map(x) - x).norm() < 1e-15);
    }
    SUBCASE("square roots of unity") {
        const auto F = circle_cover(2).fiber(v2(1, 0));
        REQUIRE(F.size() == 2);
        CHECK(oracle::hausdorff_bruteforce(F, {v2(1, 0), v2(-1, 0)}) < 1e-12);
    }
    SUBCASE("cube roots of unity") {
        const auto F = circle_cover(3).fiber(v2(1, 0));
        REQUIRE(F.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            const double ang = std::acos(std::clamp(F[i].dot(F[(i + 1) % 3]), -1.0, 1.0));
            CHECK(ang == doctest::Approx(2 * pi / 3).epsilon(1e-12));
        }
    }
    SUBCASE("fiber points map back to y") {
        const auto c = circle_cover(5);
        const Vec y = oracle::on_circle(1.3);
        for (const auto& x : c.fiber(y)) CHECK((c.map(x) - y).norm() < 1e-12);
    }
    SUBCASE("bad degree") { CHECK(oracle::error_kind([] { circle_cover(0); }) == ErrorKind::BadDegree); }
}

TEST_CASE("circle cover mesh realizes z^d at the vertices") {
    const auto spec = circle_cover_mesh(3, 16);
    const auto c = circle_cover(3);
    for (std::size_t u = 0; u < spec.source.vertex_count(); ++u)
        CHECK((c.map(spec.source.vertex(static_cast<int>(u))) - spec.target.vertex(spec.vertex_map[u])).norm() < 1e-12);
}

TEST_CASE("smoothstep") {
    CHECK(smoothstep5(0.0) == 0.0);
    CHECK(smoothstep5(1.0) == 1.0);
    CHECK(smoothstep5(0.5) == doctest::Approx(0.5));
    CHECK(smoothstep5(-1.0) == 0.0);
    CHECK(smoothstep5(2.0) == 1.0);
    for (double t = 0.05; t < 1.0; t += 0.1)
        CHECK(smoothstep5_deriv(t) == doctest::Approx((smoothstep5(t + 1e-6) - smoothstep5(t - 1e-6)) / 2e-6).epsilon(1e-6));
}

TEST_CASE("phi and psi at k = 2") {
    const auto P = build_phi_psi(2);
    CHECK(P.phi(0.0) == 1.0);
    CHECK(P.phi(pi) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(P.phi(2 * pi) == 2.0);
    CHECK(P.psi(0.0) == 0.0);
    CHECK(P.psi(2.5 * pi - 0.5 * pi) == 0.0); // 2 pi, the domain edge
    CHECK(P.psi(-pi) == doctest::Approx(1.0));
    CHECK(P.psi(-pi + 0.5) > 0.0);
    // bump sits on the negative side only
    CHECK(P.psi(pi) == 0.0);
    CHECK(oracle::error_kind([&] { P.phi(2.5 * pi); }) == ErrorKind::OutOfDomain);
    CHECK(oracle::error_kind([] { build_phi_psi(1); }) == ErrorKind::BadDegree);
}

TEST_CASE("property: profile conditions on dense grids") {
    for (int k : {2, 3, 4}) {
        CAPTURE(k);
        const auto P = build_phi_psi(k);
        const double L = P.half_length();
        CHECK(L == doctest::Approx(2 * (k - 1) * pi));
        const int n = 20000;
        bool parity = true, first_plateau = true, plateaus = true, last_plateau = true, rising = true, psi_support = true;
        double prev_r = 0, prev_phi = 0;
        for (int i = 0; i <= n; ++i) {
            const double r = -L + 2 * L * i / n;
            const double f = P.phi(r);
            parity = parity && P.phi(-r) == f;
            const double a = std::abs(r);
            if (a <= pi / 2) first_plateau = first_plateau && f == 1.0;
            for (int j = 1; j <= k - 2; ++j)
                if (a >= (2 * j - 0.5) * pi && a <= (2 * j + 0.5) * pi) plateaus = plateaus && f == j + 1;
            if (a >= (2 * (k - 1) - 0.5) * pi) last_plateau = last_plateau && f == k;
            // strictly increasing on the rising half [(2j+1) pi, (2j+3/2) pi] of every ramp
            for (int j = 0; j <= k - 2; ++j) {
                const double lo = (2 * j + 1) * pi, hi = (2 * j + 1.5) * pi;
                if (r > lo && r <= hi && prev_r >= lo) rising = rising && f > prev_phi;
            }
            const double s = P.psi(r);
            // the bump underflows to 0 just inside its edge, so positivity is only asked away from it
            bool inside = false, core = false;
            for (int j = 1; j <= k - 1; ++j) {
                inside = inside || std::abs(r + (2 * j - 1) * pi) < 1.0;
                core = core || std::abs(r + (2 * j - 1) * pi) < 0.99;
            }
            psi_support = psi_support && s >= 0.0 && (inside || s == 0.0) && (!core || s > 0.0);
            prev_r = r;
            prev_phi = f;
        }
        CHECK(parity);
        CHECK(first_plateau);
        CHECK(plateaus);
        CHECK(last_plateau);
        CHECK(rising);
        CHECK(psi_support);
        for (int j = 1; j <= k - 1; ++j) {
            CHECK(P.phi((2 * j - 1) * pi) == doctest::Approx(j - 0.5).epsilon(1e-12));
            CHECK(P.phi(-(2 * j - 1) * pi) == doctest::Approx(j - 0.5).epsilon(1e-12));
        }
    }
}

TEST_CASE("profile derivatives match finite differences") {
    for (int k : {2, 3}) {
        const auto P = build_phi_psi(k);
        const double L = P.half_length();
        for (int i = 1; i < 200; ++i) {
            const double r = -L + 2 * L * i / 200 + 1e-3;
            if (std::abs(r) > L - 1e-4) continue;
            CHECK(P.dphi(r) == doctest::Approx((P.phi(r + 1e-6) - P.phi(r - 1e-6)) / 2e-6).epsilon(1e-5).scale(1.0));
            CHECK(P.dpsi(r) == doctest::Approx((P.psi(r + 1e-6) - P.psi(r - 1e-6)) / 2e-6).epsilon(1e-5).scale(1.0));
        }
    }
}

TEST_CASE("gamma values") {
    for (int k : {2, 3, 4}) {
        const auto P = build_phi_psi(k);
        const Vec g0 = gamma(P, 0.0);
        Vec expect(5);
        expect << 1, 0, 0, 1, 0;
        CHECK((g0 - expect).norm() < 1e-15);
        CHECK((gamma(P, -P.half_length()) - gamma(P, P.half_length())).norm() < 1e-9);
    }
    Vec expect(5);
    expect << 1, 0, 0, 2, 0;
    CHECK((gamma(build_phi_psi(2), 2 * pi) - expect).norm() < 1e-12);
}

TEST_CASE("P4 o gamma at k = 2 collides only at (-pi, pi)") {
    const auto hits = p4_self_intersections(build_phi_psi(2));
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].r == doctest::Approx(-pi).epsilon(1e-7));
    CHECK(hits[0].s == doctest::Approx(pi).epsilon(1e-7));
    CHECK(std::abs(hits[0].r + pi) < 1e-6);
    CHECK(hits[0].extent == 0.0);
    // dropping psi is what creates the collision
    CHECK((gamma(build_phi_psi(2), -pi) - gamma(build_phi_psi(2), pi)).norm() > 0.5);
}

TEST_CASE("gamma at k = 2 has no self-intersection") {
    CHECK(gamma_min_separation(build_phi_psi(2), 4000, 0.05) > 1e-3);
}

TEST_CASE("k = 3 profile: plateaus one turn apart coincide under P4 over whole stretches") {
    const auto hits = p4_self_intersections(build_phi_psi(3));
    bool has_interval = false;
    for (const auto& h : hits) has_interval = has_interval || h.extent > 0.0;
    CHECK(has_interval);
}

TEST_CASE("projections") {
    Vec x(5);
    x << 1, 2, 3, 4, 5;
    CHECK(project(x, Projection::P2) == v2(1, 2));
    CHECK(project(x, Projection::P3) == oracle::v3(1, 2, 3));
    Vec p4(4), q4(4);
    p4 << 1, 2, 3, 4;
    q4 << 1, 2, 4, 5;
    CHECK(project(x, Projection::P4) == p4);
    CHECK(project(x, Projection::Q3) == oracle::v3(1, 2, 4));
    CHECK(project(x, Projection::Q4) == q4);
    Vec y(4);
    y << 1, 2, 3, 4;
    CHECK(project(y, Projection::R2) == v2(1, 2));
    CHECK(project(project(x, Projection::Q4), Projection::R2) == project(x, Projection::P2));
    CHECK(oracle::error_kind([&] { project(y, Projection::P3); }) == ErrorKind::DimMismatch);
    CHECK(parse_projection("Q4") == Projection::Q4);
    CHECK(oracle::error_kind([] { parse_projection("Z9"); }).has_value());
}

TEST_CASE("tube surface over the k = 2 curve") {
    const auto spec = tube_surface(build_phi_psi(2), 0.4, 64, 16);
    CHECK(spec.source.euler_characteristic() == 0);
    CHECK(spec.source.ambient_dim() == 5);
    CHECK(spec.target.ambient_dim() == 3);
    const auto rep = verify_covering(spec);
    CHECK(rep.ok);
    CHECK(rep.degree == 2);
    std::map<int, int> fibers;
    for (int v : spec.vertex_map) ++fibers[v];
    CHECK(fibers.size() == spec.target.vertex_count());
    for (const auto& [v, n] : fibers) CHECK(n == 2);
    // vertex map agrees with the coordinate projection
    for (std::size_t u = 0; u < spec.source.vertex_count(); u += 7)
        CHECK((project(spec.source.vertex(static_cast<int>(u)), Projection::P3) - spec.target.vertex(spec.vertex_map[u])).norm() < 0.04);
}

TEST_CASE("tube surface argument checks") {
    const auto P2 = build_phi_psi(2);
    CHECK(oracle::error_kind([&] { tube_surface(P2, 1.2, 64, 16); }).has_value());
    CHECK(oracle::error_kind([&] { tube_surface(P2, 0.4, 63, 16); }).has_value());
    CHECK(oracle::error_kind([&] { tube_surface(P2, 0.4, 64, 4); }).has_value());
    CHECK(oracle::error_kind([&] { tube_surface(build_phi_psi(3), 0.4, 64, 16); }).has_value());
    // grid finer than the merge tolerance around the tube
    CHECK(oracle::error_kind([&] { tube_surface(P2, 0.4, 64, 80); }) == ErrorKind::MergeAmbiguity);
}

TEST_CASE("fiber counts under R2") {
    SUBCASE("identity data") {
        std::vector<Vec> pts;
        for (int i = 0; i < 10; ++i) {
            Vec p = Vec::Zero(4);
            p.head(2) = oracle::on_circle(0.3 * i);
            pts.push_back(p);
        }
        std::vector<Vec> base;
        for (const auto& p : pts) base.push_back(p.head(2));
        const auto H = verify_fiber_count(pts, base, Projection::R2, 1e-9);
        for (int c : H.counts) CHECK(c == 1);
        CHECK(H.modal == 1);
    }
    SUBCASE("k = 2 curve covers the circle twice") {
        const auto P = build_phi_psi(2);
        std::vector<Vec> mu;
        for (double r : aligned_grid(P.half_length(), 256)) mu.push_back(project(gamma(P, r), Projection::Q4));
        std::vector<Vec> base;
        for (int b = 0; b < 64; ++b) base.push_back(oracle::on_circle(2 * pi * 4 * b / 256));
        const auto H = verify_fiber_count(mu, base, Projection::R2, 1e-9);
        CHECK(H.modal == 2);
        for (int c : H.counts) CHECK(c == 2);
    }
    SUBCASE("k = 3 curve winds four times over its domain") {
        const auto P = build_phi_psi(3);
        std::vector<Vec> mu;
        for (double r : aligned_grid(P.half_length(), 256)) mu.push_back(project(gamma(P, r), Projection::Q4));
        std::vector<Vec> base;
        for (int b = 0; b < 64; ++b) base.push_back(oracle::on_circle(2 * pi * 4 * b / 256));
        CHECK(verify_fiber_count(mu, base, Projection::R2, 1e-9).modal == 4);
    }
    SUBCASE("empty input") {
        CHECK(oracle::error_kind([] { verify_fiber_count({}, {}, Projection::R2, 1e-9); }) == ErrorKind::EmptySet);
    }
}

TEST_CASE("analytic circle lift") {
    for (int d : {1, 2, 3, 4}) {
        CAPTURE(d);
        const CircleLift L(d);
        const int n = d * L.n_base;
        // every fiber carries each label once
        for (int b = 0; b < L.n_base; ++b) {
            std::vector<int> labs;
            for (int m = b; m < n; m += L.n_base) labs.push_back(L.label[static_cast<std::size_t>(m)]);
            std::sort(labs.begin(), labs.end());
            for (int j = 0; j < d; ++j) CHECK(labs[static_cast<std::size_t>(j)] == j + 1);
        }
        for (int m = 0; m < n; ++m) {
            const double t = 2 * pi * m / n;
            const Vec h = L.eval(t);
            CHECK((h.head(2) - oracle::on_circle(d * t)).norm() < 1e-12);
            CHECK(h(2) == doctest::Approx(L.label[static_cast<std::size_t>(m)]).epsilon(1e-12));
            CHECK(h.tail(2).norm() < 1e-15);
        }
        // midway between fiber points the bump block is the plain embedding
        const double mid = L.spacing() / 2;
        if (L.eps < mid) CHECK(L.eval(mid)(3) == doctest::Approx(0.5 + 0.25 * std::cos(mid)).epsilon(1e-12));
    }
    CHECK(oracle::error_kind([] { CircleLift(0); }) == ErrorKind::BadDegree);
}
