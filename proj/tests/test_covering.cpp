#include "oracles.hpp"

#include "covlift/covering.hpp"
#include "covlift/surfaces.hpp"

#include <doctest.h>

#include <filesystem>
#include <map>
#include <set>

using namespace covlift;
using oracle::v2;

namespace {

CoveringMapSpec identity_spec(const SimplicialComplex& K) {
    std::vector<int> id(K.vertex_count());
    std::iota(id.begin(), id.end(), 0);
    return CoveringMapSpec::make(K, K, id);
}

const CoveringMapSpec& torus_cover() {
    static const CoveringMapSpec spec = tube_surface(build_phi_psi(2), 0.4, 64, 16);
    return spec;
}

// fiber sizes by direct counting of the vertex map
std::map<int, int> fiber_sizes(const CoveringMapSpec& spec) {
    std::map<int, int> out;
    for (int v : spec.vertex_map) ++out[v];
    return out;
}

// connected components of the preimage of target simplex t under shared facets, by union-find
int preimage_components(const CoveringMapSpec& spec, const Simplex& t) {
    const auto& S = spec.source.maximal_simplices();
    std::vector<int> pre;
    for (std::size_t i = 0; i < S.size(); ++i)
        if (spec.image(S[i]) == t) pre.push_back(static_cast<int>(i));
    std::vector<int> parent(pre.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) { return parent[static_cast<std::size_t>(a)] == a ? a : parent[static_cast<std::size_t>(a)] = find(parent[static_cast<std::size_t>(a)]); };
    for (std::size_t a = 0; a < pre.size(); ++a)
        for (std::size_t b = a + 1; b < pre.size(); ++b) {
            std::vector<int> common;
            const auto& A = S[static_cast<std::size_t>(pre[a])];
            const auto& B = S[static_cast<std::size_t>(pre[b])];
            std::set_intersection(A.begin(), A.end(), B.begin(), B.end(), std::back_inserter(common));
            if (static_cast<int>(common.size()) == spec.source.dim()) parent[static_cast<std::size_t>(find(static_cast<int>(a)))] = find(static_cast<int>(b));
        }
    std::set<int> roots;
    for (std::size_t a = 0; a < pre.size(); ++a) roots.insert(find(static_cast<int>(a)));
    return static_cast<int>(roots.size());
}

} // namespace

TEST_CASE("identity map on a torus mesh is a 1-sheeted cover") {
    const auto spec = identity_spec(torus_mesh(2.0, 0.5, 16, 8));
    const auto rep = verify_covering(spec);
    CHECK(rep.ok);
    CHECK(rep.degree == 1);
    const auto P = compute_patches(spec);
    for (std::size_t t = 0; t < P.over_target.size(); ++t) {
        REQUIRE(P.over_target[t].size() == 1);
        CHECK(P.over_target[t][0].source_maximal == std::vector<int>{static_cast<int>(t)});
    }
    const auto lift = build_lift(spec);
    for (int x : lift.indices.index_x) CHECK(x == 1);
    const auto lr = check_lift(lift, 500, 0);
    CHECK(lr.passed());
    CHECK(lr.vertex_margin == doctest::Approx(min_vertex_separation(spec.source)).epsilon(1e-12));
}

TEST_CASE("2N-cycle over N-cycle") {
    const int N = 12;
    const auto spec = circle_cover_mesh(2, N);
    const auto rep = verify_covering(spec);
    CHECK(rep.ok);
    CHECK(rep.degree == 2);
    for (const auto& [v, n] : fiber_sizes(spec)) CHECK(n == 2);

    const auto P = compute_patches(spec);
    CHECK(P.degree == 2);
    const auto& T = spec.target.maximal_simplices();
    for (std::size_t t = 0; t < T.size(); ++t) {
        CHECK(P.over_target[t].size() == 2);
        CHECK(preimage_components(spec, T[t]) == 2);
    }

    SUBCASE("seed 0 labels fibers by vertex order") {
        const auto idx = assign_indices(P, spec, 0);
        for (int i = 0; i < N; ++i) {
            CHECK(idx.index_x[static_cast<std::size_t>(i)] == 1);
            CHECK(idx.index_x[static_cast<std::size_t>(i + N)] == 2);
        }
    }
    SUBCASE("seed 1 swaps the labels and the lift still passes") {
        const auto idx = assign_indices(P, spec, 1);
        for (int i = 0; i < N; ++i) {
            CHECK(idx.index_x[static_cast<std::size_t>(i)] == 2);
            CHECK(idx.index_x[static_cast<std::size_t>(i + N)] == 1);
        }
        CHECK(check_lift(build_lift(spec, 1), 500, 1).passed());
        CHECK(check_lift(build_lift(spec, 0), 500, 1).passed());
    }
}

TEST_CASE("collapsing an edge breaks star injectivity") {
    const auto C6 = circle_mesh(6);
    const auto C3 = circle_mesh(3);
    auto spec = CoveringMapSpec::make(C6, C3, {0, 0, 2, 0, 1, 2});
    const auto rep = verify_covering(spec);
    CHECK_FALSE(rep.ok);
    CHECK_FALSE(rep.violations.empty());
}

TEST_CASE("missing sheet over one edge gives a patch count mismatch") {
    // two N-cycles over one, the second with an edge removed: fibers have 2 points,
    // stars map injectively, yet one target edge has a single preimage
    const int N = 6;
    std::vector<Vec> V;
    std::vector<Simplex> S;
    for (int i = 0; i < 2 * N; ++i) V.push_back(v2(std::cos(2 * oracle::pi * i / N), std::sin(2 * oracle::pi * i / N)) * (i < N ? 1.0 : 2.0));
    for (int i = 0; i < N; ++i) S.push_back({i, (i + 1) % N});
    for (int i = 0; i + 1 < N; ++i) S.push_back({N + i, N + i + 1});
    std::vector<int> map(2 * N);
    for (int i = 0; i < 2 * N; ++i) map[static_cast<std::size_t>(i)] = i % N;
    const auto spec = CoveringMapSpec::make(build_complex(V, S), circle_mesh(N), map);
    CHECK(oracle::error_kind([&] { compute_patches(spec); }) == ErrorKind::PatchCountMismatch);
}

TEST_CASE("torus 2-cover: fibers, patches, degree consistency") {
    const auto& spec = torus_cover();
    const auto rep = verify_covering(spec);
    REQUIRE(rep.ok);
    CHECK(rep.degree == 2);
    for (const auto& [v, n] : fiber_sizes(spec)) CHECK(n == 2);
    const auto P = compute_patches(spec);
    const auto& T = spec.target.maximal_simplices();
    for (std::size_t t = 0; t < T.size(); t += 37) {
        CHECK(P.over_target[t].size() == 2);
        CHECK(preimage_components(spec, T[t]) == 2);
    }
}

TEST_CASE("g on vertices is (F(v), label)") {
    const auto spec = circle_cover_mesh(3, 10);
    const auto lift = build_lift(spec);
    for (int u = 0; u < static_cast<int>(spec.source.vertex_count()); ++u) {
        const Vec g = eval_g(lift, spec.source.vertex(u));
        const Vec F = spec.target.vertex(spec.image_vertex(u));
        CHECK((g.head(2) - F).norm() == 0.0);
        CHECK(g(2) == doctest::Approx(lift.indices.index_x[static_cast<std::size_t>(u)]).epsilon(1e-12));
    }
}

TEST_CASE("degree-1 lift: g(x) = (x, 1)") {
    const auto spec = identity_spec(torus_mesh(2.0, 0.5, 10, 6));
    const auto lift = build_lift(spec);
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        const Vec x = spec.source.realize(sample_point(spec.source, rng));
        const Vec g = eval_g(lift, x);
        CHECK((g.head(3) - x).norm() < 1e-12);
        CHECK(g(3) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("crossing labels: g collides over an edge midpoint, h separates") {
    const int N = 8;
    const auto spec = circle_cover_mesh(2, N);
    const auto lift = build_lift(spec);
    // edges (N-1, N) and (2N-1, 0) both cover the target edge (N-1, 0) with labels (1,2) and (2,1)
    const Vec a = 0.5 * (spec.source.vertex(N - 1) + spec.source.vertex(N));
    const Vec b = 0.5 * (spec.source.vertex(2 * N - 1) + spec.source.vertex(0));
    const Vec ga = eval_g(lift, a), gb = eval_g(lift, b);
    CHECK((ga - gb).norm() < 1e-12);
    CHECK(ga(2) == doctest::Approx(1.5));
    CHECK((eval_h(lift, a) - eval_h(lift, b)).norm() > 1e-3);
}

TEST_CASE("bump block: zero at fiber vertices, the embedding away from them") {
    const auto spec = circle_cover_mesh(2, 16);
    const auto lift = build_lift(spec);
    CHECK(bump_profile(0.0, 0.1) == 1.0);
    CHECK(bump_profile(0.1, 0.1) == 0.0);
    CHECK(bump_profile(0.2, 0.1) == 0.0);
    for (int u = 0; u < 32; u += 5) {
        const Vec x = spec.source.vertex(u);
        const Vec h = eval_h(lift, x);
        CHECK(h.tail(lift.embed_dim()).norm() < 1e-15);
    }
    // midpoint of a source edge is farther than eps from every vertex
    const Vec m = 0.5 * (spec.source.vertex(0) + spec.source.vertex(1));
    REQUIRE((m - spec.source.vertex(0)).norm() > lift.bump_radius);
    CHECK(bump_sum(lift, m) == 0.0);
    CHECK((eval_h(lift, m).tail(lift.embed_dim()) - lift.embed(m)).norm() < 1e-15);
    const Vec f = lift.embed(m);
    CHECK(f.minCoeff() >= 0.0);
    CHECK(f.maxCoeff() <= 1.0);
}

TEST_CASE("property: gluing across shared faces (torus)") {
    const auto& spec = torus_cover();
    const auto lift = build_lift(spec);
    const auto& K1 = spec.source;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 0.0;
    // random points on random edges; evaluate through every incident maximal simplex
    for (int trial = 0; trial < 200; ++trial) {
        const auto& e = K1.faces(1)[static_cast<std::size_t>(rng() % K1.count(1))];
        const double t = U(rng);
        const Vec x = (1 - t) * K1.vertex(e[0]) + t * K1.vertex(e[1]);
        std::vector<Vec> vals;
        for (int m : K1.incident_maximal(e[0])) {
            const auto& s = K1.maximal(static_cast<std::size_t>(m));
            if (std::find(s.begin(), s.end(), e[1]) != s.end()) vals.push_back(eval_g_in(lift, static_cast<std::size_t>(m), x));
        }
        REQUIRE(vals.size() == 2);
        worst = std::max(worst, (vals[0] - vals[1]).norm());
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("property: projection identity and stack range") {
    const auto& spec = torus_cover();
    const auto lift = build_lift(spec);
    std::mt19937_64 rng(9);
    for (int i = 0; i < 300; ++i) {
        const auto p = sample_point(spec.source, rng);
        const Vec x = spec.source.realize(p);
        const Vec h = eval_h(lift, x);
        CHECK((h.head(3) - spec.map_point(p)).norm() < 1e-9);
        CHECK(h(3) >= 1.0 - 1e-12);
        CHECK(h(3) <= 2.0 + 1e-12);
    }
}

TEST_CASE("torus lift report") {
    const auto& spec = torus_cover();
    const auto lift = build_lift(spec);
    const auto rep = check_lift(lift, 2000, 0);
    CHECK(rep.degree == 2);
    CHECK(rep.projection_ok);
    CHECK(rep.fibers_ok);
    CHECK(rep.injectivity_margin > 0.0);
    CHECK_FALSE(rep.bump_overlap);
    CHECK(rep.passed());
    // each target vertex pulls back to two points with labels {1, 2}
    std::map<int, std::set<int>> labels;
    for (std::size_t u = 0; u < spec.source.vertex_count(); ++u) labels[spec.vertex_map[u]].insert(lift.indices.index_x[u]);
    for (const auto& [v, L] : labels) CHECK(L == std::set<int>{1, 2});
}

TEST_CASE("oversized bump radius is flagged") {
    const auto spec = circle_cover_mesh(2, 16);
    const double sep = min_vertex_separation(spec.source);
    const auto lift = build_lift(spec, 0, 0.8 * sep);
    const auto rep = check_lift(lift, 200, 0);
    CHECK(rep.bump_overlap);
    CHECK_FALSE(rep.passed());
    CHECK(default_bump_radius(spec) == doctest::Approx(0.45 * sep));
}

TEST_CASE("g collides somewhere on connected covers while h separates") {
    for (const auto* which : {"cycle", "torus"}) {
        CAPTURE(which);
        const auto spec = std::string(which) == "cycle" ? circle_cover_mesh(2, 64) : torus_cover();
        const auto lift = build_lift(spec);
        const auto hits = find_g_collisions(lift, 200, 0, 1e-3);
        REQUIRE_FALSE(hits.empty());
        bool separated = false;
        for (const auto& c : hits) {
            CHECK(c.g_distance <= 1e-3);
            CHECK((eval_g(lift, c.xa) - eval_g(lift, c.xb)).norm() == doctest::Approx(c.g_distance).epsilon(1e-9));
            separated = separated || c.h_distance > 1e-2;
        }
        CHECK(separated);
    }
}

TEST_CASE("fiber over a target point has one point per sheet") {
    const auto spec = circle_cover_mesh(3, 12);
    const auto lift = build_lift(spec);
    const std::vector<double> w{0.25, 0.75};
    const auto pts = fiber_over(lift, 0, w);
    REQUIRE(pts.size() == 3);
    const Vec y = spec.target.realize(0, w);
    for (const auto& x : pts) CHECK((eval_g(lift, x).head(2) - y).norm() < 1e-12);
}

TEST_CASE("spec and lift files round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "covlift_test_covering";
    std::filesystem::create_directories(dir);
    const auto spec = circle_cover_mesh(2, 20);
    write_spec(spec, dir);
    const auto back = read_spec(dir / "spec.json");
    CHECK(back.source == spec.source);
    CHECK(back.target == spec.target);
    CHECK(back.vertex_map == spec.vertex_map);

    const auto lift = build_lift(back, 1);
    write_lift(lift, dir / "spec.json", dir / "lift.json");
    const auto lift2 = read_lift(dir / "lift.json");
    CHECK(lift2.indices.index_x == lift.indices.index_x);
    CHECK(lift2.bump_radius == lift.bump_radius);
    CHECK(oracle::error_kind([&] { read_spec(dir / "nope.json"); }) == ErrorKind::IoError);
}
