#pragma once

#include "covlift/simplicial.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace covlift {

/// Simplicial map K1 -> K2 given on vertices, claimed to be a finite covering.
struct CoveringMapSpec {
    SimplicialComplex source;
    SimplicialComplex target;
    std::vector<int> vertex_map;

    /// Checks dimensions and that vertex_map is a total map into target vertices. Covering
    /// properties are left to verify_covering.
    static CoveringMapSpec make(SimplicialComplex source, SimplicialComplex target, std::vector<int> vertex_map);

    int image_vertex(int u) const { return vertex_map[static_cast<std::size_t>(u)]; }
    /// Sorted image of a simplex (may contain repeats if the map collapses it).
    Simplex image(const Simplex& s) const;
    /// Simplicial map evaluated on a point given in barycentric coordinates of K1.
    Vec map_point(const BarycentricPoint& p) const;
};

struct CoveringReport {
    int degree = 0;
    bool ok = false;
    std::vector<std::string> violations;
};

CoveringReport verify_covering(const CoveringMapSpec& spec);

/// One sheet over a target simplex: the source maximal simplices in that component.
struct Patch {
    std::vector<int> source_maximal;
};

struct PatchDecomposition {
    int degree = 0;
    std::vector<std::vector<Patch>> over_target; // indexed by target maximal simplex
    /// For each source maximal simplex: (target maximal index, patch index).
    std::vector<std::pair<int, int>> owner;
};

PatchDecomposition compute_patches(const CoveringMapSpec& spec);

struct IndexAssignment {
    std::vector<std::vector<int>> fiber;   // per target vertex, sorted source vertices
    std::vector<int> index_x;              // per source vertex, label in 1..d
    std::vector<std::vector<int>> index_s; // per target maximal simplex, per patch
};

/// Labels each fiber by sorted vertex order shifted cyclically by `seed mod d`.
IndexAssignment assign_indices(const PatchDecomposition& patches, const CoveringMapSpec& spec, std::uint64_t seed);

struct LiftedCover {
    CoveringMapSpec spec;
    PatchDecomposition patches;
    IndexAssignment indices;
    std::uint64_t seed = 0;
    double bump_radius = 0.0;
    Vec embed_lo;             // f(x) = (x - embed_lo) / embed_scale lies in [0,1]^e
    double embed_scale = 1.0;

    int degree() const { return patches.degree; }
    int base_dim() const { return spec.target.ambient_dim(); }
    int embed_dim() const { return spec.source.ambient_dim(); }
    int lift_dim() const { return base_dim() + 1 + embed_dim(); }
    Vec embed(const Vec& x) const { return (x - embed_lo) / embed_scale; }
};

/// 0.45 times the smallest distance between two distinct source vertices, so the bump
/// balls around all fiber points are pairwise disjoint.
double default_bump_radius(const CoveringMapSpec& spec);

/// Smallest distance between two distinct source vertices.
double min_vertex_separation(const SimplicialComplex& K);

LiftedCover build_lift(CoveringMapSpec spec, std::uint64_t seed = 0, std::optional<double> bump_radius = std::nullopt);

/// exp(1 - 1/(1 - (r/eps)^2)) inside the ball, 0 outside; equals 1 at the center.
double bump_profile(double r, double eps);

/// Sum of bump profiles centred at every source vertex.
double bump_sum(const LiftedCover& lift, const Vec& x);

/// (F(x), stack height) with the stack interpolated from fiber labels of the patch holding x.
Vec eval_g(const LiftedCover& lift, const Vec& x);
/// Same, forcing evaluation through a given source maximal simplex incident to x.
Vec eval_g_in(const LiftedCover& lift, std::size_t source_maximal, const Vec& x);
/// (g(x), (1 - bump_sum(x)) f(x)).
Vec eval_h(const LiftedCover& lift, const Vec& x);

struct LiftReport {
    int degree = 0;
    int n_samples = 0;
    double vertex_projection_error = 0.0;
    double sample_projection_error = 0.0;
    bool projection_ok = false;
    bool fibers_ok = false;
    std::vector<std::string> fiber_violations;
    double vertex_margin = 0.0;
    double sample_margin = 0.0;
    double injectivity_margin = 0.0;
    bool bump_overlap = false;
    double bump_radius = 0.0;

    bool passed() const { return projection_ok && fibers_ok && injectivity_margin > 0.0 && !bump_overlap; }
};

LiftReport check_lift(const LiftedCover& lift, int n_samples, std::uint64_t seed);
std::string to_json(const LiftReport& report);

/// Two points of one target fiber with (nearly) equal g.
struct GCollision {
    Vec base_point;
    Vec xa, xb;
    double g_distance = 0.0;
    double h_distance = 0.0;
};

/// Pairs over a common target point whose g values agree within g_tol. Candidates are the
/// exact zero crossings of the stack difference on target edges plus n_random random target
/// points. Sorted by g_distance.
std::vector<GCollision> find_g_collisions(const LiftedCover& lift, int n_random, std::uint64_t seed, double g_tol);

/// All source points over a target point given in barycentric coordinates of a target maximal
/// simplex, one per patch.
std::vector<Vec> fiber_over(const LiftedCover& lift, std::size_t target_maximal, std::span<const double> weights);

// Spec JSON: {"source": <mesh path or inline mesh>, "target": ..., "vertex_map": [...]}.
CoveringMapSpec read_spec(const std::filesystem::path& path);
void write_spec(const CoveringMapSpec& spec, const std::filesystem::path& dir, const std::string& stem = "");

// Lift JSON references its spec file and records seed, bump radius, patches and labels.
void write_lift(const LiftedCover& lift, const std::filesystem::path& spec_path, const std::filesystem::path& out);
LiftedCover read_lift(const std::filesystem::path& path);

} // namespace covlift
