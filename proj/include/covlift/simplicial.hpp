#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace covlift {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Sorted vertex-index tuple.
using Simplex = std::vector<int>;

/// A point of |K| written in barycentric coordinates of one simplex.
struct BarycentricPoint {
    Simplex simplex;
    std::vector<double> weights; // same order as simplex
};

namespace tolerance {
inline constexpr double clip = 1e-12;       // snap barycentric weights to {0, 1}
inline constexpr double outside = 1e-9;     // most negative admissible weight
inline constexpr double affine_hull = 1e-9; // residual allowed by barycentric_coords
inline constexpr double location = 1e-6;    // distance to |K| accepted by locate_point
} // namespace tolerance

/// Embedded pure simplicial complex. Immutable once built; every face of every maximal
/// simplex is stored, and maximal simplices are kept in lexicographic order.
class SimplicialComplex {
public:
    SimplicialComplex() = default;

    /// Validates indices, dimension, purity and affine independence, then computes the face
    /// closure. Duplicate maximal simplices are merged.
    static SimplicialComplex build(std::vector<Vec> vertices, std::vector<Simplex> maximal);

    int dim() const { return dim_; }
    int ambient_dim() const { return ambient_; }
    std::size_t vertex_count() const { return vertices_.size(); }
    const std::vector<Vec>& vertices() const { return vertices_; }
    const Vec& vertex(int i) const { return vertices_[static_cast<std::size_t>(i)]; }
    const std::vector<Simplex>& maximal_simplices() const { return maximal_; }
    const Simplex& maximal(std::size_t i) const { return maximal_[i]; }

    /// All faces of dimension k, sorted.
    const std::vector<Simplex>& faces(int k) const { return faces_[static_cast<std::size_t>(k)]; }
    std::size_t count(int k) const { return faces(k).size(); }
    bool contains(const Simplex& s) const;
    int euler_characteristic() const;

    /// Indices (into maximal_simplices()) of the maximal simplices containing vertex v.
    const std::vector<int>& incident_maximal(int v) const { return incident_[static_cast<std::size_t>(v)]; }
    /// Index of a maximal simplex, or -1.
    int maximal_index(const Simplex& s) const;

    Vec realize(const BarycentricPoint& p) const;
    Vec realize(std::size_t maximal_idx, std::span<const double> weights) const;
    double volume(std::size_t maximal_idx) const;
    double total_volume() const;
    double min_edge_length() const;

    /// Axis-aligned bounds of maximal simplex i, used to prune point location.
    const Vec& box_lo(std::size_t i) const { return box_lo_[i]; }
    const Vec& box_hi(std::size_t i) const { return box_hi_[i]; }

    bool operator==(const SimplicialComplex& other) const;

private:
    int dim_ = 0;
    int ambient_ = 0;
    std::vector<Vec> vertices_;
    std::vector<Simplex> maximal_;
    std::vector<std::vector<Simplex>> faces_;
    std::vector<std::vector<int>> incident_;
    std::vector<Vec> box_lo_, box_hi_;
};

/// Convenience wrapper matching the construction operation.
SimplicialComplex build_complex(std::vector<Vec> vertices, std::vector<Simplex> maximal);

/// Barycentric coordinates of y with respect to simplex sigma of K.
BarycentricPoint barycentric_coords(const SimplicialComplex& K, const Simplex& sigma, const Vec& y);

/// Same computation against raw vertex positions; used where no complex is at hand.
std::vector<double> barycentric_weights(std::span<const Vec> corners, const Vec& y, double* residual = nullptr);

/// Containing maximal simplex and weights; ties on shared faces go to the lexicographically
/// smallest maximal simplex.
BarycentricPoint locate_point(const SimplicialComplex& K, const Vec& y);

/// Same as locate_point but also reports the index of the maximal simplex.
std::pair<std::size_t, BarycentricPoint> locate_maximal(const SimplicialComplex& K, const Vec& y);

/// Smallest face carrying p in its relative interior.
BarycentricPoint carrier_face(const BarycentricPoint& p);

/// Stellar subdivision at each point of Y in turn; points that already are vertices are skipped.
SimplicialComplex star_subdivide_at(const SimplicialComplex& K, std::span<const Vec> Y);

/// Upper bound on the geodesic distance between two points of |K|: shortest path through the
/// 1-skeleton with `steiner_per_edge` evenly spaced extra points per edge, straight segments
/// inside every maximal simplex, and x, y wired into the simplices that carry them.
double geodesic_estimate(const SimplicialComplex& K, const Vec& x, const Vec& y, int steiner_per_edge = 3);

/// Reusable form of geodesic_estimate: the augmented graph is built once per complex.
class GeodesicEstimator {
public:
    GeodesicEstimator(const SimplicialComplex& K, int steiner_per_edge = 3);
    /// Stops searching past `cutoff`; the result is then some value above it (possibly inf).
    double distance(const Vec& x, const Vec& y, double cutoff = std::numeric_limits<double>::infinity()) const;

private:
    struct Edge {
        int to;
        double length;
    };
    const SimplicialComplex* K_;
    std::vector<Vec> nodes_;
    std::vector<std::vector<Edge>> adj_;
    std::vector<std::vector<int>> nodes_of_maximal_;
};

/// Uniformly random maximal simplex (by index) and Dirichlet(1,...,1) weights.
BarycentricPoint sample_point(const SimplicialComplex& K, std::mt19937_64& rng, std::size_t* maximal_idx = nullptr);

// Mesh I/O: {"dim", "ambient_dim", "vertices", "maximal_simplices"}.
SimplicialComplex read_mesh(const std::filesystem::path& path);
void write_mesh(const SimplicialComplex& K, const std::filesystem::path& path);
SimplicialComplex mesh_from_json_text(const std::string& text);
std::string mesh_to_json_text(const SimplicialComplex& K);
/// OBJ export; only 2-complexes in R^3.
void write_obj(const SimplicialComplex& K, const std::filesystem::path& path);

} // namespace covlift
