#include "covlift/simplicial.hpp"

#include "covlift/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <string>

namespace covlift {

namespace {

void subsets_of_size(const Simplex& s, std::size_t k, std::vector<Simplex>& out) {
    // s is sorted, so every emitted subset is sorted as well.
    const std::size_t n = s.size();
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
        Simplex face(k);
        for (std::size_t i = 0; i < k; ++i) face[i] = s[idx[i]];
        out.push_back(std::move(face));
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
        if (i == 0) return;
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

Mat edge_matrix(std::span<const Vec> corners) {
    const auto m = corners.front().size();
    Mat e(m, static_cast<Eigen::Index>(corners.size()) - 1);
    for (std::size_t i = 1; i < corners.size(); ++i) e.col(static_cast<Eigen::Index>(i) - 1) = corners[i] - corners[0];
    return e;
}

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

std::vector<Vec> corners_of(const SimplicialComplex& K, const Simplex& s) {
    std::vector<Vec> c;
    c.reserve(s.size());
    for (int v : s) c.push_back(K.vertex(v));
    return c;
}

void clip_weights(std::vector<double>& w) {
    for (double& x : w) {
        if (x < tolerance::clip) x = 0.0;
        if (x > 1.0 - tolerance::clip) x = 1.0;
    }
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= sum;
}

bool inside_box(const SimplicialComplex& K, std::size_t i, const Vec& y, double pad) {
    return ((y.array() >= K.box_lo(i).array() - pad) && (y.array() <= K.box_hi(i).array() + pad)).all();
}

} // namespace

SimplicialComplex SimplicialComplex::build(std::vector<Vec> vertices, std::vector<Simplex> maximal) {
    if (vertices.empty()) throw Error(ErrorKind::InvalidArgument, "complex needs at least one vertex");
    if (maximal.empty()) throw Error(ErrorKind::InvalidArgument, "complex needs at least one maximal simplex");

    SimplicialComplex K;
    K.ambient_ = static_cast<int>(vertices.front().size());
    for (const auto& v : vertices) {
        if (v.size() != K.ambient_) throw Error(ErrorKind::DimMismatch, "vertices have differing ambient dimension");
    }
    K.dim_ = static_cast<int>(maximal.front().size()) - 1;
    if (K.dim_ < 0) throw Error(ErrorKind::InvalidArgument, "empty simplex");
    if (K.dim_ > K.ambient_) throw Error(ErrorKind::DegenerateSimplex, "simplex dimension exceeds ambient dimension");

    const int nv = static_cast<int>(vertices.size());
    for (auto& s : maximal) {
        if (static_cast<int>(s.size()) != K.dim_ + 1)
            throw Error(ErrorKind::InvalidArgument, "maximal simplices must all have the same dimension");
        for (int v : s) {
            if (v < 0 || v >= nv) throw Error(ErrorKind::BadIndex, "vertex index " + std::to_string(v) + " out of range");
        }
        std::sort(s.begin(), s.end());
        if (std::adjacent_find(s.begin(), s.end()) != s.end())
            throw Error(ErrorKind::DegenerateSimplex, "repeated vertex in simplex");
    }
    std::sort(maximal.begin(), maximal.end());
    maximal.erase(std::unique(maximal.begin(), maximal.end()), maximal.end());

    K.vertices_ = std::move(vertices);
    K.maximal_ = std::move(maximal);

    for (const auto& s : K.maximal_) {
        if (K.dim_ == 0) break;
        const auto corners = corners_of(K, s);
        const Mat e = edge_matrix(corners);
        Eigen::JacobiSVD<Mat> svd(e);
        const auto& sv = svd.singularValues();
        const double smax = sv(0);
        const double smin = sv(sv.size() - 1);
        if (!(smin > 1e-10 * std::max(1.0, smax)) || !(smin > 1e-14))
            throw Error(ErrorKind::DegenerateSimplex, "affinely dependent vertices in simplex");
    }

    K.faces_.assign(static_cast<std::size_t>(K.dim_) + 1, {});
    for (int k = 0; k <= K.dim_; ++k) {
        auto& bucket = K.faces_[static_cast<std::size_t>(k)];
        for (const auto& s : K.maximal_) subsets_of_size(s, static_cast<std::size_t>(k) + 1, bucket);
        std::sort(bucket.begin(), bucket.end());
        bucket.erase(std::unique(bucket.begin(), bucket.end()), bucket.end());
    }
    if (K.faces_[0].size() != K.vertices_.size())
        throw Error(ErrorKind::InvalidArgument, "every vertex must belong to some maximal simplex");

    K.incident_.assign(K.vertices_.size(), {});
    K.box_lo_.reserve(K.maximal_.size());
    K.box_hi_.reserve(K.maximal_.size());
    for (std::size_t i = 0; i < K.maximal_.size(); ++i) {
        Vec lo = K.vertex(K.maximal_[i][0]);
        Vec hi = lo;
        for (int v : K.maximal_[i]) {
            K.incident_[static_cast<std::size_t>(v)].push_back(static_cast<int>(i));
            lo = lo.cwiseMin(K.vertex(v));
            hi = hi.cwiseMax(K.vertex(v));
        }
        K.box_lo_.push_back(std::move(lo));
        K.box_hi_.push_back(std::move(hi));
    }
    return K;
}

SimplicialComplex build_complex(std::vector<Vec> vertices, std::vector<Simplex> maximal) {
    return SimplicialComplex::build(std::move(vertices), std::move(maximal));
}

bool SimplicialComplex::contains(const Simplex& s) const {
    if (s.empty() || static_cast<int>(s.size()) > dim_ + 1) return false;
    const auto& bucket = faces(static_cast<int>(s.size()) - 1);
    return std::binary_search(bucket.begin(), bucket.end(), s);
}

int SimplicialComplex::euler_characteristic() const {
    int chi = 0;
    for (int k = 0; k <= dim_; ++k) chi += (k % 2 == 0 ? 1 : -1) * static_cast<int>(count(k));
    return chi;
}

int SimplicialComplex::maximal_index(const Simplex& s) const {
    auto it = std::lower_bound(maximal_.begin(), maximal_.end(), s);
    if (it == maximal_.end() || *it != s) return -1;
    return static_cast<int>(it - maximal_.begin());
}

Vec SimplicialComplex::realize(const BarycentricPoint& p) const {
    Vec out = Vec::Zero(ambient_);
    for (std::size_t i = 0; i < p.simplex.size(); ++i) out += p.weights[i] * vertex(p.simplex[i]);
    return out;
}

Vec SimplicialComplex::realize(std::size_t maximal_idx, std::span<const double> weights) const {
    Vec out = Vec::Zero(ambient_);
    const auto& s = maximal_[maximal_idx];
    for (std::size_t i = 0; i < s.size(); ++i) out += weights[i] * vertex(s[i]);
    return out;
}

double SimplicialComplex::volume(std::size_t maximal_idx) const {
    if (dim_ == 0) return 1.0;
    const auto corners = corners_of(*this, maximal_[maximal_idx]);
    const Mat e = edge_matrix(corners);
    const double gram = (e.transpose() * e).determinant();
    return std::sqrt(std::max(0.0, gram)) / factorial(dim_);
}

double SimplicialComplex::total_volume() const {
    double total = 0.0;
    for (std::size_t i = 0; i < maximal_.size(); ++i) total += volume(i);
    return total;
}

double SimplicialComplex::min_edge_length() const {
    double best = std::numeric_limits<double>::infinity();
    if (dim_ == 0) return best;
    for (const auto& e : faces(1)) best = std::min(best, (vertex(e[0]) - vertex(e[1])).norm());
    return best;
}

bool SimplicialComplex::operator==(const SimplicialComplex& other) const {
    if (dim_ != other.dim_ || ambient_ != other.ambient_) return false;
    if (vertices_.size() != other.vertices_.size() || maximal_ != other.maximal_) return false;
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
        if (vertices_[i] != other.vertices_[i]) return false;
    }
    return true;
}

std::vector<double> barycentric_weights(std::span<const Vec> corners, const Vec& y, double* residual) {
    const auto n = corners.size();
    std::vector<double> w(n);
    if (n == 1) {
        w[0] = 1.0;
        if (residual) *residual = (y - corners[0]).norm();
        return w;
    }
    const Mat e = edge_matrix(corners);
    const Vec rhs = y - corners[0];
    const Vec mu = e.colPivHouseholderQr().solve(rhs);
    if (residual) *residual = (e * mu - rhs).norm();
    double rest = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
        w[i] = mu(static_cast<Eigen::Index>(i) - 1);
        rest -= w[i];
    }
    w[0] = rest;
    return w;
}

BarycentricPoint barycentric_coords(const SimplicialComplex& K, const Simplex& sigma, const Vec& y) {
    if (y.size() != K.ambient_dim()) throw Error(ErrorKind::DimMismatch, "point dimension differs from ambient");
    Simplex s = sigma;
    std::sort(s.begin(), s.end());
    if (!K.contains(s)) throw Error(ErrorKind::BadIndex, "simplex is not part of the complex");
    const auto corners = corners_of(K, s);
    double residual = 0.0;
    auto w = barycentric_weights(corners, y, &residual);
    if (residual > tolerance::affine_hull) throw Error(ErrorKind::OutsideSimplex, "point is off the affine hull");
    for (double x : w) {
        if (x < -tolerance::outside) throw Error(ErrorKind::OutsideSimplex, "negative barycentric weight");
    }
    clip_weights(w);
    return {std::move(s), std::move(w)};
}

std::pair<std::size_t, BarycentricPoint> locate_maximal(const SimplicialComplex& K, const Vec& y) {
    if (y.size() != K.ambient_dim()) throw Error(ErrorKind::DimMismatch, "point dimension differs from ambient");
    const auto& maxs = K.maximal_simplices();

    // Fallback candidate for points slightly off every simplex: smallest distance to the
    // clamped projection.
    double best_dist = std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    std::vector<double> best_w;

    for (std::size_t i = 0; i < maxs.size(); ++i) {
        if (!inside_box(K, i, y, tolerance::location)) continue;
        const auto corners = corners_of(K, maxs[i]);
        double residual = 0.0;
        auto w = barycentric_weights(corners, y, &residual);
        const double wmin = *std::min_element(w.begin(), w.end());
        if (residual <= tolerance::location && wmin >= -tolerance::outside) {
            clip_weights(w);
            return {i, BarycentricPoint{maxs[i], std::move(w)}};
        }
        if (wmin > -1e-3) {
            for (double& x : w) x = std::max(x, 0.0);
            const double sum = std::accumulate(w.begin(), w.end(), 0.0);
            for (double& x : w) x /= sum;
            const double dist = (K.realize(i, w) - y).norm();
            if (dist < best_dist) {
                best_dist = dist;
                best_idx = i;
                best_w = w;
            }
        }
    }
    if (best_dist <= tolerance::location) {
        clip_weights(best_w);
        return {best_idx, BarycentricPoint{maxs[best_idx], std::move(best_w)}};
    }
    throw Error(ErrorKind::NotOnComplex, "point is not within location tolerance of the complex");
}

BarycentricPoint locate_point(const SimplicialComplex& K, const Vec& y) { return locate_maximal(K, y).second; }

BarycentricPoint carrier_face(const BarycentricPoint& p) {
    BarycentricPoint out;
    for (std::size_t i = 0; i < p.simplex.size(); ++i) {
        if (p.weights[i] > tolerance::clip) {
            out.simplex.push_back(p.simplex[i]);
            out.weights.push_back(p.weights[i]);
        }
    }
    return out;
}

SimplicialComplex star_subdivide_at(const SimplicialComplex& K, std::span<const Vec> Y) {
    if (Y.empty()) return K;
    std::vector<Vec> verts = K.vertices();
    std::vector<Simplex> maxs = K.maximal_simplices();
    bool changed = false;

    for (const Vec& y : Y) {
        if (y.size() != K.ambient_dim()) throw Error(ErrorKind::DimMismatch, "point dimension differs from ambient");
        // Current complex is only a list of maximal simplices, so locate by direct scan in
        // lexicographic order, mirroring locate_point.
        std::sort(maxs.begin(), maxs.end());
        BarycentricPoint hit;
        bool found = false;
        for (const auto& s : maxs) {
            std::vector<Vec> corners;
            for (int v : s) corners.push_back(verts[static_cast<std::size_t>(v)]);
            double residual = 0.0;
            auto w = barycentric_weights(corners, y, &residual);
            if (residual <= tolerance::location && *std::min_element(w.begin(), w.end()) >= -tolerance::outside) {
                clip_weights(w);
                hit = {s, std::move(w)};
                found = true;
                break;
            }
        }
        if (!found) throw Error(ErrorKind::NotOnComplex, "subdivision point is not on the complex");

        const auto tau = carrier_face(hit).simplex;
        if (tau.size() == 1) continue;

        const int fresh = static_cast<int>(verts.size());
        verts.push_back(y);
        std::vector<Simplex> next;
        next.reserve(maxs.size() + tau.size());
        for (auto& s : maxs) {
            if (!std::includes(s.begin(), s.end(), tau.begin(), tau.end())) {
                next.push_back(std::move(s));
                continue;
            }
            for (int v : tau) {
                Simplex cone = s;
                std::replace(cone.begin(), cone.end(), v, fresh);
                std::sort(cone.begin(), cone.end());
                next.push_back(std::move(cone));
            }
        }
        maxs = std::move(next);
        changed = true;
    }
    if (!changed) return K;
    return SimplicialComplex::build(std::move(verts), std::move(maxs));
}

BarycentricPoint sample_point(const SimplicialComplex& K, std::mt19937_64& rng, std::size_t* maximal_idx) {
    std::uniform_int_distribution<std::size_t> pick(0, K.maximal_simplices().size() - 1);
    std::exponential_distribution<double> expo(1.0);
    const std::size_t i = pick(rng);
    std::vector<double> w(K.maximal(i).size());
    double sum = 0.0;
    for (double& x : w) {
        x = expo(rng);
        sum += x;
    }
    for (double& x : w) x /= sum;
    if (maximal_idx) *maximal_idx = i;
    return {K.maximal(i), std::move(w)};
}

} // namespace covlift
