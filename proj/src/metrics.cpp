#include "covlift/metrics.hpp"

#include "covlift/errors.hpp"
#include "covlift/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace covlift {

namespace {
constexpr double pi = std::numbers::pi;

struct MeshHit {
    std::size_t simplex = 0;
    Vec point;
    double dist = std::numeric_limits<double>::infinity();
};

std::vector<Vec> corners_of(const SimplicialComplex& K, const Simplex& s) {
    std::vector<Vec> out;
    for (int v : s) out.push_back(K.vertex(v));
    return out;
}

double box_distance(const Vec& lo, const Vec& hi, const Vec& y) {
    return (y.cwiseMax(lo).cwiseMin(hi) - y).norm();
}

MeshHit mesh_closest(const SimplicialComplex& K, const Vec& y) {
    MeshHit best;
    for (std::size_t i = 0; i < K.maximal_simplices().size(); ++i) {
        if (box_distance(K.box_lo(i), K.box_hi(i), y) >= best.dist) continue;
        const auto corners = corners_of(K, K.maximal(i));
        Vec p = closest_point_on_simplex(corners, y);
        const double d = (p - y).norm();
        if (d < best.dist) best = {i, std::move(p), d};
    }
    return best;
}

Mat orthonormal_columns(const Mat& A) {
    Eigen::HouseholderQR<Mat> qr(A);
    return qr.householderQ() * Mat::Identity(A.rows(), A.cols());
}

} // namespace

Vec closest_point_on_simplex(std::span<const Vec> corners, const Vec& y) {
    if (corners.size() == 1) return corners[0];
    const auto w = barycentric_weights(corners, y);
    if (std::all_of(w.begin(), w.end(), [](double x) { return x >= 0.0; })) {
        Vec p = Vec::Zero(y.size());
        for (std::size_t i = 0; i < corners.size(); ++i) p += w[i] * corners[i];
        return p;
    }
    Vec best;
    double best_d = std::numeric_limits<double>::infinity();
    std::vector<Vec> facet;
    for (std::size_t drop = 0; drop < corners.size(); ++drop) {
        facet.clear();
        for (std::size_t i = 0; i < corners.size(); ++i)
            if (i != drop) facet.push_back(corners[i]);
        Vec p = closest_point_on_simplex(facet, y);
        const double d = (p - y).norm();
        if (d < best_d) {
            best_d = d;
            best = std::move(p);
        }
    }
    return best;
}

ManifoldDescriptor ManifoldDescriptor::circle(double radius) {
    if (!(radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "radius must be positive");
    ManifoldDescriptor M;
    M.kind_ = ManifoldKind::Circle;
    M.R_ = radius;
    M.reach_ = radius;
    return M;
}

ManifoldDescriptor ManifoldDescriptor::torus(double R, double r) {
    if (!(r > 0.0 && R > r)) throw Error(ErrorKind::InvalidArgument, "torus needs R > r > 0");
    ManifoldDescriptor M;
    M.kind_ = ManifoldKind::Torus;
    M.R_ = R;
    M.r_ = r;
    M.reach_ = std::min(r, R - r);
    return M;
}

ManifoldDescriptor ManifoldDescriptor::mesh(SimplicialComplex K, double reach) {
    if (!(reach > 0.0)) throw Error(ErrorKind::InvalidArgument, "reach must be positive");
    ManifoldDescriptor M;
    M.kind_ = ManifoldKind::Mesh;
    M.reach_ = reach;
    M.mesh_ = std::make_shared<const SimplicialComplex>(std::move(K));
    return M;
}

int ManifoldDescriptor::dim() const {
    switch (kind_) {
    case ManifoldKind::Circle: return 1;
    case ManifoldKind::Torus: return 2;
    case ManifoldKind::Mesh: return mesh_->dim();
    }
    return 0;
}

int ManifoldDescriptor::ambient_dim() const {
    switch (kind_) {
    case ManifoldKind::Circle: return 2;
    case ManifoldKind::Torus: return 3;
    case ManifoldKind::Mesh: return mesh_->ambient_dim();
    }
    return 0;
}

Vec ManifoldDescriptor::nearest_point(const Vec& y) const {
    if (y.size() != ambient_dim()) throw Error(ErrorKind::DimMismatch, "point dimension differs from ambient");
    switch (kind_) {
    case ManifoldKind::Circle: {
        const double n = y.norm();
        if (!(std::abs(n - R_) < reach_)) throw Error(ErrorKind::OutsideReach, "point outside the reach of the circle");
        return y * (R_ / n);
    }
    case ManifoldKind::Torus: {
        const double q = std::hypot(y(0), y(1));
        if (q == 0.0) throw Error(ErrorKind::OutsideReach, "point on the torus axis");
        Vec c(3);
        c << R_ * y(0) / q, R_ * y(1) / q, 0.0;
        const Vec w = y - c;
        const double wn = w.norm();
        if (!(std::abs(wn - r_) < reach_)) throw Error(ErrorKind::OutsideReach, "point outside the reach of the torus");
        return c + w * (r_ / wn);
    }
    case ManifoldKind::Mesh: {
        auto hit = mesh_closest(*mesh_, y);
        if (!(hit.dist < reach_)) throw Error(ErrorKind::OutsideReach, "point outside the supplied mesh reach");
        return hit.point;
    }
    }
    return y;
}

Mat ManifoldDescriptor::tangent_basis(const Vec& x) const {
    const Vec p = nearest_point(x);
    switch (kind_) {
    case ManifoldKind::Circle: {
        Mat B(2, 1);
        B << -p(1) / R_, p(0) / R_;
        return B;
    }
    case ManifoldKind::Torus: {
        const double u = std::atan2(p(1), p(0));
        Vec c(3);
        c << R_ * std::cos(u), R_ * std::sin(u), 0.0;
        const Vec n = (p - c) / r_;
        const double cv = n(0) * std::cos(u) + n(1) * std::sin(u), sv = n(2);
        Mat B(3, 2);
        B.col(0) << -std::sin(u), std::cos(u), 0.0;
        B.col(1) << -sv * std::cos(u), -sv * std::sin(u), cv;
        return B;
    }
    case ManifoldKind::Mesh: {
        const auto hit = mesh_closest(*mesh_, x);
        const auto corners = corners_of(*mesh_, mesh_->maximal(hit.simplex));
        Mat E(ambient_dim(), static_cast<Eigen::Index>(corners.size()) - 1);
        for (std::size_t i = 1; i < corners.size(); ++i) E.col(static_cast<Eigen::Index>(i) - 1) = corners[i] - corners[0];
        return orthonormal_columns(E);
    }
    }
    return {};
}

Mat ManifoldDescriptor::nearest_point_jacobian(const Vec& y) const {
    const int m = ambient_dim();
    switch (kind_) {
    case ManifoldKind::Circle: {
        nearest_point(y);
        const double n = y.norm();
        const Vec u = y / n;
        return (R_ / n) * (Mat::Identity(2, 2) - u * u.transpose());
    }
    case ManifoldKind::Torus: {
        nearest_point(y);
        const double q = std::hypot(y(0), y(1));
        Vec uh(3);
        uh << y(0) / q, y(1) / q, 0.0;
        Mat Pi = Mat::Zero(3, 3);
        Pi.topLeftCorner(2, 2) = Mat::Identity(2, 2) - uh.head(2) * uh.head(2).transpose();
        const Mat Dc = (R_ / q) * Pi;
        const Vec w = y - R_ * uh;
        const double wn = w.norm();
        const Vec n = w / wn;
        const Mat Dn = (Mat::Identity(3, 3) - n * n.transpose()) * (Mat::Identity(3, 3) - Dc) / wn;
        return Dc + r_ * Dn;
    }
    case ManifoldKind::Mesh: {
        const double h = 1e-5;
        Mat J(m, m);
        for (int j = 0; j < m; ++j) {
            Vec a = y, b = y;
            a(j) += h;
            b(j) -= h;
            J.col(j) = (nearest_point(a) - nearest_point(b)) / (2.0 * h);
        }
        return J;
    }
    }
    return {};
}

double ManifoldDescriptor::distance_to_cell_boundary(const Vec& y) const {
    if (kind_ != ManifoldKind::Mesh) return std::numeric_limits<double>::infinity();
    const auto hit = mesh_closest(*mesh_, y);
    const auto corners = corners_of(*mesh_, mesh_->maximal(hit.simplex));
    double best = std::numeric_limits<double>::infinity();
    std::vector<Vec> facet;
    for (std::size_t drop = 0; drop < corners.size(); ++drop) {
        facet.clear();
        for (std::size_t i = 0; i < corners.size(); ++i)
            if (i != drop) facet.push_back(corners[i]);
        best = std::min(best, (closest_point_on_simplex(facet, hit.point) - hit.point).norm());
    }
    return best;
}

Vec ManifoldDescriptor::sample(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> U(0.0, 2.0 * pi);
    switch (kind_) {
    case ManifoldKind::Circle: {
        const double t = U(rng);
        Vec p(2);
        p << R_ * std::cos(t), R_ * std::sin(t);
        return p;
    }
    case ManifoldKind::Torus: {
        // Rejection on the area element (R + r cos v).
        std::uniform_real_distribution<double> A(0.0, R_ + r_);
        for (;;) {
            const double u = U(rng), v = U(rng);
            if (A(rng) > R_ + r_ * std::cos(v)) continue;
            Vec p(3);
            p << (R_ + r_ * std::cos(v)) * std::cos(u), (R_ + r_ * std::cos(v)) * std::sin(u), r_ * std::sin(v);
            return p;
        }
    }
    case ManifoldKind::Mesh: {
        std::vector<double> vol;
        for (std::size_t i = 0; i < mesh_->maximal_simplices().size(); ++i) vol.push_back(mesh_->volume(i));
        std::discrete_distribution<std::size_t> pick(vol.begin(), vol.end());
        const std::size_t i = pick(rng);
        std::exponential_distribution<double> expo(1.0);
        std::vector<double> w(mesh_->maximal(i).size());
        double sum = 0.0;
        for (double& x : w) sum += (x = expo(rng));
        for (double& x : w) x /= sum;
        return mesh_->realize(i, w);
    }
    }
    return {};
}

BistableReport bistable_report(const Evaluator& f, const std::function<Vec(const Vec&)>& g, const std::vector<Vec>& samples,
                               const ManifoldDescriptor& M1, const ManifoldDescriptor& M2, double M_bound) {
    if (samples.empty()) throw Error(ErrorKind::EmptySet, "no samples for the bistable report");
    BistableReport rep;
    rep.sample_count = static_cast<int>(samples.size());
    rep.M_bound = M_bound;
    const std::size_t n = samples.size();
    std::vector<double> err(n), grad(n), inv(n, 0.0), cond(n, 0.0);
    std::vector<Vec> fx(n);
    std::vector<Mat> JB(n);
    parallel_for(n, [&](std::size_t i) {
        fx[i] = f.f(samples[i]);
        err[i] = (fx[i] - g(samples[i])).norm();
        JB[i] = f.jacobian(samples[i]) * M1.tangent_basis(samples[i]);
        grad[i] = Eigen::JacobiSVD<Mat>(JB[i]).singularValues()(0);
    });
    rep.eps_hat = *std::max_element(err.begin(), err.end());
    rep.grad_max = *std::max_element(grad.begin(), grad.end());
    rep.eps_within_reach = rep.eps_hat < M2.reach();
    rep.grad_bounded = rep.grad_max <= M_bound;
    if (!rep.eps_within_reach) return rep;

    std::vector<int> near_edge(n, 0);
    parallel_for(n, [&](std::size_t i) {
        const Vec p = M2.nearest_point(fx[i]);
        const Mat A = M2.tangent_basis(p).transpose() * M2.nearest_point_jacobian(fx[i]) * JB[i];
        const Vec sv = Eigen::JacobiSVD<Mat>(A).singularValues();
        const double smin = sv(sv.size() - 1), smax = sv(0);
        cond[i] = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
        inv[i] = 1.0 / smin;
        near_edge[i] = M2.distance_to_cell_boundary(fx[i]) < 1e-3 ? 1 : 0;
    });
    for (std::size_t i = 0; i < n; ++i) {
        if (!(cond[i] <= 1e12)) throw Error(ErrorKind::SingularTangentMap, "tangent map is numerically singular at a sample");
    }
    rep.inverse_evaluable = true;
    rep.inv_grad_max = *std::max_element(inv.begin(), inv.end());
    rep.inv_bounded = rep.inv_grad_max <= M_bound;
    for (int v : near_edge) rep.near_edge_samples += v;
    return rep;
}

std::string to_json(const BistableReport& r) {
    nlohmann::json j;
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    j["eps_hat"] = r.eps_hat;
    j["grad_max"] = num(r.grad_max);
    j["inv_grad_max"] = num(r.inv_grad_max);
    j["M_bound"] = num(r.M_bound);
    j["sample_count"] = r.sample_count;
    j["near_edge_samples"] = r.near_edge_samples;
    j["passes"] = {{"eps_within_reach", r.eps_within_reach}, {"inverse_evaluable", r.inverse_evaluable},
                   {"grad_bounded", r.grad_bounded}, {"inv_bounded", r.inv_bounded}, {"all", r.passes()}};
    return j.dump(2);
}

NonsmoothValue nonsmooth_example(double eps, double x) {
    if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "eps must be positive");
    NonsmoothValue v;
    v.f = x <= 0.0 ? x : 2.0 * x;
    if (x >= -eps && x <= eps) {
        v.f_eps = (x + eps) * (x - eps) / (4.0 * eps) + 1.5 * x + 0.5 * eps;
        v.df_eps = x / (2.0 * eps) + 1.5;
    } else {
        v.f_eps = v.f;
        v.df_eps = x < 0.0 ? 1.0 : 2.0;
    }
    return v;
}

double hausdorff(const std::vector<Vec>& A, const std::vector<Vec>& B) {
    if (A.empty() || B.empty()) throw Error(ErrorKind::EmptySet, "Hausdorff distance of an empty set");
    auto directed = [](const std::vector<Vec>& P, const std::vector<Vec>& Q) {
        std::vector<double> m(P.size());
        parallel_for(P.size(), [&](std::size_t i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : Q) best = std::min(best, (P[i] - q).norm());
            m[i] = best;
        });
        return *std::max_element(m.begin(), m.end());
    };
    return std::max(directed(A, B), directed(B, A));
}

GeoCheck check_geo_euclid(const SimplicialComplex& K, const std::vector<std::pair<Vec, Vec>>& pairs, double r0, double slack,
                          int steiner_per_edge) {
    if (!(r0 > 0.0)) throw Error(ErrorKind::InvalidArgument, "r0 must be positive");
    const GeodesicEstimator est(K, steiner_per_edge);
    std::vector<double> geo(pairs.size()), euc(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t i) {
        geo[i] = est.distance(pairs[i].first, pairs[i].second, pi * r0);
        euc[i] = (pairs[i].first - pairs[i].second).norm();
    });
    GeoCheck out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (geo[i] > pi * r0) continue;
        ++out.admissible;
        if ((2.0 / pi) * geo[i] > euc[i] * (1.0 + slack)) out.violations.push_back({i, euc[i], geo[i], "lower"});
        if (euc[i] > geo[i] * (1.0 + slack)) out.violations.push_back({i, euc[i], geo[i], "upper"});
    }
    return out;
}

std::vector<int> solve_assignment(const Mat& cost) {
    // Shortest augmenting paths with row/column potentials, O(n^3).
    const int n = static_cast<int>(cost.rows());
    if (cost.cols() != n) throw Error(ErrorKind::SizeMismatch, "assignment needs a square cost matrix");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<int> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
        std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                const auto sj = static_cast<std::size_t>(j);
                if (used[sj]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[sj];
                if (cur < minv[sj]) {
                    minv[sj] = cur;
                    way[sj] = j0;
                }
                if (minv[sj] < delta) {
                    delta = minv[sj];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                const auto sj = static_cast<std::size_t>(j);
                if (used[sj]) {
                    u[static_cast<std::size_t>(p[sj])] += delta;
                    v[sj] -= delta;
                } else {
                    minv[sj] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j) row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    return row_to_col;
}

double wasserstein2_exact(const std::vector<Vec>& A, const std::vector<Vec>& B) {
    if (A.size() != B.size()) throw Error(ErrorKind::SizeMismatch, "W2 needs equal sample counts");
    if (A.size() > 1024) throw Error(ErrorKind::TooLarge, "exact W2 is capped at 1024 points");
    if (A.empty()) throw Error(ErrorKind::EmptySet, "W2 of empty samples");
    const auto n = static_cast<Eigen::Index>(A.size());
    Mat C(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (A[static_cast<std::size_t>(i)].size() != B[static_cast<std::size_t>(i)].size() ||
            A[static_cast<std::size_t>(i)].size() != A[0].size())
            throw Error(ErrorKind::DimMismatch, "W2 points differ in dimension");
        for (Eigen::Index j = 0; j < n; ++j) C(i, j) = (A[static_cast<std::size_t>(i)] - B[static_cast<std::size_t>(j)]).squaredNorm();
    }
    const auto match = solve_assignment(C);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) total += C(i, match[static_cast<std::size_t>(i)]);
    return std::sqrt(total / static_cast<double>(n));
}

double pushforward_check(const std::function<Vec(const Vec&)>& f, const Sampler& M1_sampler, const Sampler& target_sampler,
                         int n, std::uint64_t seed) {
    if (n < 1) throw Error(ErrorKind::EmptySet, "need at least one sample");
    if (n > 1024) throw Error(ErrorKind::TooLarge, "exact W2 is capped at 1024 points");
    std::mt19937_64 ra(seed), rb(seed);
    std::vector<Vec> A, B;
    for (int i = 0; i < n; ++i) A.push_back(f(M1_sampler(ra)));
    for (int i = 0; i < n; ++i) B.push_back(target_sampler(rb));
    return wasserstein2_exact(A, B);
}

double pushforward_check(const EPNetwork& net, const Sampler& M1_sampler, const Sampler& target_sampler, int n,
                         std::uint64_t seed) {
    return pushforward_check([&](const Vec& x) { return net.forward(x); }, M1_sampler, target_sampler, n, seed);
}

} // namespace covlift
