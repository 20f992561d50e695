#include "covlift/errors.hpp"
#include "covlift/simplicial.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <queue>

namespace covlift {

GeodesicEstimator::GeodesicEstimator(const SimplicialComplex& K, int steiner_per_edge) : K_(&K) {
    if (steiner_per_edge < 0) throw Error(ErrorKind::InvalidArgument, "steiner count must be non-negative");
    nodes_ = K.vertices();
    std::map<Simplex, std::vector<int>> edge_nodes;
    if (K.dim() >= 1) {
        for (const auto& e : K.faces(1)) {
            auto& ids = edge_nodes[e];
            ids = {e[0], e[1]};
            for (int i = 1; i <= steiner_per_edge; ++i) {
                const double t = static_cast<double>(i) / (steiner_per_edge + 1);
                ids.push_back(static_cast<int>(nodes_.size()));
                nodes_.push_back((1.0 - t) * K.vertex(e[0]) + t * K.vertex(e[1]));
            }
        }
    }
    adj_.assign(nodes_.size(), {});
    nodes_of_maximal_.resize(K.maximal_simplices().size());
    for (std::size_t m = 0; m < K.maximal_simplices().size(); ++m) {
        const auto& s = K.maximal(m);
        std::vector<int> ids(s.begin(), s.end());
        for (std::size_t a = 0; a < s.size(); ++a) {
            for (std::size_t b = a + 1; b < s.size(); ++b) {
                const auto& en = edge_nodes[Simplex{s[a], s[b]}];
                ids.insert(ids.end(), en.begin() + 2, en.end());
            }
        }
        // Every pair of nodes on the boundary of a simplex is joined by a segment inside it.
        for (std::size_t a = 0; a < ids.size(); ++a) {
            for (std::size_t b = a + 1; b < ids.size(); ++b) {
                const double len = (nodes_[static_cast<std::size_t>(ids[a])] - nodes_[static_cast<std::size_t>(ids[b])]).norm();
                adj_[static_cast<std::size_t>(ids[a])].push_back({ids[b], len});
                adj_[static_cast<std::size_t>(ids[b])].push_back({ids[a], len});
            }
        }
        nodes_of_maximal_[m] = std::move(ids);
    }
}

double GeodesicEstimator::distance(const Vec& x, const Vec& y, double cutoff) const {
    const auto& K = *K_;
    // Maximal simplices whose closure carries the point.
    auto carriers = [&](const Vec& p) {
        const auto face = carrier_face(locate_point(K, p)).simplex;
        std::vector<int> out;
        for (int m : K.incident_maximal(face.front())) {
            const auto& s = K.maximal(static_cast<std::size_t>(m));
            if (std::includes(s.begin(), s.end(), face.begin(), face.end())) out.push_back(m);
        }
        return out;
    };
    const auto cx = carriers(x);
    const auto cy = carriers(y);

    double best = std::numeric_limits<double>::infinity();
    for (int a : cx) {
        if (std::find(cy.begin(), cy.end(), a) != cy.end()) best = (x - y).norm();
    }

    const std::size_t n = nodes_.size();
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    for (int m : cx) {
        for (int id : nodes_of_maximal_[static_cast<std::size_t>(m)]) {
            const double d = (x - nodes_[static_cast<std::size_t>(id)]).norm();
            if (d < dist[static_cast<std::size_t>(id)]) {
                dist[static_cast<std::size_t>(id)] = d;
                pq.emplace(d, id);
            }
        }
    }
    // Exit costs: from a node into y through a simplex carrying y.
    std::vector<double> exit(n, std::numeric_limits<double>::infinity());
    for (int m : cy) {
        for (int id : nodes_of_maximal_[static_cast<std::size_t>(m)])
            exit[static_cast<std::size_t>(id)] = (y - nodes_[static_cast<std::size_t>(id)]).norm();
    }
    while (!pq.empty()) {
        const auto [d, u] = pq.top();
        pq.pop();
        if (d > dist[static_cast<std::size_t>(u)]) continue;
        if (d >= best || d > cutoff) break;
        best = std::min(best, d + exit[static_cast<std::size_t>(u)]);
        for (const auto& e : adj_[static_cast<std::size_t>(u)]) {
            const double nd = d + e.length;
            if (nd < dist[static_cast<std::size_t>(e.to)]) {
                dist[static_cast<std::size_t>(e.to)] = nd;
                pq.emplace(nd, e.to);
            }
        }
    }
    return best;
}

double geodesic_estimate(const SimplicialComplex& K, const Vec& x, const Vec& y, int steiner_per_edge) {
    return GeodesicEstimator(K, steiner_per_edge).distance(x, y);
}

} // namespace covlift
