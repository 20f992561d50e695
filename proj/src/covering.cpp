#include "covlift/covering.hpp"

#include "covlift/errors.hpp"
#include "covlift/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace covlift {

CoveringMapSpec CoveringMapSpec::make(SimplicialComplex source, SimplicialComplex target, std::vector<int> vertex_map) {
    if (source.dim() != target.dim()) throw Error(ErrorKind::DimMismatch, "source and target dimensions differ");
    if (vertex_map.size() != source.vertex_count())
        throw Error(ErrorKind::BadIndex, "vertex_map must list an image for every source vertex");
    for (int v : vertex_map) {
        if (v < 0 || v >= static_cast<int>(target.vertex_count()))
            throw Error(ErrorKind::BadIndex, "vertex_map entry out of range");
    }
    return {std::move(source), std::move(target), std::move(vertex_map)};
}

Simplex CoveringMapSpec::image(const Simplex& s) const {
    Simplex out;
    out.reserve(s.size());
    for (int u : s) out.push_back(image_vertex(u));
    std::sort(out.begin(), out.end());
    return out;
}

Vec CoveringMapSpec::map_point(const BarycentricPoint& p) const {
    Vec out = Vec::Zero(target.ambient_dim());
    for (std::size_t i = 0; i < p.simplex.size(); ++i) out += p.weights[i] * target.vertex(image_vertex(p.simplex[i]));
    return out;
}

CoveringReport verify_covering(const CoveringMapSpec& spec) {
    CoveringReport rep;
    const auto& K1 = spec.source;
    const auto& K2 = spec.target;

    std::vector<int> fiber_size(K2.vertex_count(), 0);
    for (int v : spec.vertex_map) ++fiber_size[static_cast<std::size_t>(v)];
    std::map<int, int> freq;
    for (int c : fiber_size) ++freq[c];
    rep.degree = std::max_element(freq.begin(), freq.end(), [](auto a, auto b) { return a.second < b.second; })->first;
    for (std::size_t v = 0; v < fiber_size.size(); ++v) {
        if (fiber_size[v] == 0) rep.violations.push_back("target vertex " + std::to_string(v) + " has empty fiber");
        else if (fiber_size[v] != rep.degree)
            rep.violations.push_back("target vertex " + std::to_string(v) + " has fiber size " +
                                     std::to_string(fiber_size[v]) + ", expected " + std::to_string(rep.degree));
    }

    std::vector<char> hit(K2.maximal_simplices().size(), 0);
    for (const auto& s : K1.maximal_simplices()) {
        const auto img = spec.image(s);
        if (std::adjacent_find(img.begin(), img.end()) != img.end()) continue; // reported by star check
        const int t = K2.maximal_index(img);
        if (t < 0) rep.violations.push_back("image of a source simplex is not a target simplex");
        else hit[static_cast<std::size_t>(t)] = 1;
    }
    for (std::size_t t = 0; t < hit.size(); ++t) {
        if (!hit[t]) rep.violations.push_back("target simplex " + std::to_string(t) + " is not covered");
    }

    for (std::size_t u = 0; u < K1.vertex_count(); ++u) {
        std::set<int> star;
        for (int m : K1.incident_maximal(static_cast<int>(u))) {
            const auto& s = K1.maximal(static_cast<std::size_t>(m));
            star.insert(s.begin(), s.end());
        }
        std::set<int> images;
        for (int w : star) images.insert(spec.image_vertex(w));
        if (images.size() != star.size())
            rep.violations.push_back("map is not injective on the closed star of source vertex " + std::to_string(u));
    }
    rep.ok = rep.violations.empty() && rep.degree >= 1;
    return rep;
}

PatchDecomposition compute_patches(const CoveringMapSpec& spec) {
    const auto& K1 = spec.source;
    const auto& K2 = spec.target;
    const auto cov = verify_covering(spec);
    if (!cov.ok) throw Error(ErrorKind::InvalidArgument, "map is not a covering: " + cov.violations.front());

    PatchDecomposition out;
    out.degree = cov.degree;
    out.over_target.assign(K2.maximal_simplices().size(), {});
    out.owner.assign(K1.maximal_simplices().size(), {-1, -1});

    std::vector<std::vector<int>> preimage(K2.maximal_simplices().size());
    for (std::size_t s = 0; s < K1.maximal_simplices().size(); ++s)
        preimage[static_cast<std::size_t>(K2.maximal_index(spec.image(K1.maximal(s))))].push_back(static_cast<int>(s));

    // Connected components of each preimage under facet adjacency.
    for (std::size_t t = 0; t < preimage.size(); ++t) {
        const auto& pre = preimage[t];
        std::vector<int> parent(pre.size());
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](int a) {
            while (parent[static_cast<std::size_t>(a)] != a) a = parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
            return a;
        };
        std::map<Simplex, int> facet_owner;
        for (std::size_t i = 0; i < pre.size(); ++i) {
            const auto& s = K1.maximal(static_cast<std::size_t>(pre[i]));
            for (std::size_t drop = 0; drop < s.size() && s.size() > 1; ++drop) {
                Simplex facet;
                for (std::size_t j = 0; j < s.size(); ++j)
                    if (j != drop) facet.push_back(s[j]);
                auto [it, fresh] = facet_owner.emplace(facet, static_cast<int>(i));
                if (!fresh) parent[static_cast<std::size_t>(find(static_cast<int>(i)))] = find(it->second);
            }
        }
        std::map<int, std::size_t> comp_of_root;
        auto& patches = out.over_target[t];
        for (std::size_t i = 0; i < pre.size(); ++i) {
            const int root = find(static_cast<int>(i));
            auto [it, fresh] = comp_of_root.emplace(root, patches.size());
            if (fresh) patches.push_back({});
            patches[it->second].source_maximal.push_back(pre[i]);
        }
        if (static_cast<int>(patches.size()) != out.degree)
            throw Error(ErrorKind::PatchCountMismatch, "target simplex " + std::to_string(t) + " has " +
                                                           std::to_string(patches.size()) + " patches, expected " +
                                                           std::to_string(out.degree));
        for (std::size_t p = 0; p < patches.size(); ++p) {
            std::set<int> verts;
            for (int s : patches[p].source_maximal) {
                const auto& simplex = K1.maximal(static_cast<std::size_t>(s));
                verts.insert(simplex.begin(), simplex.end());
                out.owner[static_cast<std::size_t>(s)] = {static_cast<int>(t), static_cast<int>(p)};
            }
            if (verts.size() != K2.maximal(t).size())
                throw Error(ErrorKind::PatchCountMismatch, "patch over target simplex " + std::to_string(t) +
                                                               " does not map bijectively on vertices");
        }
    }
    return out;
}

IndexAssignment assign_indices(const PatchDecomposition& patches, const CoveringMapSpec& spec, std::uint64_t seed) {
    const auto& K1 = spec.source;
    const auto& K2 = spec.target;
    const int d = patches.degree;
    IndexAssignment out;
    out.fiber.assign(K2.vertex_count(), {});
    for (std::size_t u = 0; u < K1.vertex_count(); ++u) out.fiber[static_cast<std::size_t>(spec.image_vertex(static_cast<int>(u)))].push_back(static_cast<int>(u));
    out.index_x.assign(K1.vertex_count(), 0);
    const auto shift = static_cast<int>(seed % static_cast<std::uint64_t>(d));
    for (auto& fib : out.fiber) {
        std::sort(fib.begin(), fib.end());
        for (std::size_t rank = 0; rank < fib.size(); ++rank)
            out.index_x[static_cast<std::size_t>(fib[rank])] = static_cast<int>((static_cast<int>(rank) + shift) % d) + 1;
    }
    out.index_s.assign(patches.over_target.size(), {});
    for (std::size_t t = 0; t < patches.over_target.size(); ++t) {
        const int lead = K2.maximal(t).front();
        for (const auto& patch : patches.over_target[t]) {
            const auto& s = K1.maximal(static_cast<std::size_t>(patch.source_maximal.front()));
            const auto it = std::find_if(s.begin(), s.end(), [&](int u) { return spec.image_vertex(u) == lead; });
            out.index_s[t].push_back(out.index_x[static_cast<std::size_t>(*it)]);
        }
    }
    return out;
}

double min_vertex_separation(const SimplicialComplex& K) {
    const auto& V = K.vertices();
    std::vector<double> best(V.size(), std::numeric_limits<double>::infinity());
    parallel_for(V.size(), [&](std::size_t i) {
        for (std::size_t j = i + 1; j < V.size(); ++j) best[i] = std::min(best[i], (V[i] - V[j]).norm());
    });
    return *std::min_element(best.begin(), best.end());
}

double default_bump_radius(const CoveringMapSpec& spec) { return 0.45 * min_vertex_separation(spec.source); }

LiftedCover build_lift(CoveringMapSpec spec, std::uint64_t seed, std::optional<double> bump_radius) {
    LiftedCover lift;
    lift.patches = compute_patches(spec);
    lift.indices = assign_indices(lift.patches, spec, seed);
    lift.seed = seed;
    lift.bump_radius = bump_radius.value_or(default_bump_radius(spec));
    if (!(lift.bump_radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "bump radius must be positive");
    Vec lo = spec.source.vertex(0), hi = lo;
    for (const auto& v : spec.source.vertices()) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    lift.embed_lo = lo;
    lift.embed_scale = std::max((hi - lo).maxCoeff(), 1e-300);
    lift.spec = std::move(spec);
    return lift;
}

double bump_profile(double r, double eps) {
    if (r >= eps) return 0.0;
    const double q = r / eps;
    return std::exp(1.0 - 1.0 / (1.0 - q * q));
}

double bump_sum(const LiftedCover& lift, const Vec& x) {
    double total = 0.0;
    const double eps = lift.bump_radius;
    for (const auto& v : lift.spec.source.vertices()) {
        const double r = (x - v).norm();
        if (r < eps) total += bump_profile(r, eps);
    }
    return total;
}

namespace {

Vec g_from(const LiftedCover& lift, std::size_t source_maximal, const BarycentricPoint& where) {
    const auto& spec = lift.spec;
    const auto [t, p] = lift.patches.owner[source_maximal];
    const auto& sigma = spec.target.maximal(static_cast<std::size_t>(t));
    const Vec fx = spec.map_point(where);
    const auto lam = barycentric_coords(spec.target, sigma, fx);

    // index_X(F^{-1}(v) ∩ C^sigma_k) for each vertex v of sigma.
    const auto& patch = lift.patches.over_target[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    const auto& src = spec.source.maximal(static_cast<std::size_t>(patch.source_maximal.front()));
    double stack = 0.0;
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        const auto it = std::find_if(src.begin(), src.end(), [&](int u) { return spec.image_vertex(u) == sigma[i]; });
        stack += lift.indices.index_x[static_cast<std::size_t>(*it)] * lam.weights[i];
    }
    Vec g(fx.size() + 1);
    g.head(fx.size()) = fx;
    g(fx.size()) = stack;
    return g;
}

Vec h_from_g(const LiftedCover& lift, const Vec& g, const Vec& x) {
    Vec h(lift.lift_dim());
    h.head(g.size()) = g;
    h.tail(lift.embed_dim()) = (1.0 - bump_sum(lift, x)) * lift.embed(x);
    return h;
}

} // namespace

Vec eval_g(const LiftedCover& lift, const Vec& x) {
    const auto [s, where] = locate_maximal(lift.spec.source, x);
    return g_from(lift, s, where);
}

Vec eval_g_in(const LiftedCover& lift, std::size_t source_maximal, const Vec& x) {
    const auto where = barycentric_coords(lift.spec.source, lift.spec.source.maximal(source_maximal), x);
    return g_from(lift, source_maximal, where);
}

Vec eval_h(const LiftedCover& lift, const Vec& x) { return h_from_g(lift, eval_g(lift, x), x); }

std::vector<Vec> fiber_over(const LiftedCover& lift, std::size_t target_maximal, std::span<const double> weights) {
    const auto& spec = lift.spec;
    const auto& sigma = spec.target.maximal(target_maximal);
    std::vector<Vec> out;
    for (const auto& patch : lift.patches.over_target[target_maximal]) {
        const auto& src = spec.source.maximal(static_cast<std::size_t>(patch.source_maximal.front()));
        Vec x = Vec::Zero(spec.source.ambient_dim());
        for (int u : src) {
            const auto pos = std::find(sigma.begin(), sigma.end(), spec.image_vertex(u)) - sigma.begin();
            x += weights[static_cast<std::size_t>(pos)] * spec.source.vertex(u);
        }
        out.push_back(std::move(x));
    }
    return out;
}

LiftReport check_lift(const LiftedCover& lift, int n_samples, std::uint64_t seed) {
    const auto& spec = lift.spec;
    const auto& K1 = spec.source;
    const int m2 = lift.base_dim();
    LiftReport rep;
    rep.degree = lift.degree();
    rep.n_samples = n_samples;
    rep.bump_radius = lift.bump_radius;
    rep.bump_overlap = 2.0 * lift.bump_radius >= min_vertex_separation(K1);

    std::vector<Vec> hv(K1.vertex_count());
    parallel_for(hv.size(), [&](std::size_t u) { hv[u] = eval_h(lift, K1.vertex(static_cast<int>(u))); });
    for (std::size_t u = 0; u < hv.size(); ++u) {
        const Vec& image = spec.target.vertex(spec.image_vertex(static_cast<int>(u)));
        rep.vertex_projection_error = std::max(rep.vertex_projection_error, (hv[u].head(m2) - image).cwiseAbs().maxCoeff());
    }

    std::mt19937_64 rng(seed);
    std::vector<BarycentricPoint> samples;
    samples.reserve(static_cast<std::size_t>(std::max(0, n_samples)));
    for (int i = 0; i < n_samples; ++i) samples.push_back(sample_point(K1, rng));
    std::vector<Vec> hs(samples.size());
    std::vector<double> err(samples.size(), 0.0);
    parallel_for(samples.size(), [&](std::size_t i) {
        hs[i] = eval_h(lift, K1.realize(samples[i]));
        err[i] = (hs[i].head(m2) - spec.map_point(samples[i])).cwiseAbs().maxCoeff();
    });
    for (double e : err) rep.sample_projection_error = std::max(rep.sample_projection_error, e);
    rep.projection_ok = rep.vertex_projection_error == 0.0 && rep.sample_projection_error <= 1e-9;

    const int d = lift.degree();
    for (std::size_t v = 0; v < spec.target.vertex_count(); ++v) {
        const auto& fib = lift.indices.fiber[v];
        std::vector<int> labels;
        bool exact = static_cast<int>(fib.size()) == d;
        for (int u : fib) {
            const Vec& h = hv[static_cast<std::size_t>(u)];
            const double stack = h(m2);
            exact = exact && (h.head(m2) == spec.target.vertex(static_cast<int>(v))) && (h.tail(lift.embed_dim()).array() == 0.0).all() &&
                    stack == std::round(stack);
            labels.push_back(static_cast<int>(std::lround(stack)));
        }
        std::sort(labels.begin(), labels.end());
        std::vector<int> expect(static_cast<std::size_t>(d));
        std::iota(expect.begin(), expect.end(), 1);
        if (!exact || labels != expect) rep.fiber_violations.push_back("fiber of target vertex " + std::to_string(v) + " is not {(v, i, 0)}");
    }
    rep.fibers_ok = rep.fiber_violations.empty();

    auto min_pairwise = [](const std::vector<Vec>& pts, std::size_t lo, std::size_t hi) {
        std::vector<double> best(pts.size(), std::numeric_limits<double>::infinity());
        parallel_for(pts.size(), [&](std::size_t i) {
            for (std::size_t j = std::max(i + 1, lo); j < hi; ++j) best[i] = std::min(best[i], (pts[i] - pts[j]).norm());
        });
        return *std::min_element(best.begin(), best.end());
    };
    std::vector<Vec> all = hv;
    all.insert(all.end(), hs.begin(), hs.end());
    rep.vertex_margin = hv.size() > 1 ? min_pairwise(hv, 0, hv.size()) : std::numeric_limits<double>::infinity();
    rep.sample_margin = all.size() > 1 ? min_pairwise(all, 0, all.size()) : std::numeric_limits<double>::infinity();
    rep.injectivity_margin = std::min(rep.vertex_margin, rep.sample_margin);
    return rep;
}

std::string to_json(const LiftReport& r) {
    nlohmann::json j;
    j["degree"] = r.degree;
    j["n_samples"] = r.n_samples;
    j["projection"] = {{"ok", r.projection_ok}, {"vertex_max_error", r.vertex_projection_error}, {"sample_max_error", r.sample_projection_error}};
    j["fibers"] = {{"ok", r.fibers_ok}, {"violations", r.fiber_violations}};
    j["injectivity"] = {{"ok", r.injectivity_margin > 0.0}, {"vertex_margin", r.vertex_margin}, {"sample_margin", r.sample_margin}, {"margin", r.injectivity_margin}};
    j["bump"] = {{"radius", r.bump_radius}, {"overlap", r.bump_overlap}};
    j["passed"] = r.passed();
    return j.dump(2);
}

std::vector<GCollision> find_g_collisions(const LiftedCover& lift, int n_random, std::uint64_t seed, double g_tol) {
    const auto& spec = lift.spec;
    const auto& K2 = spec.target;
    const std::size_t m2 = static_cast<std::size_t>(lift.base_dim());

    struct Candidate {
        std::size_t t;
        std::vector<double> w;
    };
    std::vector<Candidate> cands;

    // Exact zero crossings of the stack difference between two patches along target edges.
    for (std::size_t t = 0; t < K2.maximal_simplices().size(); ++t) {
        const auto& sigma = K2.maximal(t);
        const auto& patches = lift.patches.over_target[t];
        auto label = [&](std::size_t p, std::size_t i) {
            const auto& src = spec.source.maximal(static_cast<std::size_t>(patches[p].source_maximal.front()));
            const auto it = std::find_if(src.begin(), src.end(), [&](int u) { return spec.image_vertex(u) == sigma[i]; });
            return static_cast<double>(lift.indices.index_x[static_cast<std::size_t>(*it)]);
        };
        for (std::size_t a = 0; a < patches.size(); ++a) {
            for (std::size_t b = a + 1; b < patches.size(); ++b) {
                for (std::size_t i = 0; i < sigma.size(); ++i) {
                    for (std::size_t k = i + 1; k < sigma.size(); ++k) {
                        const double di = label(a, i) - label(b, i);
                        const double dk = label(a, k) - label(b, k);
                        if (di * dk >= 0.0) continue;
                        std::vector<double> w(sigma.size(), 0.0);
                        w[i] = dk / (dk - di);
                        w[k] = 1.0 - w[i];
                        cands.push_back({t, std::move(w)});
                    }
                }
            }
        }
    }
    std::mt19937_64 rng(seed);
    for (int i = 0; i < n_random; ++i) {
        std::size_t t = 0;
        auto p = sample_point(K2, rng, &t);
        cands.push_back({t, std::move(p.weights)});
    }

    std::vector<std::vector<GCollision>> found(cands.size());
    parallel_for(cands.size(), [&](std::size_t c) {
        const auto xs = fiber_over(lift, cands[c].t, cands[c].w);
        std::vector<Vec> gs, hs;
        for (const auto& x : xs) {
            gs.push_back(eval_g(lift, x));
            hs.push_back(eval_h(lift, x));
        }
        for (std::size_t a = 0; a < xs.size(); ++a) {
            for (std::size_t b = a + 1; b < xs.size(); ++b) {
                const double gd = (gs[a] - gs[b]).norm();
                if (gd > g_tol) continue;
                found[c].push_back({gs[a].head(static_cast<Eigen::Index>(m2)), xs[a], xs[b], gd, (hs[a] - hs[b]).norm()});
            }
        }
    });
    std::vector<GCollision> out;
    for (auto& f : found) out.insert(out.end(), f.begin(), f.end());
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.g_distance < b.g_distance; });
    return out;
}

namespace {

SimplicialComplex mesh_ref(const nlohmann::json& j, const std::filesystem::path& base) {
    if (j.is_string()) return read_mesh(base / j.get<std::string>());
    return mesh_from_json_text(j.dump());
}

nlohmann::json parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, e.what());
    }
}

void dump_file(const nlohmann::json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    out << j.dump(1) << '\n';
}

} // namespace

CoveringMapSpec read_spec(const std::filesystem::path& path) {
    const auto j = parse_file(path);
    try {
        const auto base = path.parent_path();
        return CoveringMapSpec::make(mesh_ref(j.at("source"), base), mesh_ref(j.at("target"), base),
                                     j.at("vertex_map").get<std::vector<int>>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, e.what());
    }
}

void write_spec(const CoveringMapSpec& spec, const std::filesystem::path& dir, const std::string& stem) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string());
    const std::string src = stem + "source.json";
    const std::string tgt = stem + "target.json";
    write_mesh(spec.source, dir / src);
    write_mesh(spec.target, dir / tgt);
    nlohmann::json j;
    j["source"] = src;
    j["target"] = tgt;
    j["vertex_map"] = spec.vertex_map;
    dump_file(j, dir / (stem + "spec.json"));
}

void write_lift(const LiftedCover& lift, const std::filesystem::path& spec_path, const std::filesystem::path& out) {
    nlohmann::json j;
    j["spec"] = std::filesystem::absolute(spec_path).string();
    j["seed"] = lift.seed;
    j["bump_radius"] = lift.bump_radius;
    j["degree"] = lift.degree();
    j["index_x"] = lift.indices.index_x;
    j["index_s"] = lift.indices.index_s;
    nlohmann::json patches = nlohmann::json::array();
    for (const auto& over : lift.patches.over_target) {
        nlohmann::json row = nlohmann::json::array();
        for (const auto& p : over) row.push_back(p.source_maximal);
        patches.push_back(row);
    }
    j["patches"] = patches;
    j["embed_lo"] = std::vector<double>(lift.embed_lo.data(), lift.embed_lo.data() + lift.embed_lo.size());
    j["embed_scale"] = lift.embed_scale;
    dump_file(j, out);
}

LiftedCover read_lift(const std::filesystem::path& path) {
    const auto j = parse_file(path);
    try {
        std::filesystem::path spec_path = j.at("spec").get<std::string>();
        if (spec_path.is_relative()) spec_path = path.parent_path() / spec_path;
        auto lift = build_lift(read_spec(spec_path), j.at("seed").get<std::uint64_t>(), j.at("bump_radius").get<double>());
        if (j.at("index_x").get<std::vector<int>>() != lift.indices.index_x)
            throw Error(ErrorKind::ParseError, "stored labels do not match the spec and seed");
        return lift;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, e.what());
    }
}

} // namespace covlift
