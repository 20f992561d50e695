// covlift command-line front end.
#include "covlift/covering.hpp"
#include "covlift/epnet.hpp"
#include "covlift/errors.hpp"
#include "covlift/experiments.hpp"
#include "covlift/metrics.hpp"
#include "covlift/parallel.hpp"
#include "covlift/simplicial.hpp"
#include "covlift/surfaces.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>

namespace {

using namespace covlift;
using nlohmann::json;
namespace fs = std::filesystem;

constexpr int exit_ok = 0;
constexpr int exit_error = 1;
constexpr int exit_check = 2;
constexpr int exit_usage = 64;
constexpr int exit_io = 74;

struct Globals {
    std::string out;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string config;
};

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    out << text << '\n';
}

fs::path ensure_dir(const std::string& dir) {
    const fs::path p = dir.empty() ? fs::path(".") : fs::path(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + p.string());
    return p;
}

std::vector<Vec> read_points(const fs::path& path) {
    const auto j = read_json(path);
    const auto& arr = j.is_object() ? j.at("points") : j;
    std::vector<Vec> out;
    try {
        for (const auto& row : arr) {
            const auto v = row.get<std::vector<double>>();
            out.emplace_back(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, e.what());
    }
    return out;
}

Vec parse_vec(const std::string& text) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            vals.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw CLI::ValidationError("--y", "expected comma-separated numbers");
        }
    }
    return Eigen::Map<const Vec>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec on_circle(double t) {
    Vec v(2);
    v << std::cos(t), std::sin(t);
    return v;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Covering-map lifts, extension-projection networks and bistable verification", "covlift"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    Globals g;
    if (const char* env = std::getenv("COVLIFT_OUT")) g.out = env;
    app.add_option("--out", g.out, "Output file or directory (default: $COVLIFT_OUT or .)");
    app.add_option("--seed", g.seed, "Random seed");
    app.add_option("--threads", g.threads, "Worker threads (0 = hardware)")->check(CLI::NonNegativeNumber);
    app.add_option("--config", g.config, "Experiment or training config JSON");

    // gen-cover
    auto* gen = app.add_subcommand("gen-cover", "Generate a covering map (meshes + spec) into the output directory");
    std::string gen_kind = "circle";
    int gen_d = 2, gen_segments = 256, gen_nr = 64, gen_nt = 16;
    double gen_rho = 0.4;
    bool gen_obj = false;
    gen->add_option("--kind", gen_kind, "circle | tube | torus")->check(CLI::IsMember({"circle", "tube", "torus"}));
    gen->add_option("--d", gen_d, "Degree of the circle cover")->check(CLI::PositiveNumber);
    gen->add_option("--segments", gen_segments, "Target circle segments")->check(CLI::Range(3, 1 << 20));
    gen->add_option("--rho", gen_rho, "Tube or torus minor radius");
    gen->add_option("--n-r", gen_nr, "Tube grid size along the curve (torus: major direction)");
    gen->add_option("--n-theta", gen_nt, "Tube grid size around the curve (torus: minor direction)");
    gen->add_flag("--obj", gen_obj, "Also write the 3-D target mesh as OBJ");

    // subdivide
    auto* sub = app.add_subcommand("subdivide", "Star-subdivide a mesh so given points become vertices");
    std::string sub_mesh, sub_points;
    sub->add_option("--mesh", sub_mesh, "Mesh JSON")->required();
    sub->add_option("--points", sub_points, "JSON array of points on the mesh")->required();

    // decompose
    auto* dec = app.add_subcommand("decompose", "Build the lift (patches, labels, bump radius) of a covering spec");
    std::string dec_spec;
    double dec_eps = 0.0;
    dec->add_option("--spec", dec_spec, "Covering spec JSON")->required();
    dec->add_option("--eps", dec_eps, "Bump radius (default: 0.45 x min vertex spacing)");

    // check-lift
    auto* chk = app.add_subcommand("check-lift", "Verify projection, fibers and injectivity of a lift");
    std::string chk_lift;
    int chk_samples = 10000;
    chk->add_option("--lift", chk_lift, "Lift JSON from decompose")->required();
    chk->add_option("--samples", chk_samples, "Random sample count")->check(CLI::NonNegativeNumber);

    // train
    auto* trn = app.add_subcommand("train", "Train an extension-projection network on a lift");
    std::string trn_lift;
    int trn_d = 2, trn_steps = 2000, trn_samples = 512, trn_pairs = 2;
    double trn_lr = 0.01;
    std::string trn_opt = "momentum";
    trn->add_option("--d", trn_d, "Degree of the analytic circle lift (ignored with --lift)")->check(CLI::PositiveNumber);
    trn->add_option("--lift", trn_lift, "Lift JSON; train on the covering lift instead of the circle");
    trn->add_option("--steps", trn_steps, "Optimizer steps")->check(CLI::PositiveNumber);
    trn->add_option("--lr", trn_lr, "Step size")->check(CLI::PositiveNumber);
    trn->add_option("--optimizer", trn_opt, "momentum | gd")->check(CLI::IsMember({"momentum", "gd"}));
    trn->add_option("--samples", trn_samples, "Training samples")->check(CLI::PositiveNumber);
    trn->add_option("--coupling-pairs", trn_pairs, "Coupling layer pairs in E")->check(CLI::NonNegativeNumber);

    // invert
    auto* inv = app.add_subcommand("invert", "Multivalued inverse of a circle network at a point");
    std::string inv_net, inv_y = "1,0";
    int inv_d = 2, inv_cands = 20000;
    inv->add_option("--net", inv_net, "Network checkpoint JSON")->required();
    inv->add_option("--y", inv_y, "Target point, comma separated");
    inv->add_option("--d", inv_d, "Number of sheets")->check(CLI::PositiveNumber);
    inv->add_option("--candidates", inv_cands, "Candidate points on the unit circle")->check(CLI::PositiveNumber);

    // verify-bistable
    auto* vb = app.add_subcommand("verify-bistable", "Bistable report of a circle network against z^d");
    std::string vb_net;
    int vb_d = 2, vb_samples = 2000;
    double vb_M = std::numeric_limits<double>::infinity(), vb_eps = 0.05;
    vb->add_option("--net", vb_net, "Network checkpoint JSON")->required();
    vb->add_option("--d", vb_d, "Degree of the reference map")->check(CLI::PositiveNumber);
    vb->add_option("--samples", vb_samples, "Sample count on the circle")->check(CLI::PositiveNumber);
    vb->add_option("--M", vb_M, "Bound for both gradient terms");
    vb->add_option("--eps", vb_eps, "Required sup error");

    // orbit-recover
    auto* orb = app.add_subcommand("orbit-recover", "Train on z^d and recover cyclic orbits by inversion");
    int orb_d = 2;
    orb->add_option("--d", orb_d, "Group order")->check(CLI::PositiveNumber);

    // w2
    auto* w2 = app.add_subcommand("w2", "Exact Wasserstein-2 distance between two point sets");
    std::string w2_a, w2_b;
    w2->add_option("--a", w2_a, "JSON array of points")->required();
    w2->add_option("--b", w2_b, "JSON array of points")->required();

    // run-experiment
    auto* rex = app.add_subcommand("run-experiment", "Run a configured experiment and write its report");
    std::string rex_id;
    rex->add_option("--id", rex_id, "circle_cover | torus_tube | orbit_recovery | compose_projection (overrides config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    try {
        set_num_threads(g.threads);
        if (*gen) {
            const auto dir = ensure_dir(g.out);
            CoveringMapSpec spec = [&] {
                if (gen_kind == "circle") return circle_cover_mesh(gen_d, gen_segments);
                if (gen_kind == "tube") return tube_surface(build_phi_psi(2), gen_rho, gen_nr, gen_nt);
                auto T = torus_mesh(1.0, gen_rho, gen_nr, gen_nt);
                std::vector<int> id(T.vertex_count());
                std::iota(id.begin(), id.end(), 0);
                auto copy = T;
                return CoveringMapSpec::make(std::move(T), std::move(copy), std::move(id));
            }();
            const auto rep = verify_covering(spec);
            write_spec(spec, dir);
            if (gen_obj && spec.target.dim() == 2 && spec.target.ambient_dim() == 3) write_obj(spec.target, dir / "target.obj");
            std::printf("gen-cover %s: %zu source / %zu target vertices, degree %d, %s\n", gen_kind.c_str(), spec.source.vertex_count(),
                        spec.target.vertex_count(), rep.degree, rep.ok ? "covering ok" : "NOT a covering");
            return rep.ok ? exit_ok : exit_check;
        }
        if (*sub) {
            const auto K = read_mesh(sub_mesh);
            const auto Y = read_points(sub_points);
            const auto K2 = star_subdivide_at(K, Y);
            const fs::path out = g.out.empty() ? fs::path("subdivided.json") : fs::path(g.out);
            write_mesh(K2, out);
            std::printf("subdivide: %zu -> %zu vertices, %zu -> %zu maximal simplices\n", K.vertex_count(), K2.vertex_count(),
                        K.maximal_simplices().size(), K2.maximal_simplices().size());
            return exit_ok;
        }
        if (*dec) {
            auto spec = read_spec(dec_spec);
            const auto lift = build_lift(std::move(spec), g.seed, dec_eps > 0.0 ? std::optional<double>(dec_eps) : std::nullopt);
            const fs::path out = g.out.empty() ? fs::path("lift.json") : fs::path(g.out);
            write_lift(lift, dec_spec, out);
            std::printf("decompose: degree %d, %zu target simplices, bump radius %.6g\n", lift.degree(), lift.patches.over_target.size(),
                        lift.bump_radius);
            return exit_ok;
        }
        if (*chk) {
            const auto lift = read_lift(chk_lift);
            const auto rep = check_lift(lift, chk_samples, g.seed);
            if (!g.out.empty()) write_text(g.out, to_json(rep));
            std::printf("check-lift: degree %d, projection %s, fibers %s, margin %.6g, bump overlap %s -> %s\n", rep.degree,
                        rep.projection_ok ? "ok" : "FAIL", rep.fibers_ok ? "ok" : "FAIL", rep.injectivity_margin,
                        rep.bump_overlap ? "yes" : "no", rep.passed() ? "PASS" : "FAIL");
            return rep.passed() ? exit_ok : exit_check;
        }
        if (*trn) {
            ExperimentConfig cfg = g.config.empty() ? ExperimentConfig{} : ExperimentConfig::from_json(read_json(g.config));
            TrainConfig tc = cfg.train;
            tc.epochs = trn_steps;
            tc.step_size = trn_lr;
            tc.optimizer = trn_opt == "momentum" ? Optimizer::Momentum : Optimizer::GradientDescent;
            tc.seed = g.seed;
            std::mt19937_64 rng(g.seed);
            std::vector<Vec> xs, hs;
            EPNetwork net;
            if (!trn_lift.empty()) {
                const auto lift = read_lift(trn_lift);
                const auto& K1 = lift.spec.source;
                xs.assign(K1.vertices().begin(), K1.vertices().end());
                for (int i = 0; i < trn_samples; ++i) xs.push_back(K1.realize(sample_point(K1, rng)));
                for (const auto& x : xs) hs.push_back(eval_h(lift, x));
                net = make_lift_network(K1.ambient_dim(), lift.lift_dim(), lift.base_dim(), trn_pairs, cfg.hidden, rng);
                if (static_cast<int>(tc.weights.size()) != lift.lift_dim()) tc.weights = lift_loss_weights(lift.base_dim(), lift.lift_dim());
            } else {
                const CircleLift lift(trn_d);
                for (int i = 0; i < trn_samples; ++i) {
                    const double t = 2.0 * std::numbers::pi * i / trn_samples;
                    xs.push_back(on_circle(t));
                    hs.push_back(lift.eval(t));
                }
                net = make_lift_network(2, lift.dim(), 2, trn_pairs, cfg.hidden, rng);
                if (tc.weights.empty()) tc.weights = lift_loss_weights(2, lift.dim());
            }
            const int m2 = net.proj_keep();
            Mat X(xs.front().size(), static_cast<Eigen::Index>(xs.size())), H(hs.front().size(), static_cast<Eigen::Index>(hs.size()));
            for (std::size_t i = 0; i < xs.size(); ++i) {
                X.col(static_cast<Eigen::Index>(i)) = xs[i];
                H.col(static_cast<Eigen::Index>(i)) = hs[i];
            }
            const Mat U = H.topRows(m2);
            const auto res = train(net, X, H, U, U, tc);
            const auto dir = ensure_dir(g.out);
            write_network(net, dir / "network.json");
            write_loss_csv(res, dir / "loss.csv");
            std::printf("train: %d steps, loss %.6g -> %.6g\n", tc.epochs, res.loss.front(), res.loss.back());
            return res.loss.back() < res.loss.front() ? exit_ok : exit_check;
        }
        if (*inv) {
            const auto net = read_network(inv_net);
            const Vec y = parse_vec(inv_y);
            std::vector<Vec> cands;
            for (int i = 0; i < inv_cands; ++i) cands.push_back(on_circle(2.0 * std::numbers::pi * i / inv_cands));
            const Chart chart{[](const Vec& x) -> Vec { return x / x.norm(); },
                              [](const Vec& x) -> Mat {
                                  Mat B(2, 1);
                                  B << -x(1) / x.norm(), x(0) / x.norm();
                                  return B;
                              }};
            const auto res = multivalued_invert(net, y, inv_d, net.e_dim() - net.proj_keep() - 1, cands, chart);
            json j;
            j["y"] = vec_json(y);
            j["points"] = json::array();
            for (const auto& p : res.points) j["points"].push_back(vec_json(p));
            j["objective"] = res.objective;
            j["duplicates"] = res.duplicates;
            if (!g.out.empty()) write_text(g.out, j.dump(2));
            std::printf("invert: %zu points", res.points.size());
            for (const auto& p : res.points) std::printf(" (%.6f, %.6f)", p(0), p(1));
            std::printf("%s\n", res.duplicates.empty() ? "" : " [duplicates]");
            return res.duplicates.empty() ? exit_ok : exit_check;
        }
        if (*vb) {
            const auto net = read_network(vb_net);
            const auto cover = circle_cover(vb_d);
            std::vector<Vec> samples;
            for (int i = 0; i < vb_samples; ++i) samples.push_back(on_circle(2.0 * std::numbers::pi * (i + 0.5) / vb_samples));
            const auto M = ManifoldDescriptor::circle(1.0);
            const Evaluator f{[&](const Vec& x) { return net.forward(x); }, [&](const Vec& x) { return net.jacobian(x, Stage::Full); }};
            const auto rep = bistable_report(f, [&](const Vec& x) { return cover.map(x); }, samples, M, M, vb_M);
            if (!g.out.empty()) write_text(g.out, to_json(rep));
            const bool ok = rep.passes() && rep.eps_hat < vb_eps;
            std::printf("verify-bistable: eps_hat %.6g, grad_max %.6g, inv_grad_max %.6g -> %s\n", rep.eps_hat, rep.grad_max, rep.inv_grad_max,
                        ok ? "PASS" : "FAIL");
            return ok ? exit_ok : exit_check;
        }
        if (*orb) {
            ExperimentConfig cfg = g.config.empty() ? ExperimentConfig{} : ExperimentConfig::from_json(read_json(g.config));
            cfg.seed = g.seed;
            cfg.id = "orbit_recovery";
            cfg.d = orb_d;
            cfg.out = g.out;
            json rep;
            const bool ok = run_experiment(cfg, &rep);
            double worst = 0.0;
            for (const auto& y : rep["inversion"]) worst = std::max(worst, y["hausdorff"].get<double>());
            std::printf("orbit-recover d=%d: worst Hausdorff %.6g -> %s\n", orb_d, worst, ok ? "PASS" : "FAIL");
            return ok ? exit_ok : exit_check;
        }
        if (*w2) {
            const auto A = read_points(w2_a);
            const auto B = read_points(w2_b);
            const double v = wasserstein2_exact(A, B);
            if (!g.out.empty()) write_text(g.out, json{{"w2", v}, {"n", A.size()}}.dump(2));
            std::printf("%s\n", json(v).dump().c_str());
            return exit_ok;
        }
        if (*rex) {
            ExperimentConfig cfg = g.config.empty() ? ExperimentConfig::defaults(rex_id.empty() ? "circle_cover" : rex_id)
                                                    : ExperimentConfig::from_json(read_json(g.config));
            if (!rex_id.empty()) cfg.id = rex_id;
            if (app.count("--seed")) cfg.seed = g.seed;
            if (!g.out.empty()) cfg.out = g.out;
            const bool ok = run_experiment(cfg);
            std::printf("run-experiment %s: %s\n", cfg.id.c_str(), ok ? "PASS" : "FAIL");
            return ok ? exit_ok : exit_check;
        }
    } catch (const CLI::ValidationError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return exit_usage;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.kind() == ErrorKind::IoError ? exit_io : exit_error;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_error;
    }
    return exit_usage;
}
