#include "oracles.hpp"

#include "covlift/epnet.hpp"

#include <doctest.h>

#include <filesystem>

using namespace covlift;

namespace {

// coupling with every parameter block randomized, so no layer is close to the identity
Layer random_coupling(int dim, std::vector<int> cond, std::mt19937_64& rng, double scale = 0.3) {
    Layer l = make_coupling(dim, std::move(cond), rng, 8);
    std::normal_distribution<double> N(0.0, scale);
    for (Mat* p : layer_params(l))
        for (Eigen::Index i = 0; i < p->size(); ++i) p->data()[i] = N(rng);
    return l;
}

Layer random_linear(int dim, std::mt19937_64& rng) { return make_inv_linear(dim, rng, 0.3); }

// 2 -> pad to 5 -> linear, couplings; keep 2 -> linear, coupling
EPNetwork random_network(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Layer> E{make_zero_pad(2, 3), random_linear(5, rng), random_coupling(5, {0, 1}, rng),
                         random_coupling(5, {2, 3, 4}, rng)};
    std::vector<Layer> T{random_linear(2, rng), random_coupling(2, {1}, rng)};
    return EPNetwork(2, std::move(E), 2, std::move(T));
}

Vec random_vec(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = U(rng);
    return v;
}

} // namespace

TEST_CASE("fresh layers are the identity") {
    std::mt19937_64 rng(1);
    const Vec x = random_vec(4, rng);
    SUBCASE("coupling") {
        const Layer c = make_coupling(4, {0, 2}, rng);
        CHECK((forward_layers({c}, x, nullptr) - x).norm() == 0.0);
    }
    SUBCASE("linear without noise") {
        const Layer l = make_inv_linear(4, rng, 0.0);
        CHECK((forward_layers({l}, x, nullptr) - x).norm() == 0.0);
    }
    SUBCASE("zero pad appends zeros") {
        const Vec z = forward_layers({make_zero_pad(4, 2)}, x, nullptr);
        REQUIRE(z.size() == 6);
        CHECK(z.head(4) == x);
        CHECK(z.tail(2).isZero());
    }
}

TEST_CASE("invertible linear layer") {
    std::mt19937_64 rng(2);
    const Layer L = random_linear(5, rng);
    const auto& lin = std::get<InvLinear>(L);
    const Mat Lf = lin.l_factor(), Uf = lin.u_factor();
    for (int i = 0; i < 5; ++i) {
        CHECK(Lf(i, i) == 1.0);
        for (int j = i + 1; j < 5; ++j) CHECK(Lf(i, j) == 0.0);
        for (int j = 0; j < i; ++j) CHECK(Uf(i, j) == 0.0);
        CHECK(Uf(i, i) != 0.0);
    }
    const EPNetwork net(5, {}, 5, {L});
    for (int t = 0; t < 20; ++t) {
        const Vec x = random_vec(5, rng);
        CHECK((net.forward_T(x) - (lin.matrix() * x + lin.bias)).norm() < 1e-12);
        CHECK((net.inverse_T(net.forward_T(x)) - x).norm() < 1e-9);
    }
}

TEST_CASE("coupling round trip and untouched conditioning slots") {
    std::mt19937_64 rng(3);
    const Layer C = random_coupling(4, {1, 3}, rng);
    const EPNetwork net(4, {}, 4, {C});
    for (int t = 0; t < 50; ++t) {
        const Vec x = random_vec(4, rng);
        const Vec y = net.forward_T(x);
        CHECK(y(1) == x(1));
        CHECK(y(3) == x(3));
        CHECK((net.inverse_T(y) - x).norm() < 1e-8);
    }
}

TEST_CASE("network shape checks") {
    std::mt19937_64 rng(4);
    CHECK(oracle::error_kind([&] { EPNetwork(2, {make_zero_pad(3, 1)}, 2, {}); }) == ErrorKind::DimMismatch);
    CHECK(oracle::error_kind([&] { EPNetwork(2, {make_zero_pad(2, 2)}, 2, {make_inv_linear(3, rng)}); }) == ErrorKind::DimMismatch);
    const auto net = random_network(5);
    CHECK(net.dims() == std::vector<int>{2, 5, 5, 5, 5, 2, 2, 2});
    CHECK(net.e_dim() == 5);
    CHECK(net.out_dim() == 2);
    CHECK(oracle::error_kind([&] { net.forward(Vec::Zero(3)); }) == ErrorKind::DimMismatch);
}

TEST_CASE("forward is E then the first coordinates then T") {
    const auto net = random_network(6);
    std::mt19937_64 rng(6);
    const Vec x = random_vec(2, rng);
    CHECK((net.forward(x) - net.forward_T(net.forward_E(x).head(2))).norm() < 1e-14);
    Mat X(2, 7);
    for (int i = 0; i < 7; ++i) X.col(i) = random_vec(2, rng);
    const Mat Y = net.forward_batch(X);
    for (int i = 0; i < 7; ++i) CHECK((Y.col(i) - net.forward(X.col(i))).norm() < 1e-14);
}

TEST_CASE("left inverse of E") {
    const auto net = random_network(7);
    std::mt19937_64 rng(7);
    for (int t = 0; t < 20; ++t) {
        const Vec x = random_vec(2, rng);
        CHECK((net.left_inverse_E(net.forward_E(x)) - x).norm() < 1e-8);
    }
    // a generic point of R^5 is off the 2-dimensional range
    Vec z = net.forward_E(random_vec(2, rng));
    z(4) += 0.5;
    CHECK(oracle::error_kind([&] { net.left_inverse_E(z); }) == ErrorKind::NotInRange);
}

TEST_CASE("property: Jacobians agree with finite differences") {
    std::mt19937_64 rng(8);
    const auto net = random_network(8);
    double worst_E = 0, worst_full = 0, worst_T = 0;
    for (int t = 0; t < 50; ++t) {
        const Vec x = random_vec(2, rng);
        worst_E = std::max(worst_E, oracle::rel_err(net.jacobian(x, Stage::E), oracle::fd_jacobian([&](const Vec& v) { return net.forward_E(v); }, x)));
        worst_full = std::max(worst_full, oracle::rel_err(net.jacobian(x, Stage::Full), oracle::fd_jacobian([&](const Vec& v) { return net.forward(v); }, x)));
        const Vec u = random_vec(2, rng);
        worst_T = std::max(worst_T, oracle::rel_err(net.jacobian_T(u), oracle::fd_jacobian([&](const Vec& v) { return net.forward_T(v); }, u)));
    }
    CHECK(worst_E < 1e-4);
    CHECK(worst_full < 1e-4);
    CHECK(worst_T < 1e-4);
}

TEST_CASE("property: parameter gradients agree with finite differences") {
    std::mt19937_64 rng(9);
    std::vector<Layer> layers{random_linear(3, rng), random_coupling(3, {0}, rng), random_coupling(3, {1, 2}, rng)};
    Mat X(3, 6), G(3, 6);
    for (int i = 0; i < 6; ++i) {
        X.col(i) = random_vec(3, rng);
        G.col(i) = random_vec(3, rng);
    }
    // scalar <G, f(X)> has gradient backward(G)
    auto objective = [&](const std::vector<Layer>& ls) { return (G.array() * forward_layers(ls, X, nullptr).array()).sum(); };
    std::vector<LayerCache> caches;
    forward_layers(layers, X, &caches);
    std::vector<std::vector<Mat>> grads;
    const Mat gx = backward_layers(layers, caches, G, &grads);
    double worst = 0.0;
    const double h = 1e-6;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        auto params = layer_params(layers[l]);
        for (std::size_t p = 0; p < params.size(); ++p) {
            for (Eigen::Index i = 0; i < params[p]->size(); i += 3) {
                double& w = params[p]->data()[i];
                const double w0 = w;
                w = w0 + h;
                const double up = objective(layers);
                w = w0 - h;
                const double dn = objective(layers);
                w = w0;
                const double fd = (up - dn) / (2 * h);
                worst = std::max(worst, std::abs(fd - grads[l][p].data()[i]) / std::max(1.0, std::abs(fd)));
            }
        }
    }
    CHECK(worst < 1e-6);
    // the input cotangent as well
    for (Eigen::Index i = 0; i < X.size(); ++i) {
        const double x0 = X.data()[i];
        X.data()[i] = x0 + h;
        const double up = objective(layers);
        X.data()[i] = x0 - h;
        const double dn = objective(layers);
        X.data()[i] = x0;
        CHECK(gx.data()[i] == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-6).scale(1.0));
    }
}

TEST_CASE("property: E is injective on sampled pairs") {
    const auto net = random_network(10);
    std::mt19937_64 rng(10);
    for (int t = 0; t < 200; ++t) {
        const Vec a = random_vec(2, rng), b = random_vec(2, rng);
        if ((a - b).norm() > 1e-3) CHECK((net.forward_E(a) - net.forward_E(b)).norm() > 0.0);
    }
}

TEST_CASE("training") {
    std::mt19937_64 rng(11);
    Mat X(2, 40);
    for (int i = 0; i < 40; ++i) X.col(i) = random_vec(2, rng);

    SUBCASE("targets already matched keep the loss at zero") {
        std::vector<Layer> E{make_zero_pad(2, 1), make_coupling(3, {0, 1}, rng, 8)};
        EPNetwork net(2, std::move(E), 2, {});
        const Mat H = net.forward_E_batch(X);
        TrainConfig cfg;
        cfg.epochs = 50;
        const auto res = train(net, X, H, Mat(2, 0), Mat(2, 0), cfg);
        for (double l : res.loss) CHECK(l == 0.0);
    }

    auto fit = [&](std::uint64_t seed, TrainConfig cfg) {
        std::mt19937_64 r(seed);
        std::vector<Layer> E{make_zero_pad(2, 1), make_inv_linear(3, r), make_coupling(3, {0, 1}, r, 16),
                             make_coupling(3, {2}, r, 16)};
        EPNetwork net(2, std::move(E), 2, {make_inv_linear(2, r)});
        Mat H(3, X.cols());
        for (int i = 0; i < X.cols(); ++i) H.col(i) << X(0, i), X(1, i), std::sin(2 * X(0, i)) * X(1, i);
        const Mat H2 = 2.0 * X;
        const auto res = train(net, X, H, X, H2, cfg);
        return std::pair{net, res};
    };

    SUBCASE("loss falls, best-so-far never rises, checkpoints are spread out") {
        TrainConfig cfg;
        cfg.epochs = 300;
        std::vector<int> seen;
        std::mt19937_64 r(12);
        std::vector<Layer> E{make_zero_pad(2, 1), make_coupling(3, {0, 1}, r, 16)};
        EPNetwork net(2, std::move(E), 2, {});
        Mat H(3, X.cols());
        for (int i = 0; i < X.cols(); ++i) H.col(i) << X(0, i), X(1, i), X(0, i) * X(1, i);
        const auto res = train(net, X, H, Mat(2, 0), Mat(2, 0), cfg, [&](int s, const EPNetwork&) { seen.push_back(s); });
        CHECK(res.loss.size() == 301);
        CHECK(res.loss.back() < 0.1 * res.loss.front());
        for (std::size_t i = 1; i < res.best.size(); ++i) CHECK(res.best[i] <= res.best[i - 1]);
        CHECK(seen.size() == 10);
        CHECK(seen.back() == 300);
        CHECK(seen == res.checkpoint_steps);
    }

    SUBCASE("same seed gives bit-identical weights") {
        TrainConfig cfg;
        cfg.epochs = 60;
        cfg.batch_size = 16;
        cfg.seed = 5;
        const auto [a, ra] = fit(1, cfg);
        const auto [b, rb] = fit(1, cfg);
        CHECK(network_to_json(a) == network_to_json(b));
        CHECK(ra.loss == rb.loss);
    }

    SUBCASE("plain gradient descent also trains") {
        TrainConfig cfg;
        cfg.epochs = 200;
        cfg.optimizer = Optimizer::GradientDescent;
        cfg.step_size = 0.05;
        const auto [net, res] = fit(2, cfg);
        CHECK(res.loss.back() < res.loss.front());
    }

    SUBCASE("huge step size diverges") {
        TrainConfig cfg;
        cfg.epochs = 500;
        cfg.step_size = 1e3;
        CHECK(oracle::error_kind([&] { fit(3, cfg); }) == ErrorKind::Diverged);
    }

    SUBCASE("configuration errors") {
        TrainConfig cfg;
        cfg.epochs = 0;
        CHECK(oracle::error_kind([&] { fit(4, cfg); }) == ErrorKind::InvalidArgument);
        cfg.epochs = 5;
        cfg.weights = {1.0, 1.0};
        CHECK(oracle::error_kind([&] { fit(4, cfg); }) == ErrorKind::DimMismatch);
    }
}

TEST_CASE("multivalued inversion picks one candidate per stack label") {
    // E is the identity, so candidates are already laid out as (base, stack, embed)
    std::mt19937_64 rng(13);
    std::vector<Layer> E{make_coupling(5, {0, 1}, rng, 4)};
    EPNetwork net(5, std::move(E), 2, {make_inv_linear(2, rng, 0.0)});
    const Vec y = oracle::v2(0.3, -0.4);
    std::vector<Vec> cands;
    for (int j = 1; j <= 3; ++j)
        for (int t = 0; t < 5; ++t) {
            Vec c(5);
            c << y(0) + 0.1 * t, y(1), j, 0, 0;
            cands.push_back(c);
        }
    const auto res = multivalued_invert(net, y, 3, 2, cands, Chart{});
    REQUIRE(res.points.size() == 3);
    for (int j = 0; j < 3; ++j) {
        CHECK(res.points[static_cast<std::size_t>(j)](2) == j + 1);
        CHECK(res.objective[static_cast<std::size_t>(j)] < 1e-24);
    }
    CHECK(res.duplicates.empty());
    CHECK(oracle::error_kind([&] { multivalued_invert(net, y, 3, 2, {}, Chart{}); }) == ErrorKind::EmptyCandidates);
    CHECK(oracle::error_kind([&] { multivalued_invert(net, y, 3, 1, cands, Chart{}); }) == ErrorKind::DimMismatch);
}

TEST_CASE("network JSON round trip") {
    const auto net = random_network(14);
    const auto back = network_from_json(network_to_json(net));
    CHECK(back.dims() == net.dims());
    std::mt19937_64 rng(14);
    for (int t = 0; t < 10; ++t) {
        const Vec x = random_vec(2, rng);
        CHECK((back.forward(x) - net.forward(x)).norm() == 0.0);
    }
    const auto dir = std::filesystem::temp_directory_path() / "covlift_test_net";
    std::filesystem::create_directories(dir);
    write_network(net, dir / "net.json");
    CHECK(network_to_json(read_network(dir / "net.json")) == network_to_json(net));
    CHECK(oracle::error_kind([] { network_from_json("{"); }) == ErrorKind::ParseError);
    CHECK(oracle::error_kind([&] { read_network(dir / "nope.json"); }) == ErrorKind::IoError);
}
