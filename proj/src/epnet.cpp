#include "covlift/epnet.hpp"

#include "covlift/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace covlift {

namespace {

Mat gather_rows(const Mat& X, const std::vector<int>& rows) {
    Mat out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
    return out;
}

void scatter_rows(Mat& X, const std::vector<int>& rows, const Mat& src) {
    for (std::size_t i = 0; i < rows.size(); ++i) X.row(rows[i]) = src.row(static_cast<Eigen::Index>(i));
}

Mat strict_lower_part(const Mat& M) { return M.triangularView<Eigen::StrictlyLower>(); }
Mat upper_part(const Mat& M) { return M.triangularView<Eigen::Upper>(); }

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

// Conditioner MLP on a batch of conditioning columns; fills hidden activations.
Mat conditioner(const Coupling& c, const Mat& C, Mat& H1, Mat& H2) {
    H1 = ((c.W1 * C).colwise() + c.b1.col(0)).array().tanh().matrix();
    H2 = ((c.W2 * H1).colwise() + c.b2.col(0)).array().tanh().matrix();
    return (c.W3 * H2).colwise() + c.b3.col(0);
}

Mat forward_layer(const Layer& layer, const Mat& X, LayerCache* cache) {
    if (cache) cache->X = X;
    return std::visit(
        overloaded{
            [&](const ZeroPad& p) -> Mat {
                Mat Y = Mat::Zero(p.out_dim(), X.cols());
                Y.topRows(p.in_dim) = X;
                return Y;
            },
            [&](const InvLinear& l) -> Mat { return (l.matrix() * X).colwise() + l.bias.col(0); },
            [&](const Coupling& c) -> Mat {
                Mat H1, H2;
                const Mat O = conditioner(c, gather_rows(X, c.cond), H1, H2);
                const auto b = static_cast<Eigen::Index>(c.free.size());
                const Mat expS = O.topRows(b).array().exp().matrix();
                Mat Y = X;
                scatter_rows(Y, c.free, (gather_rows(X, c.free).array() * expS.array()).matrix() + O.bottomRows(b));
                if (cache) {
                    cache->H1 = std::move(H1);
                    cache->H2 = std::move(H2);
                    cache->expS = expS;
                }
                return Y;
            },
        },
        layer);
}

Mat backward_layer(const Layer& layer, const LayerCache& cache, const Mat& G, std::vector<Mat>* grads) {
    return std::visit(
        overloaded{
            [&](const ZeroPad& p) -> Mat { return G.topRows(p.in_dim); },
            [&](const InvLinear& l) -> Mat {
                const Mat Lf = l.l_factor(), Uf = l.u_factor();
                if (grads) {
                    const Mat dW = G * cache.X.transpose();
                    grads->push_back(strict_lower_part(dW * Uf.transpose()));
                    grads->push_back(upper_part(Lf.transpose() * dW));
                    grads->push_back(G.rowwise().sum());
                }
                return Uf.transpose() * (Lf.transpose() * G);
            },
            [&](const Coupling& c) -> Mat {
                const Mat Gf = gather_rows(G, c.free);
                const Mat Xf = gather_rows(cache.X, c.free);
                const auto b = static_cast<Eigen::Index>(c.free.size());
                Mat dO(2 * b, G.cols());
                dO.topRows(b) = (Gf.array() * Xf.array() * cache.expS.array()).matrix();
                dO.bottomRows(b) = Gf;
                const Mat dA2 = ((c.W3.transpose() * dO).array() * (1.0 - cache.H2.array().square())).matrix();
                const Mat dA1 = ((c.W2.transpose() * dA2).array() * (1.0 - cache.H1.array().square())).matrix();
                const Mat C = gather_rows(cache.X, c.cond);
                if (grads) {
                    grads->push_back(dA1 * C.transpose());
                    grads->push_back(dA1.rowwise().sum());
                    grads->push_back(dA2 * cache.H1.transpose());
                    grads->push_back(dA2.rowwise().sum());
                    grads->push_back(dO * cache.H2.transpose());
                    grads->push_back(dO.rowwise().sum());
                }
                Mat dX = G;
                scatter_rows(dX, c.free, (Gf.array() * cache.expS.array()).matrix());
                scatter_rows(dX, c.cond, gather_rows(G, c.cond) + c.W1.transpose() * dA1);
                return dX;
            },
        },
        layer);
}

Vec inverse_layer(const Layer& layer, const Vec& y) {
    return std::visit(
        overloaded{
            [&](const ZeroPad& p) -> Vec { return y.head(p.in_dim); },
            [&](const InvLinear& l) -> Vec {
                const Vec z = l.l_factor().triangularView<Eigen::UnitLower>().solve(y - l.bias.col(0));
                return l.u_factor().triangularView<Eigen::Upper>().solve(z);
            },
            [&](const Coupling& c) -> Vec {
                Mat H1, H2;
                const Mat O = conditioner(c, gather_rows(y, c.cond), H1, H2);
                const auto b = static_cast<Eigen::Index>(c.free.size());
                Mat x = y;
                const Mat yf = gather_rows(y, c.free);
                scatter_rows(x, c.free, ((yf - O.bottomRows(b)).array() * (-O.topRows(b)).array().exp()).matrix());
                return x.col(0);
            },
        },
        layer);
}

std::vector<Mat> zero_like(const Layer& layer) {
    std::vector<Mat> out;
    for (const Mat* p : layer_params(layer)) out.push_back(Mat::Zero(p->rows(), p->cols()));
    return out;
}

} // namespace

Mat InvLinear::l_factor() const { return Mat::Identity(dim(), dim()) + strict_lower_part(lower); }
Mat InvLinear::u_factor() const { return upper_part(upper); }

int layer_in_dim(const Layer& layer) {
    return std::visit(overloaded{[](const ZeroPad& p) { return p.in_dim; }, [](const InvLinear& l) { return l.dim(); },
                                 [](const Coupling& c) { return c.dim; }},
                      layer);
}

int layer_out_dim(const Layer& layer) {
    return std::visit(overloaded{[](const ZeroPad& p) { return p.out_dim(); }, [](const InvLinear& l) { return l.dim(); },
                                 [](const Coupling& c) { return c.dim; }},
                      layer);
}

std::string layer_kind(const Layer& layer) {
    return std::visit(overloaded{[](const ZeroPad&) { return std::string("zero_pad"); },
                                 [](const InvLinear&) { return std::string("inv_linear"); },
                                 [](const Coupling&) { return std::string("coupling"); }},
                      layer);
}

std::vector<Mat*> layer_params(Layer& layer) {
    return std::visit(overloaded{[](ZeroPad&) { return std::vector<Mat*>{}; },
                                 [](InvLinear& l) { return std::vector<Mat*>{&l.lower, &l.upper, &l.bias}; },
                                 [](Coupling& c) { return std::vector<Mat*>{&c.W1, &c.b1, &c.W2, &c.b2, &c.W3, &c.b3}; }},
                      layer);
}

std::vector<const Mat*> layer_params(const Layer& layer) {
    auto ptrs = layer_params(const_cast<Layer&>(layer));
    return {ptrs.begin(), ptrs.end()};
}

Layer make_zero_pad(int in_dim, int added) {
    if (in_dim < 1 || added < 0) throw Error(ErrorKind::InvalidArgument, "bad padding sizes");
    return ZeroPad{in_dim, added};
}

Layer make_inv_linear(int dim, std::mt19937_64& rng, double noise) {
    std::normal_distribution<double> N(0.0, noise);
    InvLinear l;
    l.lower = Mat::Zero(dim, dim);
    l.upper = Mat::Identity(dim, dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
            if (i > j) l.lower(i, j) = N(rng);
            else l.upper(i, j) += N(rng);
        }
    }
    l.bias = Mat::Zero(dim, 1);
    return l;
}

Layer make_coupling(int dim, std::vector<int> cond, std::mt19937_64& rng, int hidden) {
    std::sort(cond.begin(), cond.end());
    cond.erase(std::unique(cond.begin(), cond.end()), cond.end());
    if (cond.empty() || static_cast<int>(cond.size()) >= dim || cond.front() < 0 || cond.back() >= dim)
        throw Error(ErrorKind::InvalidArgument, "coupling mask must split the coordinates");
    Coupling c;
    c.dim = dim;
    c.cond = cond;
    for (int i = 0; i < dim; ++i)
        if (!std::binary_search(cond.begin(), cond.end(), i)) c.free.push_back(i);
    const int a = static_cast<int>(c.cond.size()), b = static_cast<int>(c.free.size());
    auto uniform = [&](int rows, int cols, int fan_in) {
        std::uniform_real_distribution<double> U(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
        Mat M(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) M(i, j) = U(rng);
        return M;
    };
    c.W1 = uniform(hidden, a, a);
    c.b1 = uniform(hidden, 1, a);
    c.W2 = uniform(hidden, hidden, hidden);
    c.b2 = uniform(hidden, 1, hidden);
    c.W3 = Mat::Zero(2 * b, hidden);
    c.b3 = Mat::Zero(2 * b, 1);
    return c;
}

EPNetwork::EPNetwork(int in_dim, std::vector<Layer> E, int proj_keep, std::vector<Layer> T)
    : in_dim_(in_dim), E_(std::move(E)), proj_keep_(proj_keep), T_(std::move(T)) {
    validate();
}

void EPNetwork::validate() const {
    int cur = in_dim_;
    if (cur < 1) throw Error(ErrorKind::DimMismatch, "input dimension must be positive");
    for (const auto& l : E_) {
        if (layer_in_dim(l) != cur) throw Error(ErrorKind::DimMismatch, "E layer input dimension breaks the chain");
        cur = layer_out_dim(l);
    }
    if (proj_keep_ < 1 || proj_keep_ > cur) throw Error(ErrorKind::DimMismatch, "projection keeps more coordinates than E outputs");
    for (const auto& l : T_) {
        if (std::holds_alternative<ZeroPad>(l)) throw Error(ErrorKind::InvalidArgument, "T layers must be bijective");
        if (layer_in_dim(l) != proj_keep_) throw Error(ErrorKind::DimMismatch, "T layer dimension differs from proj_keep");
    }
}

int EPNetwork::e_dim() const { return E_.empty() ? in_dim_ : layer_out_dim(E_.back()); }

std::vector<int> EPNetwork::dims() const {
    std::vector<int> out{in_dim_};
    for (const auto& l : E_) out.push_back(layer_out_dim(l));
    out.push_back(proj_keep_);
    for (const auto& l : T_) out.push_back(layer_out_dim(l));
    return out;
}

Mat forward_layers(const std::vector<Layer>& layers, const Mat& X, std::vector<LayerCache>* caches) {
    if (caches) caches->assign(layers.size(), {});
    Mat cur = X;
    for (std::size_t i = 0; i < layers.size(); ++i) cur = forward_layer(layers[i], cur, caches ? &(*caches)[i] : nullptr);
    return cur;
}

Mat backward_layers(const std::vector<Layer>& layers, const std::vector<LayerCache>& caches, const Mat& G,
                    std::vector<std::vector<Mat>>* grads) {
    if (grads) grads->assign(layers.size(), {});
    Mat cur = G;
    for (std::size_t i = layers.size(); i-- > 0;) cur = backward_layer(layers[i], caches[i], cur, grads ? &(*grads)[i] : nullptr);
    return cur;
}

Mat EPNetwork::forward_E_batch(const Mat& X) const {
    if (X.rows() != in_dim_) throw Error(ErrorKind::DimMismatch, "input has wrong dimension");
    return forward_layers(E_, X, nullptr);
}

Mat EPNetwork::forward_T_batch(const Mat& U) const {
    if (U.rows() != proj_keep_) throw Error(ErrorKind::DimMismatch, "T input has wrong dimension");
    return forward_layers(T_, U, nullptr);
}

Mat EPNetwork::forward_batch(const Mat& X) const { return forward_T_batch(forward_E_batch(X).topRows(proj_keep_)); }

Vec EPNetwork::forward_E(const Vec& x) const { return forward_E_batch(x).col(0); }
Vec EPNetwork::forward_T(const Vec& u) const { return forward_T_batch(u).col(0); }
Vec EPNetwork::forward(const Vec& x) const { return forward_batch(x).col(0); }

Vec EPNetwork::inverse_T(const Vec& y) const {
    if (y.size() != proj_keep_) throw Error(ErrorKind::DimMismatch, "T inverse input has wrong dimension");
    Vec cur = y;
    for (std::size_t i = T_.size(); i-- > 0;) cur = inverse_layer(T_[i], cur);
    return cur;
}

Vec EPNetwork::left_inverse_E(const Vec& z) const {
    if (z.size() != e_dim()) throw Error(ErrorKind::DimMismatch, "E inverse input has wrong dimension");
    Vec cur = z;
    for (std::size_t i = E_.size(); i-- > 0;) cur = inverse_layer(E_[i], cur);
    const double residual = (forward_E(cur) - z).norm();
    if (!(residual <= 1e-6)) throw Error(ErrorKind::NotInRange, "point is not in the range of E");
    return cur;
}

Mat EPNetwork::jacobian_T(const Vec& u) const {
    if (u.size() != proj_keep_) throw Error(ErrorKind::DimMismatch, "T input has wrong dimension");
    std::vector<LayerCache> cache;
    forward_layers(T_, u.replicate(1, proj_keep_), &cache);
    return backward_layers(T_, cache, Mat::Identity(proj_keep_, proj_keep_), nullptr).transpose();
}

Mat EPNetwork::jacobian(const Vec& x, Stage stage) const {
    if (x.size() != in_dim_) throw Error(ErrorKind::DimMismatch, "input has wrong dimension");
    const int m = stage == Stage::E ? e_dim() : proj_keep_;
    std::vector<LayerCache> ce, ct;
    const Mat Z = forward_layers(E_, x.replicate(1, m), &ce);
    Mat G = Mat::Identity(m, m);
    if (stage == Stage::Full) {
        forward_layers(T_, Z.topRows(proj_keep_), &ct);
        const Mat Gp = backward_layers(T_, ct, G, nullptr);
        G = Mat::Zero(e_dim(), m);
        G.topRows(proj_keep_) = Gp;
    }
    return backward_layers(E_, ce, G, nullptr).transpose();
}

TrainResult train(EPNetwork& net, const Mat& X, const Mat& H, const Mat& U, const Mat& H2, const TrainConfig& cfg,
                  const CheckpointFn& on_checkpoint) {
    if (cfg.epochs < 1 || cfg.batch_size < 0 || !(cfg.step_size > 0.0) || cfg.checkpoints < 0)
        throw Error(ErrorKind::InvalidArgument, "bad training configuration");
    if (X.rows() != net.in_dim() || H.rows() != net.e_dim() || X.cols() != H.cols())
        throw Error(ErrorKind::DimMismatch, "E training pairs do not match the network");
    if (U.cols() != H2.cols() || (U.cols() > 0 && (U.rows() != net.proj_keep() || H2.rows() != net.proj_keep())))
        throw Error(ErrorKind::DimMismatch, "T training pairs do not match the network");
    if (X.cols() == 0) throw Error(ErrorKind::InvalidArgument, "no training samples");
    Vec w = Vec::Ones(net.e_dim());
    if (!cfg.weights.empty()) {
        if (static_cast<int>(cfg.weights.size()) != net.e_dim()) throw Error(ErrorKind::DimMismatch, "one loss weight per E output");
        w = Eigen::Map<const Vec>(cfg.weights.data(), static_cast<Eigen::Index>(cfg.weights.size()));
    }

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::vector<Mat>> vel_E, vel_T;
    for (const auto& l : net.E_layers()) vel_E.push_back(zero_like(l));
    for (const auto& l : net.T_layers()) vel_T.push_back(zero_like(l));

    auto pick = [&](const Mat& A, const Mat& B, std::vector<int>& order, Mat& a, Mat& b) {
        const auto n = static_cast<int>(A.cols());
        const int bs = cfg.batch_size == 0 ? n : std::min(cfg.batch_size, n);
        if (bs == n) {
            a = A;
            b = B;
            return;
        }
        if (order.size() != static_cast<std::size_t>(n)) {
            order.resize(static_cast<std::size_t>(n));
            std::iota(order.begin(), order.end(), 0);
        }
        std::shuffle(order.begin(), order.end(), rng);
        a.resize(A.rows(), bs);
        b.resize(B.rows(), bs);
        for (int i = 0; i < bs; ++i) {
            a.col(i) = A.col(order[static_cast<std::size_t>(i)]);
            b.col(i) = B.col(order[static_cast<std::size_t>(i)]);
        }
    };

    // Loss and gradient of one stack on one batch; returns the loss.
    auto step_stack = [&](std::vector<Layer>& layers, std::vector<std::vector<Mat>>& vel, const Mat& A, const Mat& B,
                          const Vec& weight, bool update) {
        std::vector<LayerCache> caches;
        const Mat out = forward_layers(layers, A, &caches);
        const Mat R = out - B;
        const double n = static_cast<double>(A.cols());
        const double loss = (R.array().square().colwise() * weight.array()).sum() / n;
        if (!update || !std::isfinite(loss)) return loss;
        const Mat G = (2.0 / n) * (R.array().colwise() * weight.array()).matrix();
        std::vector<std::vector<Mat>> grads;
        backward_layers(layers, caches, G, &grads);
        for (std::size_t l = 0; l < layers.size(); ++l) {
            auto params = layer_params(layers[l]);
            for (std::size_t p = 0; p < params.size(); ++p) {
                if (cfg.optimizer == Optimizer::Momentum) {
                    vel[l][p] = cfg.momentum * vel[l][p] + grads[l][p];
                    *params[p] -= cfg.step_size * vel[l][p];
                } else {
                    *params[p] -= cfg.step_size * grads[l][p];
                }
            }
        }
        return loss;
    };

    TrainResult res;
    const int interval = cfg.checkpoints > 0 ? std::max(1, cfg.epochs / cfg.checkpoints) : 0;
    std::vector<int> order_E, order_T;
    const Vec ones_T = Vec::Ones(net.proj_keep());
    auto record = [&](double loss) {
        if (!std::isfinite(loss)) throw Error(ErrorKind::Diverged, "training loss is not finite");
        res.loss.push_back(loss);
        res.best.push_back(res.best.empty() ? loss : std::min(res.best.back(), loss));
    };
    for (int step = 0; step < cfg.epochs; ++step) {
        Mat a, b;
        pick(X, H, order_E, a, b);
        double loss = step_stack(net.E_layers(), vel_E, a, b, w, true);
        if (U.cols() > 0 && !net.T_layers().empty()) {
            pick(U, H2, order_T, a, b);
            loss += step_stack(net.T_layers(), vel_T, a, b, ones_T, true);
        }
        record(loss);
        if (interval > 0 && ((step + 1) % interval == 0 || step + 1 == cfg.epochs) &&
            (res.checkpoint_steps.empty() || res.checkpoint_steps.back() != step + 1) &&
            static_cast<int>(res.checkpoint_steps.size()) < cfg.checkpoints) {
            res.checkpoint_steps.push_back(step + 1);
            if (on_checkpoint) on_checkpoint(step + 1, net);
        }
    }
    double final_loss = step_stack(net.E_layers(), vel_E, X, H, w, false);
    if (U.cols() > 0 && !net.T_layers().empty()) final_loss += step_stack(net.T_layers(), vel_T, U, H2, ones_T, false);
    record(final_loss);
    return res;
}

InversionResult multivalued_invert(const EPNetwork& net, const Vec& y, int d, int e, const std::vector<Vec>& candidates,
                                   const Chart& chart, const Mat* cand_E) {
    if (candidates.empty()) throw Error(ErrorKind::EmptyCandidates, "no inversion candidates");
    if (d < 1) throw Error(ErrorKind::BadDegree, "degree must be at least 1");
    const int m2 = net.proj_keep();
    if (m2 + 1 + e != net.e_dim()) throw Error(ErrorKind::DimMismatch, "E output is not laid out as (base, stack, embed)");
    Mat local;
    if (!cand_E) {
        Mat C(net.in_dim(), static_cast<Eigen::Index>(candidates.size()));
        for (std::size_t i = 0; i < candidates.size(); ++i) C.col(static_cast<Eigen::Index>(i)) = candidates[i];
        local = net.forward_E_batch(C);
        cand_E = &local;
    }
    const Vec u = net.inverse_T(y);

    InversionResult out;
    for (int j = 1; j <= d; ++j) {
        Vec tgt = Vec::Zero(net.e_dim());
        tgt.head(m2) = u;
        tgt(m2) = j;
        Eigen::Index best = 0;
        (cand_E->colwise() - tgt).colwise().squaredNorm().minCoeff(&best);
        Vec x = candidates[static_cast<std::size_t>(best)];
        double obj = (net.forward_E(x) - tgt).squaredNorm();
        if (chart.retract && chart.tangent) {
            double mu = 1e-6;
            for (int it = 0; it < 20; ++it) {
                const Mat B = chart.tangent(x);
                const Mat J = net.jacobian(x, Stage::E) * B;
                const Vec r = net.forward_E(x) - tgt;
                const Mat JtJ = J.transpose() * J;
                const Vec Jtr = J.transpose() * r;
                bool accepted = false;
                for (int tries = 0; tries < 8 && !accepted; ++tries) {
                    const Mat A = JtJ + mu * (1.0 + JtJ.diagonal().maxCoeff()) * Mat::Identity(JtJ.rows(), JtJ.cols());
                    const Vec step = -A.ldlt().solve(Jtr);
                    const Vec xn = chart.retract(x + B * step);
                    const double on = (net.forward_E(xn) - tgt).squaredNorm();
                    if (std::isfinite(on) && on <= obj) {
                        x = xn;
                        obj = on;
                        mu = std::max(mu / 10.0, 1e-12);
                        accepted = true;
                    } else {
                        mu *= 10.0;
                    }
                }
                if (!accepted) break;
            }
        }
        out.points.push_back(x);
        out.objective.push_back(obj);
    }
    for (std::size_t a = 0; a < out.points.size(); ++a)
        for (std::size_t b = a + 1; b < out.points.size(); ++b)
            if ((out.points[a] - out.points[b]).norm() < 1e-4) out.duplicates.emplace_back(static_cast<int>(a), static_cast<int>(b));
    return out;
}

} // namespace covlift
