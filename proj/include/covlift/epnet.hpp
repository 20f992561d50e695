#pragma once

#include "covlift/simplicial.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace covlift {

/// x -> (x, 0^added).
struct ZeroPad {
    int in_dim = 0;
    int added = 0;
    int out_dim() const { return in_dim + added; }
};

/// x -> L U x + b with L unit lower triangular (strict part stored in `lower`) and U upper
/// triangular with nonzero diagonal.
struct InvLinear {
    Mat lower;
    Mat upper;
    Mat bias; // n x 1

    int dim() const { return static_cast<int>(bias.rows()); }
    Mat l_factor() const;
    Mat u_factor() const;
    Mat matrix() const { return l_factor() * u_factor(); }
};

/// Affine coupling: free coordinates become x * exp(s(c)) + t(c), with (s, t) from a tanh MLP
/// of the conditioning coordinates c.
struct Coupling {
    int dim = 0;
    std::vector<int> cond;
    std::vector<int> free;
    Mat W1, b1, W2, b2, W3, b3;

    int hidden() const { return static_cast<int>(W1.rows()); }
};

using Layer = std::variant<ZeroPad, InvLinear, Coupling>;

int layer_in_dim(const Layer& layer);
int layer_out_dim(const Layer& layer);
std::string layer_kind(const Layer& layer);
/// Trainable blocks of a layer, in a fixed order.
std::vector<Mat*> layer_params(Layer& layer);
std::vector<const Mat*> layer_params(const Layer& layer);

Layer make_zero_pad(int in_dim, int added);
/// Identity plus N(0, noise^2) perturbations of both factors.
Layer make_inv_linear(int dim, std::mt19937_64& rng, double noise = 1e-2);
/// Hidden weights uniform in +-1/sqrt(fan_in); output layer zero, so the layer starts as the identity.
Layer make_coupling(int dim, std::vector<int> cond, std::mt19937_64& rng, int hidden = 64);

enum class Stage { E, Full };

class EPNetwork {
public:
    EPNetwork() = default;
    EPNetwork(int in_dim, std::vector<Layer> E, int proj_keep, std::vector<Layer> T);

    int in_dim() const { return in_dim_; }
    int e_dim() const;
    int proj_keep() const { return proj_keep_; }
    int out_dim() const { return proj_keep_; }
    /// in, after each E layer, after p, after each T layer.
    std::vector<int> dims() const;

    const std::vector<Layer>& E_layers() const { return E_; }
    const std::vector<Layer>& T_layers() const { return T_; }
    std::vector<Layer>& E_layers() { return E_; }
    std::vector<Layer>& T_layers() { return T_; }

    Vec forward_E(const Vec& x) const;
    Vec forward_T(const Vec& u) const;
    Vec forward(const Vec& x) const;
    /// Column-wise batch versions.
    Mat forward_E_batch(const Mat& X) const;
    Mat forward_T_batch(const Mat& U) const;
    Mat forward_batch(const Mat& X) const;

    Vec inverse_T(const Vec& y) const;
    /// Inverts E on its range; NotInRange if E of the reconstruction misses z by more than 1e-6.
    Vec left_inverse_E(const Vec& z) const;

    Mat jacobian(const Vec& x, Stage stage) const;
    Mat jacobian_T(const Vec& u) const;

private:
    void validate() const;
    int in_dim_ = 0;
    std::vector<Layer> E_;
    int proj_keep_ = 0;
    std::vector<Layer> T_;
};

/// Per-layer record of a batched forward pass, enough for reverse-mode sweeps.
struct LayerCache {
    Mat X;        // layer input
    Mat H1, H2;   // coupling hidden activations
    Mat expS;     // coupling exp(scale)
};

Mat forward_layers(const std::vector<Layer>& layers, const Mat& X, std::vector<LayerCache>* caches);
/// Pulls the cotangent G back to the stack input. When grads is given it receives one gradient
/// block per parameter block of each layer (layer_params order), summed over the batch.
Mat backward_layers(const std::vector<Layer>& layers, const std::vector<LayerCache>& caches, const Mat& G,
                    std::vector<std::vector<Mat>>* grads);

enum class Optimizer { GradientDescent, Momentum };

struct TrainConfig {
    int epochs = 2000;           // optimizer steps
    int batch_size = 0;          // 0 = full batch
    double step_size = 0.01;
    Optimizer optimizer = Optimizer::Momentum;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    /// Per output coordinate of E; empty means all ones. Loss is the weighted squared error
    /// averaged over samples.
    std::vector<double> weights;
    int checkpoints = 10;
};

struct TrainResult {
    std::vector<double> loss;      // E loss + T loss before each step, plus the final value
    std::vector<double> best;      // running minimum of loss
    std::vector<int> checkpoint_steps;
};

using CheckpointFn = std::function<void(int step, const EPNetwork& net)>;

/// Fits E to (X, H) and T to (U, H2), columns are samples. Checkpoints fire after every
/// epochs/checkpoints steps (the last at the end of training). Diverged on non-finite loss.
TrainResult train(EPNetwork& net, const Mat& X, const Mat& H, const Mat& U, const Mat& H2, const TrainConfig& cfg,
                  const CheckpointFn& on_checkpoint = {});

/// Local chart of M1 used to polish inversion candidates.
struct Chart {
    std::function<Vec(const Vec&)> retract;  // onto M1
    std::function<Mat(const Vec&)> tangent;  // orthonormal columns
};

struct InversionResult {
    std::vector<Vec> points;
    std::vector<double> objective;
    std::vector<std::pair<int, int>> duplicates; // index pairs closer than 1e-4
};

/// For j = 1..d, nearest candidate to (T^{-1}(y), j, 0^e) in E-space, then 20 damped
/// Gauss-Newton steps in the tangent chart. Pass cand_E to reuse E(candidates).
InversionResult multivalued_invert(const EPNetwork& net, const Vec& y, int d, int e, const std::vector<Vec>& candidates,
                                   const Chart& chart, const Mat* cand_E = nullptr);

// Checkpoint JSON with dims, proj_keep and row-major parameters per layer.
std::string network_to_json(const EPNetwork& net);
EPNetwork network_from_json(const std::string& text);
void write_network(const EPNetwork& net, const std::filesystem::path& path);
EPNetwork read_network(const std::filesystem::path& path);
void write_loss_csv(const TrainResult& result, const std::filesystem::path& path);

} // namespace covlift
