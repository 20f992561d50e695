#pragma once

#include "covlift/covering.hpp"
#include "covlift/epnet.hpp"
#include "covlift/metrics.hpp"
#include "covlift/surfaces.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace covlift {

struct ExperimentConfig {
    std::string id = "circle_cover"; // circle_cover | torus_tube | orbit_recovery | compose_projection
    int d = 2;
    std::uint64_t seed = 0;
    // cover
    int segments = 256;
    double rho = 0.4;
    int n_r = 64;
    int n_theta = 16;
    // network
    int coupling_pairs = 2;
    int hidden = 64;
    TrainConfig train;
    // samples
    int n_train = 512;
    int n_eval = 2000;
    int n_candidates = 20000;
    int n_test = 8;
    int n_pushforward = 256;
    int lift_samples = 10000;
    std::string out;

    ExperimentConfig();
    static ExperimentConfig defaults(const std::string& id);
    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig read(const std::filesystem::path& path);
};

struct Check {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double threshold = 0.0;
};

struct CheckpointRecord {
    int step = 0;
    double loss = 0.0;
    BistableReport bistable;
    double hausdorff = 0.0; // worst over test points
};

/// Circle z -> z^d training run: fit, per-checkpoint bistable quantities, inversion, W2.
struct CircleRun {
    ExperimentConfig config;
    EPNetwork initial;
    EPNetwork trained;
    TrainResult history;
    std::vector<CheckpointRecord> checkpoints;
    BistableReport analytic;          // exact z^d against itself
    double M = 0.0;                   // max gradient quantity over checkpoints
    double grad_growth = 0.0;         // fitted rise of grad_max across the last 5 checkpoints
    double inv_growth = 0.0;
    std::vector<Vec> test_points;
    std::vector<std::vector<Vec>> recovered;
    std::vector<double> hausdorff_per_y;
    std::vector<int> duplicates_per_y;
    double w2_trained = 0.0;
    double w2_untrained = 0.0;
    std::vector<Check> checks;

    bool passed() const;
    nlohmann::json to_json() const;
};

/// Rise of the least-squares line through the last `window` values, over that window.
double trend_growth(const std::vector<double>& values, int window);
/// True when every step of the last `window` values is non-increasing (up to `slack`).
bool non_increasing_tail(const std::vector<double>& values, int window, double slack = 0.0);

CircleRun run_circle_training(const ExperimentConfig& cfg);
/// Same pipeline with the orbit-recovery checks of the group-quotient setting.
CircleRun run_orbit_recovery(int d, const ExperimentConfig& cfg);

struct TorusRun {
    ExperimentConfig config;
    LiftReport lift;
    TrainResult history;
    double loss_ratio = 0.0; // initial / final training loss
    double unweighted_ratio = 0.0; // same, E residual without block weights
    std::vector<int> checkpoint_steps;
    std::vector<double> checkpoint_eps;
    EPNetwork trained;
    std::vector<Check> checks;

    bool passed() const;
    nlohmann::json to_json() const;
};

TorusRun run_torus_training(const ExperimentConfig& cfg);

struct ComposeRun {
    int modal_identity = 0;
    int modal_random = 0;
    bool counts_equal = false;
    double pad_drop_error = 0.0;
    double composite_vs_projection = 0.0; // identity composite against plain P3
    std::vector<Check> checks;

    bool passed() const;
    nlohmann::json to_json() const;
};

ComposeRun compose_projection_demo(const ExperimentConfig& cfg);

/// Runs the experiment named by cfg.id, writes report.json (config echoed) plus CSV curves into
/// cfg.out when set, and returns whether all checks passed.
bool run_experiment(const ExperimentConfig& cfg, nlohmann::json* report = nullptr);

/// Layers E = pad, then `pairs` x [coupling conditioned on the input slots, coupling conditioned on
/// the padded slots]; T = InvLinear.
EPNetwork make_lift_network(int in_dim, int lift_dim, int base_dim, int pairs, int hidden, std::mt19937_64& rng);

/// 1 on the base block and the stack coordinate, 0.1 on the bump-embedding block.
std::vector<double> lift_loss_weights(int base_dim, int lift_dim);

void write_checks_csv(const std::vector<Check>& checks, const std::filesystem::path& path);

} // namespace covlift
