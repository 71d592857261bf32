#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "edcnn/training.hpp"

namespace edcnn {

/// Target regression function in Lip^(r, c0) with |f| <= M on [0,1]^d.
struct SmoothTarget {
    std::string id;
    std::size_t d = 1;
    double r = 1.0;
    double c0 = 1.0;
    double M = 1.0;
    std::string note;  ///< how (r, c0) was obtained
    TargetFn f;

    double operator()(std::span<const double> x) const { return f(x); }
};

/// "abs":       |x_1 - 1/2|,                 r = 1,   c0 = 1
/// "sine":      prod_k sin(pi x_k),          r = 1,   c0 = max |grad f| on a grid (pi)
/// "relu_pow":  max(0, x_1 - 1/2)^(3/2),     r = 3/2, c0 = 3/2 (Hoelder-1/2 constant of f')
/// All have M = 1. Throws InvalidArgument for d = 0.
std::vector<SmoothTarget> builtin_targets(std::size_t d);
/// Throws InvalidArgument for an unknown id.
SmoothTarget find_target(std::string_view id, std::size_t d);

/// Largest |grad f| of prod sin(pi x_k) over a regular grid with about `points` nodes.
double sine_gradient_bound(std::size_t d, std::size_t points = 100000);

struct RateRow {
    double scale = 0.0;
    double metric = 0.0;  ///< NaN when the cell's training failed
    std::uint64_t seed = 0;
    double std_error = 0.0;

    friend bool operator==(const RateRow&, const RateRow&) = default;
};

struct RateTable {
    std::string kind;  ///< "approx-rate" or "learn-rate"
    std::string target;
    std::size_t s = 2;
    std::size_t d = 1;
    std::vector<RateRow> rows;

    /// Rows sorted by (scale, seed) with no duplicate pair; throws InvalidArgument otherwise.
    void validate() const;
    /// Distinct scales in increasing order.
    std::vector<double> scales() const;
};

/// CSV with header `scale,metric,seed,stderr`, one row per (scale, seed), shortest round-trip
/// decimals. Metadata lives in the run manifest.
std::string to_csv(const RateTable& table);
/// Throws ParseError on a malformed header or row.
RateTable rate_table_from_csv(std::string_view csv);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t points = 0;
    std::vector<std::string> warnings;
};

/// Least squares on (log scale, log median metric); rows with non-positive or NaN metrics are
/// dropped with a warning. Throws InvalidArgument with fewer than 3 usable scales.
SlopeFit slope_fit(const RateTable& table);

/// Median of the finite metrics at each scale (NaN when none).
std::vector<double> medians_by_scale(const RateTable& table);

/// ceil(m^(d/(4r+2d))), guarded so that exact powers do not round up.
std::size_t depth_rule(std::size_t m, double r, std::size_t d);

/// Gauss-Newton, 300 epochs, 8 restarts.
TrainConfig harness_train_defaults();

struct ExperimentConfig {
    std::string kind;  ///< "approx-rate" or "learn-rate"
    std::string target = "abs";
    std::size_t d = 1;
    std::size_t s = 2;
    std::vector<std::size_t> grid;  ///< depths L (approx-rate) or sample sizes m (learn-rate)
    std::vector<std::uint64_t> seeds{0, 1, 2};
    double noise = 0.3;          ///< half-width of the uniform noise
    std::size_t train_size = 257;  ///< approx-rate training sample size
    std::size_t eval_points = 10000;  ///< approx-rate evaluation grid (d = 1) size
    std::size_t n_mc = 100000;   ///< Monte-Carlo points for excess risk / sup estimates
    std::size_t pool_size = 0;   ///< learn-rate draw size per seed; 0 means max(grid)
    bool nested = true;          ///< approx-rate: warm start each L from the previous one
    TrainConfig train = harness_train_defaults();
    std::string output;  ///< path prefix for <prefix>.csv and <prefix>.manifest.json
    std::size_t jobs = 1;

    /// Throws InvalidArgument when grids are empty or not increasing, s < 2, or fields are
    /// out of range.
    void validate() const;
};

/// Reads the JSON config schema documented in README.md. Throws InvalidArgument / ParseError.
ExperimentConfig experiment_from_json(const nlohmann::json& j, std::string_view kind);
nlohmann::json to_json(const ExperimentConfig& config);
nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// For each L and seed: train on a dense noise-free sample of `target` and report the sup
/// error of the clamped network over an evaluation grid (d = 1) or Monte-Carlo points.
/// Training failures become NaN rows.
RateTable approx_rate_run(const SmoothTarget& target, const ExperimentConfig& config);

/// For each m and seed: m noisy samples (uniform noise, clamped to [-M, M]), depth_rule(m)
/// layers, excess risk of the clamped estimator by Monte Carlo. Each seed draws one pool of
/// inputs and noise; sample size m uses its first m points.
RateTable learn_rate_run(const SmoothTarget& target, const ExperimentConfig& config);

/// Version string baked in at configure time (git describe when available).
std::string version_string();

/// {"version", "seed", "config", ...} run manifest.
nlohmann::json run_manifest(const ExperimentConfig& config, const RateTable& table);

}  // namespace edcnn
