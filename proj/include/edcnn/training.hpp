#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "edcnn/conv.hpp"
#include "edcnn/network.hpp"

namespace edcnn {

/// m samples in [0,1]^d stored column-wise, with targets bounded by M.
class Dataset {
public:
    /// Throws InvalidArgument when sizes disagree, an input leaves the unit cube, or |y_i| > M.
    Dataset(Matrix inputs, Vector targets, double M);

    std::size_t size() const noexcept { return targets_.size(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(inputs_.rows()); }
    double bound() const noexcept { return M_; }
    const Matrix& inputs() const noexcept { return inputs_; }
    const Vector& targets() const noexcept { return targets_; }
    Vector input(std::size_t i) const;

private:
    Matrix inputs_;
    Vector targets_;
    double M_;
};

/// Parameters in a fixed order: per layer the s+1 filter coefficients then the bias, then the
/// output weights. The length equals param_count(net).
Vector flatten_parameters(const PooledEDCNN& net);
/// Same architecture as `net` with the parameters replaced.
PooledEDCNN with_parameters(const PooledEDCNN& net, std::span<const double> params);

/// (1/m) sum (f(x_i) - y_i)^2; f is clamped to [-M, M] first when `clamp` is set.
/// Throws InvalidArgument for an empty dataset.
double empirical_risk(const PooledEDCNN& net, const Dataset& data, bool clamp = false);

/// Gradient of the unclamped empirical risk in flatten_parameters order. Max-pooling routes the
/// gradient to the first maximal entry; ReLU'(0) = 0.
Vector grad_empirical_risk(const PooledEDCNN& net, const Dataset& data);

/// Smallest distance of any pre-activation from 0 and of any pooling winner from the runner-up.
/// The risk is smooth in a neighbourhood of the parameters whenever this is positive.
double kink_margin(const PooledEDCNN& net, const Dataset& data);

struct GradientCheck {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

/// Compares grad_empirical_risk with central differences of step `step` in every coordinate.
/// Relative error is |g - fd| / max(|g|, |fd|, floor).
GradientCheck check_gradient(const PooledEDCNN& net, const Dataset& data, double step = 1e-6,
                             double floor = 1e-6);

enum class Optimizer {
    GradientDescent,
    /// Levenberg-Marquardt damped Gauss-Newton directions under the same sufficient-decrease test.
    GaussNewton,
};

struct TrainConfig {
    double learning_rate = 0.1;  ///< initial step of the line search
    std::size_t epochs = 2000;
    std::size_t restarts = 4;
    std::uint64_t seed = 1;
    double M = 1.0;  ///< clamp bound used when reporting risks
    double growth = 2.0;       ///< step multiplier after an accepted step
    double min_step = 1e-12;   ///< the line search gives up below this
    double armijo = 1e-4;      ///< sufficient-decrease constant
    double tolerance = 1e-12;  ///< stop when the squared gradient norm drops below this
    std::size_t jobs = 1;      ///< restarts trained concurrently
    Optimizer optimizer = Optimizer::GradientDescent;
    double damping = 1e-3;  ///< initial Gauss-Newton damping relative to the largest curvature
    double init_scale = 1.0;  ///< multiplies the filter initialization range

    /// Throws InvalidArgument on non-positive rates, zero epochs or zero restarts.
    void validate() const;
};

struct RestartRecord {
    double risk = 0.0;  ///< final unclamped empirical risk, NaN when diverged
    std::size_t epochs = 0;
    bool diverged = false;
    std::size_t rejected_epochs = 0;  ///< epochs whose line search could not decrease the risk
    bool warm_start = false;
};

struct TrainedModel {
    PooledEDCNN network;
    double empirical_risk = 0.0;  ///< unclamped training risk of `network`
    std::size_t restart = 0;
    std::vector<RestartRecord> restarts;
};

/// Random network of the scheduled family: filters U[-c/sqrt(s+1), c/sqrt(s+1)] with c = `scale`,
/// zero biases, output weights U[-1/sqrt(width), 1/sqrt(width)].
PooledEDCNN initial_network(std::size_t d, std::size_t s, std::size_t depth, std::mt19937_64& rng,
                            double scale = 1.0);

/// Full-batch descent from `net` with an Armijo test on every step: gradient steps with step
/// halving, or damped Gauss-Newton steps with the damping raised until the test passes.
/// Updates `net` in place unless the run diverges.
RestartRecord descend(PooledEDCNN& net, const Dataset& data, const TrainConfig& config);

/// The same function as `net` realised at a larger depth: each appended layer has filter delta,
/// zero bias and the scheduled pooling size, and the output weights are padded with zeros.
/// Throws InvalidArgument if `net` does not follow the standard schedule, if depth < net.depth(),
/// or if an appended layer would pool (which would change the function).
PooledEDCNN embed_network(const PooledEDCNN& net, std::size_t depth);

/// Best of config.restarts descents from independent initial networks of depth L with the
/// standard pooling schedule. When `warm_start` is given, its embedding at depth L is descended
/// as one extra candidate (listed last). Deterministic in config.seed regardless of config.jobs.
/// Throws NumericalFailure when every restart diverges.
TrainedModel erm_train(const Dataset& data, std::size_t depth, std::size_t s, const TrainConfig& config,
                       const PooledEDCNN* warm_start = nullptr);

using TargetFn = std::function<double(std::span<const double>)>;
using Sampler = std::function<Vector(std::mt19937_64&)>;

/// Uniform points of [0,1]^d.
Sampler uniform_sampler(std::size_t d);

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Monte-Carlo estimate of E (clamp(f(x), M) - target(x))^2 over `sampler`.
MonteCarloEstimate excess_risk(const PooledEDCNN& net, const TargetFn& target, std::size_t n_mc, double M,
                               std::uint64_t seed, const Sampler& sampler = {});

}  // namespace edcnn
