#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edcnn/conv.hpp"
#include "edcnn/errors.hpp"
#include "edcnn/factorization.hpp"
#include "edcnn/network.hpp"

namespace edcnn {

/// x -> relu(W x + theta) with W of shape (out x in).
struct AffineBlock {
    Matrix weights;
    Vector bias;

    std::size_t input_dim() const noexcept { return static_cast<std::size_t>(weights.cols()); }
    std::size_t output_dim() const noexcept { return static_cast<std::size_t>(weights.rows()); }
};

/// Scalar inner biases b^1..b^L that keep every pre-activation of a restricted convolution
/// chain non-negative, so each ReLU acts as the identity. `bounds` holds B^0..B^L for the
/// doubling schedule and the per-layer lower bounds of the linear part for the tight one.
struct BiasSchedule {
    Vector bounds;
    Vector inner_biases;

    std::size_t depth() const noexcept { return inner_biases.size(); }
};

enum class BiasMode {
    /// Smallest shift per layer that keeps every entry >= 1 over the input box.
    Tight,
    /// B^l = |w^l|_1 B^(l-1), b^l = 2^(l-1) B^l. Exact in exact arithmetic but the biases grow
    /// like 2^L, so only short chains survive double precision.
    Doubling,
};

/// Number of factors a block with `in` inputs and `out` outputs is compiled to:
/// ceil(in * out / (s - 1)).
std::size_t compiled_depth(std::size_t in, std::size_t out, std::size_t s);

/// Lays the rows of W out as one filter u (bound in*out - 1) such that row j*in of the
/// Toeplitz matrix T^u (1-based) equals row j of W. Throws InvalidArgument for a zero matrix.
Filter stack_rows(const Matrix& weights);

/// Doubling schedule with B^0 = `input_bound` (1 for the unit cube).
/// Throws InvalidArgument on an empty chain or a zero factor.
BiasSchedule bias_bounds(std::span<const Filter> factors, double input_bound = 1.0);

/// Tight schedule for inputs in the box [0, upper_i]. The chain input width is upper.size().
BiasSchedule tight_bias_schedule(std::span<const Filter> factors, std::span<const double> input_upper);

/// Both sides of the ReLU-chain / affine identity at every depth.
struct ChainEvaluation {
    std::vector<Vector> relu_chain;   ///< relu(C_l(...)) for l = 1..L
    std::vector<Vector> affine_form;  ///< T^l...T^1 x + b^l 1 + sum_k T^l...T^(k+1) b^k 1
    double max_disagreement = 0.0;
    double min_preactivation = 0.0;
};

/// Evaluates the restricted chain x -> relu(w^l * h + b^l 1) and, separately, the product of
/// Toeplitz matrices plus the propagated bias terms.
ChainEvaluation evaluate_chain(std::span<const Filter> factors, const BiasSchedule& schedule,
                               std::span<const double> x);

/// Final ReLU-chain value. Throws NumericalFailure when the two sides disagree by more than
/// `tolerance` at any depth, which means the schedule is too small for this input.
Vector chain_affine_identity(std::span<const Filter> factors, const BiasSchedule& schedule,
                             std::span<const double> x, double tolerance = 1e-8);

struct CompileOptions {
    std::size_t probes = 1000;
    std::uint64_t seed = 0x5eed;
    double tolerance = 1e-6;
    BiasMode bias_mode = BiasMode::Tight;
};

struct CompileReport {
    std::size_t depth = 0;
    std::vector<std::size_t> widths;  ///< input width of the first layer, then each layer's output
    std::size_t pooling_size = 0;
    std::size_t probe_count = 0;
    double max_abs_error = 0.0;
    double max_suffix_abs = 0.0;  ///< largest pooled entry past the block's outputs
    double min_preactivation = 0.0;
    std::string status;

    bool ok() const noexcept { return status == "ok"; }
};

class CompileError : public NumericalFailure {
public:
    CompileError(const std::string& what, CompileReport report)
        : NumericalFailure(what), report_(std::move(report)) {}
    const CompileReport& report() const noexcept { return report_; }

private:
    CompileReport report_;
};

struct CompiledBlock {
    std::vector<ConvLayer> layers;
    std::size_t input_width = 0;
    std::size_t output_width = 0;  ///< pooled width; entries past block.output_dim() are zero
    Vector output_upper;           ///< upper bounds of the pooled outputs over the input box
    CompileReport report;
};

/// Convolutional layers computing relu(W x + theta) followed by max-pooling with size
/// W.cols(). The layers accept `input_upper.size()` inputs; coordinates past W.cols() must be
/// zero (their upper bound 0). Entry j of the pooled output is relu(W x + theta)_j for
/// j < W.rows() and zero afterwards.
///
/// Certified on `options.probes` uniform points of the input box plus its vertices when
/// W.cols() <= 10. Throws CompileError if the probe error exceeds options.tolerance.
CompiledBlock compile_block(const AffineBlock& block, std::size_t s, std::span<const double> input_upper,
                            const CompileOptions& options = {});
/// Unit-cube input of width W.cols().
CompiledBlock compile_block(const AffineBlock& block, std::size_t s, const CompileOptions& options = {});

struct CompiledNetwork {
    PooledEDCNN network;
    CompileReport report;
    std::vector<CompileReport> blocks;
};

/// Chains compile_block over the DFCN's layers and routes the output weights to the first
/// entries of the final pooled vector. End-to-end certified on [0,1]^d probes.
CompiledNetwork compile_dfcn(const DFCN& net, std::size_t s, const CompileOptions& options = {});

}  // namespace edcnn
