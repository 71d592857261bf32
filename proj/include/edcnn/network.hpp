#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "edcnn/conv.hpp"

namespace edcnn {

/// One zero-padded convolution layer followed by ReLU and max-pooling with size `pool`
/// (1 = no pooling). The bias covers the pre-pooling width.
struct ConvLayer {
    Filter filter;
    Vector bias;
    std::size_t pool = 1;

    friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

/// Expansive deep convolutional network with per-layer max-pooling:
///   x -> a . P_L(relu(w^L * ( ... P_1(relu(w^1 * x + b^1)) ... ) + b^L))
/// Every filter is stored with bound exactly s, so each layer widens its input by s before
/// pooling. Immutable once built; the constructor validates the whole width chain.
class PooledEDCNN {
public:
    /// Filters with bound < s are zero-extended. Throws StructuralError on any width mismatch.
    PooledEDCNN(std::size_t d, std::size_t s, std::vector<ConvLayer> layers, Vector output_weights);

    /// Network whose pooling sizes follow the standard schedule (see standard_pool_sizes).
    /// Biases must already match the scheduled widths.
    static PooledEDCNN scheduled(std::size_t d, std::size_t s, std::vector<Filter> filters,
                                 std::vector<Vector> biases, Vector output_weights);

    std::size_t input_dim() const noexcept { return d_; }
    std::size_t filter_length() const noexcept { return s_; }
    std::size_t depth() const noexcept { return layers_.size(); }
    const std::vector<ConvLayer>& layers() const noexcept { return layers_; }
    const Vector& output_weights() const noexcept { return output_weights_; }

    /// Input width of layer i (0-based) and width after its pooling; size depth()+1.
    std::vector<std::size_t> widths() const;

    /// True when every layer's pooling size is the one pmax selects for its width and index.
    bool follows_standard_schedule() const;

    /// Post-activation, post-pooling output of the last layer.
    Vector features(std::span<const double> x) const;
    /// Throws DimensionError when x has the wrong dimension. Inputs outside [0,1]^d are
    /// evaluated as given; use in_unit_cube to flag them.
    double evaluate(std::span<const double> x) const;

    /// Column-per-input batch versions of features() and evaluate(); X has d rows.
    Matrix features_batch(const Matrix& X) const;
    Eigen::VectorXd evaluate_batch(const Matrix& X) const;

private:
    std::size_t d_;
    std::size_t s_;
    std::vector<ConvLayer> layers_;
    Vector output_weights_;
};

bool in_unit_cube(std::span<const double> x);

/// One layer applied to a batch: relu(w * V + b) per column, then max-pooling by `pool`.
/// When `min_preactivation` is non-null it is lowered to the smallest pre-activation seen.
Matrix apply_layer_batch(const ConvLayer& layer, const Matrix& V, double* min_preactivation = nullptr);

/// Pooling sizes the standard schedule assigns to an L-layer network for (d, s).
std::vector<std::size_t> standard_pool_sizes(std::size_t d, std::size_t s, std::size_t depth);
/// Pre-pooling widths (bias dimensions) of the scheduled L-layer network.
std::vector<std::size_t> standard_bias_widths(std::size_t d, std::size_t s, std::size_t depth);

/// Classical contracting network: each layer maps width n to n - s with conv_classic.
class ClassicDCNN {
public:
    struct Layer {
        Filter filter;
        Vector bias;
    };

    /// Throws StructuralError if any width reaches zero or a bias has the wrong size.
    ClassicDCNN(std::size_t d, std::size_t s, std::vector<Layer> layers, Vector output_weights);

    std::size_t input_dim() const noexcept { return d_; }
    double evaluate(std::span<const double> x) const;

private:
    std::size_t d_;
    std::size_t s_;
    std::vector<Layer> layers_;
    Vector output_weights_;
};

struct AffineLayer {
    Matrix weights;  ///< rows = output width, cols = input width
    Vector bias;
};

/// Deep fully connected ReLU network x -> a . relu(W_K( ... relu(W_1 x + theta_1) ... ) + theta_K).
class DFCN {
public:
    DFCN(std::size_t d, std::vector<AffineLayer> layers, Vector output_weights);

    std::size_t input_dim() const noexcept { return d_; }
    const std::vector<AffineLayer>& layers() const noexcept { return layers_; }
    const Vector& output_weights() const noexcept { return output_weights_; }

    Vector features(std::span<const double> x) const;
    double evaluate(std::span<const double> x) const;

private:
    std::size_t d_;
    std::vector<AffineLayer> layers_;
    Vector output_weights_;
};

/// Smoothness class parameters: r = k + mu with integer k >= 0 and 0 < mu <= 1.
struct SmoothnessSpec {
    double r = 1.0;
    double c0 = 1.0;
    double M = 1.0;

    /// Throws InvalidArgument unless r, c0 and M are positive and finite.
    SmoothnessSpec(double r, double c0, double M);
    int derivative_order() const;
    double holder_exponent() const;
};

/// Clamp to [-M, M].
double truncate(double y, double M);

/// Number of stored reals: per layer (s+1) filter coefficients plus the bias width, plus
/// the output weights.
std::size_t param_count(const PooledEDCNN& net);

}  // namespace edcnn
