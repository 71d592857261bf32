#include "edcnn/network.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <string>

#include "edcnn/errors.hpp"

namespace edcnn {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

void require_finite(std::span<const double> v, const std::string& what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw InvalidArgument(what + ": non-finite value");
    }
}

std::string layer_tag(std::size_t i) { return "layer " + std::to_string(i + 1); }

}  // namespace

PooledEDCNN::PooledEDCNN(std::size_t d, std::size_t s, std::vector<ConvLayer> layers, Vector output_weights)
    : d_(d), s_(s), layers_(std::move(layers)), output_weights_(std::move(output_weights)) {
    if (d_ == 0) throw StructuralError("input dimension must be positive");
    if (s_ < 1) throw StructuralError("filter length must be positive");
    std::size_t width = d_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        auto& layer = layers_[i];
        if (layer.filter.effective_bound() > s_) {
            throw StructuralError(layer_tag(i) + ": filter support exceeds s=" + std::to_string(s_));
        }
        layer.filter = layer.filter.with_bound(s_);
        width += s_;
        if (layer.bias.size() != width) {
            throw StructuralError(layer_tag(i) + ": bias has " + std::to_string(layer.bias.size()) +
                                  " entries, expected " + std::to_string(width));
        }
        require_finite(layer.bias, layer_tag(i) + " bias");
        if (layer.pool == 0 || layer.pool > width) {
            throw StructuralError(layer_tag(i) + ": pooling size " + std::to_string(layer.pool) +
                                  " invalid for width " + std::to_string(width));
        }
        width /= layer.pool;
    }
    if (output_weights_.size() != width) {
        throw StructuralError("output weights have " + std::to_string(output_weights_.size()) +
                              " entries, final width is " + std::to_string(width));
    }
    require_finite(output_weights_, "output weights");
}

PooledEDCNN PooledEDCNN::scheduled(std::size_t d, std::size_t s, std::vector<Filter> filters,
                                   std::vector<Vector> biases, Vector output_weights) {
    if (filters.size() != biases.size()) throw StructuralError("filter and bias counts differ");
    const auto pools = standard_pool_sizes(d, s, filters.size());
    std::vector<ConvLayer> layers;
    layers.reserve(filters.size());
    for (std::size_t i = 0; i < filters.size(); ++i) {
        layers.push_back({std::move(filters[i]), std::move(biases[i]), pools[i]});
    }
    return PooledEDCNN(d, s, std::move(layers), std::move(output_weights));
}

std::vector<std::size_t> PooledEDCNN::widths() const {
    std::vector<std::size_t> out{d_};
    for (const auto& layer : layers_) out.push_back((out.back() + s_) / layer.pool);
    return out;
}

bool PooledEDCNN::follows_standard_schedule() const {
    if (s_ < 2) return false;
    const auto expected = standard_pool_sizes(d_, s_, layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (layers_[i].pool != expected[i]) return false;
    }
    return true;
}

Vector PooledEDCNN::features(std::span<const double> x) const {
    if (x.size() != d_) {
        throw DimensionError("input has dimension " + std::to_string(x.size()) + ", network expects " +
                             std::to_string(d_));
    }
    Vector v(x.begin(), x.end());
    for (const auto& layer : layers_) {
        v = conv_padded(layer.filter, v);
        for (std::size_t j = 0; j < v.size(); ++j) {
            const double t = v[j] + layer.bias[j];
            v[j] = t > 0.0 ? t : 0.0;
        }
        if (layer.pool > 1) v = max_pool(v, layer.pool);
    }
    return v;
}

double PooledEDCNN::evaluate(std::span<const double> x) const { return dot(output_weights_, features(x)); }

Matrix apply_layer_batch(const ConvLayer& layer, const Matrix& V, double* min_preactivation) {
    const auto n = V.rows();
    const auto coeffs = layer.filter.coeffs();
    const auto width = n + static_cast<Eigen::Index>(coeffs.size()) - 1;
    if (static_cast<std::size_t>(width) != layer.bias.size()) throw DimensionError("apply_layer_batch: width mismatch");
    // Column by column so each working vector stays in cache.
    const auto S = static_cast<Eigen::Index>(coeffs.size()) - 1;
    Matrix Z(width, V.cols());
    double lowest = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < V.cols(); ++c) {
        const double* v = V.col(c).data();
        double* z = Z.col(c).data();
        std::copy(layer.bias.begin(), layer.bias.end(), z);
        for (Eigen::Index t = 0; t <= S; ++t) {
            const double w = coeffs[static_cast<std::size_t>(t)];
            if (w == 0.0) continue;
            double* zt = z + t;
            for (Eigen::Index i = 0; i < n; ++i) zt[i] += w * v[i];
        }
        for (Eigen::Index i = 0; i < width; ++i) {
            lowest = std::min(lowest, z[i]);
            z[i] = z[i] > 0.0 ? z[i] : 0.0;
        }
    }
    if (min_preactivation != nullptr) *min_preactivation = std::min(*min_preactivation, lowest);
    if (layer.pool == 1) return Z;
    const auto u = static_cast<Eigen::Index>(layer.pool);
    const auto pooled_rows = width / u;
    Matrix P(pooled_rows, V.cols());
    for (Eigen::Index k = 0; k < pooled_rows; ++k) P.row(k) = Z.middleRows(k * u, u).colwise().maxCoeff();
    return P;
}

Matrix PooledEDCNN::features_batch(const Matrix& X) const {
    if (static_cast<std::size_t>(X.rows()) != d_) throw DimensionError("features_batch: input dimension mismatch");
    Matrix V = X;
    for (const auto& layer : layers_) V = apply_layer_batch(layer, V);
    return V;
}

Eigen::VectorXd PooledEDCNN::evaluate_batch(const Matrix& X) const {
    const Matrix F = features_batch(X);
    return F.transpose() *
           Eigen::Map<const Eigen::VectorXd>(output_weights_.data(), static_cast<Eigen::Index>(output_weights_.size()));
}

bool in_unit_cube(std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [](double t) { return t >= 0.0 && t <= 1.0; });
}

std::vector<std::size_t> standard_pool_sizes(std::size_t d, std::size_t s, std::size_t depth) {
    const auto p = PoolParams::make(d, s);
    std::vector<std::size_t> pools;
    pools.reserve(depth);
    std::size_t width = d;
    for (std::size_t layer = 1; layer <= depth; ++layer) {
        width += s;
        const std::size_t u = scheduled_pool_size(width, layer, p);
        pools.push_back(u);
        width /= u;
    }
    return pools;
}

std::vector<std::size_t> standard_bias_widths(std::size_t d, std::size_t s, std::size_t depth) {
    const auto pools = standard_pool_sizes(d, s, depth);
    std::vector<std::size_t> widths;
    widths.reserve(depth);
    std::size_t width = d;
    for (std::size_t u : pools) {
        width += s;
        widths.push_back(width);
        width /= u;
    }
    return widths;
}

ClassicDCNN::ClassicDCNN(std::size_t d, std::size_t s, std::vector<Layer> layers, Vector output_weights)
    : d_(d), s_(s), layers_(std::move(layers)), output_weights_(std::move(output_weights)) {
    std::size_t width = d_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        auto& layer = layers_[i];
        if (layer.filter.effective_bound() > s_) {
            throw StructuralError(layer_tag(i) + ": filter support exceeds s=" + std::to_string(s_));
        }
        layer.filter = layer.filter.with_bound(s_);
        if (width <= s_) {
            throw StructuralError(layer_tag(i) + ": width " + std::to_string(width) +
                                  " exhausted by contracting convolution with s=" + std::to_string(s_));
        }
        width -= s_;
        if (layer.bias.size() != width) {
            throw StructuralError(layer_tag(i) + ": bias has " + std::to_string(layer.bias.size()) +
                                  " entries, expected " + std::to_string(width));
        }
    }
    if (output_weights_.size() != width) throw StructuralError("output weights do not match final width");
}

double ClassicDCNN::evaluate(std::span<const double> x) const {
    if (x.size() != d_) throw DimensionError("input dimension mismatch");
    Vector v(x.begin(), x.end());
    for (const auto& layer : layers_) {
        v = conv_classic(layer.filter, v);
        for (std::size_t j = 0; j < v.size(); ++j) v[j] = std::max(v[j] + layer.bias[j], 0.0);
    }
    return dot(output_weights_, v);
}

DFCN::DFCN(std::size_t d, std::vector<AffineLayer> layers, Vector output_weights)
    : d_(d), layers_(std::move(layers)), output_weights_(std::move(output_weights)) {
    if (d_ == 0) throw StructuralError("input dimension must be positive");
    std::size_t width = d_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& layer = layers_[i];
        if (static_cast<std::size_t>(layer.weights.cols()) != width) {
            throw StructuralError(layer_tag(i) + ": weight matrix has " + std::to_string(layer.weights.cols()) +
                                  " columns, expected " + std::to_string(width));
        }
        if (layer.weights.rows() == 0) throw StructuralError(layer_tag(i) + ": empty weight matrix");
        width = static_cast<std::size_t>(layer.weights.rows());
        if (layer.bias.size() != width) throw StructuralError(layer_tag(i) + ": bias size mismatch");
        if (!layer.weights.allFinite()) throw InvalidArgument(layer_tag(i) + ": non-finite weight");
        require_finite(layer.bias, layer_tag(i) + " bias");
    }
    if (output_weights_.size() != width) throw StructuralError("output weights do not match final width");
    require_finite(output_weights_, "output weights");
}

Vector DFCN::features(std::span<const double> x) const {
    if (x.size() != d_) throw DimensionError("input dimension mismatch");
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    for (const auto& layer : layers_) {
        Eigen::VectorXd z = layer.weights * v;
        for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = std::max(z(j) + layer.bias[static_cast<std::size_t>(j)], 0.0);
        v = std::move(z);
    }
    return Vector(v.data(), v.data() + v.size());
}

double DFCN::evaluate(std::span<const double> x) const { return dot(output_weights_, features(x)); }

SmoothnessSpec::SmoothnessSpec(double r_, double c0_, double M_) : r(r_), c0(c0_), M(M_) {
    if (!(r > 0 && std::isfinite(r)) || !(c0 > 0 && std::isfinite(c0)) || !(M > 0 && std::isfinite(M))) {
        throw InvalidArgument("smoothness parameters must be positive and finite");
    }
}

int SmoothnessSpec::derivative_order() const { return static_cast<int>(std::ceil(r)) - 1; }

double SmoothnessSpec::holder_exponent() const { return r - derivative_order(); }

double truncate(double y, double M) {
    if (!(M > 0)) throw InvalidArgument("truncate: M must be positive");
    return std::clamp(y, -M, M);
}

std::size_t param_count(const PooledEDCNN& net) {
    std::size_t count = net.output_weights().size();
    for (const auto& layer : net.layers()) count += (net.filter_length() + 1) + layer.bias.size();
    return count;
}

}  // namespace edcnn
