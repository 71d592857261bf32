#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace edcnn {

using Vector = std::vector<double>;
using Matrix = Eigen::MatrixXd;

/// Finitely supported real sequence (w_0, ..., w_S). Indices outside {0, ..., S} read as zero.
///
/// The stored length fixes the support bound S. Trailing zeros are kept: a filter built as
/// (1, 0, 0) is a delta with bound 2, and it widens a zero-padded convolution by 2. Use
/// trimmed() to drop them explicitly.
class Filter {
public:
    /// The zero filter with bound 0.
    Filter();
    explicit Filter(std::vector<double> coeffs);
    Filter(std::initializer_list<double> coeffs);

    /// Convolution identity (1, 0, ..., 0) with the given support bound.
    static Filter delta(std::size_t bound = 0);
    /// Single 1 at index `shift`.
    static Filter shifted_delta(std::size_t shift, std::size_t bound);

    std::size_t bound() const noexcept { return coeffs_.size() - 1; }
    /// Index of the last nonzero coefficient; 0 for the zero filter.
    std::size_t effective_bound() const noexcept;
    bool is_zero() const noexcept;

    double operator[](std::ptrdiff_t k) const noexcept {
        return (k < 0 || static_cast<std::size_t>(k) >= coeffs_.size()) ? 0.0 : coeffs_[k];
    }
    std::span<const double> coeffs() const noexcept { return coeffs_; }

    /// Zero-extends to a larger bound. Shrinking is allowed only over zero coefficients.
    Filter with_bound(std::size_t bound) const;
    Filter trimmed() const;
    Filter scaled(double c) const;

    double l1_norm() const noexcept;
    double max_norm() const noexcept;

    friend bool operator==(const Filter&, const Filter&) = default;

private:
    std::vector<double> coeffs_;
};

/// Full convolution of two filters; the bound of the result is the sum of the bounds.
Filter convolve(const Filter& a, const Filter& b);

/// Zero-padded convolution: out_j = sum_{k=1..d'} w_{j-k} v_k for j = 1..d'+S.
Vector conv_padded(const Filter& w, std::span<const double> v);

/// Contracting convolution with the offset convention
///   out_j = sum_{k=j-s..j} w_{j-k} v_{k+s},  j = 1..d'-s,
/// i.e. out_j = sum_{t=0..s} w_t v_{j+s-t}. The filter's bound is taken as s; requires d' > s.
Vector conv_classic(const Filter& w, std::span<const double> v);

/// T with entries T(i,k) = w_{i-k}, of shape (cols + S) x cols. T * v == conv_padded(w, v).
Matrix toeplitz_matrix(const Filter& w, std::size_t cols);
/// Same entry rule with an explicit row count.
Matrix toeplitz_matrix(const Filter& w, std::size_t rows, std::size_t cols);

Vector relu(std::span<const double> v);

/// Blockwise maximum with block size u; output has floor(d'/u) entries and any remainder is
/// discarded. Requires u >= 1 and d' >= u.
Vector max_pool(std::span<const double> v, std::size_t u);

/// Width constants of the standard pooling schedule for input dimension d and filter length s.
struct PoolParams {
    std::size_t d = 0;
    std::size_t s = 0;
    std::size_t l1_max = 0;  ///< ceil((2d+10) d / (s-1))
    std::size_t d1_max = 0;  ///< d + l1_max s
    std::size_t d_max = 0;   ///< 2d+10 + ceil((2d+10)^2 / (s-1)) s

    /// Throws InvalidArgument for d == 0 or s < 2 and DimensionError on overflow.
    static PoolParams make(std::size_t d, std::size_t s);
};

/// Pooling size the schedule applies to a post-activation vector of the given width at
/// (1-based) layer `layer`; 1 means no pooling.
std::size_t scheduled_pool_size(std::size_t width, std::size_t layer, const PoolParams& p);

/// The schedule itself: pools by d at width d1_max when layer <= l1_max, by 2d+10 at width
/// d_max, and returns v unchanged otherwise.
Vector pmax(std::span<const double> v, std::size_t layer, const PoolParams& p);

}  // namespace edcnn
