#include "edcnn/conv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "edcnn/errors.hpp"

namespace edcnn {

namespace {

void require_finite(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw InvalidArgument(std::string(what) + ": non-finite coefficient");
    }
}

std::size_t checked_mul(std::size_t a, std::size_t b) {
    if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a) {
        throw DimensionError("pool parameter overflow");
    }
    return a * b;
}

std::size_t checked_add(std::size_t a, std::size_t b) {
    if (b > std::numeric_limits<std::size_t>::max() - a) throw DimensionError("pool parameter overflow");
    return a + b;
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return a / b + (a % b != 0 ? 1 : 0); }

}  // namespace

Filter::Filter() : coeffs_{0.0} {}

Filter::Filter(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) throw InvalidArgument("filter needs at least one coefficient");
    require_finite(coeffs_, "filter");
}

Filter::Filter(std::initializer_list<double> coeffs) : Filter(std::vector<double>(coeffs)) {}

Filter Filter::delta(std::size_t bound) { return shifted_delta(0, bound); }

Filter Filter::shifted_delta(std::size_t shift, std::size_t bound) {
    if (shift > bound) throw InvalidArgument("delta shift exceeds bound");
    std::vector<double> c(bound + 1, 0.0);
    c[shift] = 1.0;
    return Filter(std::move(c));
}

std::size_t Filter::effective_bound() const noexcept {
    for (std::size_t k = coeffs_.size(); k-- > 0;) {
        if (coeffs_[k] != 0.0) return k;
    }
    return 0;
}

bool Filter::is_zero() const noexcept {
    return std::all_of(coeffs_.begin(), coeffs_.end(), [](double c) { return c == 0.0; });
}

Filter Filter::with_bound(std::size_t bound) const {
    if (bound < this->bound() && effective_bound() > bound) {
        throw InvalidArgument("cannot shrink filter bound over nonzero coefficients");
    }
    std::vector<double> c(coeffs_);
    c.resize(bound + 1, 0.0);
    return Filter(std::move(c));
}

Filter Filter::trimmed() const { return with_bound(effective_bound()); }

Filter Filter::scaled(double c) const {
    std::vector<double> out(coeffs_);
    for (double& x : out) x *= c;
    return Filter(std::move(out));
}

double Filter::l1_norm() const noexcept {
    double acc = 0.0;
    for (double c : coeffs_) acc += std::abs(c);
    return acc;
}

double Filter::max_norm() const noexcept {
    double acc = 0.0;
    for (double c : coeffs_) acc = std::max(acc, std::abs(c));
    return acc;
}

Filter convolve(const Filter& a, const Filter& b) {
    std::vector<double> out(a.bound() + b.bound() + 1, 0.0);
    auto ac = a.coeffs();
    auto bc = b.coeffs();
    for (std::size_t i = 0; i < ac.size(); ++i) {
        if (ac[i] == 0.0) continue;
        for (std::size_t j = 0; j < bc.size(); ++j) out[i + j] += ac[i] * bc[j];
    }
    return Filter(std::move(out));
}

Vector conv_padded(const Filter& w, std::span<const double> v) {
    if (v.empty()) throw InvalidArgument("conv_padded: empty input vector");
    const std::size_t S = w.bound();
    auto wc = w.coeffs();
    Vector out(v.size() + S, 0.0);
    // 0-based: out[j] = sum_k w[j-k] v[k]
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double vk = v[k];
        if (vk == 0.0) continue;
        for (std::size_t t = 0; t <= S; ++t) out[k + t] += wc[t] * vk;
    }
    return out;
}

Vector conv_classic(const Filter& w, std::span<const double> v) {
    const std::size_t s = w.bound();
    if (v.size() <= s) {
        throw DimensionError("conv_classic: input dimension " + std::to_string(v.size()) +
                             " must exceed filter length " + std::to_string(s));
    }
    const std::size_t n = v.size() - s;
    Vector out(n, 0.0);
    // 1-based j in 1..n: sum_{t=0..s} w_t v_{j+s-t}; 0-based v index is j+s-t-1.
    for (std::size_t j = 1; j <= n; ++j) {
        double acc = 0.0;
        for (std::size_t t = 0; t <= s; ++t) acc += w[static_cast<std::ptrdiff_t>(t)] * v[j + s - t - 1];
        out[j - 1] = acc;
    }
    return out;
}

Matrix toeplitz_matrix(const Filter& w, std::size_t cols) {
    if (cols == 0) throw InvalidArgument("toeplitz_matrix: zero columns");
    return toeplitz_matrix(w, cols + w.bound(), cols);
}

Matrix toeplitz_matrix(const Filter& w, std::size_t rows, std::size_t cols) {
    if (cols == 0 || rows == 0) throw InvalidArgument("toeplitz_matrix: empty shape");
    Matrix t = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t k = 0; k < cols && k <= i; ++k) {
            t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                w[static_cast<std::ptrdiff_t>(i - k)];
        }
    }
    return t;
}

Vector relu(std::span<const double> v) {
    Vector out(v.size());
    std::transform(v.begin(), v.end(), out.begin(), [](double t) { return t > 0.0 ? t : 0.0; });
    return out;
}

Vector max_pool(std::span<const double> v, std::size_t u) {
    if (u == 0) throw InvalidArgument("max_pool: pooling size must be positive");
    if (v.size() < u) {
        throw DimensionError("max_pool: dimension " + std::to_string(v.size()) + " below pooling size " +
                             std::to_string(u));
    }
    const std::size_t n = v.size() / u;
    Vector out(n);
    for (std::size_t k = 0; k < n; ++k) {
        out[k] = *std::max_element(v.begin() + static_cast<std::ptrdiff_t>(k * u),
                                   v.begin() + static_cast<std::ptrdiff_t>((k + 1) * u));
    }
    return out;
}

PoolParams PoolParams::make(std::size_t d, std::size_t s) {
    if (d == 0) throw InvalidArgument("PoolParams: d must be positive");
    if (s < 2) throw InvalidArgument("PoolParams: s must be at least 2");
    const std::size_t wide = checked_add(checked_mul(2, d), 10);
    PoolParams p;
    p.d = d;
    p.s = s;
    p.l1_max = ceil_div(checked_mul(wide, d), s - 1);
    p.d1_max = checked_add(d, checked_mul(p.l1_max, s));
    p.d_max = checked_add(wide, checked_mul(ceil_div(checked_mul(wide, wide), s - 1), s));
    return p;
}

std::size_t scheduled_pool_size(std::size_t width, std::size_t layer, const PoolParams& p) {
    if (width == p.d1_max && layer <= p.l1_max) return p.d;
    if (width == p.d_max) return 2 * p.d + 10;
    return 1;
}

Vector pmax(std::span<const double> v, std::size_t layer, const PoolParams& p) {
    const std::size_t u = scheduled_pool_size(v.size(), layer, p);
    if (u == 1) return Vector(v.begin(), v.end());
    return max_pool(v, u);
}

}  // namespace edcnn
